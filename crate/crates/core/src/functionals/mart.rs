//! Martingale approximation Sₖ = Mₖⁿ + Rₖⁿ with D₀ⁿ = (1/n)Σᵢ(E₁(Sᵢ) − E₀(Sᵢ)).

use crate::error::{domain, LabError, Result};
use crate::models::FiniteChain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartApprox {
    pub n: usize,
    pub p: f64,
    /// D₀ⁿ(a, b) for ζ₀ = a, ζ₁ = b, row-major.
    pub d: Vec<f64>,
    /// ‖D₀ⁿ‖_p
    pub d0n_norm_p: f64,
    /// ‖Rₖⁿ‖_p for k = 1..=n.
    pub r_norms: Vec<f64>,
    /// max_k ‖Rₖⁿ‖_p
    pub r_max_norm: f64,
    /// 2‖X₀‖_p + (3/n)Σᵢ‖E₀(Sᵢ)‖_p
    pub r_bound: f64,
    /// Σ_{k≤n} k^{−1/p}‖E₀(X_k)‖_p
    pub projest_bound: f64,
    /// ‖X₀‖_p
    pub x_norm: f64,
}

/// Binomial coefficients up to row m.
fn binomials(m: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; m + 1]; m + 1];
    for r in 0..=m {
        c[r][0] = 1.0;
        for a in 1..=r {
            c[r][a] = c[r - 1][a - 1] + if a < r { c[r - 1][a] } else { 0.0 };
        }
    }
    c
}

/// Exact decomposition for a finite chain.
///
/// With uᵢ = E(Sᵢ | ζ₀ = ·), U = (1/n)Σ_{i=1}^n uᵢ and V = (1/n)Σ_{i=0}^{n−1} uᵢ
/// the remainder is Rₖⁿ = U(ζ₀) − V(ζₖ) + (1/n)Σ_{j=1}^{k−1} uₙ(ζⱼ), an additive
/// functional of the chain. Its p-th moment is computed exactly for even
/// integer p by a moment recursion over (state, power).
pub fn mart_approx(chain: &FiniteChain, p: f64, n: usize) -> Result<MartApprox> {
    if n == 0 {
        return domain("mart_approx needs n ≥ 1");
    }
    let ip = p.round() as usize;
    if (p - ip as f64).abs() > 1e-12 || ip % 2 != 0 || ip == 0 {
        return Err(LabError::Method(format!(
            "exact remainder norms need an even integer p, got {p}"
        )));
    }
    let s = chain.states();
    let f = chain.f();
    let pi = chain.pi();
    let nn = n as f64;
    let mut us = vec![vec![0.0; s]];
    us.extend(chain.cond_sums(n));
    let big_u: Vec<f64> = (0..s).map(|x| (1..=n).map(|i| us[i][x]).sum::<f64>() / nn).collect();
    let big_v: Vec<f64> = (0..s).map(|x| (0..n).map(|i| us[i][x]).sum::<f64>() / nn).collect();
    let drift: Vec<f64> = (0..s).map(|x| us[n][x] / nn).collect();
    // D₀ⁿ(a, b) = f(b) + V(b) − U(a).
    let d: Vec<f64> = (0..s)
        .flat_map(|a| (0..s).map(move |b| (a, b)))
        .map(|(a, b)| f[b] + big_v[b] - big_u[a])
        .collect();
    let d0n_norm_p = (0..s)
        .flat_map(|a| (0..s).map(move |b| (a, b)))
        .map(|(a, b)| pi[a] * chain.q(a, b) * d[a * s + b].abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p);

    let binom = binomials(ip);
    // m[x][r] = E(1{ζ_t = x} W_t^r) with W_t = U(ζ₀) + Σ_{1≤j≤t} uₙ(ζⱼ)/n.
    let mut m: Vec<Vec<f64>> = (0..s)
        .map(|x| (0..=ip).map(|r| pi[x] * big_u[x].powi(r as i32)).collect())
        .collect();
    let step = |m: &Vec<Vec<f64>>, add: &[f64]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; ip + 1]; s];
        for y in 0..s {
            // Σ_x Q(x, y) m[x][·], then shift by add[y].
            let mut mix = vec![0.0; ip + 1];
            for x in 0..s {
                let qxy = chain.q(x, y);
                if qxy != 0.0 {
                    for r in 0..=ip {
                        mix[r] += qxy * m[x][r];
                    }
                }
            }
            let pw: Vec<f64> = (0..=ip).map(|e| add[y].powi(e as i32)).collect();
            for r in 0..=ip {
                out[y][r] = (0..=r).map(|a| binom[r][a] * mix[a] * pw[r - a]).sum();
            }
        }
        out
    };
    let neg_v: Vec<f64> = big_v.iter().map(|v| -v).collect();
    let mut r_norms = Vec::with_capacity(n);
    for _k in 1..=n {
        let fin = step(&m, &neg_v);
        let moment: f64 = fin.iter().map(|row| row[ip]).sum();
        r_norms.push(moment.max(0.0).powf(1.0 / p));
        m = step(&m, &drift);
    }
    let r_max_norm = r_norms.iter().fold(0.0f64, |a, b| a.max(*b));
    let x_norm = chain.lp(f, p);
    let a_sum: f64 = (1..=n).map(|i| chain.lp(&us[i], p)).sum();
    let r_bound = 2.0 * x_norm + 3.0 / nn * a_sum;
    let mut qf = f.to_vec();
    let mut projest_bound = 0.0;
    for k in 1..=n {
        qf = chain.apply_once(&qf);
        projest_bound += (k as f64).powf(-1.0 / p) * chain.lp(&qf, p);
    }
    Ok(MartApprox {
        n,
        p,
        d,
        d0n_norm_p,
        r_norms,
        r_max_norm,
        r_bound,
        projest_bound,
        x_norm,
    })
}
