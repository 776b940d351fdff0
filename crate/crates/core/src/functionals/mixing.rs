//! Coefficient-type bounds: Gordin-style estimates, λ(j), v² and α(n).

use crate::error::{domain, Result};
use crate::models::FiniteChain;
use serde::{Deserialize, Serialize};

/// Upper bounds per horizon k (entry `[k − 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GordinBounds {
    /// 2k Σ_{j<k} |E(X₀X_j)| ≥ E(S_k²)
    pub var: Vec<f64>,
    /// Σ_{ℓ≤k} ‖E₀(X_ℓ)‖_p ≥ ‖E₀(S_k)‖_p
    pub condterm: Vec<f64>,
    /// 2 Σ_{i≤k} Σ_{j≤k−i} ‖E₀(X_iX_{i+j}) − E(X_iX_{i+j})‖_{p/2} ≥ Bc[k]
    pub varsquare: Vec<f64>,
}

fn lp(chain: &FiniteChain, g: &[f64], p: f64) -> f64 {
    chain.lp(g, p)
}

/// Q^j f for j = 0..=m.
fn q_powers_f(chain: &FiniteChain, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(chain.f().to_vec());
    for j in 1..=m {
        let next = chain.apply_once(&out[j - 1]);
        out.push(next);
    }
    out
}

/// c[i][j] = ‖Q^i(f·Q^j f) − E(f·Q^j f)‖_{p/2} for 1 ≤ i ≤ imax, 0 ≤ j ≤ jmax.
fn centered_pair_table(chain: &FiniteChain, qf: &[Vec<f64>], p: f64, imax: usize, jmax: usize) -> Vec<Vec<f64>> {
    let f = chain.f();
    let mut table = vec![vec![0.0; jmax + 1]; imax + 1];
    for j in 0..=jmax {
        let h: Vec<f64> = f.iter().zip(&qf[j]).map(|(a, b)| a * b).collect();
        let mean = chain.expect(&h);
        let mut g = h;
        for row in table.iter_mut().take(imax + 1).skip(1) {
            g = chain.apply_once(&g);
            let c: Vec<f64> = g.iter().map(|v| v - mean).collect();
            row[j] = lp(chain, &c, p / 2.0);
        }
    }
    table
}

/// The three estimates of the mixing lemma, evaluated exactly on a chain.
pub fn gordin_bounds(chain: &FiniteChain, p: f64, n: usize) -> Result<GordinBounds> {
    if !(p >= 2.0) || n == 0 {
        return domain("gordin bounds need p ≥ 2 and n ≥ 1");
    }
    let qf = q_powers_f(chain, n);
    let f = chain.f();
    let cov: Vec<f64> = (0..n)
        .map(|j| chain.expect(&f.iter().zip(&qf[j]).map(|(a, b)| a * b).collect::<Vec<_>>()).abs())
        .collect();
    let e0: Vec<f64> = (1..=n).map(|l| lp(chain, &qf[l], p)).collect();
    let table = centered_pair_table(chain, &qf, p, n, n - 1);
    // Group the double sum by diagonal m = i + j.
    let mut diag = vec![0.0; n + 1];
    for (i, row) in table.iter().enumerate().skip(1) {
        for (j, v) in row.iter().enumerate() {
            if i + j <= n {
                diag[i + j] += v;
            }
        }
    }
    let mut out = GordinBounds {
        var: Vec::with_capacity(n),
        condterm: Vec::with_capacity(n),
        varsquare: Vec::with_capacity(n),
    };
    let (mut cs, mut ct, mut vs) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        cs += cov[k - 1];
        ct += e0[k - 1];
        vs += diag[k];
        out.var.push(2.0 * k as f64 * cs);
        out.condterm.push(ct);
        out.varsquare.push(2.0 * vs);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaProfile {
    /// λ(j) for j = 1..=jmax.
    pub lambda: Vec<f64>,
    /// The ‖X₀E₀(X_j)‖_{p/2} branch alone.
    pub first: Vec<f64>,
    /// The supremum branch truncated at i ≤ j + horizon.
    pub sup_branch: Vec<f64>,
    /// The i = j term of the supremum.
    pub diagonal: Vec<f64>,
    pub horizon: usize,
    /// Bound on every supremum term beyond the horizon: 2‖f‖_∞‖Q^{horizon+1}f‖_∞.
    pub tail_bound: f64,
}

/// λ(j) = max(‖X₀E₀(X_j)‖_{p/2}, sup_{i≥j}‖E₀(X_iX_j) − E(X_iX_j)‖_{p/2}).
///
/// Terms with i − j > horizon are dropped; Q is an L^∞ contraction, so each
/// of them is at most `tail_bound`.
pub fn lambda_profile(chain: &FiniteChain, p: f64, jmax: usize, horizon: usize) -> Result<LambdaProfile> {
    if !(p > 2.0) {
        return domain(format!("λ needs p > 2, got {p}"));
    }
    let qf = q_powers_f(chain, jmax.max(horizon + 1));
    let f = chain.f();
    // E₀(X_iX_j) = Q^j(f·Q^{i−j}f): the centered table with roles (j, m = i − j).
    let table = centered_pair_table(chain, &qf, p, jmax, horizon);
    let sup_f = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_q = qf[horizon + 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = LambdaProfile {
        lambda: vec![],
        first: vec![],
        sup_branch: vec![],
        diagonal: vec![],
        horizon,
        tail_bound: 2.0 * sup_f * sup_q,
    };
    for j in 1..=jmax {
        let x0e0: Vec<f64> = f.iter().zip(&qf[j]).map(|(a, b)| a * b).collect();
        let first = lp(chain, &x0e0, p / 2.0);
        let sup = table[j].iter().fold(0.0f64, |m, v| m.max(*v));
        out.first.push(first);
        out.sup_branch.push(sup);
        out.diagonal.push(table[j][0]);
        out.lambda.push(first.max(sup));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSummary {
    /// Var(X₀) + 2Σ_{1≤j≤n}|Cov(X₀, X_j)|.
    pub v2: f64,
    /// |E(X₀X_j)| for j = 0..=n.
    pub cov: Vec<f64>,
    /// α(k) for k = 1..=n, clamped to be nonincreasing and ≤ 1/4.
    pub alpha: Vec<f64>,
    /// False when α is the total-variation upper bound instead of the exact value.
    pub alpha_exact: bool,
    pub notes: Vec<String>,
}

/// Largest state space for the subset enumeration in α.
pub const ALPHA_EXACT_MAX_STATES: usize = 16;

/// v² and α(1..=n) for a finite chain.
///
/// For a Markov chain the past and the lag-n future interact only through
/// (ζ₀, ζₙ), so α(n) = max_A Σ_b (P(ζ₀ ∈ A, ζₙ = b) − π(A)π(b))⁺, enumerated
/// over subsets A. Beyond [`ALPHA_EXACT_MAX_STATES`] states the function
/// returns the β-coefficient Σ_x π(x)‖Qⁿ(x,·) − π‖_TV, which dominates α.
pub fn v2_alpha(chain: &FiniteChain, n: usize) -> Result<MixingSummary> {
    if n == 0 {
        return domain("v2_alpha needs n ≥ 1");
    }
    let s = chain.states();
    let f = chain.f();
    let pi = chain.pi();
    let qf = q_powers_f(chain, n);
    let cov: Vec<f64> = (0..=n)
        .map(|j| chain.expect(&f.iter().zip(&qf[j]).map(|(a, b)| a * b).collect::<Vec<_>>()).abs())
        .collect();
    let v2 = cov[0] + 2.0 * cov[1..].iter().sum::<f64>();
    let exact = s <= ALPHA_EXACT_MAX_STATES;
    let mut alpha = Vec::with_capacity(n);
    // Row x of Qⁿ, advanced one step at a time.
    let mut rows: Vec<Vec<f64>> = (0..s).map(|x| (0..s).map(|y| if x == y { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 1..=n {
        rows = rows
            .iter()
            .map(|r| (0..s).map(|b| (0..s).map(|a| r[a] * chain.q(a, b)).sum()).collect())
            .collect();
        let joint: Vec<Vec<f64>> = (0..s).map(|a| (0..s).map(|b| pi[a] * rows[a][b]).collect()).collect();
        let value = if exact {
            let mut best = 0.0f64;
            let mut acc = vec![0.0; s];
            let mut mass = 0.0;
            // Gray-code walk over subsets A.
            for code in 1u64..(1u64 << s) {
                let bit = code.trailing_zeros() as usize;
                let gray = code ^ (code >> 1);
                let sign = if gray >> bit & 1 == 1 { 1.0 } else { -1.0 };
                for b in 0..s {
                    acc[b] += sign * joint[bit][b];
                }
                mass += sign * pi[bit];
                let pos: f64 = (0..s).map(|b| (acc[b] - mass * pi[b]).max(0.0)).sum();
                best = best.max(pos);
            }
            best
        } else {
            (0..s)
                .map(|x| pi[x] * 0.5 * (0..s).map(|y| (rows[x][y] - pi[y]).abs()).sum::<f64>())
                .sum()
        };
        let prev = alpha.last().copied().unwrap_or(0.25f64);
        alpha.push(value.clamp(0.0, 0.25).min(prev));
    }
    let mut notes = Vec::new();
    if !exact {
        notes.push(format!("{s} states: α replaced by the β upper bound"));
    }
    Ok(MixingSummary {
        v2,
        cov,
        alpha,
        alpha_exact: exact,
        notes,
    })
}

/// Least-squares rate c in α(n) ≈ K e^{−cn} over the positive entries.
pub fn geometric_rate(alpha: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = alpha
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 1e-300)
        .map(|(i, a)| ((i + 1) as f64, a.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    crate::stats::ols(&x, &y).ok().map(|fit| -fit.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::profile::profile_exact;
    use rand::SeedableRng;

    #[test]
    fn iid_bounds() {
        let c = FiniteChain::coin();
        let g = gordin_bounds(&c, 4.0, 5).unwrap();
        for k in 1..=5 {
            assert!((g.var[k - 1] - 2.0 * k as f64).abs() < 1e-12);
            assert!(g.condterm[k - 1].abs() < 1e-15);
        }
        // Centered squares of ±1 vanish as well.
        assert!(g.varsquare.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn eigen_condterm_is_tight() {
        let c = FiniteChain::eigen();
        let g = gordin_bounds(&c, 4.0, 2).unwrap();
        let pr = profile_exact(&c, 4.0, 2).unwrap();
        let want = 1.19 * 6f64.powf(0.25);
        assert!((g.condterm[1] - want).abs() < 1e-12);
        assert!((pr.a(2) - want).abs() < 1e-12);
    }

    #[test]
    fn bounds_dominate_on_random_chains() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = FiniteChain::random(3, &mut rng);
            let g = gordin_bounds(&c, 4.0, 16).unwrap();
            let pr = profile_exact(&c, 4.0, 16).unwrap();
            for k in 1..=16 {
                let tol = 1e-10;
                assert!(pr.var(k) <= g.var[k - 1] + tol);
                assert!(pr.a(k) <= g.condterm[k - 1] + tol);
                assert!(pr.bc(k) <= g.varsquare[k - 1] + tol);
            }
        }
    }

    #[test]
    fn lambda_iid_zero_and_eigen_decay() {
        let l = lambda_profile(&FiniteChain::coin(), 4.0, 6, 12).unwrap();
        assert!(l.lambda.iter().all(|v| v.abs() < 1e-15));
        let l = lambda_profile(&FiniteChain::eigen(), 4.0, 20, 40).unwrap();
        let x: Vec<f64> = (1..=20).map(|j| j as f64).collect();
        let y: Vec<f64> = l.lambda.iter().map(|v| v.ln()).collect();
        let fit = crate::stats::ols(&x, &y).unwrap();
        let want = 0.7f64.ln();
        assert!(((fit.slope - want) / want).abs() < 0.05, "{}", fit.slope);
        for j in 0..20 {
            assert!(l.lambda[j] >= 0.0);
            assert!(l.sup_branch[j] >= l.diagonal[j]);
        }
        assert!(l.tail_bound < 1e-5);
    }

    #[test]
    fn coin_v2_and_alpha() {
        let m = v2_alpha(&FiniteChain::coin(), 8).unwrap();
        assert!((m.v2 - 1.0).abs() < 1e-15);
        assert!(m.alpha.iter().all(|a| a.abs() < 1e-15));
        assert!(m.alpha_exact);
    }

    #[test]
    fn eigen_v2_closed_form() {
        let m = v2_alpha(&FiniteChain::eigen(), 200).unwrap();
        assert!((m.v2 - 2.0 * (1.0 + 2.0 * 7.0 / 3.0)).abs() < 1e-10);
        // Two states: α(n) = π₀π₁·0.7ⁿ.
        for (i, a) in m.alpha.iter().take(10).enumerate() {
            let want = 2.0 / 9.0 * 0.7f64.powi(i as i32 + 1);
            assert!((a - want).abs() < 1e-12, "{a} vs {want}");
        }
        let c = geometric_rate(&m.alpha[..40]).unwrap();
        assert!((c - (1.0 / 0.7f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn alpha_monotone_and_bounded() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for s in [3, 5] {
            let m = v2_alpha(&FiniteChain::random(s, &mut rng), 12).unwrap();
            for w in m.alpha.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(m.alpha.iter().all(|a| (0.0..=0.25).contains(a)));
        }
    }

    /// Brute force over (A, B) pairs for a small chain.
    #[test]
    fn alpha_matches_pair_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let c = FiniteChain::random(3, &mut rng);
        let m = v2_alpha(&c, 2).unwrap();
        let q2 = |a: usize, b: usize| (0..3).map(|x| c.q(a, x) * c.q(x, b)).sum::<f64>();
        let mut best = 0.0f64;
        for a_set in 0..8u32 {
            for b_set in 0..8u32 {
                let mut joint = 0.0;
                let (mut pa, mut pb) = (0.0, 0.0);
                for a in 0..3 {
                    if a_set >> a & 1 == 1 {
                        pa += c.pi()[a];
                        for b in 0..3 {
                            if b_set >> b & 1 == 1 {
                                joint += c.pi()[a] * q2(a, b);
                            }
                        }
                    }
                }
                for b in 0..3 {
                    if b_set >> b & 1 == 1 {
                        pb += c.pi()[b];
                    }
                }
                best = best.max((joint - pa * pb).abs());
            }
        }
        assert!((m.alpha[1] - best.min(m.alpha[0])).abs() < 1e-12);
    }
}
