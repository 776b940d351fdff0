//! Side checks on profiles and reports: monotonicity in δ, the Hölder
//! domination by the (log k)^γ form, scale covariance and the L^p maximal
//! convergence diagnostic.

use super::ratio::{check_ratio, RatioMode, RatioOptions};
use super::rhs::{delta_of, RhsScale, Theorem};
use super::{CheckRow, ExplicitCheck, Term};
use crate::error::{argument, domain, LabError, Result};
use crate::finite_space::compensated_sum;
use crate::functionals::{profile_delta_nu, profile_exact, ProjectiveProfile};
use crate::models::{map_paths, StationaryModel};
use crate::stats::{mean_se, ols, LinearFit};
use serde::{Deserialize, Serialize};

fn dyadic_upto(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..usize::BITS).map(|r| 1usize << r).take_while(|&m| m <= n).collect();
    if v.last() != Some(&n) {
        v.push(n);
    }
    v
}

/// Σ_{k≤n} k^{−1−2e/p} B_k^e
fn weighted(b: &[f64], p: f64, e: f64, n: usize) -> f64 {
    compensated_sum((1..=n).map(|k| (k as f64).powf(-1.0 - 2.0 * e / p) * b[k - 1].max(0.0).powf(e)))
}

/// Monotonicity in the exponent: for δ ≤ γ ≤ 1,
/// (Σk^{−1−2γ/p}B^γ)^{1/γ} ≤ 2^{(1+γ)(γ−δ)/(δγ)}(Σk^{−1−2δ/p}B^δ)^{1/δ},
/// at every dyadic n of the profile and each γ of `gammas` (default: δ, the
/// midpoint to 1, and 1). The C = 2 subadditivity of B behind it is reported
/// as a value (1 when it holds, 0 otherwise) rather than a row.
pub fn comment2_check(profile: &ProjectiveProfile, gammas: Option<&[f64]>) -> Result<ExplicitCheck> {
    let p = profile.p;
    if !(p > 2.0) {
        return domain(format!("needs p > 2, got {p}"));
    }
    let b = &profile.b;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Unavailable("profile has no B entries".into()));
    }
    let delta = delta_of(p);
    let default = [delta, (delta + 1.0) / 2.0, 1.0];
    let gammas = gammas.unwrap_or(&default);
    if gammas.iter().any(|g| !(*g >= delta && *g <= 1.0)) {
        return domain(format!("γ must lie in [δ, 1] = [{delta}, 1]"));
    }
    let mut rows = Vec::new();
    for n in dyadic_upto(profile.n) {
        let base = weighted(b, p, delta, n).powf(1.0 / delta);
        for &g in gammas {
            let lhs = weighted(b, p, g, n).powf(1.0 / g);
            let c = 2f64.powf((1.0 + g) * (g - delta) / (delta * g));
            rows.push(CheckRow::new(format!("n={n},gamma={g:.4}"), lhs, c * base));
        }
    }
    let mut out = ExplicitCheck::new("comment2", rows);
    let n = profile.n;
    let mut sub = true;
    'outer: for i in 1..n {
        for j in 1..=(n - i) {
            if b[i + j - 1] > 2.0 * (b[i - 1] + b[j - 1]) * (1.0 + 1e-9) + 1e-300 {
                out.notes.push(format!("B not 2-subadditive at (i, j) = ({i}, {j})"));
                sub = false;
                break 'outer;
            }
        }
    }
    out.values.push(Term {
        name: "subadditive".into(),
        value: if sub { 1.0 } else { 0.0 },
    });
    Ok(out)
}

/// Σ_{k≥2} k^{−1}(ln k)^{−s} for s > 1: direct sum to 10⁵ plus the integral
/// tail (ln K)^{1−s}/(s − 1), which dominates the remaining sum.
fn log_series(s: f64) -> f64 {
    const K: usize = 100_000;
    let head = compensated_sum((2..=K).map(|k| 1.0 / (k as f64 * (k as f64).ln().powf(s))));
    head + (K as f64).ln().powf(1.0 - s) / (s - 1.0)
}

/// Hölder domination of the δ-sum by the (log k)^γ sum, for δ < 1 and
/// γ > 1/δ − 1 (default 1/δ − 1/2).
///
/// Writing R = Σ_{2≤k≤n} k^{−1−2/p}(ln k)^γ B_k and s = γδ/(1 − δ) > 1,
/// Hölder gives (Σ_{2≤k≤n} k^{−1−2δ/p}B_k^δ)^{p/2δ} ≤ H^{(1−δ)p/2δ} R^{p/2}
/// with H = Σ_{k≥2} k^{−1}(ln k)^{−s}. Rows check this at every dyadic n.
/// The k = 1 summand is invisible to R since ln 1 = 0, so the full left side
/// is only compared through the estimate C = max_n LHS/R^{p/2}, recorded as a
/// value together with the k = 1 term.
pub fn delta1_check(profile: &ProjectiveProfile, gamma: Option<f64>) -> Result<ExplicitCheck> {
    let p = profile.p;
    if !(p > 2.0) {
        return domain(format!("needs p > 2, got {p}"));
    }
    let b = &profile.b;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Unavailable("profile has no B entries".into()));
    }
    let delta = delta_of(p);
    if delta >= 1.0 {
        let mut out = ExplicitCheck::new("delta1", vec![]);
        out.notes.push(format!("δ = 1 at p = {p}: nothing to compare"));
        return Ok(out);
    }
    let gamma = gamma.unwrap_or(1.0 / delta - 0.5);
    if !(gamma > 1.0 / delta - 1.0) {
        return domain(format!("γ must exceed 1/δ − 1 = {}", 1.0 / delta - 1.0));
    }
    let s = gamma * delta / (1.0 - delta);
    let h = log_series(s);
    let hc = h.powf((1.0 - delta) * p / (2.0 * delta));
    let e = p / (2.0 * delta);
    let mut rows = Vec::new();
    let mut c_est = 0.0f64;
    for n in dyadic_upto(profile.n).into_iter().filter(|&n| n >= 2) {
        let tail = compensated_sum((2..=n).map(|k| (k as f64).powf(-1.0 - 2.0 * delta / p) * b[k - 1].max(0.0).powf(delta)));
        let r = compensated_sum((2..=n).map(|k| {
            let kf = k as f64;
            kf.powf(-1.0 - 2.0 / p) * kf.ln().powf(gamma) * b[k - 1].max(0.0)
        }));
        rows.push(CheckRow::new(format!("n={n}"), tail.powf(e), hc * r.powf(p / 2.0)));
        let full = weighted(b, p, delta, n).powf(e);
        let rp = r.powf(p / 2.0);
        if rp > 0.0 {
            c_est = c_est.max(full / rp);
        } else if full > 0.0 {
            c_est = f64::INFINITY;
        }
    }
    let mut out = ExplicitCheck::new("delta1", rows);
    out.values = vec![
        Term {
            name: "gamma".into(),
            value: gamma,
        },
        Term {
            name: "holder_constant".into(),
            value: hc,
        },
        Term {
            name: "k1_term".into(),
            value: b[0].max(0.0).powf(delta),
        },
        Term {
            name: "c_estimate".into(),
            value: c_est,
        },
    ];
    out.notes
        .push("k = 1 summand is not controlled by the log-weighted sum; see c_estimate".into());
    Ok(out)
}

/// Multiply f by `s` and compare exact reports: the left side and every right
/// term scale by s^p (s for the norm-scale bound), ratios are unchanged.
/// Bounds with inhomogeneous terms are refused.
pub fn scale_covariance(theorem: Theorem, model: &StationaryModel, p: f64, grid: &[usize], s: f64) -> Result<ExplicitCheck> {
    if matches!(theorem, Theorem::CorArch | Theorem::ThLin | Theorem::Cor2Markov) {
        return Err(LabError::Method(format!("{} is not homogeneous in f", theorem.id())));
    }
    if !(s > 0.0) {
        return argument("scale must be positive");
    }
    let StationaryModel::Chain(c) = model else {
        return Err(LabError::Method("scale covariance is checked on finite chains".into()));
    };
    let scaled = StationaryModel::Chain(c.scaled(s));
    let opts = RatioOptions::default();
    let a = check_ratio(theorem, model, p, grid, RatioMode::Exact, &opts)?;
    let b = check_ratio(theorem, &scaled, p, grid, RatioMode::Exact, &opts)?;
    let f = match theorem.scale() {
        RhsScale::Moment => s.powf(p),
        RhsScale::Norm => s,
    };
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-300);
    let mut rows = Vec::new();
    for i in 0..a.grid.len() {
        let n = a.grid[i];
        rows.push(CheckRow::new(format!("lhs@{n}"), rel(b.lhs[i], f * a.lhs[i]), 1e-9));
        for (ta, tb) in a.rhs_terms[i].terms.iter().zip(&b.rhs_terms[i].terms) {
            rows.push(CheckRow::new(format!("{}@{n}", ta.name), rel(tb.value, f * ta.value), 1e-9));
        }
        rows.push(CheckRow::new(format!("ratio@{n}"), rel(b.ratio[i], a.ratio[i]), 1e-9));
    }
    Ok(ExplicitCheck::new(format!("scale:{}", theorem.id()), rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpMaxDiagnostic {
    pub p: f64,
    pub grid: Vec<usize>,
    /// n^{−1/p}‖max_{k≤n}|S_k|‖_p
    pub max_norm: Vec<f64>,
    /// n^{−1/p}‖S_n‖_p
    pub sum_norm: Vec<f64>,
    pub max_trend: Option<LinearFit>,
    pub sum_trend: Option<LinearFit>,
    /// n^{−1/p}‖S_n‖_p → 0 judged by a significantly negative log-log slope.
    pub martingale_hypothesis: bool,
    /// Dyadic block sums of A_k/k^{1+1/p}, when A is computable.
    pub series_blocks: Option<Vec<f64>>,
    pub series_summable: Option<bool>,
    /// "converges to 0", "hypothesis violated" or "inconclusive".
    pub verdict: String,
    pub notes: Vec<String>,
}

fn log_trend(grid: &[usize], v: &[f64]) -> Option<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(v)
        .filter(|(_, v)| **v > 0.0)
        .map(|(&n, v)| ((n as f64).ln(), v.ln()))
        .unzip();
    if x.len() < 3 {
        return None;
    }
    ols(&x, &y).ok()
}

/// The normalized maximal L^p norm along `grid`, with the two sufficient
/// hypotheses for its convergence to 0 assessed on the same horizon.
pub fn lp_max_convergence(model: &StationaryModel, p: f64, grid: &[usize], paths: usize, seed: u64) -> Result<LpMaxDiagnostic> {
    if !(p >= 2.0) {
        return domain(format!("needs p ≥ 2, got {p}"));
    }
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return argument("grid must be ascending positive horizons");
    }
    if paths < 2 {
        return argument("needs at least two paths");
    }
    let nmax = *grid.last().expect("nonempty");
    let rows = map_paths(model, 0, nmax, paths, seed, |path| {
        let mut out = Vec::with_capacity(2 * grid.len());
        let (mut s, mut mx, mut gi) = (0.0f64, 0.0f64, 0);
        for (t, x) in path.xs.iter().enumerate() {
            s += x;
            mx = mx.max(s.abs());
            if t + 1 == grid[gi] {
                out.push(mx.powf(p));
                out.push(s.abs().powf(p));
                gi += 1;
                if gi == grid.len() {
                    break;
                }
            }
        }
        out
    });
    let col = |j: usize| mean_se(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()).0;
    let scale = |n: usize, m: f64| (m / n as f64).powf(1.0 / p);
    let max_norm: Vec<f64> = grid.iter().enumerate().map(|(g, &n)| scale(n, col(2 * g))).collect();
    let sum_norm: Vec<f64> = grid.iter().enumerate().map(|(g, &n)| scale(n, col(2 * g + 1))).collect();
    let max_trend = log_trend(grid, &max_norm);
    let sum_trend = log_trend(grid, &sum_norm);
    let all_zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
    let martingale_hypothesis = all_zero(&sum_norm) || sum_trend.as_ref().is_some_and(|t| t.ci.1 < 0.0);

    let mut notes = Vec::new();
    let a = match model {
        StationaryModel::Chain(c) => Some(profile_exact(c, p, nmax)?.a),
        StationaryModel::DeltaNu(d) => Some(profile_delta_nu(d, p, nmax)?.a),
        _ => {
            notes.push("‖E₀(S_k)‖_p not computed for this model".into());
            None
        }
    };
    let (series_blocks, series_summable) = match a {
        Some(a) => {
            let mut blocks = Vec::new();
            let mut lo = 1;
            // Complete dyadic blocks [2^j, 2^{j+1}) only.
            while 2 * lo - 1 <= nmax {
                blocks.push(compensated_sum((lo..2 * lo).map(|k| a[k - 1] / (k as f64).powf(1.0 + 1.0 / p))));
                lo *= 2;
            }
            let scale = blocks.iter().fold(0.0f64, |m, v| m.max(*v));
            let summable = if scale <= 1e-12 {
                true
            } else {
                // Geometric decay over the later half of the blocks.
                let start = blocks.len() - (blocks.len() / 2).max(3).min(blocks.len());
                let late = &blocks[start..];
                if late.iter().any(|v| *v <= 1e-15 * scale) {
                    true
                } else if late.len() < 3 {
                    false
                } else {
                    let (x, y): (Vec<f64>, Vec<f64>) = late.iter().enumerate().map(|(j, v)| (j as f64, v.ln())).unzip();
                    ols(&x, &y).map(|f| f.ci.1 < 0.0).unwrap_or(false)
                }
            };
            (Some(blocks), Some(summable))
        }
        None => (None, None),
    };
    let verdict = if !martingale_hypothesis {
        "hypothesis violated"
    } else if all_zero(&max_norm) || max_trend.as_ref().is_some_and(|t| t.ci.1 < 0.0) {
        "converges to 0"
    } else {
        "inconclusive"
    };
    Ok(LpMaxDiagnostic {
        p,
        grid: grid.to_vec(),
        max_norm,
        sum_norm,
        max_trend,
        sum_trend,
        martingale_hypothesis,
        series_blocks,
        series_summable,
        verdict: verdict.into(),
        notes,
    })
}
