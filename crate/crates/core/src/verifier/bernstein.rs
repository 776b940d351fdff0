//! Bernstein-type maximal tail bound for bounded, geometrically α-mixing
//! chains, with the nonconstructive constant C calibrated on i.i.d. signs.

use crate::error::{argument, precondition, LabError, Result};
use crate::functionals::{running_maxima, v2_alpha};
use crate::models::{FiniteChain, StationaryModel};
use crate::stats::ols;
use serde::{Deserialize, Serialize};

/// exp(−Cx²/(v²n + M² + xM(ln n)²)).
pub fn bernstein_bound(v2: f64, m: f64, c: f64, n: usize, x: f64) -> f64 {
    let l = (n as f64).ln();
    (-c * x * x / (v2 * n as f64 + m * m + x * m * l * l)).exp()
}

/// Horizon used for v² and the α fit.
const MIXING_HORIZON: usize = 128;

/// Rate c in α(n) ≲ e^{−cn}; +∞ when α vanishes.
///
/// The fit is over the entries above 1e-12·α(1). A decay that slows down,
/// i.e. a second-half rate below half the overall rate, is rejected.
pub fn geometric_alpha_rate(alpha: &[f64]) -> Result<f64> {
    let top = alpha.first().copied().unwrap_or(0.0);
    if top <= 1e-300 {
        return Ok(f64::INFINITY);
    }
    let pts: Vec<(f64, f64)> = alpha
        .iter()
        .enumerate()
        .take_while(|(_, a)| **a > 1e-12 * top)
        .map(|(i, a)| ((i + 1) as f64, a.ln()))
        .collect();
    if pts.len() < 6 {
        // Collapses within a few steps: faster than any rate we can fit.
        return Ok(f64::INFINITY);
    }
    let fit = |s: &[(f64, f64)]| {
        let (x, y): (Vec<f64>, Vec<f64>) = s.iter().copied().unzip();
        ols(&x, &y).map(|f| -f.slope)
    };
    let all = fit(&pts)?;
    let tail = fit(&pts[pts.len() / 2..])?;
    if !(all > 0.0) || tail < 0.5 * all {
        return precondition(format!(
            "α does not decay geometrically: overall rate {all:.4}, late rate {tail:.4}"
        ));
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinCalibration {
    /// Smallest C consistent with the i.i.d. tails.
    pub c_raw: f64,
    pub safety: f64,
    /// c_raw / safety, the constant used downstream.
    pub c: f64,
    pub n_grid: Vec<usize>,
    pub z_grid: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRow {
    pub n: usize,
    pub x: f64,
    /// x / sqrt(v²n)
    pub z: f64,
    /// x > K ln n
    pub included: bool,
    pub empirical: f64,
    pub se: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub m: f64,
    pub v2: f64,
    /// Fitted α rate c.
    pub rate: f64,
    /// K = 8M/c.
    pub k: f64,
    pub c: f64,
    pub paths: usize,
    pub rows: Vec<BernsteinRow>,
    /// Rows inside the validity range.
    pub checked: usize,
    pub violations: usize,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// P̂(max_{k≤n}|S_k| ≥ x) and its binomial se at every (n, x).
fn tails(chain: &FiniteChain, n_grid: &[usize], xs: &[Vec<f64>], paths: usize, seed: u64) -> Result<Vec<Vec<(f64, f64)>>> {
    let maxima = running_maxima(&StationaryModel::Chain(chain.clone()), n_grid, paths, seed)?;
    let nf = paths as f64;
    Ok(maxima
        .iter()
        .zip(xs)
        .map(|(mx, xrow)| {
            xrow.iter()
                .map(|&x| {
                    // Tolerance guards lattice values sitting exactly on x.
                    let hits = mx.iter().filter(|&&m| m >= x - 1e-9 * x.max(1.0)).count() as f64;
                    let p = hits / nf;
                    (p, (p * (1.0 - p) / nf).sqrt())
                })
                .collect()
        })
        .collect())
}

fn check_grid(n_grid: &[usize], z_grid: &[f64]) -> Result<()> {
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return argument("n grid must be ascending with n ≥ 2");
    }
    if z_grid.is_empty() || z_grid.iter().any(|z| !(*z > 0.0)) {
        return argument("x grid must be positive");
    }
    Ok(())
}

/// Calibrate C on i.i.d. ±1 signs (M = 1, v² = 1, α ≡ 0 so every x counts):
/// C_raw = min over (n, x) with hits of −ln P̂ · (n + 1 + x(ln n)²)/x², then
/// C = C_raw / safety.
pub fn calibrate_bernstein(n_grid: &[usize], z_grid: &[f64], paths: usize, seed: u64, safety: f64) -> Result<BernsteinCalibration> {
    check_grid(n_grid, z_grid)?;
    if !(safety >= 1.0) {
        return argument("safety factor must be ≥ 1");
    }
    let signs = FiniteChain::iid(vec![0.5, 0.5], vec![1.0, -1.0])?;
    let xs: Vec<Vec<f64>> = n_grid.iter().map(|&n| z_grid.iter().map(|z| z * (n as f64).sqrt()).collect()).collect();
    let t = tails(&signs, n_grid, &xs, paths, seed)?;
    let mut c_raw = f64::INFINITY;
    for (i, &n) in n_grid.iter().enumerate() {
        let l = (n as f64).ln();
        for (j, &x) in xs[i].iter().enumerate() {
            let p = t[i][j].0;
            if p > 0.0 && p < 1.0 {
                c_raw = c_raw.min(-p.ln() * (n as f64 + 1.0 + x * l * l) / (x * x));
            }
        }
    }
    if !c_raw.is_finite() {
        return Err(LabError::Numeric("no informative calibration point (all tails 0 or 1)".into()));
    }
    Ok(BernsteinCalibration {
        c_raw,
        safety,
        c: c_raw / safety,
        n_grid: n_grid.to_vec(),
        z_grid: z_grid.to_vec(),
        paths,
        seed,
    })
}

/// Empirical maximal tails of `chain` against the bound with the calibrated C.
/// x runs over z·sqrt(v²n); only x > K ln n is judged, with 3-se slack.
pub fn bernstein_tail_check(
    chain: &FiniteChain,
    cal: &BernsteinCalibration,
    n_grid: &[usize],
    z_grid: &[f64],
    paths: usize,
    seed: u64,
) -> Result<BernsteinReport> {
    check_grid(n_grid, z_grid)?;
    let m = chain.f().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mix = v2_alpha(chain, MIXING_HORIZON)?;
    let rate = geometric_alpha_rate(&mix.alpha)?;
    let k = if rate.is_finite() { 8.0 * m / rate } else { 0.0 };
    let v2 = mix.v2;
    let xs: Vec<Vec<f64>> = n_grid
        .iter()
        .map(|&n| z_grid.iter().map(|z| z * (v2 * n as f64).sqrt()).collect())
        .collect();
    let t = tails(chain, n_grid, &xs, paths, seed)?;
    let mut rows = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        for (j, &x) in xs[i].iter().enumerate() {
            let (empirical, se) = t[i][j];
            let bound = bernstein_bound(v2, m, cal.c, n, x);
            let included = x > k * (n as f64).ln();
            rows.push(BernsteinRow {
                n,
                x,
                z: z_grid[j],
                included,
                empirical,
                se,
                bound,
                ok: empirical <= bound + 3.0 * se,
            });
        }
    }
    let checked = rows.iter().filter(|r| r.included).count();
    let violations = rows.iter().filter(|r| r.included && !r.ok).count();
    let mut notes = mix.notes.clone();
    notes.push(format!("v² and α computed to lag {MIXING_HORIZON}"));
    if checked == 0 {
        notes.push("no grid point above K ln n: vacuous".into());
    }
    Ok(BernsteinReport {
        m,
        v2,
        rate,
        k,
        c: cal.c,
        paths,
        rows,
        checked,
        violations,
        pass: violations == 0,
        notes,
    })
}
