//! Estimators of E(max_{j≤n}|S_j|^p): lattice dynamic programming, path
//! enumeration and Monte Carlo.

use crate::error::{argument, LabError, Result};
use crate::models::{map_paths, FiniteChain, StationaryModel};
use crate::stats::mean_se;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default lattice resolution for [`max_moment_exact_dp`].
pub const LATTICE_RESOLUTION: f64 = 1.0 / 64.0;
/// Above this many elementary DP updates, [`max_moment_auto`] switches to Monte Carlo.
pub const DP_COST_LIMIT: f64 = 2e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxMethod {
    ExactDp,
    Enumerate,
    Mc { paths: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMoment {
    pub n: usize,
    pub value: f64,
    /// Monte Carlo standard error; `None` for exact methods.
    pub se: Option<f64>,
    pub method: MaxMethod,
}

/// E max|S_j|^p for a finite chain by the requested method.
pub fn max_moment(chain: &FiniteChain, p: f64, n: usize, method: MaxMethod) -> Result<MaxMoment> {
    if !(p >= 1.0) {
        return Err(LabError::Domain(format!("p = {p} < 1")));
    }
    if n == 0 {
        return argument("n must be ≥ 1");
    }
    let (value, se) = match method {
        MaxMethod::ExactDp => (max_moment_exact_dp(chain, p, n, LATTICE_RESOLUTION)?, None),
        MaxMethod::Enumerate => {
            let (space, _, xs) = chain.unroll(n)?;
            (space.max_abs_partial_sum_moment(&xs, p)?, None)
        }
        MaxMethod::Mc { paths, seed } => {
            let m = StationaryModel::Chain(chain.clone());
            let r = max_moment_mc_grid(&m, p, &[n], paths, seed)?;
            (r[0].value, r[0].se)
        }
    };
    Ok(MaxMoment { n, value, se, method })
}

/// Integer lattice steps and their unit: f(x) = steps[x]·unit exactly.
pub fn lattice(chain: &FiniteChain, resolution: f64) -> Result<(Vec<i64>, f64)> {
    let raw: Vec<i64> = chain.f().iter().map(|v| (v / resolution).round() as i64).collect();
    for (v, l) in chain.f().iter().zip(&raw) {
        if (v - *l as f64 * resolution).abs() > 1e-9 * v.abs().max(1.0) {
            return Err(LabError::Method(format!(
                "value {v} is not on the lattice of resolution {resolution}"
            )));
        }
    }
    let g = raw.iter().fold(0i64, |g, &v| gcd(g, v.abs()));
    if g == 0 {
        return Ok((raw, resolution));
    }
    Ok((raw.iter().map(|v| v / g).collect(), resolution * g as f64))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rough count of DP updates, used to choose between DP and Monte Carlo.
pub fn dp_cost(chain: &FiniteChain, n: usize) -> f64 {
    let s = chain.states() as f64;
    let Ok((steps, _)) = lattice(chain, LATTICE_RESOLUTION) else {
        return f64::INFINITY;
    };
    let lmax = steps.iter().map(|v| v.abs()).max().unwrap_or(0) as f64;
    let top = (lmax * n as f64).min(10.0 * lmax * (n as f64).sqrt() + 8.0);
    n as f64 * s * s * top * top
}

/// P(max_{j≤n}|S_j| ≥ m) in lattice units: mass leaving (−m, m) before time n.
fn exit_probability(chain: &FiniteChain, steps: &[i64], n: usize, m: i64) -> f64 {
    let s = chain.states();
    let width = (2 * m - 1) as usize;
    let off = m - 1;
    let mut cur = vec![0.0; s * width];
    for x in 0..s {
        cur[x * width + off as usize] = chain.pi()[x];
    }
    let mut next = vec![0.0; s * width];
    let mut exit = 0.0;
    for _ in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..s {
            let row = &cur[x * width..(x + 1) * width];
            for y in 0..s {
                let q = chain.q(x, y);
                if q == 0.0 {
                    continue;
                }
                let l = steps[y];
                let dst = &mut next[y * width..(y + 1) * width];
                for (i, &mass) in row.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    let t = i as i64 + l;
                    if t < 0 || t >= width as i64 {
                        exit += mass * q;
                    } else {
                        dst[t as usize] += mass * q;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    exit
}

/// Exact E max|S_j|^p for lattice-valued observables.
///
/// E max^p = Σ_{m≥1} P(max ≥ m)(m^p − (m−1)^p)·unit^p; each probability is a
/// barrier problem on (state, S) with S kept inside (−m, m). Levels are
/// evaluated in parallel blocks until the exit probability drops below 1e-18.
pub fn max_moment_exact_dp(chain: &FiniteChain, p: f64, n: usize, resolution: f64) -> Result<f64> {
    let (steps, unit) = lattice(chain, resolution)?;
    let lmax = steps.iter().map(|v| v.abs()).max().unwrap_or(0);
    if lmax == 0 {
        return Ok(0.0);
    }
    let top = lmax * n as i64;
    let mut total = 0.0;
    let block = rayon::current_num_threads().max(4) as i64;
    let mut m0 = 1;
    'outer: while m0 <= top {
        let levels: Vec<i64> = (m0..(m0 + block).min(top + 1)).collect();
        let probs: Vec<f64> = levels.par_iter().map(|&m| exit_probability(chain, &steps, n, m)).collect();
        for (&m, &pr) in levels.iter().zip(&probs) {
            let mf = m as f64;
            total += pr * (mf.powf(p) - (mf - 1.0).powf(p));
            if pr < 1e-18 {
                break 'outer;
            }
        }
        m0 += block;
    }
    Ok(total * unit.powf(p))
}

/// Exact DP when affordable, Monte Carlo otherwise.
pub fn max_moment_auto(chain: &FiniteChain, p: f64, n: usize, paths: usize, seed: u64) -> Result<MaxMoment> {
    if dp_cost(chain, n) <= DP_COST_LIMIT {
        max_moment(chain, p, n, MaxMethod::ExactDp)
    } else {
        max_moment(chain, p, n, MaxMethod::Mc { paths, seed })
    }
}

/// max_{j≤n}|S_j| per path at every n of an ascending grid, indexed
/// `[grid position][path]`; paths are generated once up to the largest n.
pub fn running_maxima(model: &StationaryModel, grid: &[usize], paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
        return argument("grid must be a nonempty ascending list of positive horizons");
    }
    if paths == 0 {
        return argument("need at least one path");
    }
    let nmax = *grid.last().expect("nonempty");
    let per_path = map_paths(model, 0, nmax, paths, seed, |path| {
        let mut out = Vec::with_capacity(grid.len());
        let (mut s, mut mx) = (0.0f64, 0.0f64);
        let mut gi = 0;
        for (t, x) in path.xs.iter().enumerate() {
            s += x;
            mx = mx.max(s.abs());
            if t + 1 == grid[gi] {
                out.push(mx);
                gi += 1;
                if gi == grid.len() {
                    break;
                }
            }
        }
        out
    });
    Ok((0..grid.len()).map(|g| per_path.iter().map(|v| v[g]).collect()).collect())
}

/// Monte Carlo E max|S_j|^p on a grid, with standard errors of the mean.
pub fn max_moment_mc_grid(model: &StationaryModel, p: f64, grid: &[usize], paths: usize, seed: u64) -> Result<Vec<MaxMoment>> {
    if paths < 2 {
        return argument("Monte Carlo needs at least two paths");
    }
    let maxima = running_maxima(model, grid, paths, seed)?;
    Ok(grid
        .iter()
        .zip(maxima)
        .map(|(&n, mx)| {
            let vals: Vec<f64> = mx.iter().map(|m| m.powf(p)).collect();
            let (value, se) = mean_se(&vals);
            MaxMoment {
                n,
                value,
                se: Some(se),
                method: MaxMethod::Mc { paths, seed },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn coin_examples() {
        let c = FiniteChain::coin();
        for m in [MaxMethod::ExactDp, MaxMethod::Enumerate] {
            assert!((max_moment(&c, 4.0, 2, m).unwrap().value - 8.5).abs() < 1e-12);
            assert!((max_moment(&c, 2.0, 3, m).unwrap().value - 3.75).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_is_the_marginal_moment() {
        let c = FiniteChain::eigen();
        let v = max_moment(&c, 3.0, 1, MaxMethod::ExactDp).unwrap().value;
        assert!((v - c.lp(c.f(), 3.0).powi(3)).abs() < 1e-12);
    }

    /// Sign-randomized random chains with quarter-step magnitudes are
    /// centered and lattice-valued.
    fn lattice_chain<R: rand::Rng>(rng: &mut R) -> FiniteChain {
        let base = FiniteChain::random(2, rng);
        let sr = FiniteChain::sign_randomized(&base);
        let mags: Vec<f64> = (0..2).map(|_| 0.25 * rng.gen_range(1..8) as f64).collect();
        let f = (0..4).map(|a| if a % 2 == 1 { mags[a / 2] } else { -mags[a / 2] }).collect();
        FiniteChain::with_pi(sr.matrix(), sr.pi().to_vec(), f).unwrap()
    }

    #[test]
    fn dp_matches_enumeration_on_random_lattice_chains() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let c = lattice_chain(&mut rng);
            for n in [1, 3, 6] {
                let dp = max_moment(&c, 2.5, n, MaxMethod::ExactDp).unwrap().value;
                let en = max_moment(&c, 2.5, n, MaxMethod::Enumerate).unwrap().value;
                assert!((dp - en).abs() <= 1e-9 * en, "{dp} vs {en}");
            }
        }
    }

    #[test]
    fn eigen_dp_matches_enumeration() {
        let c = FiniteChain::eigen();
        for n in [2, 5, 10, 14] {
            let dp = max_moment(&c, 4.0, n, MaxMethod::ExactDp).unwrap().value;
            let en = max_moment(&c, 4.0, n, MaxMethod::Enumerate).unwrap().value;
            assert!((dp - en).abs() <= 1e-9 * en, "n={n}: {dp} vs {en}");
        }
    }

    #[test]
    fn non_lattice_rejected() {
        let c = FiniteChain::centered(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![0.0, std::f64::consts::PI]).unwrap();
        assert!(matches!(max_moment(&c, 2.0, 3, MaxMethod::ExactDp), Err(LabError::Method(_))));
    }

    #[test]
    fn mc_agrees_with_enumeration() {
        let c = FiniteChain::coin();
        let en = max_moment(&c, 4.0, 10, MaxMethod::Enumerate).unwrap().value;
        let mc = max_moment(&c, 4.0, 10, MaxMethod::Mc { paths: 40_000, seed: 17 }).unwrap();
        assert!((mc.value - en).abs() < 3.0 * mc.se.unwrap(), "{} ± {} vs {en}", mc.value, mc.se.unwrap());
    }

    #[test]
    fn grid_maxima_are_monotone() {
        let m = StationaryModel::Chain(FiniteChain::eigen());
        let r = running_maxima(&m, &[1, 4, 16], 200, 1).unwrap();
        for i in 0..200 {
            assert!(r[0][i] <= r[1][i] && r[1][i] <= r[2][i]);
        }
        assert!(running_maxima(&m, &[4, 4], 10, 1).is_err());
    }
}
