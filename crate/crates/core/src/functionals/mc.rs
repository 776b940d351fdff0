//! Monte Carlo estimators of projective profiles.

use super::profile::{ProfileMode, ProfileSe, ProjectiveProfile};
use crate::error::{argument, precondition, LabError, Result};
use crate::models::{map_paths, path_rng, ArchProcess, PathEnsemble, StationaryModel};
use rayon::prelude::*;
use crate::stats::{bootstrap_se_vec, mean_se};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Pre-sample coordinates used for regression conditioning.
    pub cond_dim: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            cond_dim: 32,
            resamples: 400,
            seed: 0,
        }
    }
}

/// Largest N·n handled by [`profile_mc`] (it stores every partial sum).
pub const PROFILE_MC_CELL_CAP: usize = 50_000_000;

/// Per-path partial sums S_1..S_n.
fn partial_sums(ens: &PathEnsemble) -> Vec<f64> {
    let mut out = Vec::with_capacity(ens.n * ens.n_paths);
    for i in 0..ens.n_paths {
        let mut s = 0.0;
        for x in ens.path(i) {
            s += x;
            out.push(s);
        }
    }
    out
}

fn norm_from_sum(total: f64, count: f64, p: f64) -> f64 {
    (total / count).max(0.0).powf(1.0 / p)
}

/// Stack [A; B; Bc; var] from conditional-mean predictions.
fn assemble(n: usize, p: f64, rows: &[usize], pred1: impl Fn(usize, usize) -> f64, pred2: impl Fn(usize, usize) -> f64, s2: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let cnt = rows.len() as f64;
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let var = rows.iter().map(|&i| s2(i, k)).sum::<f64>() / cnt;
        let (mut a, mut b, mut bc) = (0.0, 0.0, 0.0);
        for &i in rows {
            let m1 = pred1(i, k);
            let m2 = pred2(i, k);
            a += m1.abs().powf(p);
            b += m2.abs().powf(p / 2.0);
            bc += (m2 - var).abs().powf(p / 2.0);
        }
        out[k] = norm_from_sum(a, cnt, p);
        out[n + k] = norm_from_sum(b, cnt, p / 2.0);
        out[2 * n + k] = norm_from_sum(bc, cnt, p / 2.0);
        out[3 * n + k] = var;
    }
    out
}

/// Conditional means of S_k and S_k² within each ζ₀ class.
fn group_stat(ens: &PathEnsemble, sums: &[f64], labels: &[u32], p: f64, rows: &[usize]) -> Vec<f64> {
    let n = ens.n;
    let g = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut cnt = vec![0.0; g];
    let mut m1 = vec![0.0; g * n];
    let mut m2 = vec![0.0; g * n];
    for &i in rows {
        let l = labels[i] as usize;
        cnt[l] += 1.0;
        for k in 0..n {
            let s = sums[i * n + k];
            m1[l * n + k] += s;
            m2[l * n + k] += s * s;
        }
    }
    for l in 0..g {
        if cnt[l] > 0.0 {
            for k in 0..n {
                m1[l * n + k] /= cnt[l];
                m2[l * n + k] /= cnt[l];
            }
        }
    }
    assemble(
        n,
        p,
        rows,
        |i, k| m1[labels[i] as usize * n + k],
        |i, k| m2[labels[i] as usize * n + k],
        |i, k| sums[i * n + k].powi(2),
    )
}

fn features(ens: &PathEnsemble, i: usize, d: usize) -> Vec<f64> {
    let h = ens.history_of(i);
    let mut v = Vec::with_capacity(2 * d + 1);
    v.push(1.0);
    for j in 0..d {
        let x = h[h.len() - 1 - j];
        v.push(x);
        v.push(x * x);
    }
    v
}

/// Least-squares conditional means on [1, X_{−j}, X²_{−j}] for j < d.
fn regression_stat(ens: &PathEnsemble, sums: &[f64], feats: &[Vec<f64>], p: f64, rows: &[usize]) -> Result<Vec<f64>> {
    let n = ens.n;
    let dim = feats[0].len();
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, 2 * n);
    for &i in rows {
        let f = DVector::from_column_slice(&feats[i]);
        gram.ger(1.0, &f, &f, 1.0);
        for k in 0..n {
            let s = sums[i * n + k];
            for (a, fa) in feats[i].iter().enumerate() {
                rhs[(a, k)] += fa * s;
                rhs[(a, n + k)] += fa * s * s;
            }
        }
    }
    let ridge = 1e-12 * gram.trace().max(1.0);
    for a in 0..dim {
        gram[(a, a)] += ridge;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| LabError::Numeric("regression design is singular".into()))?;
    let beta = chol.solve(&rhs);
    let pred = |i: usize, col: usize| feats[i].iter().enumerate().map(|(a, f)| f * beta[(a, col)]).sum::<f64>();
    Ok(assemble(n, p, rows, |i, k| pred(i, k), |i, k| pred(i, n + k), |i, k| sums[i * n + k].powi(2)))
}

/// Monte Carlo profile from an ensemble.
///
/// Finite-chain ensembles carry ζ₀ and are conditioned exactly by class
/// means. Other ensembles are conditioned by least squares on the last
/// `cond_dim` history values and their squares; finite memory under-states
/// the projective norms while estimation noise in the fit over-states them
/// by a term of order (cond_dim/N)^{1/2}. Reversed terms are not estimated.
pub fn profile_mc(ens: &PathEnsemble, p: f64, opts: McOptions) -> Result<ProjectiveProfile> {
    if !(p >= 2.0) {
        return Err(LabError::Domain(format!("profiles need p ≥ 2, got {p}")));
    }
    if ens.n_paths < 2 {
        return argument("profile_mc needs at least two paths");
    }
    if ens.n * ens.n_paths > PROFILE_MC_CELL_CAP {
        return Err(LabError::Size {
            atoms: (ens.n * ens.n_paths) as u128,
            cap: PROFILE_MC_CELL_CAP,
        });
    }
    let n = ens.n;
    let sums = partial_sums(ens);
    let all: Vec<usize> = (0..ens.n_paths).collect();
    let mut notes = Vec::new();
    let (point, se) = match &ens.state0 {
        Some(labels) => {
            notes.push("conditioning on ζ₀ classes".to_string());
            let point = group_stat(ens, &sums, labels, p, &all);
            let se = bootstrap_se_vec(ens.n_paths, opts.resamples, opts.seed, |rows| group_stat(ens, &sums, labels, p, rows));
            (point, se)
        }
        None => {
            if ens.history_len < opts.cond_dim || opts.cond_dim == 0 {
                return precondition(format!(
                    "regression conditioning needs history ≥ cond_dim = {} (have {})",
                    opts.cond_dim, ens.history_len
                ));
            }
            let feats: Vec<Vec<f64>> = (0..ens.n_paths).map(|i| features(ens, i, opts.cond_dim)).collect();
            if ens.n_paths < 5 * feats[0].len() {
                notes.push(format!(
                    "only {} paths for {} regression features",
                    ens.n_paths,
                    feats[0].len()
                ));
            }
            notes.push(format!("regression conditioning on {} lags", opts.cond_dim));
            let point = regression_stat(ens, &sums, &feats, p, &all)?;
            let se = bootstrap_se_vec(ens.n_paths, opts.resamples, opts.seed, |rows| {
                regression_stat(ens, &sums, &feats, p, rows).unwrap_or_else(|_| vec![f64::NAN; 4 * n])
            });
            (point, se)
        }
    };
    // Kurtosis guard: relative standard error of the p-th moment at horizon n.
    let top: Vec<f64> = (0..ens.n_paths).map(|i| sums[i * n + n - 1].abs().powf(p)).collect();
    let (m, s) = mean_se(&top);
    if m > 0.0 && s / m > 0.1 {
        notes.push(format!("unstable p-th moments: relative se {:.3} at n = {n}", s / m));
    }
    let x1: Vec<f64> = (0..ens.n_paths).map(|i| ens.path(i)[0].abs().powf(p)).collect();
    let split = |v: &[f64], i: usize| v[i * n..(i + 1) * n].to_vec();
    Ok(ProjectiveProfile {
        p,
        n,
        mode: ProfileMode::Mc {
            paths: ens.n_paths,
            resamples: opts.resamples,
        },
        a: split(&point, 0),
        b: split(&point, 1),
        bc: split(&point, 2),
        var: split(&point, 3),
        abar: None,
        bbar: None,
        moment_p: mean_se(&x1).0,
        cond_square_1: f64::NAN,
        se: Some(ProfileSe {
            a: split(&se, 0),
            b: split(&se, 1),
            bc: split(&se, 2),
            var: split(&se, 3),
        }),
        notes,
    })
}

/// ‖E₀(S_k²)‖_{p/2} and ‖E₀(S_k²) − E(S_k²)‖_{p/2} for ARCH at selected horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConditional {
    pub p: f64,
    pub horizons: Vec<usize>,
    pub b: Vec<f64>,
    pub bc: Vec<f64>,
    pub se_b: Vec<f64>,
    pub se_bc: Vec<f64>,
    /// E(S_k²) = k·c/(1 − Σc_j).
    pub var: Vec<f64>,
    pub paths: usize,
}

/// Exact conditional second moments along sampled histories.
///
/// ARCH is a martingale difference sequence, so E₀(S_k) = 0 and
/// E₀(S_k²) = Σ_{t≤k} E₀σ_t², which the linear recursion gives exactly from
/// the last L squared values. Each horizon uses its own independent set of
/// histories so the estimates are independent across k.
pub fn arch_conditional_profile(arch: &ArchProcess, p: f64, horizons: &[usize], paths: usize, seed: u64, resamples: usize) -> Result<ArchConditional> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return argument("horizons must be ascending and positive");
    }
    if paths < 2 {
        return argument("need at least two paths");
    }
    let model = StationaryModel::Arch(arch.clone());
    let l = arch.lags().max(1);
    let mu = arch.second_moment();
    let q = p / 2.0;
    let mut out = ArchConditional {
        p,
        horizons: horizons.to_vec(),
        b: vec![],
        bc: vec![],
        se_b: vec![],
        se_bc: vec![],
        var: vec![],
        paths,
    };
    for (h, &k) in horizons.iter().enumerate() {
        let hseed = seed.wrapping_add((h as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let vals = map_paths(&model, l, 0, paths, hseed, |path| {
            let x2: Vec<f64> = path.history.iter().map(|x| x * x).collect();
            arch.conditional_sum_sigma2(&x2, &[k])[0]
        });
        let var = k as f64 * mu;
        let pb: Vec<f64> = vals.iter().map(|v| v.abs().powf(q)).collect();
        let pc: Vec<f64> = vals.iter().map(|v| (v - var).abs().powf(q)).collect();
        let norm = |v: &[f64], rows: &[usize]| (rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64).powf(1.0 / q);
        let all: Vec<usize> = (0..paths).collect();
        let se = bootstrap_se_vec(paths, resamples, hseed, |rows| vec![norm(&pb, rows), norm(&pc, rows)]);
        out.b.push(norm(&pb, &all));
        out.bc.push(norm(&pc, &all));
        out.se_b.push(se[0]);
        out.se_bc.push(se[1]);
        out.var.push(var);
    }
    Ok(out)
}

/// Full ARCH profile at every horizon 1..=n from one set of histories.
///
/// A is exactly zero (martingale differences); B and Bc come from the exact
/// conditional second moments, var is k·E X₁². Paths are processed in
/// blocks and summed in path order so the result does not depend on the
/// thread count.
pub fn arch_profile(arch: &ArchProcess, p: f64, n: usize, paths: usize, seed: u64) -> Result<ProjectiveProfile> {
    if n == 0 || paths < 2 {
        return argument("need n ≥ 1 and at least two paths");
    }
    if !(p >= 2.0) {
        return argument(format!("needs p ≥ 2, got {p}"));
    }
    const BLOCK: usize = 1024;
    let model = StationaryModel::Arch(arch.clone());
    let l = arch.lags().max(1);
    let mu = arch.second_moment();
    let q = p / 2.0;
    let horizons: Vec<usize> = (1..=n).collect();
    let mut sb = vec![0.0; n];
    let mut sc = vec![0.0; n];
    let mut mp = 0.0;
    let mut start = 0;
    while start < paths {
        let len = BLOCK.min(paths - start);
        let rows: Vec<(Vec<f64>, f64)> = (start as u64..(start + len) as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, i);
                let path = model.sample_path(&mut rng, l, 1);
                let x2: Vec<f64> = path.history.iter().map(|x| x * x).collect();
                (arch.conditional_sum_sigma2(&x2, &horizons), path.xs[0].abs().powf(p))
            })
            .collect();
        for (v, m) in &rows {
            for k in 0..n {
                sb[k] += v[k].abs().powf(q);
                sc[k] += (v[k] - (k + 1) as f64 * mu).abs().powf(q);
            }
            mp += m;
        }
        start += len;
    }
    let cnt = paths as f64;
    let b: Vec<f64> = sb.iter().map(|s| (s / cnt).powf(1.0 / q)).collect();
    Ok(ProjectiveProfile {
        p,
        n,
        mode: ProfileMode::Mc { paths, resamples: 0 },
        a: vec![0.0; n],
        cond_square_1: b[0],
        b,
        bc: sc.iter().map(|s| (s / cnt).powf(1.0 / q)).collect(),
        var: (1..=n).map(|k| k as f64 * mu).collect(),
        abar: None,
        bbar: None,
        moment_p: mp / cnt,
        se: None,
        notes: vec!["A is exact (martingale differences); B, Bc from conditional second moments".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::profile::profile_exact;
    use crate::models::{sample_paths, sample_paths_with_history, FiniteChain, Noise};

    #[test]
    fn iid_projective_term_is_noise() {
        let m = StationaryModel::Chain(FiniteChain::coin());
        let ens = sample_paths(&m, 8, 20_000, 3).unwrap();
        let pr = profile_mc(&ens, 4.0, McOptions { resamples: 100, ..Default::default() }).unwrap();
        let se = pr.se.as_ref().unwrap();
        for k in 0..8 {
            assert!(pr.a[k] < 3.0 * se.a[k] + 3.0 * (k as f64 + 1.0).sqrt() / (20_000f64).sqrt(), "k={k}");
        }
    }

    #[test]
    fn chain_ensemble_matches_exact() {
        let c = FiniteChain::eigen();
        let exact = profile_exact(&c, 4.0, 32).unwrap();
        let ens = sample_paths(&StationaryModel::Chain(c), 32, 20_000, 8).unwrap();
        let pr = profile_mc(&ens, 4.0, McOptions { resamples: 100, ..Default::default() }).unwrap();
        let se = pr.se.as_ref().unwrap();
        let mut misses = 0;
        for k in 0..32 {
            for (est, s, want) in [
                (pr.a[k], se.a[k], exact.a[k]),
                (pr.b[k], se.b[k], exact.b[k]),
                (pr.var[k], se.var[k], exact.var[k]),
            ] {
                if (est - want).abs() > 3.0 * s {
                    misses += 1;
                }
            }
        }
        // Horizons share paths, so allow a couple of 3-se excursions.
        assert!(misses <= 3, "{misses} misses");
    }

    #[test]
    fn regression_route_runs_on_arch() {
        let a = ArchProcess::geometric(1.0, 0.125, 0.5, 8, Noise::Gaussian).unwrap();
        let ens = sample_paths_with_history(&StationaryModel::Arch(a.clone()), 4, 4000, 8, 2).unwrap();
        let pr = profile_mc(&ens, 4.0, McOptions { cond_dim: 8, resamples: 20, seed: 1 }).unwrap();
        let mu = a.second_moment();
        for k in 0..4 {
            assert!((pr.var[k] - (k + 1) as f64 * mu).abs() < 4.0 * pr.se.as_ref().unwrap().var[k]);
        }
        let short = sample_paths(&StationaryModel::Arch(a), 4, 100, 2).unwrap();
        assert!(profile_mc(&short, 4.0, McOptions::default()).is_err());
    }

    #[test]
    fn arch_conditional_profile_sane() {
        let a = ArchProcess::geometric(1.0, 0.125, 0.5, 16, Noise::Gaussian).unwrap();
        let r = arch_conditional_profile(&a, 4.0, &[1, 4, 16, 64], 4000, 7, 50).unwrap();
        for i in 0..4 {
            assert!(r.b[i] >= r.var[i] - 1e-9);
            assert!((r.b[i] - r.var[i]).abs() <= r.bc[i] + 1e-9);
        }
        // Bc settles once the horizon exceeds the memory.
        assert!((r.bc[3] - r.bc[2]).abs() < 0.2 * r.bc[2] + 4.0 * (r.se_bc[2] + r.se_bc[3]));
    }

    #[test]
    fn full_arch_profile_agrees_with_the_per_horizon_route() {
        let a = ArchProcess::geometric(1.0, 0.125, 0.5, 16, Noise::Gaussian).unwrap();
        let full = arch_profile(&a, 4.0, 64, 20_000, 5).unwrap();
        let r = arch_conditional_profile(&a, 4.0, &[1, 4, 16, 64], 20_000, 9, 100).unwrap();
        for (i, &k) in r.horizons.iter().enumerate() {
            assert_eq!(full.a(k), 0.0);
            assert!((full.var(k) - r.var[i]).abs() < 1e-9 * r.var[i]);
            assert!((full.b(k) - r.b[i]).abs() < 5.0 * r.se_b[i], "b at {k}");
            assert!((full.bc(k) - r.bc[i]).abs() < 5.0 * r.se_bc[i] + 0.02, "bc at {k}");
        }
        // E X⁴ = 3 E σ⁴ under Gaussian noise, and E σ₁⁴ = B₁².
        assert!((full.moment_p / (3.0 * full.cond_square_1.powi(2)) - 1.0).abs() < 0.1);
    }
}
