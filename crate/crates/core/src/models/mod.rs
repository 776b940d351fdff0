//! Stationary process zoo with seeded, parallel path sampling.

pub mod arch;
pub mod chain;
pub mod config;
pub mod delta_nu;
pub mod linear;
pub mod noise;

pub use arch::ArchProcess;
pub use chain::{FiniteChain, Quantity};
pub use delta_nu::{BetaBound, DeltaNuChain, DeltaNuSpec};
pub use linear::{LinearFunctionalProcess, PowerH};
pub use noise::Noise;

use crate::error::{argument, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Generator for path `index` of an ensemble: the seed picks the key and the
/// index picks an independent ChaCha stream.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StationaryModel {
    Chain(FiniteChain),
    DeltaNu(DeltaNuChain),
    Arch(ArchProcess),
    Linear(LinearFunctionalProcess),
}

/// One sampled path: `history` ends at X₀, `xs` holds X₁..Xₙ.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub history: Vec<f64>,
    pub xs: Vec<f64>,
    /// Index of ζ₀ for finite chains.
    pub state0: Option<u32>,
}

impl StationaryModel {
    pub fn id(&self) -> String {
        match self {
            StationaryModel::Chain(c) => format!("chain{}", c.states()),
            StationaryModel::DeltaNu(d) => format!("delta_nu(a={},lambda={})", d.spec.a, d.spec.lambda),
            StationaryModel::Arch(a) => format!("arch(L={})", a.lags()),
            StationaryModel::Linear(l) => format!("linear(W={})", l.coeffs.len()),
        }
    }

    /// True when the reversed filtration quantities are available.
    pub fn is_markov(&self) -> bool {
        matches!(self, StationaryModel::Chain(_) | StationaryModel::DeltaNu(_))
    }

    /// Known truncation or start-up bias, if any.
    pub fn truncation_note(&self) -> Option<String> {
        match self {
            StationaryModel::Arch(a) => Some(format!(
                "ARCH: {} lags, burn-in {} from a zero history",
                a.lags(),
                a.burn_in
            )),
            StationaryModel::Linear(l) => Some(format!("linear process window of {} coefficients", l.coeffs.len())),
            _ => None,
        }
    }

    pub fn sample_path(&self, rng: &mut ChaCha8Rng, hist: usize, n: usize) -> SampledPath {
        match self {
            StationaryModel::Chain(c) => {
                let mut z = c.sample_stationary(rng);
                let mut history = Vec::with_capacity(hist);
                // ζ_{1−hist}, …, ζ₀: the first one is drawn from π.
                for t in 0..hist {
                    if t > 0 {
                        z = c.step(z, rng);
                    }
                    history.push(c.f()[z]);
                }
                let state0 = z as u32;
                let mut xs = Vec::with_capacity(n);
                for _ in 0..n {
                    z = c.step(z, rng);
                    xs.push(c.f()[z]);
                }
                SampledPath {
                    history,
                    xs,
                    state0: Some(state0),
                }
            }
            StationaryModel::DeltaNu(d) => {
                let mut x = d.sample_pi(rng);
                let mut history = Vec::with_capacity(hist);
                for t in 0..hist {
                    if t > 0 {
                        x = d.step(x, rng);
                    }
                    history.push(d.f(x));
                }
                let mut xs = Vec::with_capacity(n);
                for _ in 0..n {
                    x = d.step(x, rng);
                    xs.push(d.f(x));
                }
                SampledPath {
                    history,
                    xs,
                    state0: None,
                }
            }
            StationaryModel::Arch(a) => {
                let (mut all, _) = a.simulate(rng, hist + n);
                let xs = all.split_off(hist);
                SampledPath {
                    history: all,
                    xs,
                    state0: None,
                }
            }
            StationaryModel::Linear(l) => {
                let mut all = l.simulate(rng, hist + n);
                let xs = all.split_off(hist);
                SampledPath {
                    history: all,
                    xs,
                    state0: None,
                }
            }
        }
    }
}

/// Apply `f` to every path of an ensemble without storing the paths.
/// The output order follows the path index, whatever the thread schedule.
pub fn map_paths<T, F>(model: &StationaryModel, hist: usize, n: usize, paths: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&SampledPath) -> T + Sync,
{
    (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            f(&model.sample_path(&mut rng, hist, n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub model_id: String,
    pub seed: u64,
    pub n: usize,
    pub n_paths: usize,
    pub history_len: usize,
    /// Row-major N×n.
    pub paths: Vec<f64>,
    /// Row-major N×history_len, oldest first.
    pub history: Vec<f64>,
    pub state0: Option<Vec<u32>>,
    pub notes: Vec<String>,
}

impl PathEnsemble {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.paths[i * self.n..(i + 1) * self.n]
    }

    pub fn history_of(&self, i: usize) -> &[f64] {
        &self.history[i * self.history_len..(i + 1) * self.history_len]
    }

    /// CSV with header `path_id,t,x`; history rows get t ≤ 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path_id,t,x\n");
        for i in 0..self.n_paths {
            let h = self.history_of(i);
            for (j, v) in h.iter().enumerate() {
                let t = j as i64 + 1 - self.history_len as i64;
                let _ = writeln!(out, "{i},{t},{v}");
            }
            for (t, v) in self.path(i).iter().enumerate() {
                let _ = writeln!(out, "{i},{},{v}", t + 1);
            }
        }
        out
    }
}

pub fn sample_paths(model: &StationaryModel, n: usize, paths: usize, seed: u64) -> Result<PathEnsemble> {
    sample_paths_with_history(model, n, paths, 0, seed)
}

pub fn sample_paths_with_history(
    model: &StationaryModel,
    n: usize,
    paths: usize,
    hist: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n == 0 || paths == 0 {
        return argument("ensembles need n ≥ 1 and N ≥ 1");
    }
    let sampled = map_paths(model, hist, n, paths, seed, |p| p.clone());
    let mut ens = PathEnsemble {
        model_id: model.id(),
        seed,
        n,
        n_paths: paths,
        history_len: hist,
        paths: Vec::with_capacity(n * paths),
        history: Vec::with_capacity(hist * paths),
        state0: None,
        notes: model.truncation_note().into_iter().collect(),
    };
    let mut states = Vec::with_capacity(paths);
    for p in sampled {
        ens.paths.extend_from_slice(&p.xs);
        ens.history.extend_from_slice(&p.history);
        if let Some(s) = p.state0 {
            states.push(s);
        }
    }
    if states.len() == paths {
        ens.state0 = Some(states);
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_repetition_is_bit_identical() {
        let m = StationaryModel::Chain(FiniteChain::eigen());
        let a = sample_paths(&m, 16, 50, 42).unwrap();
        let b = sample_paths(&m, 16, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_paths(&m, 16, 50, 43).unwrap();
        assert_ne!(a.paths, c.paths);
    }

    #[test]
    fn chain_first_value_is_centered() {
        let m = StationaryModel::Chain(FiniteChain::eigen());
        let e = sample_paths(&m, 1, 40_000, 1).unwrap();
        let (mean, se) = crate::stats::mean_se(&e.paths);
        assert!(mean.abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn chain_marginals_do_not_drift() {
        let m = StationaryModel::Chain(FiniteChain::eigen());
        let e = sample_paths(&m, 20, 20_000, 2).unwrap();
        let frac = |t: usize| {
            (0..e.n_paths).filter(|&i| e.path(i)[t] > 0.0).count() as f64 / e.n_paths as f64
        };
        let se = (2.0 / 9.0 / e.n_paths as f64).sqrt();
        for t in [0, 5, 19] {
            assert!((frac(t) - 2.0 / 3.0).abs() < 4.0 * se);
        }
    }

    #[test]
    fn arch_is_a_martingale_difference() {
        let a = ArchProcess::geometric(1.0, 0.125, 0.5, 16, Noise::Gaussian).unwrap();
        let m = StationaryModel::Arch(a);
        let vals = map_paths(&m, 2, 1, 40_000, 3, |p| {
            let g = (p.history[1]).tanh() + p.history[0].abs().min(2.0);
            p.xs[0] * g
        });
        let (mean, se) = crate::stats::mean_se(&vals);
        assert!(mean.abs() < 3.5 * se);
    }

    #[test]
    fn csv_layout() {
        let m = StationaryModel::Chain(FiniteChain::coin());
        let e = sample_paths_with_history(&m, 2, 2, 1, 0).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path_id,t,x");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[2].starts_with("0,1,"));
    }

    #[test]
    fn empty_requests_rejected() {
        let m = StationaryModel::Chain(FiniteChain::coin());
        assert!(sample_paths(&m, 0, 5, 1).is_err());
        assert!(sample_paths(&m, 5, 0, 1).is_err());
    }
}
