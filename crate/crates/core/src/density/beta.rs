//! β₂,Y coefficients: exact for finite chains, the absolute-regularity
//! bound for the δ/υ chain.

use crate::error::{argument, LabError, Result};
use crate::models::{DeltaNuChain, FiniteChain, StationaryModel};
use crate::stats::ols_multi;
use serde::{Deserialize, Serialize};

/// Lag horizon beyond max j for the supremum over i ≥ j in finite chains.
const PAIR_HORIZON: usize = 64;

/// E b(F₀, i, j) for a finite chain, conditioning on ζ₀.
///
/// b is a sup over thresholds (s, t); the joint CDF of (Y_i, Y_j) only
/// changes at the observable's values, so the sup runs over those.
fn expected_b(chain: &FiniteChain, powers: &[Vec<Vec<f64>>], i: usize, j: usize) -> f64 {
    let s = chain.states();
    let f = chain.f();
    let mut levels: Vec<f64> = f.to_vec();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let pi = chain.pi();
    // Joint law of (ζ_j, ζ_i) given ζ₀ = x: Q^j(x, a)Q^{i−j}(a, b).
    let joint_given = |x: usize| -> Vec<Vec<f64>> {
        (0..s)
            .map(|a| (0..s).map(|b| powers[j][x][a] * powers[i - j][a][b]).collect())
            .collect()
    };
    let joint_pi: Vec<Vec<f64>> = (0..s)
        .map(|a| (0..s).map(|b| pi[a] * powers[i - j][a][b]).collect())
        .collect();
    let cdf = |m: &Vec<Vec<f64>>, t: f64, u: f64| -> f64 {
        let mut acc = 0.0;
        for a in 0..s {
            if f[a] > u {
                continue;
            }
            for b in 0..s {
                if f[b] <= t {
                    acc += m[a][b];
                }
            }
        }
        acc
    };
    (0..s)
        .map(|x| {
            let jx = joint_given(x);
            let mut sup = 0.0f64;
            for &t in &levels {
                for &u in &levels {
                    sup = sup.max((cdf(&jx, t, u) - cdf(&joint_pi, t, u)).abs());
                }
            }
            pi[x] * sup
        })
        .sum()
}

/// β₂,Y(k) for k = 1..=n_max, clamped to [0, 1] and nonincreasing.
///
/// Finite chains: exact, with the filtration of the chain and the supremum
/// over i truncated at j + 64. δ/υ chain: the bound 3∫(1 − |x|)^{⌊k/2⌋}π(dx)
/// on the absolute-regularity coefficient, which dominates β₂,Y.
pub fn beta2y_profile(model: &StationaryModel, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 {
        return argument("n_max must be ≥ 1");
    }
    let raw: Vec<f64> = match model {
        StationaryModel::Chain(c) => {
            let s = c.states();
            let top = n_max + PAIR_HORIZON;
            let mut powers = vec![(0..s).map(|x| (0..s).map(|y| if x == y { 1.0 } else { 0.0 }).collect::<Vec<f64>>()).collect::<Vec<_>>()];
            for _ in 0..top {
                let last = powers.last().expect("nonempty");
                let next: Vec<Vec<f64>> = (0..s)
                    .map(|x| (0..s).map(|y| (0..s).map(|a| last[x][a] * c.q(a, y)).sum()).collect())
                    .collect();
                powers.push(next);
            }
            // sup over i ≥ j of E b(F₀, i, j), then the suffix max over j ≥ k.
            let per_j: Vec<f64> = (1..=n_max)
                .map(|j| (j..=j + PAIR_HORIZON).map(|i| expected_b(c, &powers, i, j)).fold(0.0, f64::max))
                .collect();
            let mut out = per_j.clone();
            for k in (0..n_max - 1).rev() {
                out[k] = out[k].max(out[k + 1]);
            }
            out
        }
        StationaryModel::DeltaNu(d) => (1..=n_max).map(|k| d.beta2_bound(k).value).collect(),
        _ => {
            return Err(LabError::Unavailable(format!("β₂,Y is not available for {}", model.id())));
        }
    };
    let mut prev = 1.0f64;
    Ok(raw
        .into_iter()
        .map(|v| {
            prev = v.clamp(0.0, 1.0).min(prev);
            prev
        })
        .collect())
}

/// Fit of ln β(n) = c − a ln n − λ ln ln n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaDecayFit {
    pub grid: Vec<usize>,
    pub a: f64,
    pub a_ci: (f64, f64),
    pub lambda: f64,
    pub lambda_ci: (f64, f64),
}

/// Joint least-squares fit of the decay of the δ/υ absolute-regularity bound
/// (unclamped) on `grid`, every n ≥ 3.
pub fn beta_decay_fit(chain: &DeltaNuChain, grid: &[usize]) -> Result<BetaDecayFit> {
    if grid.len() < 4 || grid.iter().any(|&n| n < 3) {
        return argument("decay fit needs ≥ 4 horizons, all ≥ 3");
    }
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .map(|&n| {
            let l = (n as f64).ln();
            vec![1.0, -l, -l.ln()]
        })
        .collect();
    let y: Vec<f64> = grid.iter().map(|&n| chain.beta2_raw(n).ln()).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Numeric("β bound vanished on the grid".into()));
    }
    let fit = ols_multi(&rows, &y)?;
    Ok(BetaDecayFit {
        grid: grid.to_vec(),
        a: fit.coef[1],
        a_ci: fit.ci(1, 0.95),
        lambda: fit.coef[2],
        lambda_ci: fit.ci(2, 0.95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DeltaNuSpec;

    #[test]
    fn iid_has_zero_beta() {
        let m = StationaryModel::Chain(FiniteChain::coin());
        let b = beta2y_profile(&m, 8).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-15), "{b:?}");
    }

    #[test]
    fn dependent_chain_beta_is_monotone_and_geometric() {
        let m = StationaryModel::Chain(FiniteChain::eigen());
        let b = beta2y_profile(&m, 20).unwrap();
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
        assert!(b[0] > 0.0 && b[0] <= 1.0);
        // Two-state chain: every conditional law moves by 0.7^k.
        assert!((b[10] / b[9] - 0.7).abs() < 1e-6, "{}", b[10] / b[9]);
    }

    #[test]
    fn delta_nu_profile_is_clamped() {
        let d = DeltaNuChain::new(DeltaNuSpec::new(4.0, 5.0)).unwrap();
        let b = beta2y_profile(&StationaryModel::DeltaNu(d), 64).unwrap();
        assert!(b.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unsupported_models() {
        let a = crate::models::ArchProcess::geometric(1.0, 0.1, 0.5, 8, crate::models::Noise::Gaussian).unwrap();
        assert!(matches!(beta2y_profile(&StationaryModel::Arch(a), 4), Err(LabError::Unavailable(_))));
    }
}
