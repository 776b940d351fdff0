//! The reversible chain on [−1, 1] that stays put with probability 1 − |x| and
//! otherwise jumps to a fresh draw from a symmetric law υ.
//!
//! υ is piecewise constant on log-spaced cells of (0, 1], so the stationary
//! law π(dx) = θ⁻¹|x|⁻¹υ(dx) has density ∝ 1/x inside each cell and can be
//! sampled exactly. All quadratures use the geometric cell midpoints.

use crate::error::{LabError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaNuSpec {
    /// Power of x in the υ density; the moment order p corresponds to p/2 − 1.
    pub a: f64,
    /// Power of the log(1 + 1/x) damping.
    pub lambda: f64,
    /// Extra factor (1 − x)^taper; 0 keeps the density as is.
    pub taper: f64,
    pub cells: usize,
    pub lower: f64,
    /// Observable f(x) = scale·sign(x)|x|^{1/2}.
    pub f_scale: f64,
}

impl DeltaNuSpec {
    pub fn new(p: f64, lambda: f64) -> Self {
        DeltaNuSpec {
            a: p / 2.0 - 1.0,
            lambda,
            taper: 0.0,
            cells: 4096,
            lower: 1e-14,
            f_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaNuChain {
    pub spec: DeltaNuSpec,
    /// Cell edges e₀ < … < e_K on (0, 1].
    pub edges: Vec<f64>,
    /// Geometric midpoints.
    pub nodes: Vec<f64>,
    /// υ mass of each cell on the positive half (sums to 1).
    pub nu: Vec<f64>,
    /// π mass of each cell on the positive half (sums to 1).
    pub pi: Vec<f64>,
    /// θ = ∫|x|⁻¹υ(dx).
    pub theta: f64,
    nu_cum: Vec<f64>,
    pi_cum: Vec<f64>,
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

impl DeltaNuChain {
    pub fn new(spec: DeltaNuSpec) -> Result<Self> {
        if spec.cells < 16 || !(spec.lower > 0.0 && spec.lower < 1e-3) {
            return Err(LabError::Construction("grid needs ≥ 16 cells and a small positive lower edge".into()));
        }
        if spec.a < 0.0 || spec.lambda < 0.0 || spec.taper < 0.0 {
            return Err(LabError::Construction("υ exponents must be nonnegative".into()));
        }
        let k = spec.cells;
        let ratio = (1.0 / spec.lower).ln() / k as f64;
        let edges: Vec<f64> = (0..=k)
            .map(|i| if i == k { 1.0 } else { spec.lower * (ratio * i as f64).exp() })
            .collect();
        let nodes: Vec<f64> = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
        let mut nu: Vec<f64> = nodes
            .iter()
            .zip(edges.windows(2))
            .map(|(&m, w)| {
                m.powf(spec.a) * (1.0 + 1.0 / m).ln().powf(-spec.lambda) * (1.0 - m).powf(spec.taper) * (w[1] - w[0])
            })
            .collect();
        let total: f64 = nu.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(LabError::Construction("υ has no mass".into()));
        }
        nu.iter_mut().for_each(|v| *v /= total);
        let mut pi: Vec<f64> = nu
            .iter()
            .zip(edges.windows(2))
            .map(|(&v, w)| v / (w[1] - w[0]) * (w[1] / w[0]).ln())
            .collect();
        let theta: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= theta);
        let nu_cum = cumulative(&nu);
        let pi_cum = cumulative(&pi);
        Ok(DeltaNuChain {
            spec,
            edges,
            nodes,
            nu,
            pi,
            theta,
            nu_cum,
            pi_cum,
        })
    }

    /// Odd observable sign(x)·scale·|x|^{1/2}.
    pub fn f(&self, x: f64) -> f64 {
        self.spec.f_scale * x.signum() * x.abs().sqrt()
    }

    /// f on the positive nodes.
    pub fn f_nodes(&self) -> Vec<f64> {
        self.nodes.iter().map(|&x| self.f(x)).collect()
    }

    /// Total π mass of the grid (1 up to rounding).
    pub fn pi_total(&self) -> f64 {
        self.pi.iter().sum()
    }

    /// E(f(ζ_k) | ζ₀ = x) = (1 − |x|)^k f(x) at the positive nodes.
    pub fn delta_nu_cond(&self, k: usize) -> Vec<f64> {
        self.nodes.iter().map(|&x| (1.0 - x).powi(k as i32) * self.f(x)).collect()
    }

    /// The same map evaluated at an arbitrary point.
    pub fn cond_at(&self, x: f64, k: usize) -> f64 {
        (1.0 - x.abs()).powi(k as i32) * self.f(x)
    }

    /// One application of Q to an even function given on the positive nodes.
    pub fn apply_q_even(&self, h: &[f64]) -> Vec<f64> {
        let jump: f64 = self.nu.iter().zip(h).map(|(a, b)| a * b).sum();
        self.nodes
            .iter()
            .zip(h)
            .map(|(&x, &v)| (1.0 - x) * v + x * jump)
            .collect()
    }

    /// ∫ g dπ for an even g given on the positive nodes.
    pub fn pi_expect(&self, g: &[f64]) -> f64 {
        self.pi.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    /// ∫₀¹ f(x)² x⁻² υ(dx) relative to the normalized half of υ.
    pub fn variance_integral(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.nu)
            .map(|(&x, &v)| self.f(x).powi(2) / (x * x) * v)
            .sum()
    }

    /// Raw 3∫(1 − |x|)^{⌊n/2⌋}π(dx), before clamping.
    pub fn beta2_raw(&self, n: usize) -> f64 {
        let e = (n / 2) as i32;
        3.0 * self
            .nodes
            .iter()
            .zip(&self.pi)
            .map(|(&x, &w)| w * (1.0 - x).powi(e))
            .sum::<f64>()
    }

    /// The absolute regularity bound clamped to [0, 1], with a note when the
    /// grid is too coarse near zero to resolve it.
    pub fn beta2_bound(&self, n: usize) -> BetaBound {
        let raw = self.beta2_raw(n);
        let e = (n / 2) as f64;
        // The bottom cell must stay essentially un-decayed for the quadrature
        // to resolve (1 − x)^e there.
        let warning = if e * self.edges[1] > 1e-3 {
            Some(format!("grid lower edge {} too coarse for n = {n}", self.edges[0]))
        } else {
            None
        };
        BetaBound {
            n,
            value: raw.clamp(0.0, 1.0),
            raw,
            warning,
        }
    }

    fn draw_cell<R: Rng + ?Sized>(&self, cum: &[f64], rng: &mut R) -> usize {
        let t = rng.gen::<f64>() * cum[cum.len() - 1];
        cum.partition_point(|&c| c <= t).min(cum.len() - 1)
    }

    fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    /// Exact draw from π.
    pub fn sample_pi<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = self.draw_cell(&self.pi_cum, rng);
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        let u: f64 = rng.gen();
        Self::sign(rng) * lo * (hi / lo).powf(u)
    }

    /// Exact draw from υ.
    pub fn sample_nu<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = self.draw_cell(&self.nu_cum, rng);
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        Self::sign(rng) * (lo + (hi - lo) * rng.gen::<f64>())
    }

    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        if rng.gen::<f64>() < x.abs() {
            self.sample_nu(rng)
        } else {
            x
        }
    }

    /// Density of π at x (both signs), piecewise ∝ 1/|x|.
    pub fn pi_density(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.edges[0] || ax > 1.0 {
            return 0.0;
        }
        let i = self.edges.partition_point(|&e| e < ax).saturating_sub(1).min(self.pi.len() - 1);
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        0.5 * self.pi[i] / ((hi / lo).ln() * ax)
    }

    /// ∫_a^b π-density over [a, b] ⊂ [−1, 1], exact for the piecewise law.
    pub fn pi_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let half = |t: f64| -> f64 {
            // mass of (0, t] on the positive half, t ≥ 0
            if t <= self.edges[0] {
                return 0.0;
            }
            let t = t.min(1.0);
            let i = self.edges.partition_point(|&e| e < t).saturating_sub(1).min(self.pi.len() - 1);
            let below: f64 = self.pi_cum.get(i.wrapping_sub(1)).copied().unwrap_or(0.0);
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            below + self.pi[i] * ((t / lo).ln() / (hi / lo).ln()).clamp(0.0, 1.0)
        };
        let cdf = |t: f64| -> f64 {
            if t >= 0.0 {
                0.5 + 0.5 * half(t)
            } else {
                0.5 - 0.5 * half(-t)
            }
        };
        cdf(b) - cdf(a)
    }

    /// sup of the π density, attained at the bottom cell.
    pub fn pi_density_sup(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.pi)
            .map(|(w, &m)| 0.5 * m / ((w[1] / w[0]).ln() * w[0]))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBound {
    pub n: usize,
    pub value: f64,
    pub raw: f64,
    pub warning: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> DeltaNuChain {
        DeltaNuChain::new(DeltaNuSpec::new(4.0, 5.0)).unwrap()
    }

    #[test]
    fn pi_is_normalized() {
        let c = chain();
        assert!((c.pi_total() - 1.0).abs() < 1e-8);
        assert!((c.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.theta.is_finite() && c.theta > 0.0);
    }

    #[test]
    fn pi_is_invariant_for_q() {
        // ∫ Qh dπ = ∫ h dπ for even h.
        let c = chain();
        let h: Vec<f64> = c.nodes.iter().map(|x| (3.0 * x).cos() + x * x).collect();
        let qh = c.apply_q_even(&h);
        assert!((c.pi_expect(&qh) - c.pi_expect(&h)).abs() < 1e-12);
    }

    #[test]
    fn conditional_mean_examples() {
        let c = chain();
        assert_eq!(c.delta_nu_cond(0), c.f_nodes());
        assert!((c.cond_at(0.5, 2) - 0.25 * c.f(0.5)).abs() < 1e-15);
        assert_eq!(c.cond_at(1.0, 1), 0.0);
        assert_eq!(c.cond_at(-1.0, 3), 0.0);
    }

    #[test]
    fn beta_bound_small_n_clamped_and_monotone() {
        let c = chain();
        assert_eq!(c.beta2_bound(1).value, 1.0);
        assert!((c.beta2_bound(1).raw - 3.0 * c.pi_total()).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16, 64, 256, 1024, 4096] {
            let b = c.beta2_bound(n).value;
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn conditional_mean_matches_simulation() {
        let c = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0 = 0.3;
        let k = 3;
        let m = 200_000;
        let vals: Vec<f64> = (0..m)
            .map(|_| {
                let mut x = x0;
                for _ in 0..k {
                    x = c.step(x, &mut rng);
                }
                c.f(x)
            })
            .collect();
        let (mean, se) = crate::stats::mean_se(&vals);
        assert!((mean - c.cond_at(x0, k)).abs() < 4.0 * se, "{mean} vs {}", c.cond_at(x0, k));
    }

    #[test]
    fn pi_mass_matches_cells() {
        let c = chain();
        assert!((c.pi_mass(-1.0, 1.0) - 1.0).abs() < 1e-9);
        assert!((c.pi_mass(0.0, 1.0) - 0.5).abs() < 1e-9);
        let (a, b) = (0.01, 0.2);
        let n = 200_000;
        let mut h = 1e-7;
        let mut s = 0.0;
        let mut x = a;
        let step = (b - a) / n as f64;
        while x < b {
            s += c.pi_density(x + 0.5 * step) * step;
            x += step;
        }
        h += s;
        assert!((c.pi_mass(a, b) - h).abs() < 1e-4);
    }
}
