//! ARCH(∞) with a truncated coefficient sequence: Xₙ = σₙηₙ,
//! σₙ² = c + Σ_{j≤L} c_j X²_{n−j}.

use super::noise::Noise;
use crate::error::{LabError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchProcess {
    pub c: f64,
    /// c_1..c_L.
    pub coeffs: Vec<f64>,
    pub noise: Noise,
    pub burn_in: usize,
    /// Series depth ℓ used by [`ArchProcess::arch_sigma2`].
    pub depth: usize,
}

impl ArchProcess {
    pub fn new(c: f64, coeffs: Vec<f64>, noise: Noise) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(LabError::Construction(format!("level c = {c} must be ≥ 0")));
        }
        if coeffs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(LabError::Construction("ARCH coefficients must be ≥ 0".into()));
        }
        let s: f64 = coeffs.iter().sum();
        if s >= 1.0 {
            return Err(LabError::Construction(format!("Σc_j = {s} ≥ 1 has no stationary solution")));
        }
        let l = coeffs.len().max(1);
        Ok(ArchProcess {
            c,
            coeffs,
            noise,
            burn_in: 10 * l,
            depth: 8,
        })
    }

    /// c_j = κρ^{j−1} for j ≤ L.
    pub fn geometric(c: f64, kappa: f64, rho: f64, lags: usize, noise: Noise) -> Result<Self> {
        let coeffs = (0..lags).map(|j| kappa * rho.powi(j as i32)).collect();
        Self::new(c, coeffs, noise)
    }

    pub fn lags(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff_sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// ‖η₀‖_p² Σc_j, which must be below 1 for the moment condition.
    pub fn moment_index(&self, p: f64) -> f64 {
        self.noise.p_norm(p).powi(2) * self.coeff_sum()
    }

    pub fn satisfies_moment_condition(&self, p: f64) -> bool {
        self.moment_index(p) < 1.0
    }

    /// E X₀² = c / (1 − Σc_j).
    pub fn second_moment(&self) -> f64 {
        self.c / (1.0 - self.coeff_sum())
    }

    /// Truncated series solution for σ² from a noise window.
    ///
    /// `eta_past[m − 1]` holds η_{n−m} for m = 1..=L; chains of total lag above
    /// L or depth above `self.depth` are dropped.
    pub fn arch_sigma2(&self, eta_past: &[f64]) -> f64 {
        let l = self.lags().min(eta_past.len());
        if l == 0 {
            return self.c;
        }
        let e2: Vec<f64> = eta_past[..l].iter().map(|v| v * v).collect();
        // g[m] is the sum over lag chains of depth ℓ ending at total lag m.
        let mut g = vec![0.0; l + 1];
        for m in 1..=l {
            g[m] = self.coeffs[m - 1] * e2[m - 1];
        }
        let mut total: f64 = g.iter().sum();
        for _ in 1..self.depth {
            let mut next = vec![0.0; l + 1];
            for m in 2..=l {
                let mut acc = 0.0;
                for j in 1..m {
                    acc += self.coeffs[j - 1] * g[m - j];
                }
                next[m] = e2[m - 1] * acc;
            }
            g = next;
            total += g.iter().sum::<f64>();
        }
        self.c * (1.0 + total)
    }

    /// Geometric bound on what the depth truncation drops when every η² ≤ `eta2_max`.
    pub fn depth_truncation_bound(&self, eta2_max: f64) -> f64 {
        let r = self.coeff_sum() * eta2_max;
        if r >= 1.0 {
            return f64::INFINITY;
        }
        self.c * r.powi(self.depth as i32 + 1) / (1.0 - r)
    }

    /// ρ when c_j = c₁ρ^{j−1} for all j ≤ L (L ≥ 2), which allows O(1) updates.
    pub fn geometric_ratio(&self) -> Option<f64> {
        if self.coeffs.len() < 2 || self.coeffs[0] <= 0.0 {
            return None;
        }
        let r = self.coeffs[1] / self.coeffs[0];
        let ok = self
            .coeffs
            .windows(2)
            .all(|w| (w[1] - r * w[0]).abs() <= 1e-12 * w[0].abs().max(1e-300));
        ok.then_some(r)
    }

    /// σ² at every step of the sequence `y` (squared values, oldest first):
    /// out[t] = c + Σ_{j≤min(L,t)} c_j y[t−j], for t = 0..y.len() + 1.
    /// Positions t ≥ y.len() use `extend(t, σ²_t)` to create y[t].
    fn drive(&self, y: &mut Vec<f64>, total: usize, start: usize, mut extend: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
        let l = self.lags();
        let mut out = Vec::with_capacity(total.saturating_sub(start));
        match self.geometric_ratio() {
            Some(r) => {
                let c1 = self.coeffs[0];
                let rl = r.powi(l as i32);
                // g = Σ_{j=1}^{L} r^{j−1} y[t−j].
                let mut g = 0.0;
                for t in 0..total {
                    let s2 = self.c + c1 * g;
                    if t >= start {
                        out.push(s2);
                    }
                    if t >= y.len() {
                        let v = extend(t, s2);
                        y.push(v);
                    }
                    g = y[t] + r * g - if t >= l { rl * y[t - l] } else { 0.0 };
                }
            }
            None => {
                for t in 0..total {
                    let mut s2 = self.c;
                    for j in 1..=l.min(t) {
                        s2 += self.coeffs[j - 1] * y[t - j];
                    }
                    if t >= start {
                        out.push(s2);
                    }
                    if t >= y.len() {
                        let v = extend(t, s2);
                        y.push(v);
                    }
                }
            }
        }
        out
    }

    /// Simulate `len` values after burn-in from a zero history.
    /// Returns X values and the matching σ² values, oldest first.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> (Vec<f64>, Vec<f64>) {
        let total = self.burn_in + len;
        let mut xs = Vec::with_capacity(len);
        let mut y = Vec::with_capacity(total);
        let burn = self.burn_in;
        let sig = self.drive(&mut y, total, burn, |t, s2| {
            let x = s2.sqrt() * self.noise.sample(rng);
            if t >= burn {
                xs.push(x);
            }
            x * x
        });
        (xs, sig)
    }

    /// Exact E(σ_t² | F₀) for t = 1..=n given the squared history
    /// `x2_hist` = (…, X²_{−1}, X²_0), oldest first. Lags reaching before the
    /// supplied history count as zero.
    pub fn conditional_sigma2(&self, x2_hist: &[f64], n: usize) -> Vec<f64> {
        let l = self.lags();
        let h = x2_hist.len().min(l);
        let mut y: Vec<f64> = vec![0.0; l - h];
        y.extend_from_slice(&x2_hist[x2_hist.len() - h..]);
        let start = y.len();
        // E₀X²_t = E₀σ²_t since Eη² = 1.
        self.drive(&mut y, start + n, start, |_, s2| s2)
    }

    /// E(S_k² | F₀) = Σ_{t≤k} E₀σ_t² for each k of an ascending list.
    ///
    /// Once every conditional variance in the last L steps is within 1e-15
    /// (relative) of the stationary level, later steps add that level exactly.
    pub fn conditional_sum_sigma2(&self, x2_hist: &[f64], horizons: &[usize]) -> Vec<f64> {
        let Some(&kmax) = horizons.last() else {
            return vec![];
        };
        let mu = self.second_moment();
        let l = self.lags().max(1);
        let mut out = Vec::with_capacity(horizons.len());
        let mut chunk = 4 * l;
        loop {
            let n = kmax.min(chunk);
            let m = self.conditional_sigma2(x2_hist, n);
            let settled = n == kmax
                || m[n.saturating_sub(l)..].iter().all(|v| (v - mu).abs() <= 1e-15 * mu);
            if settled {
                let mut acc = 0.0;
                let mut t = 0;
                for &k in horizons {
                    while t < k.min(n) {
                        acc += m[t];
                        t += 1;
                    }
                    out.push(acc + (k.saturating_sub(n)) as f64 * mu);
                }
                return out;
            }
            chunk *= 4;
        }
    }
}
