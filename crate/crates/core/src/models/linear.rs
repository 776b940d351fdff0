//! Functionals of a truncated linear process:
//! X_k = h(Σ_i a_i ε_{k−i}) − E h(·), with a power-law h.

use super::noise::Noise;
use crate::error::{LabError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// h(x) = |x|^{α+γ}·sign(x) (odd) or |x|^{α+γ} (even).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PowerH {
    Odd { alpha: f64, gamma: f64 },
    Even { alpha: f64, gamma: f64 },
}

impl PowerH {
    pub fn exponent(&self) -> f64 {
        match *self {
            PowerH::Odd { alpha, gamma } | PowerH::Even { alpha, gamma } => alpha + gamma,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let v = x.abs().powf(self.exponent());
        match self {
            PowerH::Odd { .. } => v * x.signum(),
            PowerH::Even { .. } => v,
        }
    }

    /// (C, γ, α) with w_h(t, M) ≤ C t^γ M^α on [−M, M].
    ///
    /// With s = α + γ: for s ≥ 1 the mean value theorem gives C = s·2^{1−γ} ≤ 2s,
    /// and for s < 1 the s-Hölder bound gives C = 2^{1−γ}.
    pub fn modulus(&self) -> (f64, f64, f64) {
        let (alpha, gamma) = match *self {
            PowerH::Odd { alpha, gamma } | PowerH::Even { alpha, gamma } => (alpha, gamma),
        };
        let s = alpha + gamma;
        let c = if s >= 1.0 { 2.0 * s } else { 2f64.powf(1.0 - gamma) };
        (c, gamma, alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctionalProcess {
    /// a_{−lead}, …, a_0, …, a_{W}: index i ↦ coeffs[i + lead].
    pub coeffs: Vec<f64>,
    pub lead: usize,
    pub h: PowerH,
    pub noise: Noise,
    mean: f64,
}

impl LinearFunctionalProcess {
    pub fn new(coeffs: Vec<f64>, lead: usize, h: PowerH, noise: Noise) -> Result<Self> {
        if coeffs.is_empty() || lead >= coeffs.len() {
            return Err(LabError::Construction("coefficient window must contain a_0".into()));
        }
        let (_, g, a) = h.modulus();
        if !(g > 0.0 && g <= 1.0 && a >= 0.0) {
            return Err(LabError::Construction("need γ ∈ (0, 1] and α ≥ 0".into()));
        }
        let mean = match h {
            PowerH::Odd { .. } => 0.0,
            PowerH::Even { .. } => {
                if noise != Noise::Gaussian {
                    return Err(LabError::Construction(
                        "even h needs Gaussian noise for an exact centering constant".into(),
                    ));
                }
                let sd = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = h.exponent();
                sd.powf(s) * 2f64.powf(s / 2.0) * gamma((s + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
        };
        Ok(LinearFunctionalProcess {
            coeffs,
            lead,
            h,
            noise,
            mean,
        })
    }

    /// a_i = (i + 1)^{−decay} for i = 0..window, causal.
    pub fn power_decay(decay: f64, window: usize, h: PowerH, noise: Noise) -> Result<Self> {
        let coeffs = (0..window).map(|i| ((i + 1) as f64).powf(-decay)).collect();
        Self::new(coeffs, 0, h, noise)
    }

    pub fn centering(&self) -> f64 {
        self.mean
    }

    pub fn square_sum(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum()
    }

    /// Partial sums Σ_{i≥1} i^{1−2/p}(log i)^λ(Σ_{j≥i} a_j²)^{γ/2} over the window.
    pub fn holder_series(&self, p: f64, lambda: f64) -> f64 {
        let (_, gamma, _) = self.h.modulus();
        let causal = &self.coeffs[self.lead..];
        let mut tail: Vec<f64> = vec![0.0; causal.len() + 1];
        for i in (0..causal.len()).rev() {
            tail[i] = tail[i + 1] + causal[i] * causal[i];
        }
        (1..causal.len())
            .map(|i| {
                let fi = i as f64;
                fi.powf(1.0 - 2.0 / p) * fi.ln().powf(lambda) * tail[i].powf(gamma / 2.0)
            })
            .sum()
    }

    /// Simulate `len` consecutive values.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<f64> {
        let w = self.coeffs.len();
        let eps: Vec<f64> = (0..len + w).map(|_| self.noise.sample(rng)).collect();
        // X_k uses ε_{k−i} for i ∈ [−lead, W − lead); position of ε_k is k + W − 1 − lead.
        (0..len)
            .map(|k| {
                let base = k + w - 1 - self.lead;
                let v: f64 = self
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, a)| a * eps[base + self.lead - idx])
                    .sum();
                self.h.eval(v) - self.mean
            })
            .collect()
    }
}
