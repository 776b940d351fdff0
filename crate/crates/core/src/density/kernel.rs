//! Compactly supported kernels on [−1, 1] with closed-form integrals.

use crate::error::{domain, LabError, Result};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// 1/2 on [−1, 1].
    Rectangular,
    /// 1 − |u|.
    Triangular,
    /// (15/16)(1 − u²)².
    Quartic,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Rectangular, KernelKind::Triangular, KernelKind::Quartic];

    pub fn id(&self) -> &'static str {
        match self {
            KernelKind::Rectangular => "rectangular",
            KernelKind::Triangular => "triangular",
            KernelKind::Quartic => "quartic",
        }
    }

    pub fn parse(s: &str) -> Option<KernelKind> {
        KernelKind::ALL.iter().copied().find(|k| k.id() == s.trim().to_ascii_lowercase())
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::Rectangular => 0.5,
            KernelKind::Triangular => 1.0 - u.abs(),
            KernelKind::Quartic => {
                let v = 1.0 - u * u;
                15.0 / 16.0 * v * v
            }
        }
    }

    /// ∫_{−∞}^u K.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match self {
            KernelKind::Rectangular => (u + 1.0) / 2.0,
            KernelKind::Triangular => {
                if u <= 0.0 {
                    (1.0 + u) * (1.0 + u) / 2.0
                } else {
                    1.0 - (1.0 - u) * (1.0 - u) / 2.0
                }
            }
            KernelKind::Quartic => 0.5 + 15.0 / 16.0 * (u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0),
        }
    }

    /// ∫|K|^q for q ≥ 0.
    pub fn abs_power_integral(&self, q: f64) -> f64 {
        match self {
            KernelKind::Rectangular => 2f64.powf(1.0 - q),
            KernelKind::Triangular => 2.0 / (q + 1.0),
            // ∫(1 − u²)^m du = B(1/2, m + 1).
            KernelKind::Quartic => (15.0f64 / 16.0).powf(q) * beta(0.5, 2.0 * q + 1.0),
        }
    }

    /// ‖dK‖: total variation of K.
    pub fn total_variation(&self) -> f64 {
        match self {
            KernelKind::Rectangular => 1.0,
            KernelKind::Triangular => 2.0,
            KernelKind::Quartic => 15.0 / 8.0,
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            KernelKind::Rectangular | KernelKind::Triangular => 1,
            KernelKind::Quartic => 2,
        }
    }
}

/// A kernel with the integrals its risk bound needs at moment order p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub p: f64,
    pub total_variation: f64,
    /// ∫|K|
    pub l1: f64,
    /// ∫|K|^p
    pub lp: f64,
    /// ∫|K|^{p−1}
    pub lp1: f64,
    /// ∫|K|^{p−2}
    pub lp2: f64,
    pub order: u32,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, p: f64) -> Result<Self> {
        if !(p >= 2.0) {
            return domain(format!("kernel integrals need p ≥ 2, got {p}"));
        }
        let spec = KernelSpec {
            kind,
            p,
            total_variation: kind.total_variation(),
            l1: kind.abs_power_integral(1.0),
            lp: kind.abs_power_integral(p),
            lp1: kind.abs_power_integral(p - 1.0),
            lp2: kind.abs_power_integral(p - 2.0),
            order: kind.order(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Recompute every stored integral by quadrature and require agreement
    /// within 1e-6.
    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        let checks = [
            ("∫|K|", self.l1, quad(|u| k.eval(u).abs())),
            ("∫|K|^p", self.lp, quad(|u| k.eval(u).abs().powf(self.p))),
            ("∫|K|^(p-1)", self.lp1, quad(|u| k.eval(u).abs().powf(self.p - 1.0))),
            ("∫|K|^(p-2)", self.lp2, quad(|u| k.eval(u).abs().powf(self.p - 2.0))),
            ("‖dK‖", self.total_variation, variation(|u| k.eval(u))),
        ];
        for (name, stored, q) in checks {
            if !stored.is_finite() || (stored - q).abs() > 1e-6 * stored.abs().max(1.0) {
                return Err(LabError::Numeric(format!(
                    "{} {name}: stored {stored}, quadrature {q}",
                    k.id()
                )));
            }
        }
        Ok(())
    }
}

/// Gauss–Legendre (5 points) on 4000 panels of each half of [−1, 1]; the
/// kernels are smooth away from 0 and ±1.
fn quad(f: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683, -0.538_469_310_105_683, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
        0.236_926_885_056_189,
    ];
    let panels = 4000;
    let mut total = 0.0;
    for (lo, hi) in [(-1.0, 0.0), (0.0, 1.0)] {
        let w = (hi - lo) / panels as f64;
        for i in 0..panels {
            let c = lo + (i as f64 + 0.5) * w;
            total += X.iter().zip(&W).map(|(x, wt)| wt * f(c + 0.5 * w * x)).sum::<f64>() * 0.5 * w;
        }
    }
    total
}

/// Σ|K(u_{i+1}) − K(u_i)| on a fine grid extended past the support.
fn variation(f: impl Fn(f64) -> f64) -> f64 {
    let m = 200_000;
    let (lo, hi) = (-1.5, 1.5);
    // The jumps of the rectangular kernel sit exactly at ±1: evaluate just
    // inside and outside.
    let mut pts: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    pts.extend([-1.0 - 1e-12, -1.0, 1.0, 1.0 + 1e-12]);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.windows(2).map(|w| (f(w[1]) - f(w[0])).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_match_quadrature() {
        for k in KernelKind::ALL {
            for p in [2.0, 2.5, 4.0, 6.0] {
                KernelSpec::new(k, p).unwrap();
            }
            assert!((k.abs_power_integral(1.0) - 1.0).abs() < 1e-12, "{k:?} is normalized");
            assert!((k.cdf(1.0) - 1.0).abs() < 1e-15 && k.cdf(-1.0) == 0.0);
        }
    }

    #[test]
    fn cdf_is_the_antiderivative() {
        for k in KernelKind::ALL {
            for i in 0..40 {
                let u = -0.975 + 0.05 * i as f64;
                let d = 1e-6;
                let num = (k.cdf(u + d) - k.cdf(u - d)) / (2.0 * d);
                assert!((num - k.eval(u)).abs() < 1e-6, "{k:?} at {u}");
            }
        }
    }

    #[test]
    fn hand_values() {
        let t = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        assert!((t.lp - 0.4).abs() < 1e-15 && (t.lp1 - 0.5).abs() < 1e-15 && (t.lp2 - 2.0 / 3.0).abs() < 1e-15);
        let r = KernelSpec::new(KernelKind::Rectangular, 4.0).unwrap();
        assert_eq!(r.lp, 0.125);
        assert!(KernelSpec::new(KernelKind::Quartic, 1.5).is_err());
    }
}
