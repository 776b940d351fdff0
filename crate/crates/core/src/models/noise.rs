use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// Unit-variance, centered, symmetric innovation laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Noise {
    Gaussian,
    Rademacher,
    /// Uniform on [−√3, √3].
    Uniform,
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => StandardNormal.sample(rng),
            Noise::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Noise::Uniform => 3f64.sqrt() * (2.0 * rng.gen::<f64>() - 1.0),
        }
    }

    /// E|η|^p.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            Noise::Gaussian => 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt(),
            Noise::Rademacher => 1.0,
            Noise::Uniform => 3f64.powf(p / 2.0) / (p + 1.0),
        }
    }

    /// ‖η‖_p.
    pub fn p_norm(&self, p: f64) -> f64 {
        self.abs_moment(p).powf(1.0 / p)
    }

    pub fn parse(s: &str) -> Option<Noise> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Some(Noise::Gaussian),
            "rademacher" | "sign" => Some(Noise::Rademacher),
            "uniform" => Some(Noise::Uniform),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert!((Noise::Gaussian.abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((Noise::Gaussian.abs_moment(4.0) - 3.0).abs() < 1e-12);
        assert!((Noise::Uniform.abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((Noise::Uniform.abs_moment(4.0) - 1.8).abs() < 1e-12);
        assert_eq!(Noise::Rademacher.abs_moment(7.0), 1.0);
    }
}
