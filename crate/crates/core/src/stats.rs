//! Small statistics toolkit: least squares with t intervals, the Mann–Kendall
//! trend test and a seeded percentile-free bootstrap.

use crate::error::{argument, LabError, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sided Student-t quantile t_{df, 1−(1−level)/2}.
pub fn t_quantile(df: f64, level: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub ci: (f64, f64),
    pub n: usize,
}

/// Simple regression of y on x with a 95% t interval for the slope.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let fit = ols_multi(
        &x.iter().map(|&v| vec![1.0, v]).collect::<Vec<_>>(),
        y,
    )?;
    let ci = fit.ci(1, 0.95);
    Ok(LinearFit {
        intercept: fit.coef[0],
        slope: fit.coef[1],
        slope_se: fit.se[1],
        ci,
        n: y.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub df: usize,
    pub residual_sd: f64,
}

impl MultiFit {
    /// Two-sided interval for coefficient `i`; degenerates to a point at df = 0.
    pub fn ci(&self, i: usize, level: f64) -> (f64, f64) {
        if self.df == 0 {
            return (self.coef[i], self.coef[i]);
        }
        let t = t_quantile(self.df as f64, level);
        (self.coef[i] - t * self.se[i], self.coef[i] + t * self.se[i])
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }
}

/// Least squares for an arbitrary design given row by row.
pub fn ols_multi(rows: &[Vec<f64>], y: &[f64]) -> Result<MultiFit> {
    let n = rows.len();
    if n != y.len() {
        return Err(LabError::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    let k = rows.first().map_or(0, |r| r.len());
    if k == 0 || n < k {
        return argument(format!("{n} observations cannot fit {k} coefficients"));
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let inv = xtx
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::Numeric("singular design matrix".into()))?;
    let beta = &inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;
    let df = n - k;
    let s2 = if df > 0 {
        resid.norm_squared() / df as f64
    } else {
        0.0
    };
    let se = (0..k).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect();
    Ok(MultiFit {
        coef: beta.iter().copied().collect(),
        se,
        df,
        residual_sd: s2.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Increasing,
    Decreasing,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub s: i64,
    pub z: f64,
    pub p_value: f64,
    pub trend: Trend,
}

/// Two-sided Mann–Kendall test at level `alpha`, with the tie-corrected variance.
pub fn mann_kendall(y: &[f64], alpha: f64) -> Result<MannKendall> {
    let n = y.len();
    if n < 3 {
        return argument("Mann–Kendall needs at least 3 observations");
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match y[j].partial_cmp(&y[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if var <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let p_value = 2.0 * (1.0 - normal_cdf(z.abs()));
    let trend = if p_value < alpha {
        if z > 0.0 {
            Trend::Increasing
        } else {
            Trend::Decreasing
        }
    } else {
        Trend::None
    };
    Ok(MannKendall {
        s,
        z,
        p_value,
        trend,
    })
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Bootstrap standard error of `stat` over `resamples` index resamples.
///
/// Each resample gets its own generator so the result does not depend on the
/// thread schedule.
pub fn bootstrap_se<F>(len: usize, resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    bootstrap_se_vec(len, resamples, seed, |idx| vec![stat(idx)])
        .pop()
        .unwrap_or(f64::NAN)
}

/// Componentwise bootstrap standard errors of a vector-valued statistic.
pub fn bootstrap_se_vec<F>(len: usize, resamples: usize, seed: u64, stat: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    if len == 0 || resamples < 2 {
        let d = stat(&(0..len).collect::<Vec<_>>()).len();
        return vec![f64::NAN; d];
    }
    let values: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let idx: Vec<usize> = (0..len).map(|_| rng.gen_range(0..len)).collect();
            stat(&idx)
        })
        .collect();
    let d = values[0].len();
    (0..d)
        .map(|i| {
            let col: Vec<f64> = values.iter().map(|v| v[i]).collect();
            let (_, se) = mean_se(&col);
            se * (resamples as f64).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-9);
    }

    #[test]
    fn ols_matches_hand_formula() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 2.5, 2.0, 4.5, 5.0];
        let mx = 2.0;
        let my = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - sxy / sxx).abs() < 1e-12);
        let resid: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - f.intercept - f.slope * a).powi(2))
            .sum();
        let se = (resid / 3.0 / sxx).sqrt();
        assert!((f.slope_se - se).abs() < 1e-12);
        let t = t_quantile(3.0, 0.95);
        assert!((t - 3.182446).abs() < 1e-5);
    }

    #[test]
    fn mann_kendall_detects_monotone_series() {
        let up: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(mann_kendall(&up, 0.05).unwrap().trend, Trend::Increasing);
        let flat = vec![1.0; 8];
        assert_eq!(mann_kendall(&flat, 0.05).unwrap().trend, Trend::None);
        let alt = [1.0, 3.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0];
        assert_eq!(mann_kendall(&alt, 0.05).unwrap().trend, Trend::None);
    }

    #[test]
    fn bootstrap_se_of_mean_is_close_to_analytic() {
        let data: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let (_, se) = mean_se(&data);
        let b = bootstrap_se(data.len(), 400, 7, |idx| {
            idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64
        });
        assert!((b / se - 1.0).abs() < 0.2, "{b} vs {se}");
        let again = bootstrap_se(data.len(), 400, 7, |idx| {
            idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64
        });
        assert_eq!(b, again);
    }
}
