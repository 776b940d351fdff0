//! L^p-integrated risk of kernel density estimators under dependence.
//!
//! Densities are discretized by cell averages on a fixed grid: the estimator
//! averaged over a cell is a difference of the kernel's antiderivative, so
//! every realized f_n integrates to one exactly (up to rounding), and the
//! grid does not depend on the data.

pub mod beta;
pub mod kernel;

pub use beta::{beta2y_profile, beta_decay_fit, BetaDecayFit};
pub use kernel::{KernelKind, KernelSpec};

use crate::error::{argument, domain, LabError, Result};
use crate::models::{path_rng, DeltaNuChain};
use crate::stats::{mean_se, ols};
use crate::verifier::{CheckRow, ExplicitCheck, Term};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Default number of spatial cells.
pub const DEFAULT_CELLS: usize = 2048;
/// Cells per bandwidth at least, whatever the default.
const CELLS_PER_H: f64 = 32.0;
/// Sub-cells per cell for the quadrature of E f_n.
const SUBCELLS: usize = 4;

/// Samplers with a known marginal density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityModel {
    /// Y_k = ζ_k for the δ/υ chain started from π.
    DeltaNu(DeltaNuChain),
    /// Independent draws from the same π.
    IidPi(DeltaNuChain),
    /// Independent uniforms on [lo, hi].
    Uniform { lo: f64, hi: f64 },
}

impl DensityModel {
    pub fn id(&self) -> String {
        match self {
            DensityModel::DeltaNu(d) => format!("delta_nu(a={},lambda={},taper={})", d.spec.a, d.spec.lambda, d.spec.taper),
            DensityModel::IidPi(d) => format!("iid_pi(a={},lambda={},taper={})", d.spec.a, d.spec.lambda, d.spec.taper),
            DensityModel::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        }
    }

    /// The i.i.d. control with the same marginal.
    pub fn iid_control(&self) -> DensityModel {
        match self {
            DensityModel::DeltaNu(d) => DensityModel::IidPi(d.clone()),
            other => other.clone(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            DensityModel::DeltaNu(_) | DensityModel::IidPi(_) => (-1.0, 1.0),
            DensityModel::Uniform { lo, hi } => (*lo, *hi),
        }
    }

    /// Marginal mass of [a, b].
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match self {
            DensityModel::DeltaNu(d) | DensityModel::IidPi(d) => d.pi_mass(a, b),
            DensityModel::Uniform { lo, hi } => (b.min(*hi) - a.max(*lo)).max(0.0) / (hi - lo),
        }
    }

    /// ‖f‖_∞ (from the grid for the δ/υ law).
    pub fn density_sup(&self) -> f64 {
        match self {
            DensityModel::DeltaNu(d) | DensityModel::IidPi(d) => d.pi_density_sup(),
            DensityModel::Uniform { lo, hi } => 1.0 / (hi - lo),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match self {
            DensityModel::DeltaNu(d) => {
                let mut x = d.sample_pi(rng);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    x = d.step(x, rng);
                    out.push(x);
                }
                out
            }
            DensityModel::IidPi(d) => (0..n).map(|_| d.sample_pi(rng)).collect(),
            DensityModel::Uniform { lo, hi } => (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRiskResult {
    pub n: usize,
    pub h: f64,
    pub p: f64,
    pub reps: usize,
    /// E∫|f_n − E f_n|^p
    pub risk: f64,
    /// Standard error of `risk`; undefined for a single replicate.
    pub se: Option<f64>,
    /// ∫|f − E f_n|^p
    pub bias: f64,
    /// (nh)^{−p}∫E|Σ(K((x − Y_i)/h) − E K((x − Y_i)/h))|^p dx from pointwise
    /// evaluation at cell midpoints, computed separately from `risk`.
    pub pointwise_risk: f64,
    /// Constant-free right-hand terms (p ≥ 4 only).
    pub rhs_terms: Vec<Term>,
    /// Largest |∫f_n − 1| over the replicates.
    pub mass_error: f64,
    pub density_sup: f64,
    pub cells: usize,
    pub notes: Vec<String>,
}

impl DensityRiskResult {
    pub fn total(&self) -> f64 {
        self.risk + self.bias
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs_terms.iter().map(|t| t.value).sum()
    }
}

/// Cell edges lo + i·dx, i = 0..=cells, covering the support widened by 2h.
fn spatial_grid(model: &DensityModel, h: f64) -> (f64, f64, usize) {
    let (a, b) = model.support();
    let lo = a - 2.0 * h;
    let width = b - a + 4.0 * h;
    let cells = DEFAULT_CELLS.max((width / h * CELLS_PER_H).ceil() as usize);
    (lo, width / cells as f64, cells)
}

/// Add (1/n)·cell averages of K_h(· − y) into `acc`.
fn add_cell_average(kind: KernelKind, y: f64, weight: f64, h: f64, lo: f64, dx: f64, acc: &mut [f64]) {
    let cells = acc.len();
    let first = (((y - h - lo) / dx).floor().max(0.0) as usize).min(cells);
    let last = (((y + h - lo) / dx).ceil().max(0.0) as usize).min(cells);
    if first >= last {
        return;
    }
    let mut prev = kind.cdf((lo + first as f64 * dx - y) / h);
    for (i, slot) in acc.iter_mut().enumerate().take(last).skip(first) {
        let next = kind.cdf((lo + (i + 1) as f64 * dx - y) / h);
        *slot += weight * (next - prev) / dx;
        prev = next;
    }
}

/// Add weight·K((x_i − y)/h) at the cell midpoints x_i.
fn add_pointwise(kind: KernelKind, y: f64, weight: f64, h: f64, lo: f64, dx: f64, acc: &mut [f64]) {
    let cells = acc.len();
    let first = (((y - h - lo) / dx - 0.5).floor().max(0.0) as usize).min(cells);
    let last = (((y + h - lo) / dx + 0.5).ceil().max(0.0) as usize).min(cells);
    for (i, slot) in acc.iter_mut().enumerate().take(last).skip(first) {
        *slot += weight * kind.eval((lo + (i as f64 + 0.5) * dx - y) / h);
    }
}

/// Marginal mass of the sub-cells and their midpoints.
fn marginal_atoms(model: &DensityModel, lo: f64, dx: f64, cells: usize) -> Vec<(f64, f64)> {
    let dy = dx / SUBCELLS as f64;
    (0..cells * SUBCELLS)
        .filter_map(|j| {
            let a = lo + j as f64 * dy;
            let m = model.mass(a, a + dy);
            (m > 0.0).then_some((a + 0.5 * dy, m))
        })
        .collect()
}

/// Monte Carlo L^p risk of the kernel estimator over `reps` replicates.
pub fn estimate_risk(
    model: &DensityModel,
    kernel: &KernelSpec,
    n: usize,
    h: f64,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<DensityRiskResult> {
    if !(h > 0.0) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    if n < 1 {
        return domain("n must be ≥ 1");
    }
    if !(p >= 1.0) {
        return domain(format!("risk needs p ≥ 1, got {p}"));
    }
    if reps == 0 {
        return argument("need at least one replicate");
    }
    let kind = kernel.kind;
    let (lo, dx, cells) = spatial_grid(model, h);
    let atoms = marginal_atoms(model, lo, dx, cells);
    // E f_n by cell averages and pointwise, and the true cell averages.
    let mut mean_avg = vec![0.0; cells];
    let mut mean_pt = vec![0.0; cells];
    for &(y, m) in &atoms {
        add_cell_average(kind, y, m, h, lo, dx, &mut mean_avg);
        add_pointwise(kind, y, m, h, lo, dx, &mut mean_pt);
    }
    let truth: Vec<f64> = (0..cells)
        .map(|i| model.mass(lo + i as f64 * dx, lo + (i + 1) as f64 * dx) / dx)
        .collect();
    let bias = dx * truth.iter().zip(&mean_avg).map(|(f, e)| (f - e).abs().powf(p)).sum::<f64>();

    let nf = n as f64;
    let per_rep: Vec<(f64, f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = path_rng(seed, r);
            let ys = model.sample(&mut rng, n);
            let mut avg = vec![0.0; cells];
            let mut pt = vec![0.0; cells];
            for &y in &ys {
                add_cell_average(kind, y, 1.0 / nf, h, lo, dx, &mut avg);
                add_pointwise(kind, y, 1.0, h, lo, dx, &mut pt);
            }
            let risk = dx * avg.iter().zip(&mean_avg).map(|(a, e)| (a - e).abs().powf(p)).sum::<f64>();
            let pointwise = (nf * h).powf(-p)
                * dx
                * pt.iter().zip(&mean_pt).map(|(s, e)| (s - nf * e).abs().powf(p)).sum::<f64>();
            let mass = (dx * avg.iter().sum::<f64>() - 1.0).abs();
            (risk, pointwise, mass)
        })
        .collect();
    let risks: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let (risk, se) = mean_se(&risks);
    let pointwise_risk = mean_se(&per_rep.iter().map(|r| r.1).collect::<Vec<_>>()).0;
    let mass_error = per_rep.iter().map(|r| r.2).fold(0.0, f64::max);
    let density_sup = model.density_sup();
    let mut notes = Vec::new();
    let se = if reps < 2 {
        notes.push("single replicate: standard error undefined".into());
        None
    } else {
        Some(se)
    };
    let mut rhs_terms = Vec::new();
    if p >= 4.0 && kernel.p == p {
        let nh = nf * h;
        let tv = kernel.total_variation;
        rhs_terms.push(Term {
            name: "variance".into(),
            value: nh.powf(-p / 2.0) * tv.powf(p / 2.0) * density_sup.powf(p / 2.0 - 1.0) * kernel.l1.powf(p / 2.0),
        });
        rhs_terms.push(Term {
            name: "higher".into(),
            value: nh.powf(1.0 - p) * (kernel.lp + tv * kernel.lp1 + tv * tv * kernel.lp2),
        });
    } else {
        notes.push("bound terms need p ≥ 4 and a kernel built for this p".into());
    }
    Ok(DensityRiskResult {
        n,
        h,
        p,
        reps,
        risk,
        se,
        bias,
        pointwise_risk,
        rhs_terms,
        mass_error,
        density_sup,
        cells,
        notes,
    })
}

/// Lower bound on E∫|f_n − E f_n|^p for the δ/υ chain from paths that never
/// jump: with probability ∫(1 − |x|)^n π(dx) every Y_k equals Y₁ = x, so f_n
/// is K_h(· − x), and on [x − h, x + h]
/// ‖K_h(· − x) − E f_n‖_p ≥ ‖K_h‖_p − ‖f‖_∞∫|K|·(2h)^{1/p}.
///
/// The no-jump probability takes (1 − e)^n at each cell's upper edge, which
/// is below the cell average.
pub fn frozen_risk_lower_bound(chain: &DeltaNuChain, kernel: &KernelSpec, n: usize, h: f64, p: f64) -> f64 {
    let stay: f64 = chain
        .pi
        .iter()
        .zip(&chain.edges[1..])
        .map(|(w, e)| w * (1.0 - e).powf(n as f64))
        .sum();
    let kh = h.powf(1.0 / p - 1.0) * kernel.kind.abs_power_integral(p).powf(1.0 / p);
    let mean = chain.pi_density_sup() * kernel.l1 * (2.0 * h).powf(1.0 / p);
    stay * (kh - mean).max(0.0).powf(p)
}

/// h_n = n^{−1/(2s+1)}.
pub fn rate_bandwidth(n: usize, s: u32) -> f64 {
    (n as f64).powf(-1.0 / (2.0 * s as f64 + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of ln(risk + bias) on ln n.
pub fn rate_fit(results: &[DensityRiskResult]) -> Result<RateFit> {
    let mut ns: Vec<usize> = results.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 || ns[ns.len() - 1] < 4 * ns[0] {
        return argument("rate fit needs ≥ 4 distinct n spanning at least a factor 4");
    }
    let (x, y): (Vec<f64>, Vec<f64>) = results
        .iter()
        .map(|r| ((r.n as f64).ln(), r.total().max(f64::MIN_POSITIVE).ln()))
        .unzip();
    let fit = ols(&x, &y)?;
    Ok(RateFit {
        slope: fit.slope,
        se: fit.slope_se,
        ci: fit.ci,
        points: results.len(),
    })
}

/// Common constant C₁ = C₂ = max over the calibration grid of risk over the
/// constant-free bound, from i.i.d. runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCalibration {
    pub c: f64,
    pub safety: f64,
    pub ratios: Vec<(usize, f64)>,
}

pub fn calibrate_density(iid: &[DensityRiskResult], safety: f64) -> Result<DensityCalibration> {
    if iid.is_empty() || iid.iter().any(|r| r.rhs_terms.is_empty()) {
        return Err(LabError::Unavailable("calibration needs results with bound terms (p ≥ 4)".into()));
    }
    let ratios: Vec<(usize, f64)> = iid.iter().map(|r| (r.n, r.risk / r.rhs_total())).collect();
    let c = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(DensityCalibration { c, safety, ratios })
}

/// risk ≤ safety·C·(terms) at every result.
pub fn check_density_bound(results: &[DensityRiskResult], cal: &DensityCalibration) -> ExplicitCheck {
    let rows = results
        .iter()
        .map(|r| CheckRow::new(format!("n={}", r.n), r.risk, cal.safety * cal.c * r.rhs_total()))
        .collect();
    ExplicitCheck::new("density_bound", rows)
}

/// CSV with columns n,h,risk,se,bias,rhs_total and, when given, the i.i.d.
/// control columns iid_risk,iid_se,iid_bias.
pub fn results_to_csv(results: &[DensityRiskResult], iid: Option<&[DensityRiskResult]>) -> String {
    let mut s = String::from("n,h,risk,se,bias,rhs_total");
    if iid.is_some() {
        s.push_str(",iid_risk,iid_se,iid_bias");
    }
    s.push('\n');
    let fmt_se = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for (i, r) in results.iter().enumerate() {
        let _ = write!(s, "{},{:e},{:e},{},{:e},{:e}", r.n, r.h, r.risk, fmt_se(r.se), r.bias, r.rhs_total());
        if let Some(c) = iid.and_then(|v| v.get(i)) {
            let _ = write!(s, ",{:e},{},{:e}", c.risk, fmt_se(c.se), c.bias);
        }
        s.push('\n');
    }
    s
}

/// A matplotlib script plotting log total risk against log n from the CSV.
pub fn plot_script(csv_name: &str, target_slope: f64) -> String {
    format!(
        r#"# Plots the density risk table written next to this file.
# Columns: n,h,risk,se,bias,rhs_total[,iid_risk,iid_se,iid_bias]
import csv
import math
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv_name}")))
n = [float(r["n"]) for r in rows]
total = [float(r["risk"]) + float(r["bias"]) for r in rows]
plt.loglog(n, total, "o-", label="risk + bias")
if rows and "iid_risk" in rows[0]:
    iid = [float(r["iid_risk"]) + float(r["iid_bias"]) for r in rows]
    plt.loglog(n, iid, "s--", label="i.i.d. control")
ref = [total[0] * (x / n[0]) ** ({target_slope}) for x in n]
plt.loglog(n, ref, "k:", label="slope {target_slope:.4}")
plt.xlabel("n")
plt.ylabel("integrated L^p risk")
plt.legend()
plt.savefig("{csv_name}.png", dpi=120)
"#
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DeltaNuSpec;

    fn tapered() -> DeltaNuChain {
        let mut spec = DeltaNuSpec::new(4.0, 5.0);
        spec.taper = 2.0;
        DeltaNuChain::new(spec).unwrap()
    }

    #[test]
    fn estimator_integrates_to_one_and_bias_is_small() {
        let m = DensityModel::Uniform { lo: 0.0, hi: 1.0 };
        let k = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        let r = estimate_risk(&m, &k, 200, 0.1, 4.0, 8, 1).unwrap();
        assert!(r.mass_error < 1e-9, "{}", r.mass_error);
        assert!(r.risk > 0.0 && r.bias > 0.0 && r.se.is_some());
    }

    #[test]
    fn single_replicate_flags_se() {
        let m = DensityModel::Uniform { lo: 0.0, hi: 1.0 };
        let k = KernelSpec::new(KernelKind::Rectangular, 4.0).unwrap();
        let r = estimate_risk(&m, &k, 50, 0.2, 4.0, 1, 1).unwrap();
        assert!(r.se.is_none() && r.notes.iter().any(|n| n.contains("undefined")));
        assert!(estimate_risk(&m, &k, 50, 0.0, 4.0, 1, 1).is_err());
        assert!(estimate_risk(&m, &k, 0, 0.1, 4.0, 1, 1).is_err());
    }

    #[test]
    fn translation_invariance() {
        let k = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        let a = estimate_risk(&DensityModel::Uniform { lo: 0.0, hi: 1.0 }, &k, 100, 0.1, 4.0, 6, 3).unwrap();
        let b = estimate_risk(&DensityModel::Uniform { lo: 5.0, hi: 6.0 }, &k, 100, 0.1, 4.0, 6, 3).unwrap();
        assert!((a.risk - b.risk).abs() <= 1e-6 * a.risk, "{} {}", a.risk, b.risk);
        assert!((a.bias - b.bias).abs() <= 1e-6 * a.bias);
    }

    #[test]
    fn iid_uniform_rectangular_matches_the_independent_case() {
        // i.i.d. uniform, rectangular kernel: away from the edges
        // 2nh f_n(x) is Binomial(n, 2h), so E|f_n − E f_n|^4 is the fourth
        // central binomial moment over (2nh)^4.
        let (n, h) = (400usize, 0.05);
        let k = KernelSpec::new(KernelKind::Rectangular, 4.0).unwrap();
        let r = estimate_risk(&DensityModel::Uniform { lo: 0.0, hi: 1.0 }, &k, n, h, 4.0, 400, 5).unwrap();
        let (nf, q) = (n as f64, 2.0 * h);
        let m4 = nf * q * (1.0 - q) * (1.0 + 3.0 * (nf - 2.0) * q * (1.0 - q));
        let full = m4 / (2.0 * nf * h).powi(4);
        // Interior [h, 1 − h] carries the full value; the edge strips less.
        let interior = (1.0 - 2.0 * h) * full;
        assert!(r.pointwise_risk > 0.95 * interior && r.pointwise_risk < 1.05 * full, "{} vs {interior}", r.pointwise_risk);
        // Cell averaging can only lower the L^p norm.
        assert!(r.risk <= r.pointwise_risk * (1.0 + 1e-2));
    }

    #[test]
    fn risk_decreases_in_n_on_the_chain() {
        let m = DensityModel::DeltaNu(tapered());
        let k = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        let r: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&n| estimate_risk(&m, &k, n, 0.2, 4.0, 40, 7).unwrap().risk)
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn frozen_bound_sits_below_the_risk_where_mc_resolves_it() {
        // Small n: no-jump paths are common enough for MC to see them.
        let t = tapered();
        let k = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        let (n, h) = (16, 0.3);
        let lb = frozen_risk_lower_bound(&t, &k, n, h, 4.0);
        let r = estimate_risk(&DensityModel::DeltaNu(t), &k, n, h, 4.0, 4000, 2).unwrap();
        assert!(lb > 0.0 && lb < r.risk, "{lb} vs {}", r.risk);
        // Decreasing in n.
        let c = tapered();
        assert!(frozen_risk_lower_bound(&c, &k, 64, h, 4.0) < lb);
    }

    #[test]
    fn rate_fit_contract() {
        let mk = |n: usize, v: f64| DensityRiskResult {
            n,
            h: 0.1,
            p: 4.0,
            reps: 2,
            risk: v,
            se: None,
            bias: 0.0,
            pointwise_risk: v,
            rhs_terms: vec![],
            mass_error: 0.0,
            density_sup: 1.0,
            cells: 1,
            notes: vec![],
        };
        let flat: Vec<_> = [16, 32, 64, 128].iter().map(|&n| mk(n, 0.5)).collect();
        assert!(rate_fit(&flat).unwrap().slope.abs() < 1e-12);
        let pow: Vec<_> = [16, 32, 64, 128].iter().map(|&n| mk(n, (n as f64).powf(-4.0 / 3.0))).collect();
        assert!((rate_fit(&pow).unwrap().slope + 4.0 / 3.0).abs() < 1e-12);
        assert!(rate_fit(&flat[..3]).is_err());
    }

    #[test]
    fn csv_and_script() {
        let k = KernelSpec::new(KernelKind::Triangular, 4.0).unwrap();
        let m = DensityModel::Uniform { lo: 0.0, hi: 1.0 };
        let r = vec![estimate_risk(&m, &k, 50, 0.2, 4.0, 3, 1).unwrap()];
        let csv = results_to_csv(&r, Some(&r));
        assert!(csv.starts_with("n,h,risk,se,bias,rhs_total,iid_risk,iid_se,iid_bias\n"));
        assert_eq!(csv.lines().count(), 2);
        assert!(plot_script("risk.csv", -4.0 / 3.0).contains("risk.csv"));
    }
}
