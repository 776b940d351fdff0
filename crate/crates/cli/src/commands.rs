//! The five subcommands. Each returns whether the run passed and the
//! plain-text summary; reports go through [`OutDir`].

use crate::config::ExperimentConfig;
use crate::output::OutDir;
use crate::Failure;
use momentlab::density::{
    calibrate_density, check_density_bound, estimate_risk, frozen_risk_lower_bound, plot_script, rate_bandwidth, rate_fit,
    results_to_csv, DensityCalibration, DensityModel, DensityRiskResult, KernelKind, KernelSpec, RateFit,
};
use momentlab::functionals::{gordin_bounds, profile_delta_nu, profile_exact, profile_mc, v2_alpha, McOptions, ProjectiveProfile};
use momentlab::models::{sample_paths_with_history, FiniteChain, StationaryModel};
use momentlab::verifier::fuzz::{basic_suite, covbeta_suite, cross_suite, subadd_suite, FuzzSummary};
use momentlab::verifier::ratio::RatioOptions;
use momentlab::verifier::{
    bernstein_tail_check, calibrate_bernstein, check_ratio, BernsteinCalibration, BernsteinReport, ExplicitCheck,
    InequalityReport, RatioMode, Theorem,
};
use momentlab::LabError;
use serde::Serialize;
use std::fmt::Write as _;
use std::str::FromStr;

pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

type Run = std::result::Result<Outcome, Failure>;

fn ratio_mode(cfg: &ExperimentConfig) -> Result<RatioMode, LabError> {
    let (paths, seed) = (cfg.paths, cfg.seed);
    match cfg.mode.as_str() {
        "exact" => Ok(RatioMode::Exact),
        "mc" => Ok(RatioMode::Mc { paths, seed }),
        "auto" => Ok(RatioMode::Auto { paths, seed }),
        other => Err(LabError::Argument(format!("unknown mode '{other}' (exact, mc, auto)"))),
    }
}

fn chain_of(model: &StationaryModel, what: &str) -> Result<FiniteChain, LabError> {
    match model {
        StationaryModel::Chain(c) => Ok(c.clone()),
        other => Err(LabError::Unavailable(format!("{what} needs a finite chain, got {}", other.id()))),
    }
}

// ---------------------------------------------------------------- verify

pub fn verify(cfg: &ExperimentConfig, out: &OutDir) -> Run {
    // Resolve every id before any work so a typo fails fast.
    let theorems = cfg
        .theorems
        .iter()
        .map(|t| Theorem::from_str(t))
        .collect::<Result<Vec<_>, _>>()?;
    if theorems.is_empty() {
        return Err(LabError::Argument("verify needs --theorem".into()).into());
    }
    let mode = ratio_mode(cfg)?;
    let model = cfg.build_model()?;
    let mut reports: Vec<InequalityReport> = Vec::new();
    for th in theorems {
        let mut r = check_ratio(th, &model, cfg.p, &cfg.n_grid, mode.clone(), &RatioOptions::default())?;
        if let Some(tol) = cfg.tol {
            // Allow a slope up to `tol` at the lower end of the interval.
            let finite = r.ratio.iter().all(|v| v.is_finite());
            r.pass = finite && r.slope.as_ref().map_or(true, |s| s.ci.0 <= tol);
            r.notes.push(format!("slope threshold {tol}"));
        }
        let mut csv = String::from("n,lhs,lhs_se,rhs,ratio\n");
        for i in 0..r.grid.len() {
            let se = r.lhs_se.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
            let _ = writeln!(csv, "{},{},{},{},{}", r.grid[i], r.lhs[i], se, r.rhs[i], r.ratio[i]);
        }
        out.write(&format!("verify_{}.csv", th.id()), &csv)?;
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    out.report(cfg, pass, &reports)?;
    Ok(Outcome {
        pass,
        summary: reports.iter().map(InequalityReport::to_text).collect::<Vec<_>>().join("\n"),
    })
}

// ---------------------------------------------------------------- lemmas

#[derive(Serialize)]
struct LemmaResults {
    budget: usize,
    suites: Vec<FuzzSummary>,
    warnings: Vec<String>,
}

pub fn lemmas(cfg: &ExperimentConfig, out: &OutDir) -> Run {
    let budget = cfg.option_f64("budget", 1e5)? as usize;
    let inject = cfg.flag("inject_failure");
    let wanted: Vec<String> = cfg
        .option("suites")
        .unwrap_or("cross,basic,covbeta,subadd")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    // Exact spaces and arrays cost far more than scalar draws.
    let scaled = |div: usize| budget.div_ceil(div);
    let mut suites = Vec::new();
    for s in &wanted {
        match s.as_str() {
            "cross" => suites.extend(cross_suite(budget, cfg.seed)),
            "basic" => suites.push(basic_suite(scaled(200), cfg.seed)),
            "covbeta" => suites.push(covbeta_suite(scaled(200), cfg.seed)),
            "subadd" => suites.push(subadd_suite(scaled(100).max(inject as usize), cfg.seed, inject)),
            other => return Err(LabError::Argument(format!("unknown suite '{other}'")).into()),
        }
    }
    let mut warnings = vec![];
    if budget == 0 {
        warnings.push("budget 0: no instances drawn, the pass is vacuous".to_string());
    }
    if inject {
        warnings.push("failure injection enabled: the subadditivity suite is fed a corrupted array".to_string());
    }
    let pass = suites.iter().all(FuzzSummary::pass);
    let mut summary = String::new();
    for s in &suites {
        let _ = writeln!(
            summary,
            "{:<24} draws {:>7} checks {:>8} violations {:>4} max ratio {:.6}",
            s.name, s.draws, s.checks, s.violations, s.max_ratio
        );
        if let Some(w) = &s.witness {
            let _ = writeln!(summary, "  first violation: {w}");
        }
    }
    for w in &warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    let _ = writeln!(summary, "{}", if pass { "PASS" } else { "FAIL" });
    out.report(cfg, pass, LemmaResults { budget, suites, warnings })?;
    Ok(Outcome { pass, summary })
}

// ---------------------------------------------------------------- profile

#[derive(Serialize)]
struct ProfileResults {
    profiles: Vec<ProjectiveProfile>,
    agreement: Option<Vec<AgreementRow>>,
    v2: Option<f64>,
    alpha: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct AgreementRow {
    k: usize,
    quantity: &'static str,
    exact: f64,
    mc: f64,
    se: f64,
    agree: bool,
}

fn mc_profile(model: &StationaryModel, cfg: &ExperimentConfig, n: usize) -> Result<ProjectiveProfile, LabError> {
    let opts = McOptions { seed: cfg.seed, ..McOptions::default() };
    let ens = sample_paths_with_history(model, n, cfg.paths, opts.cond_dim, cfg.seed)?;
    profile_mc(&ens, cfg.p, opts)
}

fn exact_profile(model: &StationaryModel, p: f64, n: usize) -> Result<ProjectiveProfile, LabError> {
    match model {
        StationaryModel::Chain(c) => profile_exact(c, p, n),
        StationaryModel::DeltaNu(d) => profile_delta_nu(d, p, n),
        other => Err(LabError::Method(format!("no exact profile for {}", other.id()))),
    }
}

/// Exact and MC agree when they differ by at most 4 standard errors plus a
/// small absolute floor.
fn agreement(exact: &ProjectiveProfile, mc: &ProjectiveProfile) -> Vec<AgreementRow> {
    let se = mc.se.as_ref();
    let mut rows = vec![];
    for k in 1..=exact.n.min(mc.n) {
        let i = k - 1;
        let cols: [(&'static str, f64, f64, f64); 4] = [
            ("A", exact.a[i], mc.a[i], se.map_or(0.0, |s| s.a[i])),
            ("B", exact.b[i], mc.b[i], se.map_or(0.0, |s| s.b[i])),
            ("Bc", exact.bc[i], mc.bc[i], se.map_or(0.0, |s| s.bc[i])),
            ("var", exact.var[i], mc.var[i], se.map_or(0.0, |s| s.var[i])),
        ];
        for (q, e, m, s) in cols {
            rows.push(AgreementRow {
                k,
                quantity: q,
                exact: e,
                mc: m,
                se: s,
                agree: (e - m).abs() <= 4.0 * s + 1e-9 * e.abs().max(1.0),
            });
        }
    }
    rows
}

pub fn profile(cfg: &ExperimentConfig, out: &OutDir) -> Run {
    let model = cfg.build_model()?;
    let n = *cfg.n_grid.iter().max().expect("grid is nonempty");
    let dual = cfg.flag("dual");
    let mut profiles = vec![];
    let mut agree_rows = None;
    if dual {
        let e = exact_profile(&model, cfg.p, n)?;
        let m = mc_profile(&model, cfg, n)?;
        let rows = agreement(&e, &m);
        let mut csv = String::from("k,quantity,exact,mc,se,agree\n");
        for r in &rows {
            let _ = writeln!(csv, "{},{},{},{},{},{}", r.k, r.quantity, r.exact, r.mc, r.se, r.agree);
        }
        out.write("profile_agreement.csv", &csv)?;
        out.write("profile_exact.csv", &e.to_csv())?;
        out.write("profile_mc.csv", &m.to_csv())?;
        profiles.push(e);
        profiles.push(m);
        agree_rows = Some(rows);
    } else {
        let prof = match cfg.mode.as_str() {
            "exact" => exact_profile(&model, cfg.p, n)?,
            "mc" => mc_profile(&model, cfg, n)?,
            "auto" => match exact_profile(&model, cfg.p, n) {
                Err(LabError::Method(_)) | Err(LabError::Size { .. }) => mc_profile(&model, cfg, n)?,
                other => other?,
            },
            other => return Err(LabError::Argument(format!("unknown mode '{other}'")).into()),
        };
        out.write("profile.csv", &prof.to_csv())?;
        profiles.push(prof);
    }
    let (mut v2, mut alpha) = (None, None);
    if let StationaryModel::Chain(c) = &model {
        // v² is a series: sum it well past short profile horizons.
        let mut mix = v2_alpha(c, n.max(128))?;
        mix.alpha.truncate(n);
        let gordin = gordin_bounds(c, cfg.p, n)?;
        let mut csv = String::from("k,cov,alpha,gordin_var,gordin_condterm,gordin_varsquare\n");
        for k in 1..=n {
            let _ = writeln!(
                csv,
                "{k},{},{},{},{},{}",
                mix.cov[k], mix.alpha[k - 1], gordin.var[k - 1], gordin.condterm[k - 1], gordin.varsquare[k - 1]
            );
        }
        out.write("mixing.csv", &csv)?;
        v2 = Some(mix.v2);
        alpha = Some(mix.alpha);
    }
    let pass = agree_rows.as_ref().map_or(true, |r| r.iter().all(|r| r.agree));
    let mut summary = String::new();
    for p in &profiles {
        let _ = writeln!(summary, "profile ({:?}), p = {}, n = {}", p.mode, p.p, p.n);
        let _ = writeln!(summary, "{:>6} {:>14} {:>14} {:>14} {:>14}", "k", "A", "B", "Bc", "var");
        for i in 0..p.n.min(16) {
            let _ = writeln!(summary, "{:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}", i + 1, p.a[i], p.b[i], p.bc[i], p.var[i]);
        }
        if p.n > 16 {
            let _ = writeln!(summary, "   ... ({} rows in the CSV)", p.n);
        }
    }
    if let Some(rows) = &agree_rows {
        let bad = rows.iter().filter(|r| !r.agree).count();
        let _ = writeln!(summary, "exact/MC agreement: {} of {} cells disagree", bad, rows.len());
    }
    out.report(cfg, pass, ProfileResults { profiles, agreement: agree_rows, v2, alpha })?;
    Ok(Outcome { pass, summary })
}

// ---------------------------------------------------------------- density

#[derive(Serialize)]
struct DensityResults {
    model: String,
    kernel: KernelSpec,
    s: u32,
    target_slope: f64,
    results: Vec<DensityRiskResult>,
    iid: Option<Vec<DensityRiskResult>>,
    rate: Option<RateFit>,
    iid_rate: Option<RateFit>,
    rate_ok: Option<bool>,
    /// Exact lower bounds on the risk from never-jumping paths (δ/υ only).
    frozen_lower_bound: Option<Vec<f64>>,
    mc_consistent: Option<bool>,
    calibration: Option<DensityCalibration>,
    bound_check: Option<ExplicitCheck>,
    notes: Vec<String>,
}

fn density_model(cfg: &ExperimentConfig) -> Result<DensityModel, LabError> {
    if cfg.model == "uniform" {
        return Ok(DensityModel::Uniform { lo: 0.0, hi: 1.0 });
    }
    match cfg.build_model()? {
        StationaryModel::DeltaNu(d) => Ok(DensityModel::DeltaNu(d)),
        other => Err(LabError::Unavailable(format!(
            "density runs need a model with a known marginal density (delta_nu or uniform), got {}",
            other.id()
        ))),
    }
}

pub fn density(cfg: &ExperimentConfig, out: &OutDir) -> Run {
    let model = density_model(cfg)?;
    let kind = match cfg.option("kernel") {
        None => KernelKind::Triangular,
        Some(k) => KernelKind::parse(k).ok_or_else(|| LabError::Argument(format!("unknown kernel '{k}'")))?,
    };
    let kernel = KernelSpec::new(kind, cfg.p)?;
    let s = cfg.option_f64("s", 1.0)? as u32;
    if s == 0 {
        return Err(LabError::Argument("smoothness s must be ≥ 1".into()).into());
    }
    let fixed_h = cfg.option("h").map(|_| cfg.option_f64("h", 0.0)).transpose()?;
    let bandwidth = |n: usize| fixed_h.unwrap_or_else(|| rate_bandwidth(n, s));
    let target = -(s as f64) * cfg.p / (2.0 * s as f64 + 1.0);
    let tol = cfg.tol.unwrap_or(0.15);
    let mut notes = vec![];
    let run = |m: &DensityModel, seed: u64| -> Result<Vec<DensityRiskResult>, LabError> {
        cfg.n_grid.iter().map(|&n| estimate_risk(m, &kernel, n, bandwidth(n), cfg.p, cfg.paths, seed)).collect()
    };
    let results = run(&model, cfg.seed)?;
    let iid = if cfg.flag("iid_baseline") { Some(run(&model.iid_control(), cfg.seed ^ 0x11d)?) } else { None };

    let fit = |r: &[DensityRiskResult], notes: &mut Vec<String>, what: &str| match rate_fit(r) {
        Ok(f) => Some(f),
        Err(LabError::Argument(msg)) => {
            notes.push(format!("{what} rate fit skipped: {msg}"));
            None
        }
        Err(e) => {
            notes.push(format!("{what} rate fit failed: {e}"));
            None
        }
    };
    let rate = fit(&results, &mut notes, "dependent");
    let iid_rate = iid.as_deref().and_then(|r| fit(r, &mut notes, "i.i.d."));
    if fixed_h.is_some() && rate.is_some() {
        notes.push("fixed bandwidth: the slope is not the rate-optimal one".into());
    }
    let rate_ok = rate.as_ref().map(|f| (f.slope - target).abs() <= tol * target.abs());

    let (frozen, mc_consistent) = match &model {
        DensityModel::DeltaNu(d) => {
            let lb: Vec<f64> = results.iter().map(|r| frozen_risk_lower_bound(d, &kernel, r.n, r.h, cfg.p)).collect();
            let ok = results.iter().zip(&lb).all(|(r, b)| r.risk + 3.0 * r.se.unwrap_or(0.0) >= *b);
            if !ok {
                notes.push("Monte Carlo risk falls below the exact no-jump lower bound: rare long runs are unresolved".into());
            }
            (Some(lb), Some(ok))
        }
        _ => (None, None),
    };
    let (calibration, bound_check) = match &iid {
        Some(c) if cfg.p >= 4.0 && !matches!(model, DensityModel::Uniform { .. }) => {
            let cal = calibrate_density(c, cfg.option_f64("safety", 4.0)?)?;
            let check = check_density_bound(&results, &cal);
            (Some(cal), Some(check))
        }
        _ => (None, None),
    };

    let csv = results_to_csv(&results, iid.as_deref());
    out.write("density.csv", &csv)?;
    out.write("density_plot.py", &plot_script("density.csv", target))?;

    let pass = rate_ok.unwrap_or(true) && mc_consistent.unwrap_or(true) && bound_check.as_ref().map_or(true, |c| c.pass);
    let mut summary = String::new();
    let _ = writeln!(summary, "density risk, {} kernel, p = {}, N = {}", kind.id(), cfg.p, cfg.paths);
    let _ = writeln!(summary, "{:>8} {:>10} {:>14} {:>12} {:>14}", "n", "h", "risk", "se", "bias");
    for r in &results {
        let se = r.se.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(summary, "{:>8} {:>10.5} {:>14.6e} {:>12} {:>14.6e}", r.n, r.h, r.risk, se, r.bias);
    }
    if let Some(f) = &rate {
        let _ = writeln!(
            summary,
            "slope {:.4} (95% CI {:.4} .. {:.4}), target {:.4} ± {:.0}%",
            f.slope,
            f.ci.0,
            f.ci.1,
            target,
            100.0 * tol
        );
    }
    if let Some(f) = &iid_rate {
        let _ = writeln!(summary, "i.i.d. control slope {:.4} (95% CI {:.4} .. {:.4})", f.slope, f.ci.0, f.ci.1);
    }
    if let Some(c) = &bound_check {
        let _ = writeln!(summary, "bound with calibrated constants: {}", if c.pass { "holds" } else { "violated" });
    }
    for n in notes.iter().chain(results.iter().flat_map(|r| r.notes.iter()).take(1)) {
        let _ = writeln!(summary, "note: {n}");
    }
    let _ = writeln!(summary, "{}", if pass { "PASS" } else { "FAIL" });
    out.report(
        cfg,
        pass,
        DensityResults {
            model: match &model {
                DensityModel::Uniform { .. } => "uniform(0,1)".into(),
                m => m.id(),
            },
            kernel,
            s,
            target_slope: target,
            results,
            iid,
            rate,
            iid_rate,
            rate_ok,
            frozen_lower_bound: frozen,
            mc_consistent,
            calibration,
            bound_check,
            notes,
        },
    )?;
    Ok(Outcome { pass, summary })
}

// ---------------------------------------------------------------- bernstein

#[derive(Serialize)]
struct BernsteinResults {
    calibration: BernsteinCalibration,
    report: BernsteinReport,
    se_slack: f64,
}

pub fn bernstein(cfg: &ExperimentConfig, out: &OutDir) -> Run {
    let chain = chain_of(&cfg.build_model()?, "the Bernstein check")?;
    let z: Vec<f64> = match cfg.option("z") {
        None => (1..=12).map(|i| 0.5 * i as f64).collect(),
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| LabError::Argument(format!("bad z value '{t}'"))))
            .collect::<Result<_, _>>()?,
    };
    let safety = cfg.option_f64("safety", 4.0)?;
    let cal = calibrate_bernstein(&cfg.n_grid, &z, cfg.paths, cfg.seed ^ 0xca1, safety)?;
    let mut rep = bernstein_tail_check(&chain, &cal, &cfg.n_grid, &z, cfg.paths, cfg.seed)?;
    let slack = cfg.tol.unwrap_or(3.0);
    for r in rep.rows.iter_mut() {
        r.ok = r.empirical <= r.bound + slack * r.se;
    }
    rep.violations = rep.rows.iter().filter(|r| r.included && !r.ok).count();
    rep.pass = rep.violations == 0;
    let mut csv = String::from("n,x,z,included,empirical,se,bound,ok\n");
    for r in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", r.n, r.x, r.z, r.included, r.empirical, r.se, r.bound, r.ok);
    }
    out.write("bernstein.csv", &csv)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "Bernstein tail: M = {}, v² = {:.6}, α rate {:.5}, K = {:.4}, C = {:.6} (raw {:.6} / {})",
        rep.m, rep.v2, rep.rate, rep.k, cal.c, cal.c_raw, cal.safety
    );
    let _ = writeln!(summary, "{} grid points with x > K ln n, {} violations", rep.checked, rep.violations);
    for n in &rep.notes {
        let _ = writeln!(summary, "note: {n}");
    }
    let pass = rep.pass;
    let _ = writeln!(summary, "{}", if pass { "PASS" } else { "FAIL" });
    out.report(cfg, pass, BernsteinResults { calibration: cal, report: rep, se_slack: slack })?;
    Ok(Outcome { pass, summary })
}
