//! Inequality checks: explicit-constant lemmas and maximal inequalities are
//! evaluated exactly, the ≪-inequalities are reduced to a ratio sequence whose
//! boundedness is tested.

pub mod bernstein;
pub mod diagnostics;
pub mod fuzz;
pub mod lemmas;
pub mod maximal;
pub mod ratio;
pub mod rhs;

pub use bernstein::{bernstein_bound, bernstein_tail_check, calibrate_bernstein, BernsteinCalibration, BernsteinReport};
pub use diagnostics::{comment2_check, delta1_check, lp_max_convergence, scale_covariance, LpMaxDiagnostic};
pub use lemmas::{check_basic, check_covbeta, check_cross, check_subadd, CrossVariant, StepFn, SubaddItem};
pub use maximal::{check_maximal_explicit, check_maximal_proba, Phi};
pub use ratio::{check_ratio, slope_test, RatioMode, RatioOptions, SlopeTest};
pub use rhs::{rhs_build, RhsExtra, RhsScale, Theorem};

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Relative tolerance for exact explicit-constant checks.
pub const EXACT_REL_TOL: f64 = 1e-9;

/// lhs ≤ rhs up to [`EXACT_REL_TOL`]; 0 ≤ 0 passes.
pub fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + EXACT_REL_TOL * rhs.abs().max(lhs.abs()) + 1e-300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl CheckRow {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        CheckRow {
            label: label.into(),
            lhs,
            rhs,
            ok: holds(lhs, rhs),
        }
    }

    /// Also accepts lhs ≤ rhs + slack, for sides computed with cancellation.
    pub fn with_slack(label: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let mut row = CheckRow::new(label, lhs, rhs);
        row.ok = row.ok || lhs <= rhs + slack;
        row
    }
}

/// Outcome of an explicit-constant check: every row must hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCheck {
    pub name: String,
    pub rows: Vec<CheckRow>,
    pub pass: bool,
    /// Named intermediate quantities (correction sums and the like).
    pub values: Vec<Term>,
    pub notes: Vec<String>,
}

impl ExplicitCheck {
    pub fn new(name: impl Into<String>, rows: Vec<CheckRow>) -> Self {
        let pass = rows.iter().all(|r| r.ok);
        ExplicitCheck {
            name: name.into(),
            rows,
            pass,
            values: vec![],
            notes: vec![],
        }
    }

    pub fn row(&self, label: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

/// Named additive right-hand-side components at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    pub n: usize,
    pub terms: Vec<Term>,
}

impl RhsTerms {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|t| t.value).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub p: f64,
    pub grid: Vec<usize>,
    pub lhs: Vec<f64>,
    /// Monte Carlo standard errors of the left side, when estimated.
    pub lhs_se: Option<Vec<f64>>,
    pub rhs_terms: Vec<RhsTerms>,
    pub rhs: Vec<f64>,
    pub ratio: Vec<f64>,
    pub explicit_constant: Option<f64>,
    /// max over the grid of lhs/rhs.
    pub implied_constant_estimate: f64,
    pub slope: Option<SlopeTest>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl InequalityReport {
    /// Plain-text table, one line per grid point.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} (p = {})", self.name, self.p);
        let _ = writeln!(s, "{:>8} {:>14} {:>14} {:>12}", "n", "lhs", "rhs", "ratio");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                s,
                "{:>8} {:>14.6e} {:>14.6e} {:>12.6}",
                self.grid[i], self.lhs[i], self.rhs[i], self.ratio[i]
            );
        }
        if let Some(t) = &self.slope {
            let _ = writeln!(
                s,
                "log n slope {:.4} (95% CI {:.4} .. {:.4})",
                t.slope, t.ci.0, t.ci.1
            );
        }
        let _ = writeln!(s, "implied constant ≈ {:.6}", self.implied_constant_estimate);
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "{}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

/// lhs/rhs with the 0/0 = 0 convention; a positive lhs over a zero rhs is +∞.
pub fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
