//! Right-hand sides of the ≪-inequalities as named additive terms, built from a
//! projective profile. No implied constant is applied here.

use super::{RhsTerms, Term};
use crate::error::{domain, precondition, LabError, Result};
use crate::functionals::{ProfileMode, ProjectiveProfile};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Direct Rosenthal bound for adapted stationary sequences, p > 2.
    DirectProp,
    /// The same bound with dyadic sums.
    Dyadic,
    /// Two-sided conditioning, even p ≥ 4.
    StatEven,
    /// Two-sided conditioning through square roots, p > 2.
    PInteger,
    /// Martingale differences, even p ≥ 4.
    Mart2,
    /// Conditionally symmetric martingale differences (same right side as Mart2).
    Tangent,
    /// Martingale approximation bound, even p ≥ 4.
    General,
    /// Burkholder-type consequence, p > 2.
    Burkholder,
    /// Covariance and λ form, stated for the L^p norm.
    ConsDirect,
    /// Covariance and λ form with k^{p−2+ε}.
    ConsDirect2,
    /// ARCH(∞) martingale bound.
    CorArch,
    /// Functions of linear processes, even p ≥ 4.
    ThLin,
    /// Reversible chains, even p ≥ 4.
    Rev,
    /// Reversible chains, real p > 2.
    RevGen,
    /// The δ/υ chain: n + n^{p/2}(∫f²x⁻²υ(dx))^{p/2}.
    Cor2Markov,
}

/// Whether the inequality bounds E max|S|^p or ‖max|S|‖_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhsScale {
    Moment,
    Norm,
}

impl Theorem {
    pub const ALL: [Theorem; 15] = [
        Theorem::DirectProp,
        Theorem::Dyadic,
        Theorem::StatEven,
        Theorem::PInteger,
        Theorem::Mart2,
        Theorem::Tangent,
        Theorem::General,
        Theorem::Burkholder,
        Theorem::ConsDirect,
        Theorem::ConsDirect2,
        Theorem::CorArch,
        Theorem::ThLin,
        Theorem::Rev,
        Theorem::RevGen,
        Theorem::Cor2Markov,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Theorem::DirectProp => "directprop",
            Theorem::Dyadic => "dyadic",
            Theorem::StatEven => "stateven",
            Theorem::PInteger => "pinteger",
            Theorem::Mart2 => "mart2",
            Theorem::Tangent => "tangent",
            Theorem::General => "general",
            Theorem::Burkholder => "burkholder",
            Theorem::ConsDirect => "consdirect",
            Theorem::ConsDirect2 => "consdirect2",
            Theorem::CorArch => "corarch",
            Theorem::ThLin => "thlin",
            Theorem::Rev => "rev",
            Theorem::RevGen => "revgen",
            Theorem::Cor2Markov => "cor2markov",
        }
    }

    pub fn scale(&self) -> RhsScale {
        match self {
            Theorem::ConsDirect => RhsScale::Norm,
            _ => RhsScale::Moment,
        }
    }

    fn needs_even(&self) -> bool {
        matches!(
            self,
            Theorem::StatEven | Theorem::Mart2 | Theorem::Tangent | Theorem::General | Theorem::ThLin | Theorem::Rev
        )
    }

    pub fn check_p(&self, p: f64) -> Result<()> {
        if self.needs_even() {
            if !(p >= 4.0 && p.fract() == 0.0 && (p as i64) % 2 == 0) {
                return domain(format!("{} needs an even integer p ≥ 4, got {p}", self.id()));
            }
        } else if !(p > 2.0) {
            return domain(format!("{} needs p > 2, got {p}", self.id()));
        }
        Ok(())
    }

    /// Uses Ē (reversed-time) quantities.
    pub fn needs_reversal(&self) -> bool {
        matches!(self, Theorem::StatEven | Theorem::PInteger)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Theorem::ALL
            .iter()
            .copied()
            .find(|t| t.id() == key)
            .or(match key.as_str() {
                "cor2markovchain" => Some(Theorem::Cor2Markov),
                "dyaticform" => Some(Theorem::Dyadic),
                _ => None,
            })
            .ok_or_else(|| LabError::Argument(format!("unknown theorem id '{s}'")))
    }
}

/// Inputs some right sides need beyond the profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RhsExtra {
    /// (n, ‖D₀ⁿ‖_p^p) for the martingale approximation bound.
    pub d0n_moment: Vec<(usize, f64)>,
    /// E(X₀X_k) for k = 0, 1, …; derived from the profile variances when absent.
    pub cov: Option<Vec<f64>>,
    /// ‖E₀(X_k)‖_p for k = 1, 2, ….
    pub cond_x: Option<Vec<f64>>,
    /// λ(k) for k = 1, 2, ….
    pub lambda: Option<Vec<f64>>,
    /// (log k)^γ power; default 0 for p ≤ 3 and p − 3 + 0.01 above.
    pub gamma: Option<f64>,
    /// ε of the k^{p−2+ε} form; default 0.01.
    pub epsilon: Option<f64>,
    /// ∫₀¹ f²(x)x⁻²υ(dx).
    pub upsilon_integral: Option<f64>,
    /// Overrides c in the direct bounds (1 below p = 4, 0 from p = 4 on).
    pub c_override: Option<f64>,
}

/// δ = min(1, 1/(p − 2)).
pub fn delta_of(p: f64) -> f64 {
    (1.0 / (p - 2.0)).min(1.0)
}

/// c = 1 for p < 4 and 0 for p ≥ 4.
pub fn c_of(p: f64) -> f64 {
    if p < 4.0 {
        1.0
    } else {
        0.0
    }
}

fn sum_to(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    crate::finite_space::compensated_sum((1..=n).map(f))
}

fn term(name: &str, value: f64) -> Term {
    Term {
        name: name.into(),
        value,
    }
}

/// E(X₀X_k) from the second differences of E(S_k²).
pub fn covariances_from_var(var: &[f64]) -> Vec<f64> {
    let v = |k: usize| if k == 0 { 0.0 } else { var[k - 1] };
    let mut c = vec![v(1)];
    for k in 1..var.len() {
        c.push((v(k + 1) - 2.0 * v(k) + v(k - 1)) / 2.0);
    }
    c
}

fn need<'a>(v: &'a Option<Vec<f64>>, n: usize, what: &str) -> Result<&'a [f64]> {
    match v {
        Some(x) if x.len() >= n => Ok(x),
        Some(x) => Err(LabError::Unavailable(format!("{what} has {} entries, {n} needed", x.len()))),
        None => Err(LabError::Unavailable(format!("{what} not supplied"))),
    }
}

/// Named terms of `theorem` at every n of `grid`.
pub fn rhs_build(theorem: Theorem, profile: &ProjectiveProfile, extra: &RhsExtra, grid: &[usize]) -> Result<Vec<RhsTerms>> {
    let p = profile.p;
    theorem.check_p(p)?;
    let nmax = grid.iter().copied().max().unwrap_or(0);
    if nmax > profile.n {
        return Err(LabError::Argument(format!(
            "profile covers k ≤ {}, grid needs {nmax}",
            profile.n
        )));
    }
    if grid.contains(&0) {
        return Err(LabError::Argument("grid must not contain 0".into()));
    }
    let delta = delta_of(p);
    let c = extra.c_override.unwrap_or_else(|| c_of(p));
    let mom = profile.moment_p;
    let (a, b, bc, var) = (&profile.a, &profile.b, &profile.bc, &profile.var);
    let kf = |k: usize| k as f64;

    if matches!(theorem, Theorem::Mart2 | Theorem::Tangent) && profile.mode == ProfileMode::Exact {
        let amax = a[..nmax].iter().fold(0.0f64, |m, v| m.max(*v));
        if amax > 1e-9 * profile.x_norm().max(1.0) * nmax as f64 {
            return precondition(format!(
                "{} needs martingale differences, ‖E₀(S_k)‖_p reaches {amax}",
                theorem.id()
            ));
        }
    }
    let (abar, bbar) = if theorem.needs_reversal() {
        let miss = || LabError::Unavailable(format!("{} needs reversed-time (Ē) profile entries", theorem.id()));
        (
            profile.abar.as_ref().ok_or_else(miss)?,
            profile.bbar.as_ref().ok_or_else(miss)?,
        )
    } else {
        (a, b)
    };
    let cov = match (&extra.cov, theorem) {
        (Some(c), _) => c.clone(),
        (None, Theorem::ConsDirect | Theorem::ConsDirect2) => covariances_from_var(var),
        _ => vec![],
    };
    let gamma = extra.gamma.unwrap_or(if p <= 3.0 { 0.0 } else { p - 3.0 + 0.01 });
    let eps = extra.epsilon.unwrap_or(0.01);
    let mart_e = 4.0 / (p * (p - 2.0));
    let mart_pow = p * (p - 2.0) / 4.0;

    grid.iter()
        .map(|&n| {
            let nf = n as f64;
            let terms = match theorem {
                Theorem::DirectProp => vec![
                    term("moment", nf * mom),
                    term("projective", c * nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * a[k - 1]).powf(p)),
                    term(
                        "conditional_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 2.0 * delta / p) * b[k - 1].powf(delta)).powf(p / (2.0 * delta)),
                    ),
                ],
                Theorem::Dyadic => {
                    let r = (usize::BITS - n.leading_zeros()) as usize;
                    let s1: f64 = (0..r).map(|l| 2f64.powf(-(l as f64) / p) * a[(1 << l) - 1]).sum();
                    let s2: f64 = (0..r)
                        .map(|l| 2f64.powf(-2.0 * l as f64 * delta / p) * b[(1 << l) - 1].powf(delta))
                        .sum();
                    vec![
                        term("moment", nf * mom),
                        term("projective", c * nf * s1.powf(p)),
                        term("conditional_variance", nf * s2.powf(p / (2.0 * delta))),
                    ]
                }
                Theorem::StatEven => vec![
                    term("moment", nf * mom),
                    term(
                        "projective",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * (a[k - 1] + abar[k - 1])).powf(p),
                    ),
                    term(
                        "conditional_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 2.0 / p) * (b[k - 1] + bbar[k - 1])).powf(p / 2.0),
                    ),
                ],
                Theorem::PInteger => vec![
                    term("moment", nf * mom),
                    term(
                        "conditional_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * (b[k - 1].sqrt() + bbar[k - 1].sqrt())).powf(p),
                    ),
                ],
                Theorem::Mart2 | Theorem::Tangent => vec![
                    term("moment", nf * mom),
                    term(
                        "conditional_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - mart_e) * b[k - 1].powf(2.0 / (p - 2.0))).powf(mart_pow),
                    ),
                ],
                Theorem::General => {
                    let d = extra
                        .d0n_moment
                        .iter()
                        .find(|(m, _)| *m == n)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| LabError::Unavailable(format!("‖D₀ⁿ‖_p not supplied for n = {n}")))?;
                    vec![
                        term("martingale", nf * d),
                        term("moment", nf * mom),
                        term("projective", nf.powf(1.0 - p) * sum_to(n, |i| a[i - 1]).powf(p)),
                        term(
                            "conditional_variance",
                            nf * sum_to(n - 1, |k| kf(k).powf(-1.0 - mart_e) * b[k - 1].powf(2.0 / (p - 2.0))).powf(mart_pow),
                        ),
                    ]
                }
                Theorem::Burkholder => vec![
                    term("moment", nf.powf(p / 2.0) * mom),
                    term("projective", nf.powf(p / 2.0) * sum_to(n, |j| a[j - 1] / kf(j).powf(1.5)).powf(p)),
                ],
                Theorem::ConsDirect => {
                    let lam = need(&extra.lambda, n, "λ")?;
                    let cvar: f64 = cov[..n].iter().map(|v| v.abs()).sum();
                    let proj = if c > 0.0 {
                        let cx = need(&extra.cond_x, n, "‖E₀(X_k)‖_p")?;
                        c * nf.powf(1.0 / p) * sum_to(n, |k| kf(k).powf(-1.0 / p) * cx[k - 1])
                    } else {
                        0.0
                    };
                    vec![
                        term("variance", nf.sqrt() * cvar.sqrt()),
                        term("moment", nf.powf(1.0 / p) * mom.powf(1.0 / p)),
                        term("projective", proj),
                        term(
                            "lambda",
                            nf.powf(1.0 / p)
                                * sum_to(n, |k| kf(k).powf(1.0 - 2.0 / p) * kf(k).ln().powf(gamma) * lam[k - 1]).sqrt(),
                        ),
                    ]
                }
                Theorem::ConsDirect2 => {
                    let lam = need(&extra.lambda, n, "λ")?;
                    let cvar: f64 = cov[..n].iter().map(|v| v.abs()).sum();
                    vec![
                        term("variance", nf.powf(p / 2.0) * cvar.powf(p / 2.0)),
                        term("moment", nf * mom),
                        term(
                            "lambda",
                            nf * sum_to(n, |k| kf(k).powf(p - 2.0 + eps) * lam[k - 1].powf(p / 2.0)),
                        ),
                    ]
                }
                Theorem::CorArch => vec![
                    term("variance", (nf * var[0]).powf(p / 2.0)),
                    term("moment", nf * (1.0 + mom)),
                ],
                Theorem::ThLin => vec![
                    term("moment", nf * (1.0 + mom)),
                    term("variance", var[n - 1].powf(p / 2.0)),
                ],
                Theorem::Rev => vec![
                    term("moment", nf * mom),
                    term("projective", nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * a[k - 1]).powf(p)),
                    term(
                        "centered_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 2.0 / p) * bc[k - 1]).powf(p / 2.0),
                    ),
                    term("variance", nf * sum_to(n, |k| kf(k).powf(-1.0 - 2.0 / p) * var[k - 1]).powf(p / 2.0)),
                ],
                Theorem::RevGen => vec![
                    term("moment", nf * mom),
                    term(
                        "centered_variance",
                        nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * bc[k - 1].sqrt()).powf(p),
                    ),
                    term("variance", nf * sum_to(n, |k| kf(k).powf(-1.0 - 1.0 / p) * var[k - 1].sqrt()).powf(p)),
                ],
                Theorem::Cor2Markov => {
                    let i = extra
                        .upsilon_integral
                        .ok_or_else(|| LabError::Unavailable("∫f²x⁻²υ(dx) not supplied".into()))?;
                    vec![term("linear", nf), term("variance", nf.powf(p / 2.0) * i.powf(p / 2.0))]
                }
            };
            Ok(RhsTerms { n, terms })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::profile_exact;
    use crate::models::FiniteChain;

    fn coin(p: f64, n: usize) -> ProjectiveProfile {
        profile_exact(&FiniteChain::coin(), p, n).unwrap()
    }

    #[test]
    fn coin_directprop_closed_form() {
        let prof = coin(4.0, 64);
        let grid = [1, 8, 64];
        let t = rhs_build(Theorem::DirectProp, &prof, &RhsExtra::default(), &grid).unwrap();
        for r in &t {
            let n = r.n as f64;
            let s: f64 = (1..=r.n).map(|k| (k as f64).powf(-0.75)).sum();
            assert!((r.get("moment").unwrap() - n).abs() < 1e-12);
            assert_eq!(r.get("projective").unwrap(), 0.0);
            let cv = r.get("conditional_variance").unwrap();
            assert!((cv - n * s.powi(4)).abs() < 1e-9 * cv, "{cv}");
        }
        // Σk^{-3/4} ≈ 4n^{1/4}: the last term approaches 256n².
        let big = coin(4.0, 4096);
        let t = rhs_build(Theorem::DirectProp, &big, &RhsExtra::default(), &[4096]).unwrap();
        let ratio = t[0].get("conditional_variance").unwrap() / (256.0 * 4096f64.powi(2));
        assert!(ratio > 0.6 && ratio < 1.0, "{ratio}");
    }

    #[test]
    fn martingale_profile_has_no_projective_term() {
        let m = FiniteChain::sign_randomized(&FiniteChain::eigen());
        let prof = profile_exact(&m, 3.0, 16).unwrap();
        let t = rhs_build(Theorem::DirectProp, &prof, &RhsExtra::default(), &[4, 16]).unwrap();
        assert!(t.iter().all(|r| r.get("projective").unwrap().abs() < 1e-12));
    }

    #[test]
    fn burkholder_iid() {
        let prof = coin(3.0, 32);
        let t = rhs_build(Theorem::Burkholder, &prof, &RhsExtra::default(), &[32]).unwrap();
        assert!((t[0].total() - 32f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn dyadic_and_direct_agree_on_martingales_up_to_constants() {
        let prof = coin(3.0, 64);
        let d = rhs_build(Theorem::Dyadic, &prof, &RhsExtra::default(), &[63]).unwrap();
        let s = rhs_build(Theorem::DirectProp, &prof, &RhsExtra::default(), &[63]).unwrap();
        let r = d[0].total() / s[0].total();
        assert!(r > 0.2 && r < 5.0, "{r}");
    }

    #[test]
    fn p_ranges_enforced() {
        let prof = coin(3.0, 8);
        assert!(matches!(
            rhs_build(Theorem::Mart2, &prof, &RhsExtra::default(), &[8]),
            Err(LabError::Domain(_))
        ));
        assert!(matches!(
            rhs_build(Theorem::StatEven, &coin(5.0, 8), &RhsExtra::default(), &[8]),
            Err(LabError::Domain(_))
        ));
        assert!(rhs_build(Theorem::DirectProp, &profile_exact(&FiniteChain::coin(), 2.0, 8).unwrap(), &RhsExtra::default(), &[8]).is_err());
    }

    #[test]
    fn missing_inputs_are_unavailable() {
        let mut prof = coin(4.0, 8);
        prof.abar = None;
        assert!(matches!(
            rhs_build(Theorem::StatEven, &prof, &RhsExtra::default(), &[8]),
            Err(LabError::Unavailable(_))
        ));
        assert!(matches!(
            rhs_build(Theorem::General, &prof, &RhsExtra::default(), &[8]),
            Err(LabError::Unavailable(_))
        ));
        assert!(matches!(
            rhs_build(Theorem::Cor2Markov, &prof, &RhsExtra::default(), &[8]),
            Err(LabError::Unavailable(_))
        ));
    }

    #[test]
    fn mart2_rejects_dependent_profiles() {
        let prof = profile_exact(&FiniteChain::eigen(), 4.0, 8).unwrap();
        assert!(matches!(
            rhs_build(Theorem::Mart2, &prof, &RhsExtra::default(), &[8]),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn covariances_recovered() {
        let chain = FiniteChain::eigen();
        let prof = profile_exact(&chain, 4.0, 10).unwrap();
        let c = covariances_from_var(&prof.var);
        // E(X₀X_k) = 0.7^k·E f² with E f² = 2.
        for (k, v) in c.iter().enumerate() {
            assert!((v - 2.0 * 0.7f64.powi(k as i32)).abs() < 1e-12, "{k} {v}");
        }
    }

    #[test]
    fn parse_ids() {
        for t in Theorem::ALL {
            assert_eq!(t.id().parse::<Theorem>().unwrap(), t);
        }
        assert!("bogus".parse::<Theorem>().is_err());
    }

    #[test]
    fn c_zero_never_exceeds_c_one() {
        let prof = profile_exact(&FiniteChain::eigen(), 4.0, 32).unwrap();
        let grid = [2, 8, 32];
        let c0 = rhs_build(Theorem::DirectProp, &prof, &RhsExtra::default(), &grid).unwrap();
        let one = RhsExtra {
            c_override: Some(1.0),
            ..Default::default()
        };
        let c1 = rhs_build(Theorem::DirectProp, &prof, &one, &grid).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            assert!(a.total() <= b.total());
            // Conditional Jensen: ‖E₀S_k‖_p ≤ ‖E₀S_k²‖_{p/2}^{1/2}, so the middle
            // term is dominated by the square-root form of the last one.
            let n = a.n as f64;
            let dom = n * (1..=a.n).map(|k| (k as f64).powf(-1.25) * prof.b(k).sqrt()).sum::<f64>().powi(4);
            assert!(b.get("projective").unwrap() <= dom * (1.0 + 1e-12));
        }
    }
}
