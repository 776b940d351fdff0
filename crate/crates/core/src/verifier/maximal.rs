//! Dyadic maximal inequalities with explicit constants, evaluated exactly on a
//! finite space.
//!
//! Sequences of non-dyadic length n are padded with zero variables up to 2^r
//! (the filtration stays at F_n); the running maximum is unchanged and the
//! right side can only grow.

use super::{CheckRow, ExplicitCheck, Term};
use crate::error::{argument, domain, precondition, Result};
use crate::finite_space::{check_filtration, Direction, Filtration, FiniteSpace, Rv};
use serde::{Deserialize, Serialize};

/// Registered φ families: nondecreasing on [0, ∞), nonnegative, convex, even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phi {
    /// |t|^e, e ≥ 1.
    Power(f64),
    /// e^{λ|t|}, λ > 0.
    Exp(f64),
}

impl Phi {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Phi::Power(e) => t.abs().powf(e),
            Phi::Exp(l) => (l * t.abs()).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Phi::Power(e) if e >= 1.0 => Ok(()),
            Phi::Exp(l) if l > 0.0 => Ok(()),
            _ => domain(format!("{self:?} is not convex and nondecreasing on [0, ∞)")),
        }
    }
}

/// Partial sums S₀ = 0, S₁, …, Sₙ plus the validated setting.
struct Walk<'a> {
    space: &'a FiniteSpace,
    filtration: &'a Filtration,
    sums: Vec<Rv>,
    n: usize,
}

impl<'a> Walk<'a> {
    fn new(space: &'a FiniteSpace, filtration: &'a Filtration, xs: &[Rv]) -> Result<Self> {
        let n = xs.len();
        if n == 0 {
            return argument("empty sequence");
        }
        if filtration.len() != n + 1 {
            return argument(format!("need F₀..F_n ({} σ-fields), got {}", n + 1, filtration.len()));
        }
        if filtration.direction != Direction::Nondecreasing || !check_filtration(filtration) {
            return precondition("the filtration is not nondecreasing");
        }
        for (k, x) in xs.iter().enumerate() {
            if !space.is_measurable(x, &filtration.sigmas[k + 1], 1e-12)? {
                return precondition(format!("X_{} is not F_{}-measurable", k + 1, k + 1));
            }
        }
        let mut sums = vec![Rv::zeros(space.len())];
        for x in xs {
            let next = sums.last().expect("nonempty").add(x)?;
            sums.push(next);
        }
        Ok(Walk {
            space,
            filtration,
            sums,
            n,
        })
    }

    /// S_m of the zero-padded sequence.
    fn s(&self, m: usize) -> &Rv {
        &self.sums[m.min(self.n)]
    }

    fn sigma(&self, k: usize) -> &crate::finite_space::Partition {
        &self.filtration.sigmas[k.min(self.n)]
    }

    /// Σ_{l<r} (Σ_{k=1}^{2^{r−l}−1} ‖E(S_{v+(k+1)2^l} − S_{v+k2^l} | F_{k2^l})‖_p^p)^{1/p}.
    fn correction(&self, r: u32, p: f64, v: usize) -> Result<f64> {
        let mut total = 0.0;
        for l in 0..r {
            let step = 1usize << l;
            let mut inner = 0.0;
            for k in 1..(1usize << (r - l)) {
                let inc = self.s(v + (k + 1) * step).sub(self.s(v + k * step))?;
                let ce = self.space.cond_expect(&inc, self.sigma(k * step))?;
                inner += self.space.abs_moment(&ce, p)?;
            }
            total += inner.powf(1.0 / p);
        }
        Ok(total)
    }

    fn max_abs(&self) -> Result<Rv> {
        self.space.running_max_abs(&self.sums[1..])
    }

    fn norm(&self, x: &Rv, p: f64) -> Result<f64> {
        self.space.lp_norm(x, p)
    }

    /// ‖E(S_m | F₀)‖_p.
    fn e0(&self, m: usize, p: f64) -> Result<f64> {
        let ce = self.space.cond_expect(self.s(m), &self.filtration.sigmas[0])?;
        self.norm(&ce, p)
    }
}

/// Smallest r with 2^r ≥ n.
fn dyadic_order(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

fn conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return domain(format!("the maximal inequalities need p > 1, got {p}"));
    }
    Ok(p / (p - 1.0))
}

/// The explicit maximal inequality and, for stationary input, its stationary
/// forms (dyadic corollary, the n ∈ [2^{r−1}, 2^r) form and the
/// subadditive form).
///
/// `filtration` lists F₀..F_n and `xs` lists X₁..X_n. Stationarity is the
/// caller's claim; it is spot-checked through the marginal laws.
pub fn check_maximal_explicit(
    space: &FiniteSpace,
    filtration: &Filtration,
    xs: &[Rv],
    p: f64,
    stationary: bool,
) -> Result<ExplicitCheck> {
    let q = conjugate(p)?;
    let w = Walk::new(space, filtration, xs)?;
    let n = w.n;
    let r = dyadic_order(n);
    let max_n = w.max_abs()?;
    let lhs = w.norm(&max_n, p)?;
    let corr = w.correction(r, p, 0)?;
    let s_top = w.norm(w.s(1 << r), p)?;
    let mut rows = vec![CheckRow::new("dyadic", lhs, q * s_top + q * corr)];
    let mut values = vec![
        Term { name: "correction".into(), value: corr },
        Term { name: "doob".into(), value: q * s_top },
    ];
    if stationary {
        let m1 = marginal(space, &xs[0]);
        if xs.iter().any(|x| !same(&marginal(space, x), &m1)) {
            return precondition("the marginal laws differ: the sequence is not stationary");
        }
        // Largest dyadic prefix for the corollary.
        let rp = usize::BITS - 1 - n.leading_zeros();
        let np = 1usize << rp;
        let max_np = space.running_max_abs(&w.sums[1..=np])?;
        let e0_dyadic: Vec<f64> = (0..r).map(|l| w.e0(1 << l, p)).collect::<Result<_>>()?;
        let cor_sum: f64 = (0..rp as usize).map(|l| 2f64.powf(-(l as f64) / p) * e0_dyadic[l]).sum();
        rows.push(CheckRow::new(
            "stationary",
            w.norm(&max_np, p)?,
            q * w.norm(w.s(np), p)? + q * 2f64.powf(rp as f64 / p) * cor_sum,
        ));
        let max_sm = (1..=n).map(|m| w.norm(w.s(m), p)).collect::<Result<Vec<_>>>()?;
        let max_sm = max_sm.into_iter().fold(0.0f64, f64::max);
        let nf = n as f64;
        // r with 2^{r−1} ≤ n < 2^r.
        let rr = usize::BITS - n.leading_zeros();
        let dy_sum: f64 = (0..rr as usize)
            .map(|l| Ok(2f64.powf(-(l as f64) / p) * w.e0(1 << l, p)?))
            .sum::<Result<f64>>()?;
        rows.push(CheckRow::new(
            "maxdyadic",
            lhs,
            2.0 * q * max_sm + 2f64.powf(1.0 / p) * q * nf.powf(1.0 / p) * dy_sum,
        ));
        let sub_sum: f64 = (1..=n)
            .map(|j| Ok((j as f64).powf(-1.0 - 1.0 / p) * w.e0(j, p)?))
            .sum::<Result<f64>>()?;
        let konst = q * 2f64.powf(2.0 + 2.0 / p) / (2f64.powf(1.0 + 1.0 / p) - 1.0);
        rows.push(CheckRow::new("subadditive", lhs, 2.0 * q * max_sm + konst * nf.powf(1.0 / p) * sub_sum));
        values.push(Term { name: "max_sm".into(), value: max_sm });
    }
    let mut out = ExplicitCheck::new("maximal", rows);
    out.values = values;
    if n != 1 << r {
        out.notes.push(format!("padded from n = {n} to 2^{r} with zero variables"));
    }
    Ok(out)
}

fn marginal(space: &FiniteSpace, x: &Rv) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = x
        .0
        .iter()
        .zip(space.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = vec![];
    for (v, w) in pts {
        match out.last_mut() {
            Some(l) if (l.0 - v).abs() <= 1e-12 * v.abs().max(1.0) => l.1 += w,
            _ => out.push((v, w)),
        }
    }
    out
}

fn same(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(u, v)| (u.0 - v.0).abs() <= 1e-9 * u.0.abs().max(1.0) && (u.1 - v.1).abs() <= 1e-9)
}

/// Tail forms of the maximal inequality at every x of `x_grid`.
///
/// With `bound = None` the first form P(S* ≥ 2x) is checked. With `bound =
/// Some(M)`, M ≥ sup|Y_i|, the shifted second form P(S* ≥ 4x) with v = ⌊x/M⌋;
/// increments past the data are zero variables.
pub fn check_maximal_proba(
    space: &FiniteSpace,
    filtration: &Filtration,
    xs: &[Rv],
    p: f64,
    phi: Phi,
    x_grid: &[f64],
    bound: Option<f64>,
) -> Result<ExplicitCheck> {
    let q = conjugate(p)?;
    phi.validate()?;
    let w = Walk::new(space, filtration, xs)?;
    if let Some(m) = bound {
        let sup = xs.iter().flat_map(|x| x.0.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        if !(m > 0.0) || sup > m * (1.0 + 1e-12) {
            return precondition(format!("the variables are not bounded by M = {m} (sup {sup})"));
        }
    }
    let r = dyadic_order(w.n);
    let top = w.s(1 << r).clone();
    let e_phi = space.expect(&top.map(|t| phi.eval(t)))?;
    let smax = w.max_abs()?;
    let base_corr = w.correction(r, p, 0)?;
    let mut rows = vec![];
    for &x in x_grid {
        if !(x > 0.0) {
            return domain(format!("x = {x} must be positive"));
        }
        let row = match bound {
            None => CheckRow::new(
                format!("form1@{x}"),
                space.prob_at_least(&smax, 2.0 * x)?,
                e_phi / phi.eval(x) + q.powf(p) * x.powf(-p) * base_corr.powf(p),
            ),
            Some(m) => {
                let v = (x / m).floor() as usize;
                let corr = w.correction(r, p, v)?;
                CheckRow::new(
                    format!("form2@{x}"),
                    space.prob_at_least(&smax, 4.0 * x)?,
                    e_phi / phi.eval(x) + q.powf(p) * x.powf(-p) * corr.powf(p),
                )
            }
        };
        rows.push(row);
    }
    let mut out = ExplicitCheck::new("maximal_proba", rows);
    out.values.push(Term { name: "correction".into(), value: base_corr });
    Ok(out)
}
