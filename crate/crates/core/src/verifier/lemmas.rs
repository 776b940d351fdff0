//! The four appendix lemmas with explicit constants, evaluated exactly on
//! finite probability spaces or on explicit arrays.

use super::{CheckRow, ExplicitCheck};
use crate::error::{domain, precondition, LabError, Result};
use crate::finite_space::{compensated_sum, FiniteSpace, Partition, Rv};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossVariant {
    /// 2 ≤ p ≤ 3, real x, y.
    Rio,
    /// 3 < p ≤ 4, real x, y.
    Rio34,
    /// x, y ≥ 0, p ≥ 1.
    Int,
    /// p an even positive integer, real x, y.
    EvenInt,
}

impl CrossVariant {
    pub const ALL: [CrossVariant; 4] = [CrossVariant::Rio, CrossVariant::Rio34, CrossVariant::Int, CrossVariant::EvenInt];

    pub fn admits(&self, p: f64) -> bool {
        match self {
            CrossVariant::Rio => (2.0..=3.0).contains(&p),
            CrossVariant::Rio34 => p > 3.0 && p <= 4.0,
            CrossVariant::Int => p >= 1.0,
            CrossVariant::EvenInt => p >= 2.0 && p.fract() == 0.0 && (p as i64) % 2 == 0,
        }
    }
}

/// Both sides of the elementary power inequality, and whether it holds.
pub fn check_cross(x: f64, y: f64, p: f64, variant: CrossVariant) -> Result<(f64, f64, bool)> {
    if !variant.admits(p) {
        return domain(format!("p = {p} outside the range of {variant:?}"));
    }
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    let (lhs, rhs) = match variant {
        CrossVariant::Rio | CrossVariant::Rio34 => {
            let ax = x.abs();
            let mut rhs = ax.powf(p)
                + y.abs().powf(p)
                + p * ax.powf(p - 1.0) * sgn(x) * y
                + p * (p - 1.0) / 2.0 * ax.powf(p - 2.0) * y * y;
            if variant == CrossVariant::Rio34 {
                rhs += 2.0 * p / (p - 2.0) * ax * y.abs().powf(p - 1.0);
            }
            ((x + y).abs().powf(p), rhs)
        }
        CrossVariant::Int => {
            if x < 0.0 || y < 0.0 {
                return domain("the int variant needs x, y ≥ 0");
            }
            let rhs = x.powf(p) + y.powf(p) + 4f64.powf(p) * (x.powf(p - 1.0) * y + x * y.powf(p - 1.0));
            ((x + y).powf(p), rhs)
        }
        CrossVariant::EvenInt => {
            let k = p as i32;
            let rhs = x.powi(k)
                + y.powi(k)
                + p * (x.powi(k - 1) * y + x * y.powi(k - 1))
                + 2f64.powi(k) * (x * x * y.powi(k - 2) + x.powi(k - 2) * y * y);
            ((x + y).powi(k), rhs)
        }
    };
    let ok = lhs <= rhs + 1e-12 * rhs.abs().max(1.0);
    Ok((lhs, rhs, ok))
}

/// Merged (value, mass) list of the law of `x`, zero masses dropped.
fn law(space: &FiniteSpace, x: &Rv) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = x
        .0
        .iter()
        .zip(space.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (v, w) in pts {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-12 * v.abs().max(1.0) => last.1 += w,
            _ => out.push((v, w)),
        }
    }
    out
}

fn same_law(space: &FiniteSpace, x: &Rv, y: &Rv, tol: f64) -> bool {
    let (a, b) = (law(space, x), law(space, y));
    a.len() == b.len()
        && a
            .iter()
            .zip(&b)
            .all(|(u, v)| (u.0 - v.0).abs() <= tol * u.0.abs().max(1.0) && (u.1 - v.1).abs() <= tol)
}

/// Both bounds of the basic lemma for E(X₀ᵘX₁^{p−u}) and E(X₀^{p−1}X₁),
/// with E₀ = E(·|g).
pub fn check_basic(space: &FiniteSpace, x0: &Rv, x1: &Rv, g: &Partition, p: f64, u: f64) -> Result<ExplicitCheck> {
    if !(p > 2.0) {
        return domain(format!("the basic lemma needs p > 2, got {p}"));
    }
    if !(u >= 0.0 && u <= p - 2.0) {
        return domain(format!("u = {u} outside [0, p − 2]"));
    }
    if x0.0.iter().chain(&x1.0).any(|v| *v < 0.0) {
        return precondition("X₀ and X₁ must be nonnegative");
    }
    if !same_law(space, x0, x1, 1e-10) {
        return precondition("X₀ and X₁ are not identically distributed");
    }
    if !space.is_measurable(x0, g, 1e-12)? {
        return precondition("X₀ is not measurable with respect to g");
    }
    let a = space.lp_norm(x0, p)?;
    let cond2 = space.lp_norm(&space.cond_expect(&x1.map(|v| v * v), g)?, p / 2.0)?;
    let mixed = |e0: f64, e1: f64| -> Result<f64> {
        space.expect(&x0.zip_map(x1, |s, t| s.powf(e0) * t.powf(e1))?)
    };
    let b1 = CheckRow::new(
        "b1",
        mixed(u, p - u)?,
        a.powf(p - 2.0 * u / (p - 2.0)) * cond2.powf(u / (p - 2.0)),
    );
    let b2 = CheckRow::new("b2", mixed(p - 1.0, 1.0)?, a.powf(p - 1.0) * cond2.sqrt());
    Ok(ExplicitCheck::new("basic", vec![b1, b2]))
}

/// h(y) = base + Σ c·1{y ≥ t}; a bounded-variation function with ‖dh‖ = Σ|c|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFn {
    pub base: f64,
    /// (threshold t, jump c)
    pub jumps: Vec<(f64, f64)>,
}

impl StepFn {
    pub fn eval(&self, y: f64) -> f64 {
        self.base + self.jumps.iter().filter(|(t, _)| y >= *t).map(|(_, c)| c).sum::<f64>()
    }

    pub fn total_variation(&self) -> f64 {
        self.jumps.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn apply(&self, y: &Rv) -> Rv {
        y.map(|v| self.eval(v))
    }
}

fn distinct_values(space: &FiniteSpace, y: &Rv) -> Vec<f64> {
    law(space, y).into_iter().map(|(v, _)| v).collect()
}

/// b(F₀, i, j) atomwise: sup over (t, s) of |P(Yᵢ ≤ t, Yⱼ ≤ s | F₀) − P(Yᵢ ≤ t, Yⱼ ≤ s)|.
///
/// Both distribution functions are step functions with jumps at the values of Yᵢ
/// and Yⱼ, so the supremum is attained on those values.
pub fn beta_coefficient(space: &FiniteSpace, yi: &Rv, yj: &Rv, sigma0: &Partition) -> Result<Rv> {
    let ts = distinct_values(space, yi);
    let ss = distinct_values(space, yj);
    let mut sup = Rv::zeros(space.len());
    for &t in &ts {
        for &s in &ss {
            let ind = yi.zip_map(yj, |a, b| if a <= t && b <= s { 1.0 } else { 0.0 })?;
            let uncond = space.expect(&ind)?;
            let cond = space.cond_expect(&ind, sigma0)?;
            for (m, c) in sup.0.iter_mut().zip(&cond.0) {
                *m = m.max((c - uncond).abs());
            }
        }
    }
    Ok(sup)
}

/// Items 1 and 2 of the covariance lemma for an F₀-measurable Z.
pub fn check_covbeta(
    space: &FiniteSpace,
    z: &Rv,
    yi: &Rv,
    yj: &Rv,
    sigma0: &Partition,
    h: &StepFn,
    g: &StepFn,
) -> Result<ExplicitCheck> {
    if !space.is_measurable(z, sigma0, 1e-12)? {
        return precondition("Z is not measurable with respect to F₀");
    }
    let center = |x: &Rv| -> Result<Rv> {
        let m = space.expect(x)?;
        Ok(x.map(|v| v - m))
    };
    let z0 = center(z)?;
    let hy = center(&h.apply(yi))?;
    let gy = center(&g.apply(yj))?;
    let bii = beta_coefficient(space, yi, yi, sigma0)?;
    let bjj = beta_coefficient(space, yj, yj, sigma0)?;
    let bij = beta_coefficient(space, yi, yj, sigma0)?;
    let abs_z = z.map(f64::abs);
    let weighted = |b: &Rv| -> Result<f64> { space.expect(&abs_z.mul(b)?) };
    let (dh, dg) = (h.total_variation(), g.total_variation());
    // Centering cancels (a constant Z centers to rounding noise): allow
    // roundoff relative to the integrand built from the uncentered |Z|.
    let slack = |x: &Rv| -> Result<f64> { Ok(1e-12 * space.expect(&abs_z.mul(&x.map(f64::abs))?)?) };
    let zh = z0.mul(&hy)?;
    let zg = z0.mul(&gy)?;
    let zhg = zh.mul(&gy)?;
    let hg = hy.mul(&gy)?;
    let rows = vec![
        CheckRow::with_slack("item1_i", space.expect(&zh)?.abs(), dh * weighted(&bii)?, slack(&hy)?),
        CheckRow::with_slack("item1_j", space.expect(&zg)?.abs(), dg * weighted(&bjj)?, slack(&gy)?),
        CheckRow::with_slack(
            "item2",
            space.expect(&zhg)?.abs(),
            dh * dg * weighted(&bii.add(&bjj)?.add(&bij)?)?,
            slack(&hg)?,
        ),
    ];
    Ok(ExplicitCheck::new("covbeta", rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SubaddItem {
    /// Dyadic sum against the harmonic-type sum, 2^{r−1} ≤ n < 2^r.
    One { n: usize },
    /// Σ_{j≤k} j^{−q}V_{jm} against sums over ℓ ≤ km.
    Two { k: usize, m: usize },
    /// Monotonicity in the power, 0 < δ ≤ γ ≤ 1.
    Three { n: usize, gamma: f64, delta: f64 },
}

/// Witness (i, j) of a violated V_{i+j} ≤ C(Vᵢ + Vⱼ), if any.
pub fn subadd_witness(v: &[f64], c: f64) -> Option<(usize, usize)> {
    for s in 0..v.len() {
        for i in 0..=s / 2 {
            let j = s - i;
            let bound = c * (v[i] + v[j]);
            if v[s] > bound + 1e-12 * bound.abs().max(v[s].abs()) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Items 1–3 of the subadditive-sequence lemma on the array V = (V₀, V₁, …).
pub fn check_subadd(v: &[f64], c: f64, q: f64, item: SubaddItem) -> Result<ExplicitCheck> {
    if v.is_empty() || v[0] != 0.0 {
        return precondition("V₀ must be 0");
    }
    if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return precondition("V must be finite and nonnegative");
    }
    if !(c >= 1.0) {
        return domain(format!("C = {c} < 1"));
    }
    if let Some((i, j)) = subadd_witness(v, c) {
        return Err(LabError::Precondition(format!(
            "V_{{i+j}} ≤ C(V_i + V_j) fails at (i, j) = ({i}, {j}): {} > {}·({} + {})",
            v[i + j],
            c,
            v[i],
            v[j]
        )));
    }
    let need = |last: usize| -> Result<()> {
        if last >= v.len() {
            Err(LabError::Argument(format!("V has {} entries, index {last} needed", v.len())))
        } else {
            Ok(())
        }
    };
    let row = match item {
        SubaddItem::One { n } => {
            if n == 0 || !(q >= 0.0) {
                return domain("item 1 needs n ≥ 1 and q ≥ 0");
            }
            need(n)?;
            let r = (usize::BITS - n.leading_zeros()) as usize;
            let lhs = compensated_sum((0..r).map(|i| 2f64.powf(-(i as f64) * q) * v[1 << i]));
            let sum = compensated_sum((1..=n).map(|k| v[k] / (k as f64).powf(1.0 + q)));
            let konst = c * 2f64.powf(q + 2.0) / (2f64.powf(q + 1.0) - 1.0);
            CheckRow::new("item1", lhs, konst * sum)
        }
        SubaddItem::Two { k, m } => {
            if k == 0 || m == 0 || !(q > 0.0) {
                return domain("item 2 needs k, m ≥ 1 and q > 0");
            }
            need(k * m)?;
            let lhs = compensated_sum((1..=k).map(|j| v[j * m] / (j as f64).powf(q)));
            let mf = m as f64;
            let near = compensated_sum((1..=m).map(|l| v[l] / ((l + m) as f64).powf(q)));
            let far = compensated_sum((m + 1..=k * m).map(|l| v[l] / (l as f64).powf(q)));
            let rhs = 2f64.powf(q + 1.0) * c / q * mf.powf(q - 1.0) * near + 2.0 * c / q * mf.powf(q - 1.0) * far;
            CheckRow::new("item2", lhs, rhs)
        }
        SubaddItem::Three { n, gamma, delta } => {
            if !(delta > 0.0 && delta <= gamma && gamma <= 1.0) || !(q >= 0.0) || n == 0 {
                return domain("item 3 needs 0 < δ ≤ γ ≤ 1, q ≥ 0 and n ≥ 1");
            }
            need(n)?;
            let s = |e: f64| compensated_sum((1..=n).map(|k| v[k].powf(e) / (k as f64).powf(1.0 + q * e)));
            let lhs = s(gamma).powf(1.0 / gamma);
            let rhs = 2f64.powf(1.0 / delta - 1.0 / gamma) * c.powf((gamma - delta) / delta) * s(delta).powf(1.0 / delta);
            CheckRow::new("item3", lhs, rhs)
        }
    };
    Ok(ExplicitCheck::new("lmasubadd", vec![row]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_examples() {
        let (l, r, ok) = check_cross(1.0, 1.0, 2.0, CrossVariant::Rio).unwrap();
        assert_eq!((l, r, ok), (4.0, 5.0, true));
        for (v, p) in [
            (CrossVariant::Rio, 2.5),
            (CrossVariant::Rio34, 3.5),
            (CrossVariant::Int, 2.7),
            (CrossVariant::EvenInt, 6.0),
        ] {
            let (l, r, ok) = check_cross(1.7, 0.0, p, v).unwrap();
            assert!(ok);
            assert!((l - r).abs() < 1e-12 * l, "{v:?}");
            assert!((l - 1.7f64.powf(p)).abs() < 1e-12 * l);
        }
        assert!(check_cross(1.0, 1.0, 3.5, CrossVariant::Rio).is_err());
        assert!(check_cross(1.0, 1.0, 3.0, CrossVariant::Rio34).is_err());
        assert!(check_cross(-1.0, 1.0, 2.0, CrossVariant::Int).is_err());
        assert!(check_cross(1.0, 1.0, 5.0, CrossVariant::EvenInt).is_err());
    }

    #[test]
    fn basic_equality_cases() {
        let space = FiniteSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let one = Rv::constant(3, 1.0);
        let g = Partition::trivial(3);
        let r = check_basic(&space, &one, &one, &g, 4.0, 1.0).unwrap();
        assert!(r.pass);
        for row in &r.rows {
            assert!((row.lhs - 1.0).abs() < 1e-12 && (row.rhs - 1.0).abs() < 1e-12);
        }
        // u = 0: E X₁ᵖ against aᵖ, equal by identical laws.
        let x0 = Rv(vec![1.0, 2.0, 2.0]);
        let x1 = Rv(vec![2.0, 1.0, 2.0]);
        let space = FiniteSpace::new(vec![0.25, 0.25, 0.5]).unwrap();
        let g = Partition::from_labels(&[0, 1, 1]);
        let r = check_basic(&space, &x0, &x1, &g, 3.0, 0.0).unwrap();
        let b1 = r.row("b1").unwrap();
        assert!((b1.lhs - b1.rhs).abs() < 1e-12);
    }

    #[test]
    fn basic_preconditions() {
        let space = FiniteSpace::uniform(2).unwrap();
        let g = Partition::discrete(2);
        let x0 = Rv(vec![1.0, 2.0]);
        assert!(matches!(
            check_basic(&space, &x0, &Rv(vec![1.0, 3.0]), &g, 4.0, 1.0),
            Err(LabError::Precondition(_))
        ));
        assert!(matches!(check_basic(&space, &x0, &x0, &g, 4.0, 2.5), Err(LabError::Domain(_))));
        assert!(matches!(
            check_basic(&space, &x0, &x0, &Partition::trivial(2), 4.0, 1.0),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn covbeta_independent_future() {
        // Product space: F₀ sees the first coordinate, Y reads the second.
        let space = FiniteSpace::new(vec![0.1, 0.3, 0.15, 0.45]).unwrap();
        let sigma0 = Partition::from_labels(&[0, 0, 1, 1]);
        let z = Rv(vec![2.0, 2.0, -1.0, -1.0]);
        let y = Rv(vec![0.0, 1.0, 0.0, 1.0]);
        let h = StepFn { base: 0.0, jumps: vec![(0.5, 3.0)] };
        let b = beta_coefficient(&space, &y, &y, &sigma0).unwrap();
        assert!(b.0.iter().all(|v| v.abs() < 1e-15));
        let r = check_covbeta(&space, &z, &y, &y, &sigma0, &h, &h).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.lhs < 1e-14));
    }

    #[test]
    fn covbeta_constant_z_and_measurability() {
        let space = FiniteSpace::uniform(4).unwrap();
        let sigma0 = Partition::from_labels(&[0, 0, 1, 1]);
        let y = Rv(vec![0.0, 1.0, 1.0, 1.0]);
        let h = StepFn { base: 1.0, jumps: vec![(0.5, -2.0), (0.9, 1.0)] };
        assert_eq!(h.total_variation(), 3.0);
        let r = check_covbeta(&space, &Rv::constant(4, 3.0), &y, &y, &sigma0, &h, &h).unwrap();
        assert!(r.pass && r.rows.iter().all(|row| row.lhs.abs() < 1e-15));
        // A constant that does not center exactly; the right side is 0.
        let w = vec![0.07, 0.11, 0.13, 0.17, 0.19, 0.1, 0.1, 0.13];
        let space8 = FiniteSpace::new(w).unwrap();
        let all = Partition::from_labels(&[0; 8]);
        let yi = Rv(vec![3.0, 2.0, 0.0, 3.0, 2.0, 3.0, 1.0, 2.0]);
        let yj = Rv(vec![0.0, 0.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = check_covbeta(&space8, &Rv::constant(8, 1.89633457790754), &yi, &yj, &all, &h, &h).unwrap();
        assert!(r.pass, "{r:?}");
        let bad = Rv(vec![1.0, 2.0, 3.0, 3.0]);
        assert!(matches!(
            check_covbeta(&space, &bad, &y, &y, &sigma0, &h, &h),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn covbeta_dependent_example_by_hand() {
        // Y = Z-block indicator: b(F₀,i,i) = |1{block} − 1/2| = 1/2 everywhere.
        let space = FiniteSpace::uniform(2).unwrap();
        let sigma0 = Partition::discrete(2);
        let y = Rv(vec![0.0, 1.0]);
        let b = beta_coefficient(&space, &y, &y, &sigma0).unwrap();
        assert_eq!(b.0, vec![0.5, 0.5]);
        let z = Rv(vec![-1.0, 1.0]);
        let h = StepFn { base: 0.0, jumps: vec![(0.5, 1.0)] };
        let r = check_covbeta(&space, &z, &y, &y, &sigma0, &h, &h).unwrap();
        // Cov(Z, 1{Y ≥ 1/2}) = 1/2, bound = E|Z|·1/2 = 1/2: equality.
        let row = r.row("item1_i").unwrap();
        assert!((row.lhs - 0.5).abs() < 1e-15 && (row.rhs - 0.5).abs() < 1e-15 && row.ok);
    }

    #[test]
    fn subadd_hand_example() {
        let v: Vec<f64> = (0..=8).map(|k| k as f64).collect();
        let r = check_subadd(&v, 1.0, 1.0, SubaddItem::One { n: 8 }).unwrap();
        let row = &r.rows[0];
        let h8: f64 = (1..=8).map(|k| 1.0 / k as f64).sum();
        assert!((row.lhs - 4.0).abs() < 1e-12);
        assert!((row.rhs - 8.0 / 3.0 * h8).abs() < 1e-12);
        assert!((row.rhs - 7.248).abs() < 1e-3);
        assert!(r.pass);
    }

    #[test]
    fn subadd_zero_sequence() {
        let v = vec![0.0; 20];
        for item in [
            SubaddItem::One { n: 9 },
            SubaddItem::Two { k: 3, m: 4 },
            SubaddItem::Three { n: 19, gamma: 0.8, delta: 0.3 },
        ] {
            let r = check_subadd(&v, 1.0, 1.0, item).unwrap();
            assert!(r.pass);
            assert_eq!(r.rows[0].lhs, 0.0);
        }
    }

    #[test]
    fn subadd_witness_reported() {
        let v = vec![0.0, 1.0, 5.0];
        match check_subadd(&v, 1.0, 1.0, SubaddItem::One { n: 2 }) {
            Err(LabError::Precondition(msg)) => assert!(msg.contains("(1, 1)"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(check_subadd(&[1.0, 1.0], 1.0, 1.0, SubaddItem::One { n: 1 }).is_err());
    }

    #[test]
    fn subadd_item_two_fails_beyond_q_two() {
        let v = vec![0.0, 1.0, 1.0];
        let r = check_subadd(&v, 1.0, 3.0, SubaddItem::Two { k: 1, m: 1 }).unwrap();
        assert!(!r.pass);
        assert!((r.rows[0].lhs - 1.0).abs() < 1e-15);
        assert!((r.rows[0].rhs - 2.0 / 3.0).abs() < 1e-15);
        assert!(check_subadd(&v, 1.0, 2.0, SubaddItem::Two { k: 1, m: 1 }).unwrap().pass);
    }
}
