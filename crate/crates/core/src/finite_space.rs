//! Exact probability on a finite set of weighted atoms.
//!
//! σ-algebras are partitions of the atom set, filtrations are sequences of
//! partitions, and random variables are plain value vectors indexed like the
//! atoms. Everything here is deterministic and free of sampling error, which is
//! what makes it usable as an oracle for the rest of the crate.

use crate::error::{argument, domain, LabError, Result};
use serde::{Deserialize, Serialize};

/// Default hard cap on the number of atoms.
pub const DEFAULT_ATOM_CAP: usize = 1 << 20;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Neumaier compensated sum; atom counts reach 2^20 so plain summation drifts.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Neumaier::default();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A random variable: one value per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rv(pub Vec<f64>);

impl Rv {
    pub fn constant(len: usize, c: f64) -> Self {
        Rv(vec![c; len])
    }

    pub fn zeros(len: usize) -> Self {
        Rv(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Rv {
        Rv(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Rv, f: impl Fn(f64, f64) -> f64) -> Result<Rv> {
        if self.len() != other.len() {
            return Err(LabError::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Rv(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn add(&self, other: &Rv) -> Result<Rv> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Rv) -> Result<Rv> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Rv) -> Result<Rv> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Rv {
        self.map(|v| s * v)
    }
}

/// A σ-algebra given by a partition of the atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    block_of: Vec<usize>,
    n_blocks: usize,
}

impl Partition {
    /// Build from arbitrary per-atom labels; equal labels share a block.
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let mut sorted: Vec<L> = labels.to_vec();
        sorted.sort();
        sorted.dedup();
        let block_of = labels
            .iter()
            .map(|l| sorted.binary_search(l).expect("label present"))
            .collect();
        Partition {
            block_of,
            n_blocks: sorted.len(),
        }
    }

    /// Build from explicit blocks, which must partition `0..atoms`.
    pub fn from_blocks(blocks: &[Vec<usize>], atoms: usize) -> Result<Self> {
        let mut block_of = vec![usize::MAX; atoms];
        for (b, block) in blocks.iter().enumerate() {
            for &a in block {
                if a >= atoms {
                    return argument(format!("atom index {a} out of range {atoms}"));
                }
                if block_of[a] != usize::MAX {
                    return argument(format!("atom {a} appears in two blocks"));
                }
                block_of[a] = b;
            }
        }
        if let Some(a) = block_of.iter().position(|&b| b == usize::MAX) {
            return argument(format!("atom {a} is not covered by any block"));
        }
        let labels: Vec<usize> = block_of;
        Ok(Partition::from_labels(&labels))
    }

    pub fn trivial(atoms: usize) -> Self {
        Partition {
            block_of: vec![0; atoms],
            n_blocks: usize::from(atoms > 0),
        }
    }

    pub fn discrete(atoms: usize) -> Self {
        Partition {
            block_of: (0..atoms).collect(),
            n_blocks: atoms,
        }
    }

    pub fn atoms(&self) -> usize {
        self.block_of.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_of(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks];
        for (a, &b) in self.block_of.iter().enumerate() {
            out[b].push(a);
        }
        out
    }

    /// True iff every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.atoms() != coarser.atoms() {
            return false;
        }
        let mut image = vec![usize::MAX; self.n_blocks];
        for (a, &b) in self.block_of.iter().enumerate() {
            let c = coarser.block_of[a];
            if image[b] == usize::MAX {
                image[b] = c;
            } else if image[b] != c {
                return false;
            }
        }
        true
    }

    /// Coarsest common refinement.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        if self.atoms() != other.atoms() {
            return Err(LabError::Dimension {
                expected: self.atoms(),
                got: other.atoms(),
            });
        }
        let labels: Vec<(usize, usize)> = self
            .block_of
            .iter()
            .zip(&other.block_of)
            .map(|(&a, &b)| (a, b))
            .collect();
        Ok(Partition::from_labels(&labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// A time-indexed family of partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    pub sigmas: Vec<Partition>,
    pub direction: Direction,
}

impl Filtration {
    pub fn new(sigmas: Vec<Partition>, direction: Direction) -> Self {
        Filtration { sigmas, direction }
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }
}

/// True iff the refinement direction holds at every step.
pub fn check_filtration(f: &Filtration) -> bool {
    f.sigmas.windows(2).all(|w| match f.direction {
        Direction::Nondecreasing => w[1].refines(&w[0]),
        Direction::Nonincreasing => w[0].refines(&w[1]),
    })
}

/// Prefix sums S_1..S_n, computed atomwise.
pub fn partial_sum_process(xs: &[Rv]) -> Result<Vec<Rv>> {
    let first = match xs.first() {
        Some(x) => x,
        None => return argument("partial sums of an empty list"),
    };
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = Rv::zeros(first.len());
    for x in xs {
        acc = acc.add(x)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Weighted atoms with total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpace {
    weights: Vec<f64>,
}

impl FiniteSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_cap(weights, DEFAULT_ATOM_CAP)
    }

    pub fn with_cap(weights: Vec<f64>, cap: usize) -> Result<Self> {
        if weights.len() > cap {
            return Err(LabError::Size {
                atoms: weights.len() as u128,
                cap,
            });
        }
        if weights.is_empty() {
            return argument("a probability space needs at least one atom");
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return domain(format!("atom weight {w} is negative or not finite"));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(FiniteSpace { weights })
    }

    pub fn uniform(atoms: usize) -> Result<Self> {
        if atoms == 0 {
            return argument("a probability space needs at least one atom");
        }
        Self::new(vec![1.0 / atoms as f64; atoms])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, x: &Rv) -> Result<()> {
        if x.len() != self.len() {
            return Err(LabError::Dimension {
                expected: self.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_partition(&self, g: &Partition) -> Result<()> {
        if g.atoms() != self.len() {
            return Err(LabError::Dimension {
                expected: self.len(),
                got: g.atoms(),
            });
        }
        Ok(())
    }

    pub fn rv(&self, values: Vec<f64>) -> Result<Rv> {
        let x = Rv(values);
        self.check(&x)?;
        Ok(x)
    }

    pub fn expect(&self, x: &Rv) -> Result<f64> {
        self.check(x)?;
        Ok(compensated_sum(
            self.weights.iter().zip(&x.0).map(|(w, v)| w * v),
        ))
    }

    /// (Σ wᵢ|xᵢ|^p)^{1/p}.
    pub fn lp_norm(&self, x: &Rv, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return domain(format!("L^p norm needs p ≥ 1, got {p}"));
        }
        Ok(self.abs_moment(x, p)?.powf(1.0 / p))
    }

    /// E|x|^p for any p > 0.
    pub fn abs_moment(&self, x: &Rv, p: f64) -> Result<f64> {
        self.check(x)?;
        Ok(compensated_sum(
            self.weights
                .iter()
                .zip(&x.0)
                .map(|(w, v)| w * v.abs().powf(p)),
        ))
    }

    /// E(x | g): block-weighted averages, zero on zero-mass blocks.
    pub fn cond_expect(&self, x: &Rv, g: &Partition) -> Result<Rv> {
        self.check(x)?;
        self.check_partition(g)?;
        let mut mass = vec![Neumaier::default(); g.n_blocks()];
        let mut total = vec![Neumaier::default(); g.n_blocks()];
        for (a, (&w, &v)) in self.weights.iter().zip(&x.0).enumerate() {
            let b = g.block_of(a);
            mass[b].add(w);
            total[b].add(w * v);
        }
        let avg: Vec<f64> = mass
            .iter()
            .zip(&total)
            .map(|(m, t)| if m.value() > 0.0 { t.value() / m.value() } else { 0.0 })
            .collect();
        Ok(Rv((0..self.len()).map(|a| avg[g.block_of(a)]).collect()))
    }

    /// P(block) for every block of `g`.
    pub fn block_masses(&self, g: &Partition) -> Result<Vec<f64>> {
        self.check_partition(g)?;
        let mut mass = vec![0.0; g.n_blocks()];
        for (a, &w) in self.weights.iter().enumerate() {
            mass[g.block_of(a)] += w;
        }
        Ok(mass)
    }

    /// True iff `x` is constant on every block of `g` carrying positive mass.
    pub fn is_measurable(&self, x: &Rv, g: &Partition, tol: f64) -> Result<bool> {
        self.check(x)?;
        self.check_partition(g)?;
        let mut first: Vec<Option<f64>> = vec![None; g.n_blocks()];
        for (a, &v) in x.0.iter().enumerate() {
            if self.weights[a] == 0.0 {
                continue;
            }
            let b = g.block_of(a);
            match first[b] {
                None => first[b] = Some(v),
                Some(u) => {
                    if (u - v).abs() > tol * (1.0 + u.abs().max(v.abs())) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Exact E(max_{1≤j≤n}|S_j|^p) by an atomwise running maximum.
    pub fn max_abs_partial_sum_moment(&self, xs: &[Rv], p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return domain(format!("moment order must be ≥ 1, got {p}"));
        }
        let sums = partial_sum_process(xs)?;
        let running = self.running_max_abs(&sums)?;
        self.abs_moment(&running, p)
    }

    /// Atomwise max_j |S_j| for a list of partial sums.
    pub fn running_max_abs(&self, sums: &[Rv]) -> Result<Rv> {
        let mut m = Rv::zeros(self.len());
        for s in sums {
            self.check(s)?;
            for (a, v) in m.0.iter_mut().zip(&s.0) {
                *a = a.max(v.abs());
            }
        }
        Ok(m)
    }

    /// P(x ≥ t).
    pub fn prob_at_least(&self, x: &Rv, t: f64) -> Result<f64> {
        self.check(x)?;
        Ok(compensated_sum(
            self.weights
                .iter()
                .zip(&x.0)
                .filter(|(_, &v)| v >= t)
                .map(|(&w, _)| w),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coin_paths(n: usize) -> (FiniteSpace, Vec<Rv>) {
        let atoms = 1usize << n;
        let space = FiniteSpace::uniform(atoms).unwrap();
        let xs = (0..n)
            .map(|t| {
                Rv((0..atoms)
                    .map(|a| if (a >> t) & 1 == 1 { 1.0 } else { -1.0 })
                    .collect())
            })
            .collect();
        (space, xs)
    }

    #[test]
    fn cond_expect_block_average() {
        let space = FiniteSpace::uniform(4).unwrap();
        let g = Partition::from_blocks(&[vec![0, 1], vec![2, 3]], 4).unwrap();
        let x = space.rv(vec![1.0, 3.0, 2.0, 6.0]).unwrap();
        assert_eq!(space.cond_expect(&x, &g).unwrap().0, vec![2.0, 2.0, 4.0, 4.0]);
    }

    #[test]
    fn cond_expect_constant_is_identity() {
        let space = FiniteSpace::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = Partition::from_labels(&[0, 1, 0, 2]);
        let c = Rv::constant(4, 2.5);
        assert_eq!(space.cond_expect(&c, &g).unwrap(), c);
    }

    #[test]
    fn zero_mass_block_gets_zero() {
        let space = FiniteSpace::new(vec![0.5, 0.5, 0.0]).unwrap();
        let g = Partition::discrete(3);
        let x = space.rv(vec![1.0, 2.0, 7.0]).unwrap();
        assert_eq!(space.cond_expect(&x, &g).unwrap().0, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let space = FiniteSpace::uniform(3).unwrap();
        let g = Partition::trivial(3);
        let err = space.cond_expect(&Rv(vec![1.0, 2.0]), &g).unwrap_err();
        assert_eq!(err, LabError::Dimension { expected: 3, got: 2 });
    }

    #[test]
    fn weights_are_validated() {
        assert!(FiniteSpace::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteSpace::new(vec![1.5, -0.5]).is_err());
        let err = FiniteSpace::with_cap(vec![0.25; 4], 2).unwrap_err();
        assert!(matches!(err, LabError::Size { .. }));
    }

    #[test]
    fn lp_norm_examples() {
        let space = FiniteSpace::uniform(2).unwrap();
        let x = space.rv(vec![1.0, -1.0]).unwrap();
        assert!((space.lp_norm(&x, 3.0).unwrap() - 1.0).abs() < 1e-15);
        let y = space.rv(vec![2.0, 0.0]).unwrap();
        assert!((space.lp_norm(&y, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(space.lp_norm(&y, 0.5), Err(LabError::Domain(_))));
    }

    #[test]
    fn lp_norm_of_the_two_state_observable() {
        // π = (2/3, 1/3), f = (1, −2): E f⁴ = 2/3 + 16/3 = 6.
        let space = FiniteSpace::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let f = space.rv(vec![1.0, -2.0]).unwrap();
        let got = space.lp_norm(&f, 4.0).unwrap();
        assert!((got - 6f64.powf(0.25)).abs() < 1e-12);
        assert!((got - 1.56508).abs() < 1e-5);
    }

    #[test]
    fn partial_sums() {
        let x = Rv(vec![1.0, 2.0]);
        assert_eq!(partial_sum_process(&[x.clone()]).unwrap(), vec![x.clone()]);
        let s = partial_sum_process(&[x.clone(), x.scale(-1.0)]).unwrap();
        assert_eq!(s, vec![x, Rv::zeros(2)]);
        assert!(partial_sum_process(&[]).is_err());
    }

    #[test]
    fn coin_prefix_table_matches_enumeration() {
        let (_, xs) = coin_paths(3);
        let sums = partial_sum_process(&xs).unwrap();
        for a in 0..8usize {
            let mut s = 0.0;
            for t in 0..3 {
                s += if (a >> t) & 1 == 1 { 1.0 } else { -1.0 };
                assert_eq!(sums[t].0[a], s);
            }
        }
    }

    #[test]
    fn coin_max_moment_n2_p4_is_8_5() {
        // Maxima over the four paths are 2, 1, 1, 2.
        let (space, xs) = coin_paths(2);
        let v = space.max_abs_partial_sum_moment(&xs, 4.0).unwrap();
        assert!((v - 8.5).abs() < 1e-12);
    }

    #[test]
    fn coin_max_moment_n3_p2_by_enumeration() {
        // Running maxima of |S| along the 8 sign paths: 3,2,1,1,1,1,2,3.
        let mut expected = 0.0;
        for a in 0..8usize {
            let (mut s, mut m) = (0i32, 0i32);
            for t in 0..3 {
                s += if (a >> t) & 1 == 1 { 1 } else { -1 };
                m = m.max(s.abs());
            }
            expected += (m * m) as f64 / 8.0;
        }
        let (space, xs) = coin_paths(3);
        let v = space.max_abs_partial_sum_moment(&xs, 2.0).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 3.75).abs() < 1e-12);
    }

    #[test]
    fn max_moment_single_variable() {
        let space = FiniteSpace::new(vec![0.25, 0.75]).unwrap();
        let x = space.rv(vec![-2.0, 1.0]).unwrap();
        let v = space.max_abs_partial_sum_moment(&[x.clone()], 3.0).unwrap();
        assert!((v - space.abs_moment(&x, 3.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn filtration_directions() {
        let t = Partition::trivial(4);
        let d = Partition::discrete(4);
        assert!(check_filtration(&Filtration::new(vec![t.clone()], Direction::Nondecreasing)));
        assert!(check_filtration(&Filtration::new(
            vec![t.clone(), d.clone()],
            Direction::Nondecreasing
        )));
        assert!(!check_filtration(&Filtration::new(
            vec![d.clone(), t.clone()],
            Direction::Nondecreasing
        )));
        assert!(check_filtration(&Filtration::new(vec![d, t], Direction::Nonincreasing)));
    }

    #[test]
    fn from_blocks_rejects_overlap_and_gaps() {
        assert!(Partition::from_blocks(&[vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::from_blocks(&[vec![0, 1]], 3).is_err());
    }

    fn space_and_partitions() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>)> {
        (2usize..9).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(0usize..4, n),
                prop::collection::vec(0usize..3, n),
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    fn normalized(w: &[f64]) -> FiniteSpace {
        let s: f64 = w.iter().sum();
        let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
        let rest: f64 = v[1..].iter().sum();
        v[0] = 1.0 - rest;
        FiniteSpace::new(v).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn tower_property((w, fine, coarse, x, _y) in space_and_partitions()) {
            let space = normalized(&w);
            let coarse = Partition::from_labels(&coarse);
            // Refine the coarse partition so the pair is nested.
            let fine = Partition::from_labels(&fine).join(&coarse).unwrap();
            let x = Rv(x);
            let inner = space.cond_expect(&x, &fine).unwrap();
            let twice = space.cond_expect(&inner, &coarse).unwrap();
            let once = space.cond_expect(&x, &coarse).unwrap();
            for (a, b) in twice.0.iter().zip(&once.0) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // Independent double-averaging oracle on the coarse blocks.
            for block in coarse.blocks() {
                let m: f64 = block.iter().map(|&i| space.weights()[i]).sum();
                let t: f64 = block.iter().map(|&i| space.weights()[i] * x.0[i]).sum();
                for &i in &block {
                    prop_assert!((once.0[i] - t / m).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn linearity((w, labels, _c, x, y) in space_and_partitions(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let space = normalized(&w);
            let g = Partition::from_labels(&labels);
            let (x, y) = (Rv(x), Rv(y));
            let lhs = space.cond_expect(&x.scale(a).add(&y.scale(b)).unwrap(), &g).unwrap();
            let rhs = space.cond_expect(&x, &g).unwrap().scale(a)
                .add(&space.cond_expect(&y, &g).unwrap().scale(b)).unwrap();
            for (u, v) in lhs.0.iter().zip(&rhs.0) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            let ex = space.expect(&x).unwrap();
            let ecx = space.expect(&space.cond_expect(&x, &g).unwrap()).unwrap();
            prop_assert!((ex - ecx).abs() < 1e-12);
        }

        #[test]
        fn conditional_expectation_contracts((w, labels, _c, x, _y) in space_and_partitions(), p in 1.0f64..8.0) {
            let space = normalized(&w);
            let g = Partition::from_labels(&labels);
            let x = Rv(x);
            let cx = space.cond_expect(&x, &g).unwrap();
            let lhs = space.lp_norm(&cx, p).unwrap();
            let rhs = space.lp_norm(&x, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn max_dominates_endpoint(vals in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..6), p in 1.0f64..6.0) {
            let space = FiniteSpace::uniform(6).unwrap();
            let xs: Vec<Rv> = vals.into_iter().map(Rv).collect();
            let m = space.max_abs_partial_sum_moment(&xs, p).unwrap();
            let s = partial_sum_process(&xs).unwrap();
            let end = space.abs_moment(s.last().unwrap(), p).unwrap();
            prop_assert!(m >= end * (1.0 - 1e-12));
        }

        #[test]
        fn doob_for_sign_martingales(n in 1usize..6, scales in prop::collection::vec(0.1f64..3.0, 32), p in 1.5f64..6.0) {
            // X_k = ε_k·g_k(ε_1..ε_{k−1}): an exact martingale difference sequence.
            let atoms = 1usize << n;
            let space = FiniteSpace::uniform(atoms).unwrap();
            let xs: Vec<Rv> = (0..n).map(|t| {
                Rv((0..atoms).map(|a| {
                    let sign = if (a >> t) & 1 == 1 { 1.0 } else { -1.0 };
                    let past = a & ((1 << t) - 1);
                    sign * scales[(past + t) % scales.len()]
                }).collect())
            }).collect();
            for t in 1..n {
                let prev = Partition::from_labels(&(0..atoms).map(|a| a & ((1 << t) - 1)).collect::<Vec<_>>());
                let c = space.cond_expect(&xs[t], &prev).unwrap();
                prop_assert!(c.0.iter().all(|v| v.abs() < 1e-12));
            }
            let q = p / (p - 1.0);
            let lhs = space.max_abs_partial_sum_moment(&xs, p).unwrap().powf(1.0 / p);
            let s = partial_sum_process(&xs).unwrap();
            let rhs = q * space.lp_norm(s.last().unwrap(), p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
