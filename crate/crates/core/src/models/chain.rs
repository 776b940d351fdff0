//! Finite-state stationary Markov chains with exact conditioning.

use crate::error::{domain, LabError, Result};
use crate::finite_space::{Direction, Filtration, FiniteSpace, Partition, Rv, DEFAULT_ATOM_CAP};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const MEAN_TOL: f64 = 1e-10;

/// Which conditional quantity [`FiniteChain::reversed_cond`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    Sum,
    SumSquare,
}

/// A stationary chain (ζₙ) with observable Xₙ = f(ζₙ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteChain {
    s: usize,
    q: Vec<f64>,
    pi: Vec<f64>,
    f: Vec<f64>,
    #[serde(skip)]
    cum: Vec<f64>,
    #[serde(skip)]
    pi_cum: Vec<f64>,
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("nonempty");
    let t = u * total;
    cum.partition_point(|&c| c <= t).min(cum.len() - 1)
}

/// Stationary law of a row-stochastic matrix via a normalized linear solve.
pub fn stationary_distribution(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = q.len();
    let mut a = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            a[(j, i)] = q[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(s);
    b[s - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| LabError::Construction("stationary law is not unique".into()))?;
    Ok(sol.iter().map(|&v| if v.abs() < 1e-15 { 0.0 } else { v }).collect())
}

impl FiniteChain {
    /// Build from a transition matrix and an observable; π is solved for.
    pub fn new(q: Vec<Vec<f64>>, f: Vec<f64>) -> Result<Self> {
        Self::check_matrix(&q)?;
        let pi = stationary_distribution(&q)?;
        Self::with_pi(q, pi, f)
    }

    /// Same as [`FiniteChain::new`] but subtracts the π-mean from `g`.
    pub fn centered(q: Vec<Vec<f64>>, g: Vec<f64>) -> Result<Self> {
        Self::check_matrix(&q)?;
        let pi = stationary_distribution(&q)?;
        if g.len() != q.len() {
            return Err(LabError::Dimension {
                expected: q.len(),
                got: g.len(),
            });
        }
        let m: f64 = pi.iter().zip(&g).map(|(a, b)| a * b).sum();
        let f = g.iter().map(|v| v - m).collect();
        Self::with_pi(q, pi, f)
    }

    fn check_matrix(q: &[Vec<f64>]) -> Result<()> {
        let s = q.len();
        if s == 0 {
            return Err(LabError::Construction("empty state space".into()));
        }
        for (i, row) in q.iter().enumerate() {
            if row.len() != s {
                return Err(LabError::Construction(format!("row {i} has length {}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(LabError::Construction(format!("row {i} has a negative entry")));
            }
            let t: f64 = row.iter().sum();
            if (t - 1.0).abs() > ROW_TOL {
                return Err(LabError::Construction(format!("row {i} sums to {t}")));
            }
        }
        Ok(())
    }

    /// Build with a supplied stationary law, validating πQ = π and Σπf = 0.
    pub fn with_pi(q: Vec<Vec<f64>>, pi: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        Self::check_matrix(&q)?;
        let s = q.len();
        if pi.len() != s || f.len() != s {
            return Err(LabError::Dimension {
                expected: s,
                got: pi.len().min(f.len()),
            });
        }
        for j in 0..s {
            let v: f64 = (0..s).map(|i| pi[i] * q[i][j]).sum();
            if (v - pi[j]).abs() > STATIONARY_TOL || pi[j] < -STATIONARY_TOL {
                return Err(LabError::Construction(format!(
                    "π is not stationary at state {j}: (πQ)={v}, π={}",
                    pi[j]
                )));
            }
        }
        let mean: f64 = pi.iter().zip(&f).map(|(a, b)| a * b).sum();
        if mean.abs() > MEAN_TOL {
            return Err(LabError::Construction(format!("observable has π-mean {mean}")));
        }
        let flat: Vec<f64> = q.into_iter().flatten().collect();
        let cum = (0..s).flat_map(|i| cumulative(&flat[i * s..(i + 1) * s])).collect();
        let pi_cum = cumulative(&pi);
        Ok(FiniteChain {
            s,
            q: flat,
            pi,
            f,
            cum,
            pi_cum,
        })
    }

    /// Fair ±1 coin: i.i.d. signs.
    pub fn coin() -> Self {
        Self::with_pi(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![0.5, 0.5],
            vec![1.0, -1.0],
        )
        .expect("valid chain")
    }

    /// Two-state chain whose observable (1, −2) is an eigenvector with eigenvalue 0.7.
    pub fn eigen() -> Self {
        Self::with_pi(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![1.0, -2.0],
        )
        .expect("valid chain")
    }

    /// Deterministic swap of two states.
    pub fn swap() -> Self {
        Self::with_pi(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![1.0, -1.0],
        )
        .expect("valid chain")
    }

    /// i.i.d. draws from `pi` mapped through `values` (centered automatically).
    pub fn iid(pi: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let q = vec![pi.clone(); pi.len()];
        let m: f64 = pi.iter().zip(&values).map(|(a, b)| a * b).sum();
        let f = values.iter().map(|v| v - m).collect();
        Self::with_pi(q, pi, f)
    }

    /// Martingale-difference chain on (z, e): z moves by Q, e is a fresh fair sign,
    /// and X = e·f(z).
    pub fn sign_randomized(base: &FiniteChain) -> Self {
        let s = base.s;
        let mut q = vec![vec![0.0; 2 * s]; 2 * s];
        for (a, row) in q.iter_mut().enumerate() {
            let z = a / 2;
            for (b, v) in row.iter_mut().enumerate() {
                *v = base.q(z, b / 2) / 2.0;
            }
        }
        let pi = (0..2 * s).map(|a| base.pi[a / 2] / 2.0).collect();
        let f = (0..2 * s)
            .map(|a| if a % 2 == 1 { base.f[a / 2] } else { -base.f[a / 2] })
            .collect();
        Self::with_pi(q, pi, f).expect("sign randomization preserves validity")
    }

    /// Pair chain (ζₙ₋₁, ζₙ) with observable g(ζₙ) − g(ζₙ₋₁), restricted to pairs
    /// of positive probability.
    pub fn coboundary(base: &FiniteChain, g: &[f64]) -> Result<Self> {
        let s = base.s;
        if g.len() != s {
            return Err(LabError::Dimension {
                expected: s,
                got: g.len(),
            });
        }
        let pairs: Vec<(usize, usize)> = (0..s)
            .flat_map(|a| (0..s).map(move |b| (a, b)))
            .filter(|&(a, b)| base.pi[a] * base.q(a, b) > 0.0)
            .collect();
        let m = pairs.len();
        let mut q = vec![vec![0.0; m]; m];
        for (i, &(_, b)) in pairs.iter().enumerate() {
            for (j, &(b2, c)) in pairs.iter().enumerate() {
                if b2 == b {
                    q[i][j] = base.q(b, c);
                }
            }
        }
        let pi = pairs.iter().map(|&(a, b)| base.pi[a] * base.q(a, b)).collect();
        let f = pairs.iter().map(|&(a, b)| g[b] - g[a]).collect();
        Self::with_pi(q, pi, f)
    }

    /// Random chain with positive entries and a centered Gaussian observable.
    pub fn random<R: Rng + ?Sized>(s: usize, rng: &mut R) -> Self {
        loop {
            let q: Vec<Vec<f64>> = (0..s)
                .map(|_| {
                    let row: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 0.02).collect();
                    let t: f64 = row.iter().sum();
                    let mut row: Vec<f64> = row.iter().map(|v| v / t).collect();
                    let rest: f64 = row[1..].iter().sum();
                    row[0] = 1.0 - rest;
                    row
                })
                .collect();
            let g: Vec<f64> = (0..s).map(|_| StandardNormal.sample(rng)).collect();
            if let Ok(c) = Self::centered(q, g) {
                return c;
            }
        }
    }

    /// Multiply the observable by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.clone();
        c.f.iter_mut().for_each(|v| *v *= s);
        c
    }

    pub fn states(&self) -> usize {
        self.s
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.s + j]
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.s).map(|r| r.to_vec()).collect()
    }

    /// π-expectation of a per-state vector.
    pub fn expect(&self, g: &[f64]) -> f64 {
        self.pi.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    /// (Σ π(x)|g(x)|^p)^{1/p}.
    pub fn lp(&self, g: &[f64], p: f64) -> f64 {
        self.pi
            .iter()
            .zip(g)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// One application of Q.
    pub fn apply_once(&self, g: &[f64]) -> Vec<f64> {
        self.q
            .chunks(self.s)
            .map(|row| row.iter().zip(g).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Q^k g.
    pub fn apply_q(&self, g: &[f64], k: usize) -> Vec<f64> {
        let mut v = g.to_vec();
        for _ in 0..k {
            v = self.apply_once(&v);
        }
        v
    }

    /// Time-reversed chain with kernel Q*(x,y) = π(y)Q(y,x)/π(x).
    pub fn reversed(&self) -> Result<FiniteChain> {
        if let Some(i) = self.pi.iter().position(|&w| w <= 0.0) {
            return domain(format!("state {i} has zero stationary mass"));
        }
        let s = self.s;
        let q: Vec<Vec<f64>> = (0..s)
            .map(|x| {
                let mut row: Vec<f64> =
                    (0..s).map(|y| self.pi[y] * self.q(y, x) / self.pi[x]).collect();
                let t: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= t);
                row
            })
            .collect();
        Self::with_pi(q, self.pi.clone(), self.f.clone())
    }

    pub fn is_reversible(&self, tol: f64) -> bool {
        (0..self.s).all(|i| {
            (0..self.s).all(|j| (self.pi[i] * self.q(i, j) - self.pi[j] * self.q(j, i)).abs() <= tol)
        })
    }

    /// x ↦ E(S_k | ζ₀ = x) for k = 1..=n, via u_k = Q(f + u_{k−1}).
    pub fn cond_sums(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut u = vec![0.0; self.s];
        for _ in 0..n {
            let arg: Vec<f64> = self.f.iter().zip(&u).map(|(a, b)| a + b).collect();
            u = self.apply_once(&arg);
            out.push(u.clone());
        }
        out
    }

    /// x ↦ E(S_k²| ζ₀ = x) for k = 1..=n, via w_k = Q(f² + 2f·u_{k−1} + w_{k−1}).
    pub fn cond_sum_squares(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut u = vec![0.0; self.s];
        let mut w = vec![0.0; self.s];
        for _ in 0..n {
            let arg_w: Vec<f64> = (0..self.s)
                .map(|i| self.f[i] * self.f[i] + 2.0 * self.f[i] * u[i] + w[i])
                .collect();
            let arg_u: Vec<f64> = self.f.iter().zip(&u).map(|(a, b)| a + b).collect();
            w = self.apply_once(&arg_w);
            u = self.apply_once(&arg_u);
            out.push(w.clone());
        }
        out
    }

    pub fn cond_sum(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1, "horizon must be positive");
        self.cond_sums(k).pop().expect("k ≥ 1")
    }

    pub fn cond_sum_square(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1, "horizon must be positive");
        self.cond_sum_squares(k).pop().expect("k ≥ 1")
    }

    /// x ↦ E(S_k or S_k² | ζ_{k+1} = x), computed on the reversed chain.
    pub fn reversed_cond(&self, quantity: Quantity, k: usize) -> Result<Vec<f64>> {
        let r = self.reversed()?;
        Ok(match quantity {
            Quantity::Sum => r.cond_sum(k),
            Quantity::SumSquare => r.cond_sum_square(k),
        })
    }

    /// Atom per trajectory (ζ₀..ζₙ); F_k is the partition by (ζ₀..ζ_k); X_k = f(ζ_k).
    pub fn unroll(&self, n: usize) -> Result<(FiniteSpace, Filtration, Vec<Rv>)> {
        self.unroll_with_cap(n, DEFAULT_ATOM_CAP)
    }

    pub fn unroll_with_cap(&self, n: usize, cap: usize) -> Result<(FiniteSpace, Filtration, Vec<Rv>)> {
        let s = self.s;
        let atoms = (s as u128).checked_pow(n as u32 + 1).unwrap_or(u128::MAX);
        if atoms > cap as u128 {
            return Err(LabError::Size { atoms, cap });
        }
        let atoms = atoms as usize;
        let digit = |a: usize, t: usize| (a / s.pow(t as u32)) % s;
        let mut weights = Vec::with_capacity(atoms);
        for a in 0..atoms {
            let mut w = self.pi[digit(a, 0)];
            for t in 1..=n {
                w *= self.q(digit(a, t - 1), digit(a, t));
            }
            weights.push(w);
        }
        let total: f64 = crate::finite_space::compensated_sum(weights.iter().copied());
        weights.iter_mut().for_each(|w| *w /= total);
        let space = FiniteSpace::with_cap(weights, cap)?;
        let sigmas = (0..=n)
            .map(|k| {
                let m = s.pow(k as u32 + 1);
                Partition::from_labels(&(0..atoms).map(|a| a % m).collect::<Vec<_>>())
            })
            .collect();
        let xs = (1..=n)
            .map(|t| Rv((0..atoms).map(|a| self.f[digit(a, t)]).collect()))
            .collect();
        Ok((space, Filtration::new(sigmas, Direction::Nondecreasing), xs))
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.pi_cum, rng.gen())
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        pick(&self.cum[from * self.s..(from + 1) * self.s], rng.gen())
    }

    fn rebuild_cache(&mut self) {
        let s = self.s;
        self.cum = (0..s).flat_map(|i| cumulative(&self.q[i * s..(i + 1) * s])).collect();
        self.pi_cum = cumulative(&self.pi);
    }

    /// Restore sampling tables after deserialization.
    pub fn ready(mut self) -> Self {
        self.rebuild_cache();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn apply_q_examples() {
        let c = FiniteChain::eigen();
        assert_eq!(c.apply_q(&[3.0, 4.0], 0), vec![3.0, 4.0]);
        let sw = FiniteChain::swap();
        assert_eq!(sw.apply_q(&[1.0, -1.0], 2), vec![1.0, -1.0]);
        assert!(close(&c.apply_q(c.f(), 1), &[0.7, -1.4], 1e-15));
    }

    #[test]
    fn eigen_chain_stationary_law() {
        let q = FiniteChain::eigen().matrix();
        let pi = stationary_distribution(&q).unwrap();
        assert!(close(&pi, &[2.0 / 3.0, 1.0 / 3.0], 1e-14));
    }

    #[test]
    fn invalid_chains_are_rejected() {
        assert!(FiniteChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![1.0, -1.0]).is_err());
        assert!(FiniteChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, 1.0]).is_err());
        assert!(FiniteChain::with_pi(
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.5, 0.5],
            vec![1.0, -1.0]
        )
        .is_err());
    }

    #[test]
    fn cond_sum_examples() {
        let iid = FiniteChain::iid(vec![0.3, 0.7], vec![1.0, 5.0]).unwrap();
        assert!(iid.cond_sum(3).iter().all(|v| v.abs() < 1e-14));
        let c = FiniteChain::eigen();
        let expected: Vec<f64> = c.f().iter().map(|v| 1.19 * v).collect();
        assert!(close(&c.cond_sum(2), &expected, 1e-14));
        assert!(close(&c.cond_sum(1), &c.apply_q(c.f(), 1), 1e-15));
    }

    #[test]
    fn cond_sum_square_examples() {
        let iid = FiniteChain::iid(vec![0.3, 0.7], vec![1.0, 5.0]).unwrap();
        let ef2 = iid.expect(&iid.f().iter().map(|v| v * v).collect::<Vec<_>>());
        for k in 1..5 {
            assert!(iid.cond_sum_square(k).iter().all(|v| (v - k as f64 * ef2).abs() < 1e-12));
        }
        let c = FiniteChain::eigen();
        let f2: Vec<f64> = c.f().iter().map(|v| v * v).collect();
        assert!(close(&c.cond_sum_square(1), &c.apply_q(&f2, 1), 1e-15));
        // Brute force over the two-step paths from each start state.
        for x in 0..2 {
            let mut e = 0.0;
            for y in 0..2 {
                for z in 0..2 {
                    let s = c.f()[y] + c.f()[z];
                    e += c.q(x, y) * c.q(y, z) * s * s;
                }
            }
            assert!((c.cond_sum_square(2)[x] - e).abs() < 1e-13);
        }
    }

    #[test]
    fn reversed_examples() {
        let sym = FiniteChain::coin();
        assert!(sym.reversed_cond(Quantity::Sum, 3).unwrap().iter().all(|v| v.abs() < 1e-15));
        let c = FiniteChain::eigen();
        // Bayes inversion of the joint law of (ζ₁, ζ₂).
        for x in 0..2 {
            let num: f64 = (0..2).map(|y| c.pi()[y] * c.q(y, x) * c.f()[y]).sum();
            let den: f64 = (0..2).map(|y| c.pi()[y] * c.q(y, x)).sum();
            assert!((c.reversed_cond(Quantity::Sum, 1).unwrap()[x] - num / den).abs() < 1e-14);
        }
        // E(S₂² | ζ₃ = x) by summing over (ζ₁, ζ₂).
        for x in 0..2 {
            let (mut num, mut den) = (0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    let w = c.pi()[a] * c.q(a, b) * c.q(b, x);
                    let s = c.f()[a] + c.f()[b];
                    num += w * s * s;
                    den += w;
                }
            }
            let got = c.reversed_cond(Quantity::SumSquare, 2).unwrap()[x];
            assert!((got - num / den).abs() < 1e-13);
        }
        // Two-state chains are always reversible.
        assert!(c.is_reversible(1e-14));
        let r = c.reversed().unwrap();
        assert!(close(&r.cond_sum(4), &c.cond_sum(4), 1e-13));
    }

    #[test]
    fn zero_mass_state_blocks_reversal() {
        let c = FiniteChain::with_pi(
            vec![vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5]],
            vec![0.0, 0.5, 0.5],
            vec![0.0, 1.0, -1.0],
        )
        .unwrap();
        assert!(matches!(c.reversed(), Err(LabError::Domain(_))));
    }

    #[test]
    fn unroll_two_states_one_step() {
        let c = FiniteChain::eigen();
        let (space, filt, xs) = c.unroll(1).unwrap();
        assert_eq!(space.len(), 4);
        for a in 0..4 {
            let (i, j) = (a % 2, a / 2);
            assert!((space.weights()[a] - c.pi()[i] * c.q(i, j)).abs() < 1e-15);
        }
        assert!(crate::finite_space::check_filtration(&filt));
        assert_eq!(xs.len(), 1);
    }

    #[test]
    fn unroll_agrees_with_cond_sum() {
        let c = FiniteChain::eigen();
        let n = 6;
        let (space, filt, xs) = c.unroll(n).unwrap();
        let sums = crate::finite_space::partial_sum_process(&xs).unwrap();
        for k in 1..=n {
            let e0 = space.cond_expect(&sums[k - 1], &filt.sigmas[0]).unwrap();
            let lhs = space.lp_norm(&e0, 4.0).unwrap();
            let rhs = c.lp(&c.cond_sum(k), 4.0);
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs));
        }
    }

    #[test]
    fn coin_unroll_reproduces_max_moment() {
        let (space, _, xs) = FiniteChain::coin().unroll(2).unwrap();
        let v = space.max_abs_partial_sum_moment(&xs, 4.0).unwrap();
        assert!((v - 8.5).abs() < 1e-12);
    }

    #[test]
    fn unroll_respects_cap() {
        let c = FiniteChain::eigen();
        assert!(matches!(c.unroll_with_cap(10, 1000), Err(LabError::Size { .. })));
    }

    #[test]
    fn sign_randomized_is_mds() {
        let m = FiniteChain::sign_randomized(&FiniteChain::eigen());
        assert!(m.apply_q(m.f(), 1).iter().all(|v| v.abs() < 1e-15));
        assert_eq!(m.f(), &[-1.0, 1.0, 2.0, -2.0]);
    }

    #[test]
    fn coboundary_sums_telescope() {
        let base = FiniteChain::eigen();
        let c = FiniteChain::coboundary(&base, &[1.0, 3.0]).unwrap();
        let (space, _, xs) = c.unroll(3).unwrap();
        let s = crate::finite_space::partial_sum_process(&xs).unwrap();
        // |S_k| ≤ max g − min g on every trajectory of positive mass.
        for sk in &s {
            for (v, w) in sk.0.iter().zip(space.weights()) {
                assert!(*w == 0.0 || v.abs() <= 2.0 + 1e-12);
            }
        }
        assert!(space.len() > 0);
    }

    #[test]
    fn lp_norm_of_eigen_observable() {
        let c = FiniteChain::eigen();
        assert!((c.lp(c.f(), 4.0) - 6f64.powf(0.25)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn semigroup(seed in 0u64..1000, j in 0usize..6, k in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = FiniteChain::random(3, &mut rng);
            let g = [1.0, -0.5, 2.0];
            let a = c.apply_q(&g, j + k);
            let b = c.apply_q(&c.apply_q(&g, j), k);
            prop_assert!(close(&a, &b, 1e-13));
        }

        #[test]
        fn cond_sum_subadditive(seed in 0u64..1000, i in 1usize..8, j in 1usize..8, p in 2.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = FiniteChain::random(3, &mut rng);
            let a = |k: usize| c.lp(&c.cond_sum(k), p);
            prop_assert!(a(i + j) <= a(i) + a(j) + 1e-12);
        }
    }
}
