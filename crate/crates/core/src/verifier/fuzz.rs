//! Randomized suites for the explicit-constant results. Every draw has its own
//! ChaCha stream, so a suite is reproducible and parallel.

use super::lemmas::{check_basic, check_covbeta, check_cross, check_subadd, CrossVariant, StepFn, SubaddItem};
use super::maximal::{check_maximal_explicit, check_maximal_proba, Phi};
use super::ExplicitCheck;
use crate::error::Result;
use crate::finite_space::{Direction, Filtration, FiniteSpace, Partition, Rv};
use crate::models::{path_rng, FiniteChain};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub name: String,
    pub draws: usize,
    pub checks: usize,
    pub violations: usize,
    /// First failing instance, described.
    pub witness: Option<String>,
    /// Largest lhs/rhs seen over rows with a positive right side.
    pub max_ratio: f64,
}

impl FuzzSummary {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    fn merge(name: &str, draws: usize, outcomes: Vec<Result<(ExplicitCheck, String)>>) -> FuzzSummary {
        let mut s = FuzzSummary {
            name: name.into(),
            draws,
            checks: 0,
            violations: 0,
            witness: None,
            max_ratio: 0.0,
        };
        for o in outcomes {
            match o {
                Ok((check, desc)) => {
                    for row in &check.rows {
                        s.checks += 1;
                        if row.rhs > 0.0 {
                            s.max_ratio = s.max_ratio.max(row.lhs / row.rhs);
                        }
                        if !row.ok {
                            s.violations += 1;
                            if s.witness.is_none() {
                                s.witness = Some(format!("{desc}: {} lhs {} > rhs {}", row.label, row.lhs, row.rhs));
                            }
                        }
                    }
                }
                Err(e) => {
                    s.checks += 1;
                    s.violations += 1;
                    if s.witness.is_none() {
                        s.witness = Some(format!("error: {e}"));
                    }
                }
            }
        }
        s
    }
}

fn run<F>(name: &str, draws: usize, seed: u64, f: F) -> FuzzSummary
where
    F: Fn(&mut ChaCha8Rng) -> Result<(ExplicitCheck, String)> + Sync,
{
    let outcomes: Vec<_> = (0..draws)
        .into_par_iter()
        .map(|i| f(&mut path_rng(seed, i as u64)))
        .collect();
    FuzzSummary::merge(name, draws, outcomes)
}

/// `draws` instances of each cross variant, x, y ∈ [−10, 10].
pub fn cross_suite(draws: usize, seed: u64) -> Vec<FuzzSummary> {
    CrossVariant::ALL
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            run(&format!("cross/{variant:?}"), draws, seed.wrapping_add(vi as u64 * 1_000_003), |rng| {
                let mut x = rng.gen_range(-10.0f64..=10.0);
                let mut y = rng.gen_range(-10.0f64..=10.0);
                // Exact small-integer points exercise the equality cases.
                if rng.gen_bool(0.05) {
                    x = x.round();
                    y = if rng.gen_bool(0.5) { 0.0 } else { y.round() };
                }
                let p = match variant {
                    CrossVariant::Rio => rng.gen_range(2.0..=3.0),
                    CrossVariant::Rio34 => rng.gen_range(3.0f64..=4.0).max(3.0 + 1e-9),
                    CrossVariant::Int => {
                        x = x.abs();
                        y = y.abs();
                        rng.gen_range(1.0..=8.0)
                    }
                    CrossVariant::EvenInt => 2.0 * rng.gen_range(1..=5) as f64,
                };
                let (lhs, rhs, _) = check_cross(x, y, p, variant)?;
                let row = super::CheckRow {
                    label: "cross".into(),
                    lhs,
                    rhs,
                    ok: lhs <= rhs + 1e-12 * rhs.abs().max(1.0),
                };
                Ok((ExplicitCheck::new("cross", vec![row]), format!("x={x}, y={y}, p={p}")))
            })
        })
        .collect()
}

/// An exchangeable pair (X₀, X₁ = X₀∘σ) on `atoms` atoms, σ an involution
/// preserving the weights; g is σ(X₀), refined at random half the time.
pub fn exchangeable_pair(rng: &mut ChaCha8Rng, atoms: usize) -> (FiniteSpace, Rv, Rv, Partition) {
    let mut order: Vec<usize> = (0..atoms).collect();
    order.shuffle(rng);
    let mut sigma: Vec<usize> = (0..atoms).collect();
    let pairs = rng.gen_range(0..=atoms / 2);
    for k in 0..pairs {
        let (a, b) = (order[2 * k], order[2 * k + 1]);
        sigma[a] = b;
        sigma[b] = a;
    }
    let mut w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
    for a in 0..atoms {
        if sigma[a] > a {
            w[sigma[a]] = w[a];
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let palette = [0.0, 0.5, 1.0, 2.0, 3.0];
    let x0: Vec<f64> = (0..atoms)
        .map(|_| {
            if rng.gen_bool(0.5) {
                palette[rng.gen_range(0..palette.len())]
            } else {
                rng.gen_range(0.0..4.0)
            }
        })
        .collect();
    let x1: Vec<f64> = (0..atoms).map(|a| x0[sigma[a]]).collect();
    let labels: Vec<(u64, usize)> = (0..atoms)
        .map(|a| (x0[a].to_bits(), if rng.gen_bool(0.5) { rng.gen_range(0..2) } else { 0 }))
        .collect();
    let g = if rng.gen_bool(0.5) {
        Partition::from_labels(&labels)
    } else {
        Partition::from_labels(&labels.iter().map(|l| l.0).collect::<Vec<_>>())
    };
    (FiniteSpace::new(w).expect("normalized"), Rv(x0), Rv(x1), g)
}

/// Basic lemma on random exchangeable pairs, p ∈ {3, 4, 6}, five u values each.
pub fn basic_suite(draws: usize, seed: u64) -> FuzzSummary {
    run("basic", draws, seed, |rng| {
        let (space, x0, x1, g) = exchangeable_pair(rng, 6);
        let p = [3.0, 4.0, 6.0][rng.gen_range(0..3)];
        let mut rows = vec![];
        for i in 0..=4 {
            let u = (p - 2.0) * i as f64 / 4.0;
            let r = check_basic(&space, &x0, &x1, &g, p, u)?;
            rows.extend(r.rows.into_iter().map(|mut row| {
                row.label = format!("{}(u={u})", row.label);
                row
            }));
        }
        Ok((ExplicitCheck::new("basic", rows), format!("p={p}, x0={:?}, x1={:?}", x0.0, x1.0)))
    })
}

fn random_step(rng: &mut ChaCha8Rng) -> StepFn {
    let k = rng.gen_range(1..=3);
    StepFn {
        base: rng.gen_range(-1.0..1.0),
        jumps: (0..k)
            .map(|_| {
                let t = if rng.gen_bool(0.5) {
                    rng.gen_range(0..4) as f64 + 0.5
                } else {
                    rng.gen_range(0..4) as f64
                };
                (t, rng.gen_range(-2.0..2.0))
            })
            .collect(),
    }
}

/// Covariance lemma on random 8-atom spaces with step functions h, g.
pub fn covbeta_suite(draws: usize, seed: u64) -> FuzzSummary {
    run("covbeta", draws, seed, |rng| {
        let atoms = 8;
        let w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.02..1.0)).collect();
        let total: f64 = w.iter().sum();
        let space = FiniteSpace::new(w.iter().map(|v| v / total).collect()).expect("normalized");
        let blocks = rng.gen_range(1..=4);
        let labels: Vec<usize> = (0..atoms).map(|_| rng.gen_range(0..blocks)).collect();
        let sigma0 = Partition::from_labels(&labels);
        let block_val: Vec<f64> = (0..blocks).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z = Rv(labels.iter().map(|&l| block_val[l]).collect());
        let mut y = || Rv((0..atoms).map(|_| rng.gen_range(0..4) as f64).collect());
        let (yi, yj) = (y(), y());
        let (h, g) = (random_step(rng), random_step(rng));
        let r = check_covbeta(&space, &z, &yi, &yj, &sigma0, &h, &g)?;
        Ok((r, format!("z={:?}, yi={:?}, yj={:?}", z.0, yi.0, yj.0)))
    })
}

/// V_k = g(k)·u_k with g concave, g(0) = 0 and u_k ∈ [1, C]: C-subadditive.
pub fn subadditive_array(rng: &mut ChaCha8Rng, len: usize, c: f64) -> Vec<f64> {
    if rng.gen_bool(0.03) {
        return vec![0.0; len];
    }
    let mut d = rng.gen_range(0.1..2.0);
    let mut g = 0.0;
    let mut v = vec![0.0];
    for _ in 1..len {
        g += d;
        match rng.gen_range(0..4) {
            0 => d *= rng.gen_range(0.3..1.0),
            1 => d = 0.0f64.max(d - rng.gen_range(0.0..0.2)),
            _ => {}
        }
        v.push(g * rng.gen_range(1.0..=c));
    }
    v
}

/// Items 1–3 of the subadditive lemma in rotation. Item 2 draws q ∈ (0, 2], where
/// it holds; `inject_failure` appends its q = 3 counterexample.
pub fn subadd_suite(draws: usize, seed: u64, inject_failure: bool) -> FuzzSummary {
    let mut s = run("lmasubadd", draws, seed, |rng| {
        let c = rng.gen_range(1.0..3.0);
        let v = subadditive_array(rng, 65, c);
        let (item, q) = match rng.gen_range(0..3) {
            0 => (SubaddItem::One { n: rng.gen_range(1..=64) }, rng.gen_range(0.0..3.0)),
            1 => {
                let m = rng.gen_range(1..=8);
                let k = rng.gen_range(1..=64 / m);
                (SubaddItem::Two { k, m }, rng.gen_range(1e-3..=2.0))
            }
            _ => {
                let gamma: f64 = rng.gen_range(0.05..=1.0);
                let delta = rng.gen_range(0.01..=gamma);
                (SubaddItem::Three { n: rng.gen_range(1..=64), gamma, delta }, rng.gen_range(0.0..3.0))
            }
        };
        let r = check_subadd(&v, c, q, item)?;
        Ok((r, format!("{item:?}, C={c}, q={q}")))
    });
    if inject_failure {
        let v = [0.0, 1.0, 1.0];
        let extra = check_subadd(&v, 1.0, 3.0, SubaddItem::Two { k: 1, m: 1 }).map(|r| (r, "injected: V ≡ 1, q = 3".to_string()));
        let add = FuzzSummary::merge("lmasubadd", 1, vec![extra]);
        s.draws += 1;
        s.checks += add.checks;
        s.violations += add.violations;
        s.max_ratio = s.max_ratio.max(add.max_ratio);
        if s.witness.is_none() {
            s.witness = add.witness;
        }
    }
    s
}

/// A random adapted sequence of length n ≤ 8 driven by a chain on ≤ 3 states.
///
/// Stationary draws start the chain from π and use one observable; the others
/// start from a random law and use a time-varying observable.
pub struct AdaptedInstance {
    pub space: FiniteSpace,
    pub filtration: Filtration,
    pub xs: Vec<Rv>,
    pub stationary: bool,
    pub description: String,
}

pub fn random_adapted(rng: &mut ChaCha8Rng, n: usize) -> AdaptedInstance {
    let s = rng.gen_range(2..=3);
    let mut chain = FiniteChain::random(s, rng);
    let draw_f = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..s).map(|_| rng.gen_range(-8..=8) as f64 / 4.0).collect() };
    let stationary = rng.gen_bool(0.5);
    if stationary {
        let f = draw_f(rng);
        chain = FiniteChain::centered(chain.matrix(), f).expect("valid chain");
        let (space, filtration, xs) = chain.unroll(n).expect("small chain");
        return AdaptedInstance {
            space,
            filtration,
            xs,
            stationary,
            description: format!("stationary chain Q={:?}, f={:?}", chain.matrix(), chain.f()),
        };
    }
    let q = chain.matrix();
    let mut init: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let t: f64 = init.iter().sum();
    init.iter_mut().for_each(|v| *v /= t);
    let fs: Vec<Vec<f64>> = (0..n).map(|_| draw_f(rng)).collect();
    let atoms = s.pow(n as u32 + 1);
    let digit = |a: usize, t: usize| (a / s.pow(t as u32)) % s;
    let mut w: Vec<f64> = (0..atoms)
        .map(|a| (1..=n).fold(init[digit(a, 0)], |acc, t| acc * q[digit(a, t - 1)][digit(a, t)]))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let sigmas = (0..=n)
        .map(|k| {
            let m = s.pow(k as u32 + 1);
            Partition::from_labels(&(0..atoms).map(|a| a % m).collect::<Vec<_>>())
        })
        .collect();
    let xs = (1..=n)
        .map(|t| Rv((0..atoms).map(|a| fs[t - 1][digit(a, t)]).collect()))
        .collect();
    AdaptedInstance {
        space: FiniteSpace::new(w).expect("normalized"),
        filtration: Filtration::new(sigmas, Direction::Nondecreasing),
        xs,
        stationary,
        description: format!("nonstationary chain Q={q:?}, init={init:?}, f_t={fs:?}"),
    }
}

/// Maximal inequalities (explicit and both probability forms) on random adapted
/// sequences, r ≤ 3, p ∈ {2, 2.5, 3, 4}.
pub fn maximal_suite(draws: usize, seed: u64) -> FuzzSummary {
    run("maximal", draws, seed, |rng| {
        let r = rng.gen_range(0..=3u32);
        // Mostly dyadic lengths; some lengths in between exercise the padding.
        let n = if rng.gen_bool(0.75) { 1usize << r } else { rng.gen_range(1..=8) };
        let inst = random_adapted(rng, n);
        let p = [2.0, 2.5, 3.0, 4.0][rng.gen_range(0..4)];
        let mut rows = check_maximal_explicit(&inst.space, &inst.filtration, &inst.xs, p, inst.stationary)?.rows;
        let m = inst.xs.iter().flat_map(|x| x.0.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        let top = m * inst.xs.len() as f64;
        let x_grid: Vec<f64> = (1..=8).map(|i| top * i as f64 / 16.0 + 1e-3).collect();
        let phi = if rng.gen_bool(0.5) {
            Phi::Power(rng.gen_range(1.0..4.0))
        } else {
            Phi::Exp(rng.gen_range(0.1..1.5))
        };
        for second in [false, true] {
            let b = if second { Some(m.max(1e-12)) } else { None };
            let r = check_maximal_proba(&inst.space, &inst.filtration, &inst.xs, p, phi, &x_grid, b)?;
            rows.extend(r.rows);
        }
        Ok((ExplicitCheck::new("maximal", rows), format!("n={n}, p={p}, {phi:?}, {}", inst.description)))
    })
}
