//! Projective profiles: the per-horizon norms every right-hand side is built from.

use crate::error::{domain, Result};
use crate::models::{DeltaNuChain, FiniteChain};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileMode {
    Exact,
    Mc { paths: usize, resamples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSe {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub bc: Vec<f64>,
    pub var: Vec<f64>,
}

/// Entry `[k − 1]` of each array belongs to horizon k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveProfile {
    pub p: f64,
    pub n: usize,
    pub mode: ProfileMode,
    /// ‖E₀(S_k)‖_p
    pub a: Vec<f64>,
    /// ‖E₀(S_k²)‖_{p/2}
    pub b: Vec<f64>,
    /// ‖E₀(S_k²) − E(S_k²)‖_{p/2}
    pub bc: Vec<f64>,
    /// E(S_k²)
    pub var: Vec<f64>,
    /// ‖Ē_{k+1}(S_k)‖_p, Markov families only.
    pub abar: Option<Vec<f64>>,
    /// ‖Ē_{k+1}(S_k²)‖_{p/2}, Markov families only.
    pub bbar: Option<Vec<f64>>,
    /// E|X₁|^p
    pub moment_p: f64,
    /// ‖E₀(X₁²)‖_{p/2}
    pub cond_square_1: f64,
    pub se: Option<ProfileSe>,
    pub notes: Vec<String>,
}

impl ProjectiveProfile {
    pub fn a(&self, k: usize) -> f64 {
        self.a[k - 1]
    }
    pub fn b(&self, k: usize) -> f64 {
        self.b[k - 1]
    }
    pub fn bc(&self, k: usize) -> f64 {
        self.bc[k - 1]
    }
    pub fn var(&self, k: usize) -> f64 {
        self.var[k - 1]
    }
    /// ‖X₁‖_p
    pub fn x_norm(&self) -> f64 {
        self.moment_p.powf(1.0 / self.p)
    }

    /// Keep horizons 1..=n only.
    pub fn truncated(&self, n: usize) -> ProjectiveProfile {
        let n = n.min(self.n);
        let cut = |v: &Vec<f64>| v[..n].to_vec();
        ProjectiveProfile {
            n,
            a: cut(&self.a),
            b: cut(&self.b),
            bc: cut(&self.bc),
            var: cut(&self.var),
            abar: self.abar.as_ref().map(cut),
            bbar: self.bbar.as_ref().map(cut),
            se: self.se.as_ref().map(|s| ProfileSe {
                a: cut(&s.a),
                b: cut(&s.b),
                bc: cut(&s.bc),
                var: cut(&s.var),
            }),
            ..self.clone()
        }
    }

    /// Columns k, A, B, Bc, var, Abar, Bbar and the four standard errors;
    /// unavailable cells are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,A,B,Bc,var,Abar,Bbar,se_A,se_B,se_Bc,se_var\n");
        let opt = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|x| x[i].to_string()).unwrap_or_default();
        for i in 0..self.n {
            let se = |f: fn(&ProfileSe) -> &Vec<f64>| self.se.as_ref().map(|s| f(s)[i].to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                i + 1,
                self.a[i],
                self.b[i],
                self.bc[i],
                self.var[i],
                opt(&self.abar, i),
                opt(&self.bbar, i),
                se(|s| &s.a),
                se(|s| &s.b),
                se(|s| &s.bc),
                se(|s| &s.var),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }
}

fn weighted_lp(w: &[f64], g: &[f64], p: f64) -> f64 {
    w.iter().zip(g).map(|(a, v)| a * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

struct Forward {
    a: Vec<f64>,
    b: Vec<f64>,
    bc: Vec<f64>,
    var: Vec<f64>,
}

fn forward(chain: &FiniteChain, p: f64, n: usize) -> Forward {
    let pi = chain.pi();
    let us = chain.cond_sums(n);
    let ws = chain.cond_sum_squares(n);
    let mut out = Forward {
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        bc: Vec::with_capacity(n),
        var: Vec::with_capacity(n),
    };
    for (u, w) in us.iter().zip(&ws) {
        let v = chain.expect(w);
        out.a.push(weighted_lp(pi, u, p));
        out.b.push(weighted_lp(pi, w, p / 2.0));
        let centered: Vec<f64> = w.iter().map(|x| x - v).collect();
        out.bc.push(weighted_lp(pi, &centered, p / 2.0));
        out.var.push(v);
    }
    out
}

/// Exact profile of a finite chain, reversed terms included.
pub fn profile_exact(chain: &FiniteChain, p: f64, n: usize) -> Result<ProjectiveProfile> {
    if !(p >= 2.0) {
        return domain(format!("profiles need p ≥ 2, got {p}"));
    }
    if n == 0 {
        return domain("profiles need n ≥ 1");
    }
    let fw = forward(chain, p, n);
    let rev = chain.reversed()?;
    let bw = forward(&rev, p, n);
    let f2: Vec<f64> = chain.f().iter().map(|v| v * v).collect();
    Ok(ProjectiveProfile {
        p,
        n,
        mode: ProfileMode::Exact,
        a: fw.a,
        b: fw.b,
        bc: fw.bc,
        var: fw.var,
        abar: Some(bw.a),
        bbar: Some(bw.b),
        moment_p: chain.lp(chain.f(), p).powf(p),
        cond_square_1: chain.lp(&chain.apply_once(&f2), p / 2.0),
        se: None,
        notes: Vec::new(),
    })
}

/// Profile of the δ/υ chain by quadrature on its grid. The chain is
/// reversible, so the reversed terms coincide with the forward ones.
pub fn profile_delta_nu(chain: &DeltaNuChain, p: f64, n: usize) -> Result<ProjectiveProfile> {
    if !(p >= 2.0) {
        return domain(format!("profiles need p ≥ 2, got {p}"));
    }
    if n == 0 {
        return domain("profiles need n ≥ 1");
    }
    let w = &chain.pi;
    let f = chain.f_nodes();
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let x = &chain.nodes;
    let cells = x.len();
    // u is odd, so Q acts on it by the factor (1 − |x|); f·u and f² are even.
    let mut u = vec![0.0; cells];
    let mut sq = vec![0.0; cells];
    let (mut a, mut b, mut bc, mut var) = (vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let arg: Vec<f64> = (0..cells).map(|i| f2[i] + 2.0 * f[i] * u[i] + sq[i]).collect();
        sq = chain.apply_q_even(&arg);
        for i in 0..cells {
            u[i] = (1.0 - x[i]) * (f[i] + u[i]);
        }
        let v = chain.pi_expect(&sq);
        a.push(weighted_lp(w, &u, p));
        b.push(weighted_lp(w, &sq, p / 2.0));
        let c: Vec<f64> = sq.iter().map(|s| s - v).collect();
        bc.push(weighted_lp(w, &c, p / 2.0));
        var.push(v);
    }
    let moment_p = weighted_lp(w, &f, p).powf(p);
    let cond_square_1 = weighted_lp(w, &chain.apply_q_even(&f2), p / 2.0);
    Ok(ProjectiveProfile {
        p,
        n,
        mode: ProfileMode::Exact,
        abar: Some(a.clone()),
        bbar: Some(b.clone()),
        a,
        b,
        bc,
        var,
        moment_p,
        cond_square_1,
        se: None,
        notes: vec![format!("quadrature on {cells} cells")],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_space::partial_sum_process;
    use crate::models::DeltaNuSpec;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn iid_chain_has_no_projective_terms() {
        let c = FiniteChain::iid(vec![0.25, 0.75], vec![3.0, -1.0]).unwrap();
        let pr = profile_exact(&c, 4.0, 6).unwrap();
        for k in 1..=6 {
            assert!(pr.a(k).abs() < 1e-14);
            assert!(pr.bc(k).abs() < 1e-12);
            assert!((pr.var(k) - 3.0 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_first_horizon() {
        let pr = profile_exact(&FiniteChain::eigen(), 4.0, 3).unwrap();
        assert!((pr.a(1) - 0.7 * 6f64.powf(0.25)).abs() < 1e-12);
        assert!((pr.a(1) - 1.09556).abs() < 1e-5);
        assert!((pr.a(2) - 1.19 * 6f64.powf(0.25)).abs() < 1e-12);
        // E X² = 2.
        assert!((pr.var(1) - 2.0).abs() < 1e-12);
        assert!((pr.moment_p - 6.0).abs() < 1e-12);
    }

    #[test]
    fn mds_profile_is_martingale() {
        let m = FiniteChain::sign_randomized(&FiniteChain::eigen());
        let pr = profile_exact(&m, 4.0, 10).unwrap();
        for k in 1..=10 {
            assert!(pr.a(k) < 1e-14);
            assert!((pr.var(k) - k as f64 * pr.var(1)).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_coin_reversed_terms_vanish() {
        let pr = profile_exact(&FiniteChain::coin(), 4.0, 4).unwrap();
        assert!(pr.abar.unwrap().iter().all(|v| *v == 0.0));
    }

    /// Unroll oracle for A, B, var: conditional expectations given F₀ on the
    /// path space.
    fn unroll_oracle(c: &FiniteChain, p: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (space, filt, xs) = c.unroll(n).unwrap();
        let sums = partial_sum_process(&xs).unwrap();
        let g0 = &filt.sigmas[0];
        let mut out = (vec![], vec![], vec![]);
        for s in &sums {
            let e = space.cond_expect(s, g0).unwrap();
            out.0.push(space.lp_norm(&e, p).unwrap());
            let s2 = s.mul(s).unwrap();
            let e2 = space.cond_expect(&s2, g0).unwrap();
            out.1.push(space.lp_norm(&e2, p / 2.0).unwrap());
            out.2.push(space.expect(&s2).unwrap());
        }
        out
    }

    #[test]
    fn agrees_with_unroll_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for s in 2..=3 {
            for _ in 0..3 {
                let c = FiniteChain::random(s, &mut rng);
                let n = if s == 2 { 8 } else { 6 };
                let pr = profile_exact(&c, 3.0, n).unwrap();
                let (a, b, v) = unroll_oracle(&c, 3.0, n);
                for k in 0..n {
                    assert!((pr.a[k] - a[k]).abs() <= 1e-9 * (1.0 + a[k]));
                    assert!((pr.b[k] - b[k]).abs() <= 1e-9 * (1.0 + b[k]));
                    assert!((pr.var[k] - v[k]).abs() <= 1e-9 * (1.0 + v[k]));
                }
            }
        }
    }

    #[test]
    fn reversed_terms_match_bayes_inversion() {
        // Ē_{k+1}(S_k) from the forward path law on 3-step paths.
        let c = FiniteChain::eigen();
        let (space, _, xs) = c.unroll(3).unwrap();
        let s = xs[0].add(&xs[1]).unwrap();
        // Partition by ζ₃ (the most significant digit).
        let labels: Vec<usize> = (0..space.len()).map(|a| a / 8).collect();
        let g = crate::finite_space::Partition::from_labels(&labels);
        let e = space.cond_expect(&s, &g).unwrap();
        let pr = profile_exact(&c, 4.0, 2).unwrap();
        assert!((space.lp_norm(&e, 4.0).unwrap() - pr.abar.unwrap()[1]).abs() < 1e-12);
    }

    #[test]
    fn delta_nu_profile_sane() {
        let ch = DeltaNuChain::new(DeltaNuSpec::new(4.0, 5.0)).unwrap();
        let pr = profile_delta_nu(&ch, 4.0, 64).unwrap();
        // E S_k² grows at least like k E X² because all covariances are positive.
        let ex2 = pr.var(1);
        for k in 1..=64 {
            assert!(pr.var(k) >= k as f64 * ex2 * (1.0 - 1e-12));
            assert!((pr.b(k) - pr.var(k)).abs() <= pr.bc(k) * (1.0 + 1e-9) + 1e-12);
        }
        // A[1] = ‖(1 − |x|)f‖_p.
        let direct: f64 = ch
            .nodes
            .iter()
            .zip(&ch.pi)
            .map(|(&x, &w)| w * ((1.0 - x) * ch.f(x)).abs().powi(4))
            .sum::<f64>()
            .powf(0.25);
        assert!((pr.a(1) - direct).abs() < 1e-12);
    }

    #[test]
    fn csv_and_json() {
        let pr = profile_exact(&FiniteChain::eigen(), 4.0, 3).unwrap();
        let csv = pr.to_csv();
        assert!(csv.starts_with("k,A,B,Bc,var,Abar,Bbar"));
        assert_eq!(csv.lines().count(), 4);
        let back: ProjectiveProfile = serde_json::from_str(&pr.to_json()).unwrap();
        assert_eq!(back, pr);
    }

    #[test]
    fn rejects_small_p() {
        assert!(profile_exact(&FiniteChain::eigen(), 1.5, 3).is_err());
    }

    proptest! {
        #[test]
        fn profile_invariants(seed in 0u64..500, s in 2usize..5, p in 2.0f64..8.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = FiniteChain::random(s, &mut rng);
            let pr = profile_exact(&c, p, 12).unwrap();
            for k in 1..=12 {
                prop_assert!(pr.a(k) >= 0.0 && pr.b(k) >= 0.0 && pr.bc(k) >= 0.0);
                prop_assert!((pr.b(k) - pr.var(k)).abs() <= pr.bc(k) + 1e-9 * (1.0 + pr.b(k)));
                for j in 1..=(12 - k) {
                    prop_assert!(pr.a(k + j) <= pr.a(k) + pr.a(j) + 1e-9);
                }
            }
        }
    }
}
