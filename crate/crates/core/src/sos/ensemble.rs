//! t-local PSD ensembles backed by a pseudo-moment table.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::moments::{code_of, write_code, Moments};
use crate::complex::SimplicialComplex;
use crate::csp::Assignment;
use crate::error::{Error, Result};
use crate::face::Face;

/// Smallest conditioning probability accepted by default.
pub const P_MIN: f64 = 1e-8;
/// Negative mass tolerated (and clipped) in a marginal.
pub const CLIP_TOL: f64 = 1e-8;
/// Total-mass tolerance of a marginal before renormalization.
pub const MASS_TOL: f64 = 1e-6;

/// Distribution over `[q]^scope`, coded little-endian in sorted scope order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    pub scope: Face,
    pub q: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn prob_code(&self, code: usize) -> f64 {
        self.probs[code]
    }

    /// Probability of the assignment `values` (indexed by vertex) restricted to the scope.
    pub fn prob_of(&self, values: &[usize]) -> f64 {
        self.probs[code_of(self.scope, values, self.q)]
    }

    /// Marginal on `t ⊆ scope`.
    pub fn marginalize(&self, t: Face) -> Result<Distribution> {
        if !t.is_subset(self.scope) {
            return Err(Error::Invalid(format!("{t} is not contained in {}", self.scope)));
        }
        let mut vals = vec![0; self.scope.max_vertex().map_or(0, |v| v + 1)];
        let mut probs = vec![0.0; self.q.pow(t.len() as u32)];
        for (code, &p) in self.probs.iter().enumerate() {
            write_code(self.scope, code, self.q, &mut vals);
            probs[code_of(t, &vals, self.q)] += p;
        }
        Ok(Distribution {
            scope: t,
            q: self.q,
            probs,
        })
    }

    /// `Σ_η P(η)(1 − P(η))`.
    pub fn variance(&self) -> f64 {
        self.probs.iter().map(|p| p * (1.0 - p)).sum()
    }
}

/// Ensemble `{Y_1..Y_n}` whose joint laws on at most `t` variables are known,
/// possibly conditioned on `Y_T = β`.
#[derive(Clone, Debug)]
pub struct LocalPsdEnsemble {
    moments: Arc<Moments>,
    cond: Face,
    beta: Vec<usize>,
    cond_prob: f64,
}

impl LocalPsdEnsemble {
    /// Wrap a moment table. Entries must be valid probabilities up to the clipping tolerance.
    pub fn from_moments(moments: Moments) -> Result<LocalPsdEnsemble> {
        if let Some(v) = moments.y.iter().find(|v| !v.is_finite() || **v < -CLIP_TOL) {
            return Err(Error::Numerical(format!("pseudo-moment {v} is not a probability")));
        }
        if (moments.y[0] - 1.0).abs() > MASS_TOL {
            return Err(Error::Numerical(format!("empty-set moment is {}", moments.y[0])));
        }
        let n = moments.index.n();
        Ok(LocalPsdEnsemble {
            moments: Arc::new(moments),
            cond: Face::EMPTY,
            beta: vec![0; n],
            cond_prob: 1.0,
        })
    }

    pub fn from_distribution(n: usize, q: usize, t: usize, dist: &[(Vec<usize>, f64)]) -> Result<LocalPsdEnsemble> {
        Self::from_moments(Moments::from_distribution(n, q, t, dist)?)
    }

    pub fn from_product(q: usize, t: usize, marginals: &[Vec<f64>]) -> Result<LocalPsdEnsemble> {
        Self::from_moments(Moments::from_product(q, t, marginals)?)
    }

    /// Point mass on a single assignment.
    pub fn from_assignment(q: usize, t: usize, eta: &Assignment) -> Result<LocalPsdEnsemble> {
        Self::from_distribution(eta.values.len(), q, t, &[(eta.values.clone(), 1.0)])
    }

    pub fn n(&self) -> usize {
        self.moments.index.n()
    }

    pub fn q(&self) -> usize {
        self.moments.index.q()
    }

    /// Locality of the unconditioned ensemble.
    pub fn t(&self) -> usize {
        self.moments.index.t()
    }

    /// Remaining locality `t − |T|`.
    pub fn locality(&self) -> usize {
        self.t() - self.cond.len()
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    /// Conditioning set `T` and the values `β` in sorted order of `T`.
    pub fn conditioning(&self) -> (Face, Vec<usize>) {
        (self.cond, self.cond.iter().map(|v| self.beta[v]).collect())
    }

    /// Probability of the conditioning event under the unconditioned ensemble.
    pub fn conditioning_probability(&self) -> f64 {
        self.cond_prob
    }

    fn check_scope(&self, s: Face) -> Result<()> {
        if s.max_vertex().is_some_and(|v| v >= self.n()) {
            return Err(Error::Invalid(format!("{s} has a vertex outside [{}]", self.n())));
        }
        let needed = s.difference(self.cond).len();
        if needed > self.locality() {
            return Err(Error::Locality {
                needed,
                available: self.locality(),
            });
        }
        Ok(())
    }

    /// `μ_S` conditioned on the history, with tiny negative entries clipped.
    pub fn marginal(&self, s: Face) -> Result<Distribution> {
        self.check_scope(s)?;
        let q = self.q();
        let u = s.union(self.cond);
        let free = s.difference(self.cond);
        let off = self.moments.index.offset(u).expect("scope within locality");
        let mut vals = self.beta.clone();
        let mut probs = vec![0.0; q.pow(s.len() as u32)];
        for code in 0..q.pow(free.len() as u32) {
            write_code(free, code, q, &mut vals);
            let p = self.moments.y[off + code_of(u, &vals, q)] / self.cond_prob;
            if !(p >= -CLIP_TOL) {
                return Err(Error::Numerical(format!("marginal entry {p} on {s}")));
            }
            probs[code_of(s, &vals, q)] = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Numerical(format!("marginal on {s} has mass {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Distribution { scope: s, q, probs })
    }

    /// Condition on `Y_T = β` with the default `p_min`.
    pub fn condition(&self, t: Face, beta: &[usize]) -> Result<LocalPsdEnsemble> {
        self.condition_with(t, beta, P_MIN)
    }

    pub fn condition_with(&self, t: Face, beta: &[usize], p_min: f64) -> Result<LocalPsdEnsemble> {
        if beta.len() != t.len() || beta.iter().any(|&b| b >= self.q()) {
            return Err(Error::Invalid(format!("assignment {beta:?} does not fit {t}")));
        }
        if t.is_empty() {
            return Ok(self.clone());
        }
        let merged = self.cond.union(t);
        if merged.len() + 2 > self.t() {
            return Err(Error::Locality {
                needed: merged.len() + 2,
                available: self.t(),
            });
        }
        let mut vals = vec![0; self.n()];
        for (v, &b) in t.iter().zip(beta) {
            vals[v] = b;
        }
        let prob = self.marginal(t)?.prob_of(&vals);
        if prob < p_min {
            return Err(Error::RareEvent { prob, p_min });
        }
        let mut next = self.beta.clone();
        for (v, &b) in t.iter().zip(beta) {
            next[v] = b;
        }
        let raw = self.moments.y[self.moments.index.pos(merged, code_of(merged, &next, self.q()))?];
        Ok(LocalPsdEnsemble {
            moments: Arc::clone(&self.moments),
            cond: merged,
            beta: next,
            cond_prob: raw,
        })
    }

    /// `Var(Y_S) = Σ_η μ_S(η)(1 − μ_S(η))`.
    pub fn variance(&self, s: Face) -> Result<f64> {
        Ok(self.marginal(s)?.variance())
    }

    /// `‖μ_a − Π_i μ_{a_i}‖_1` as a sum of absolute differences.
    pub fn product_distance(&self, a: Face) -> Result<f64> {
        let joint = self.marginal(a)?;
        let singles: Vec<Distribution> = a
            .iter()
            .map(|v| self.marginal(Face::singleton(v)))
            .collect::<Result<_>>()?;
        let q = self.q();
        let mut vals = vec![0; self.n()];
        let mut dist = 0.0;
        for (code, &p) in joint.probs.iter().enumerate() {
            write_code(a, code, q, &mut vals);
            let prod: f64 = a.iter().zip(&singles).map(|(v, d)| d.probs[vals[v]]).product();
            dist += (p - prod).abs();
        }
        Ok(dist)
    }

    /// `E_{a∼Π_k} ‖μ_a − Π_i μ_{a_i}‖_1`.
    pub fn local_correlation(&self, x: &SimplicialComplex, k: usize) -> Result<f64> {
        if k == 0 || k > x.d() {
            return Err(Error::Parameter(format!("level {k} outside 1..={}", x.d())));
        }
        x.faces(k)
            .iter()
            .zip(x.measure(k))
            .map(|(&a, &p)| Ok(p * self.product_distance(a)?))
            .sum()
    }

    /// Index `(S, α)` with `|S| ≤ h` over all `S ⊆ [n]`, ordered by size then lexicographically.
    pub fn pair_index(&self, h: usize) -> Vec<(Face, usize)> {
        let all = Face::from_bits(if self.n() == 64 { u64::MAX } else { (1u64 << self.n()) - 1 });
        (0..=h.min(self.n()))
            .flat_map(|j| all.subsets_of_size(j))
            .flat_map(|s| (0..self.q().pow(s.len() as u32)).map(move |c| (s, c)))
            .collect()
    }

    /// Conditioned moment matrix `μ'_{S1∪S2}(α1∘α2)` over `|S| ≤ ⌊locality/2⌋`, zero on inconsistent pairs.
    pub fn moment_matrix(&self) -> Result<DMatrix<f64>> {
        let h = self.locality() / 2;
        let idx = self.pair_index(h);
        let q = self.q();
        let dim = idx.len();
        let mut m = DMatrix::zeros(dim, dim);
        let mut cache = HashMap::new();
        let mut a = vec![0; self.n()];
        let mut b = vec![0; self.n()];
        for i in 0..dim {
            let (s1, c1) = idx[i];
            write_code(s1, c1, q, &mut a);
            for j in i..dim {
                let (s2, c2) = idx[j];
                write_code(s2, c2, q, &mut b);
                if s1.intersection(s2).iter().any(|v| a[v] != b[v]) {
                    continue;
                }
                let u = s1.union(s2);
                if let Entry::Vacant(slot) = cache.entry(u) {
                    slot.insert(self.marginal(u)?);
                }
                let mut vals = b.clone();
                for v in s1.iter() {
                    vals[v] = a[v];
                }
                let val = cache[&u].prob_of(&vals);
                m[(i, j)] = val;
                m[(j, i)] = val;
            }
        }
        Ok(m)
    }

    /// Conditional covariance `μ'_{S1∪S2}(α1∘α2) − μ'_{S1}(α1) μ'_{S2}(α2)` over the same index.
    pub fn covariance_matrix(&self) -> Result<DMatrix<f64>> {
        let m = self.moment_matrix()?;
        let mean = m.column(0).clone_owned();
        Ok(&m - &mean * mean.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::complete_complex;
    use crate::linalg::sym_min_eigenvalue;
    use proptest::prelude::*;

    fn correlated_pair() -> LocalPsdEnsemble {
        LocalPsdEnsemble::from_distribution(2, 2, 2, &[(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap()
    }

    fn random_distribution(n: usize, q: usize, weights: &[f64]) -> Vec<(Vec<usize>, f64)> {
        let total: f64 = weights.iter().sum();
        (0..q.pow(n as u32))
            .map(|c| {
                let x: Vec<usize> = (0..n).map(|i| (c / q.pow(i as u32)) % q).collect();
                (x, weights[c] / total)
            })
            .collect()
    }

    #[test]
    fn empty_marginal_is_point_mass() {
        let e = correlated_pair();
        let d = e.marginal(Face::EMPTY).unwrap();
        assert_eq!(d.probs, vec![1.0]);
    }

    #[test]
    fn perfectly_correlated_pair_distance() {
        let e = correlated_pair();
        let d = e.product_distance(Face::new(&[0, 1]).unwrap()).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variance_formulas() {
        let e = LocalPsdEnsemble::from_assignment(3, 2, &Assignment::new(vec![2, 0, 1])).unwrap();
        assert_eq!(e.variance(Face::new(&[0, 2]).unwrap()).unwrap(), 0.0);
        for q in 2..6 {
            let u = LocalPsdEnsemble::from_product(q, 1, &[vec![1.0 / q as f64; q]]).unwrap();
            let v = u.variance(Face::singleton(0)).unwrap();
            assert!((v - (1.0 - 1.0 / q as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn locality_is_enforced() {
        let e = correlated_pair();
        let c = LocalPsdEnsemble::from_product(2, 4, &vec![vec![0.5, 0.5]; 5]).unwrap();
        assert!(matches!(
            c.marginal(Face::new(&[0, 1, 2, 3, 4]).unwrap()),
            Err(Error::Locality { .. })
        ));
        let c1 = c.condition(Face::new(&[0, 1]).unwrap(), &[1, 0]).unwrap();
        assert_eq!(c1.locality(), 2);
        assert!(c1.marginal(Face::new(&[0, 2, 3]).unwrap()).is_ok());
        assert!(c1.marginal(Face::new(&[2, 3, 4]).unwrap()).is_err());
        assert!(c1.condition(Face::singleton(2), &[0]).is_err());
        assert!(e.condition(Face::singleton(0), &[0]).is_err());
    }

    #[test]
    fn conditioning_on_empty_set_is_identity() {
        let e = LocalPsdEnsemble::from_product(2, 4, &vec![vec![0.2, 0.8]; 4]).unwrap();
        let c = e.condition(Face::EMPTY, &[]).unwrap();
        assert_eq!(c.locality(), 4);
        let s = Face::new(&[1, 3]).unwrap();
        assert_eq!(c.marginal(s).unwrap(), e.marginal(s).unwrap());
    }

    #[test]
    fn rare_events_are_refused() {
        let e = LocalPsdEnsemble::from_distribution(3, 2, 3, &[(vec![0, 0, 0], 1.0)]).unwrap();
        assert!(matches!(
            e.condition(Face::singleton(0), &[1]),
            Err(Error::RareEvent { .. })
        ));
    }

    #[test]
    fn product_conditioning_leaves_others_unchanged() {
        let marg = vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.25, 0.25], vec![0.2, 0.2, 0.6], vec![0.7, 0.2, 0.1]];
        let e = LocalPsdEnsemble::from_product(3, 4, &marg).unwrap();
        let c = e.condition(Face::new(&[0, 2]).unwrap(), &[1, 2]).unwrap();
        for v in [1, 3] {
            let d = c.marginal(Face::singleton(v)).unwrap();
            for (p, r) in d.probs.iter().zip(&marg[v]) {
                assert!((p - r).abs() < 1e-8);
            }
        }
        let pinned = c.marginal(Face::singleton(2)).unwrap();
        assert_eq!(pinned.probs, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn local_correlation_of_product_is_zero() {
        let x = complete_complex(5, 3).unwrap();
        let e = LocalPsdEnsemble::from_product(2, 3, &vec![vec![0.3, 0.7]; 5]).unwrap();
        assert!(e.local_correlation(&x, 3).unwrap() < 1e-12);
    }

    #[test]
    fn moment_matrix_of_distribution_is_psd() {
        let w: Vec<f64> = (0..16).map(|i| 1.0 + (i * 7 % 5) as f64).collect();
        let e = LocalPsdEnsemble::from_distribution(4, 2, 4, &random_distribution(4, 2, &w)).unwrap();
        assert!(sym_min_eigenvalue(&e.moment_matrix().unwrap()) > -1e-12);
        let c = e.condition(Face::singleton(1), &[1]).unwrap();
        assert!(sym_min_eigenvalue(&c.covariance_matrix().unwrap()) > -1e-12);
    }

    proptest! {
        #[test]
        fn bayes_and_total_expectation(w in prop::collection::vec(0.05f64..1.0, 27), tv in 0usize..8) {
            let e = LocalPsdEnsemble::from_distribution(3, 3, 3, &random_distribution(3, 3, &w)).unwrap();
            let t = Face::singleton(tv % 3);
            let s = Face::new(&[(tv + 1) % 3, (tv + 2) % 3]).unwrap();
            let mu_t = e.marginal(t).unwrap();
            let mu_s = e.marginal(s).unwrap();
            let joint = e.marginal(s.union(t)).unwrap();
            let mut mix = vec![0.0; mu_s.probs.len()];
            for b in 0..3 {
                let c = e.condition(t, &[b]).unwrap();
                let cs = c.marginal(s).unwrap();
                let mut vals = vec![0; 3];
                vals[tv % 3] = b;
                for code in 0..cs.probs.len() {
                    write_code(s, code, 3, &mut vals);
                    prop_assert!((cs.probs[code] * mu_t.probs[b] - joint.prob_of(&vals)).abs() < 1e-8);
                    mix[code] += mu_t.probs[b] * cs.probs[code];
                }
            }
            for (a, b) in mix.iter().zip(&mu_s.probs) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn conditioning_does_not_increase_variance(w in prop::collection::vec(0.01f64..1.0, 32), tv in 0usize..5) {
            let e = LocalPsdEnsemble::from_distribution(5, 2, 5, &random_distribution(5, 2, &w)).unwrap();
            let t = Face::singleton(tv);
            let s = Face::new(&[(tv + 1) % 5, (tv + 3) % 5]).unwrap();
            let mu_t = e.marginal(t).unwrap();
            let mut expected = 0.0;
            for b in 0..2 {
                expected += mu_t.probs[b] * e.condition(t, &[b]).unwrap().variance(s).unwrap();
            }
            prop_assert!(expected <= e.variance(s).unwrap() + 1e-9);
        }

        #[test]
        fn marginals_are_consistent(w in prop::collection::vec(0.01f64..1.0, 32)) {
            let e = LocalPsdEnsemble::from_distribution(5, 2, 4, &random_distribution(5, 2, &w)).unwrap();
            let s = Face::new(&[0, 2, 3, 4]).unwrap();
            let d = e.marginal(s).unwrap();
            for t in s.all_subsets() {
                let a = d.marginalize(t).unwrap();
                let b = e.marginal(t).unwrap();
                for (x, y) in a.probs.iter().zip(&b.probs) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
