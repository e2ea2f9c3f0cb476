//! The level-t moment relaxation of a MAX k-CSP instance.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::moments::{code_of, write_code, MomentIndex, Moments};
use crate::combinatorics::binom_u;
use crate::csp::CspInstance;
use crate::error::{Error, Result};
use crate::face::Face;

/// Largest admissible moment-matrix index.
pub const INDEX_LIMIT: u128 = 20_000;

/// One linear constraint on the moment matrix `M`, entries named by index positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentConstraint {
    /// `M[i,j] = 0` when the two assignments disagree on the overlap.
    Orthogonal { i: usize, j: usize },
    /// `M[i,j] = M[k,l]` when both pairs describe the same assignment of the same union.
    UnionEqual { i: usize, j: usize, k: usize, l: usize },
    /// `Σ_a M[({v},a),({v},a)] = 1`.
    Normalization { var: usize },
    /// `M[∅,∅] = 1`.
    UnitEmpty,
}

/// Number of constraints per family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstraintCounts {
    pub orthogonal: usize,
    pub union_equal: usize,
    pub normalization: usize,
    pub unit_empty: usize,
}

/// Largest violation per family.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstraintViolation {
    pub orthogonal: f64,
    pub union_equal: f64,
    pub normalization: f64,
    pub unit_empty: f64,
}

impl ConstraintViolation {
    pub fn max(&self) -> f64 {
        self.orthogonal.max(self.union_equal).max(self.normalization).max(self.unit_empty)
    }
}

/// Moment relaxation over pairs `(S, α)` with `|S| ≤ ⌊t/2⌋`.
#[derive(Clone, Debug)]
pub struct SosRelaxation {
    instance: CspInstance,
    t: usize,
    index: Vec<(Face, usize)>,
    lookup: HashMap<(Face, usize), usize>,
    moments: MomentIndex,
}

/// Build the relaxation, refusing index sets above [`INDEX_LIMIT`].
pub fn build_relaxation(instance: &CspInstance, t: usize) -> Result<SosRelaxation> {
    let (n, k, q) = (instance.n(), instance.k(), instance.q());
    if t < 2 * k {
        return Err(Error::Parameter(format!("level t = {t} is below 2k = {}", 2 * k)));
    }
    let h = (t / 2).min(n);
    let size: u128 = (0..=h).map(|j| binom_u(n, j) * (q as u128).pow(j as u32)).sum();
    if size > INDEX_LIMIT {
        return Err(Error::TooLarge(format!(
            "moment matrix index of size {size} exceeds {INDEX_LIMIT}"
        )));
    }
    let all = Face::from_bits(if n == 64 { u64::MAX } else { (1u64 << n) - 1 });
    let index: Vec<(Face, usize)> = (0..=h)
        .flat_map(|j| all.subsets_of_size(j))
        .flat_map(|s| (0..q.pow(s.len() as u32)).map(move |c| (s, c)))
        .collect();
    let lookup = index.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    Ok(SosRelaxation {
        instance: instance.clone(),
        t,
        index,
        lookup,
        moments: MomentIndex::new(n, q, t)?,
    })
}

impl SosRelaxation {
    pub fn instance(&self) -> &CspInstance {
        &self.instance
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn t_half(&self) -> usize {
        self.t / 2
    }

    /// Index pairs `(S, code of α)`.
    pub fn index(&self) -> &[(Face, usize)] {
        &self.index
    }

    /// Side length of the moment matrix.
    pub fn size(&self) -> usize {
        self.index.len()
    }

    pub fn position(&self, s: Face, code: usize) -> Option<usize> {
        self.lookup.get(&(s, code)).copied()
    }

    /// Layout of the pseudo-moments `y(U, γ)` for `|U| ≤ t`.
    pub fn moment_index(&self) -> &MomentIndex {
        &self.moments
    }

    /// The assignment of `S1 ∪ S2` described by entry `(i, j)`, or `None` if inconsistent.
    pub fn entry(&self, i: usize, j: usize) -> Option<(Face, usize)> {
        let q = self.instance.q();
        let (s1, c1) = self.index[i];
        let (s2, c2) = self.index[j];
        let mut a = vec![0; self.instance.n()];
        let mut b = vec![0; self.instance.n()];
        write_code(s1, c1, q, &mut a);
        write_code(s2, c2, q, &mut b);
        if s1.intersection(s2).iter().any(|v| a[v] != b[v]) {
            return None;
        }
        for v in s1.iter() {
            b[v] = a[v];
        }
        let u = s1.union(s2);
        Some((u, code_of(u, &b, q)))
    }

    /// Canonical entry `(i, j)` of a union assignment: first `⌊t/2⌋` vertices against the rest.
    fn representative(&self, u: Face, code: usize) -> (usize, usize) {
        let q = self.instance.q();
        let mut vals = vec![0; self.instance.n()];
        write_code(u, code, q, &mut vals);
        let h = self.t_half().min(u.len());
        let head = Face::new(&u.vertices()[..h]).unwrap();
        let tail = u.difference(head);
        let i = self.lookup[&(head, code_of(head, &vals, q))];
        let j = self.lookup[&(tail, code_of(tail, &vals, q))];
        (i.min(j), i.max(j))
    }

    /// All constraints, enumerated lazily over the upper triangle.
    pub fn constraints(&self) -> impl Iterator<Item = MomentConstraint> + '_ {
        let dim = self.size();
        let pairs = (0..dim).flat_map(move |i| (i..dim).map(move |j| (i, j)));
        let entries = pairs.filter_map(move |(i, j)| match self.entry(i, j) {
            None => Some(MomentConstraint::Orthogonal { i, j }),
            Some((u, code)) => {
                let (k, l) = self.representative(u, code);
                ((k, l) != (i, j)).then_some(MomentConstraint::UnionEqual { i, j, k, l })
            }
        });
        entries
            .chain((0..self.instance.n()).map(|var| MomentConstraint::Normalization { var }))
            .chain(std::iter::once(MomentConstraint::UnitEmpty))
    }

    pub fn constraint_counts(&self) -> ConstraintCounts {
        let mut c = ConstraintCounts::default();
        for con in self.constraints() {
            match con {
                MomentConstraint::Orthogonal { .. } => c.orthogonal += 1,
                MomentConstraint::UnionEqual { .. } => c.union_equal += 1,
                MomentConstraint::Normalization { .. } => c.normalization += 1,
                MomentConstraint::UnitEmpty => c.unit_empty += 1,
            }
        }
        c
    }

    /// Largest violation of each constraint family by a symmetric matrix.
    pub fn violations(&self, m: &DMatrix<f64>) -> Result<ConstraintViolation> {
        if m.nrows() != self.size() || m.ncols() != self.size() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for an index of size {}",
                m.nrows(),
                m.ncols(),
                self.size()
            )));
        }
        let q = self.instance.q();
        let mut v = ConstraintViolation::default();
        for con in self.constraints() {
            match con {
                MomentConstraint::Orthogonal { i, j } => v.orthogonal = v.orthogonal.max(m[(i, j)].abs()),
                MomentConstraint::UnionEqual { i, j, k, l } => {
                    v.union_equal = v.union_equal.max((m[(i, j)] - m[(k, l)]).abs())
                }
                MomentConstraint::Normalization { var } => {
                    let s = Face::singleton(var);
                    let total: f64 = (0..q).map(|a| {
                        let p = self.lookup[&(s, a)];
                        m[(p, p)]
                    }).sum();
                    v.normalization = v.normalization.max((total - 1.0).abs());
                }
                MomentConstraint::UnitEmpty => v.unit_empty = (m[(0, 0)] - 1.0).abs(),
            }
        }
        Ok(v)
    }

    /// Moment matrix `M[i,j] = y(S_i ∪ S_j, α_i ∘ α_j)` built from a pseudo-moment table.
    pub fn moment_matrix(&self, y: &Moments) -> Result<DMatrix<f64>> {
        let dim = self.size();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                if let Some((u, code)) = self.entry(i, j) {
                    let val = y.y[y.index.pos(u, code)?];
                    m[(i, j)] = val;
                    m[(j, i)] = val;
                }
            }
        }
        Ok(m)
    }

    /// Objective weights on the pseudo-moments: `c[(a, α)] = w_a` for allowed `α`.
    pub fn objective_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.moments.len()];
        for con in self.instance.constraints() {
            let off = self.moments.offset(con.scope).expect("scope fits the level");
            for (code, &ok) in con.allowed_mask().iter().enumerate() {
                if ok {
                    c[off + code] += con.weight;
                }
            }
        }
        c
    }

    /// `E_{a∼w} Σ_{α∈C_a} y(a, α)`.
    pub fn objective(&self, y: &Moments) -> f64 {
        self.objective_vector().iter().zip(&y.y).map(|(c, v)| c * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Assignment;
    use crate::linalg::sym_min_eigenvalue;

    fn equality_instance() -> CspInstance {
        CspInstance::new(2, 2, 2, vec![(Face::new(&[0, 1]).unwrap(), vec![vec![0, 0], vec![1, 1]], 1.0)]).unwrap()
    }

    #[test]
    fn single_variable_index() {
        let inst = CspInstance::new(1, 1, 2, vec![(Face::singleton(0), vec![vec![1]], 1.0)]).unwrap();
        let rel = build_relaxation(&inst, 2).unwrap();
        assert_eq!(rel.size(), 3);
        let c = rel.constraint_counts();
        assert_eq!(c.normalization, 1);
        assert_eq!(c.unit_empty, 1);
        assert_eq!(c.orthogonal, 1);
        let mut m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.7, 0.3, 0.3, 0.0, 0.7, 0.0, 0.7]);
        assert!(rel.violations(&m).unwrap().max() < 1e-15);
        m[(1, 1)] = 0.4;
        let v = rel.violations(&m).unwrap();
        assert!((v.normalization - 0.1).abs() < 1e-12);
        assert!((v.union_equal - 0.1).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let inst = equality_instance();
        assert!(matches!(build_relaxation(&inst, 3), Err(Error::Parameter(_))));
        let (big, _) = crate::csp::gen_random_kxor(30, 3, 10, 2, 1, false).unwrap();
        assert!(matches!(build_relaxation(&big, 8), Err(Error::TooLarge(_))));
    }

    #[test]
    fn integral_witness_satisfies_everything() {
        let inst = equality_instance();
        let rel = build_relaxation(&inst, 4).unwrap();
        let y = Moments::from_distribution(2, 2, 4, &[(vec![1, 1], 1.0)]).unwrap();
        let m = rel.moment_matrix(&y).unwrap();
        assert_eq!(rel.size(), 9);
        assert!(rel.violations(&m).unwrap().max() < 1e-15);
        assert!(sym_min_eigenvalue(&m) > -1e-12);
        assert_eq!(rel.objective(&y), 1.0);
        let eta = Assignment::new(vec![1, 1]);
        assert_eq!(crate::csp::sat_fraction(&inst, &eta).unwrap(), rel.objective(&y));
    }

    #[test]
    fn union_representatives_cover_every_entry() {
        let (inst, _) = crate::csp::gen_random_kxor(5, 2, 4, 3, 3, false).unwrap();
        let rel = build_relaxation(&inst, 4).unwrap();
        let c = rel.constraint_counts();
        let dim = rel.size();
        assert_eq!(c.orthogonal + c.union_equal + distinct_unions(&rel), dim * (dim + 1) / 2);
    }

    fn distinct_unions(rel: &SosRelaxation) -> usize {
        let mut seen = std::collections::HashSet::new();
        for i in 0..rel.size() {
            for j in i..rel.size() {
                if let Some(e) = rel.entry(i, j) {
                    seen.insert(e);
                }
            }
        }
        seen.len()
    }
}
