//! Flat storage of pseudo-moments `y(U, γ) = P[Y_U = γ]` for `|U| ≤ t`.

use std::collections::HashMap;

use crate::combinatorics::binom_u;
use crate::error::{Error, Result};
use crate::face::Face;

/// Refuse moment tables with more entries than this.
pub const MOMENT_LIMIT: u128 = 4_000_000;

/// Offsets of every subset `U ⊆ [n]` with `|U| ≤ t` inside a flat table.
///
/// Assignments `γ ∈ [q]^U` are coded as `Σ_i γ_i q^i`, `i` the position in sorted `U`.
#[derive(Clone, Debug)]
pub struct MomentIndex {
    n: usize,
    q: usize,
    t: usize,
    sets: Vec<Face>,
    offsets: HashMap<Face, usize>,
    len: usize,
}

impl MomentIndex {
    /// Index for level `t`; sets are stored up to size `min(t, n)`.
    pub fn new(n: usize, q: usize, t: usize) -> Result<MomentIndex> {
        let stored = t.min(n);
        let entries: u128 = (0..=stored).map(|j| binom_u(n, j) * (q as u128).pow(j as u32)).sum();
        if entries > MOMENT_LIMIT {
            return Err(Error::TooLarge(format!(
                "{entries} pseudo-moments exceed the limit {MOMENT_LIMIT}"
            )));
        }
        let all = Face::from_bits(if n == 64 { u64::MAX } else { (1u64 << n) - 1 });
        let mut sets = Vec::new();
        for j in 0..=stored {
            sets.extend(all.subsets_of_size(j));
        }
        let mut offsets = HashMap::with_capacity(sets.len());
        let mut len = 0;
        for &s in &sets {
            offsets.insert(s, len);
            len += q.pow(s.len() as u32);
        }
        Ok(MomentIndex {
            n,
            q,
            t,
            sets,
            offsets,
            len,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Level of the table; joint laws exist on every set of size `≤ t`.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Sets in order of size, then lexicographically.
    pub fn sets(&self) -> &[Face] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn offset(&self, u: Face) -> Option<usize> {
        self.offsets.get(&u).copied()
    }

    /// Flat position of `(U, code)`.
    pub fn pos(&self, u: Face, code: usize) -> Result<usize> {
        self.offset(u).map(|o| o + code).ok_or(Error::Locality {
            needed: u.len(),
            available: self.t,
        })
    }
}

/// Code of the assignment `values` (indexed by vertex) restricted to `u`.
pub fn code_of(u: Face, values: &[usize], q: usize) -> usize {
    u.iter().rev().fold(0, |acc, v| acc * q + values[v])
}

/// Inverse of [`code_of`]: write the decoded values of `u` into `values`.
pub fn write_code(u: Face, mut code: usize, q: usize, values: &mut [usize]) {
    for v in u.iter() {
        values[v] = code % q;
        code /= q;
    }
}

/// Pseudo-moment table.
#[derive(Clone, Debug)]
pub struct Moments {
    pub index: MomentIndex,
    pub y: Vec<f64>,
}

impl Moments {
    /// Moments of an explicit distribution over `[q]^n`, given as `(assignment, probability)`.
    pub fn from_distribution(n: usize, q: usize, t: usize, dist: &[(Vec<usize>, f64)]) -> Result<Moments> {
        let index = MomentIndex::new(n, q, t)?;
        let total: f64 = dist.iter().map(|d| d.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("distribution sums to {total}")));
        }
        let mut y = vec![0.0; index.len()];
        for (x, p) in dist {
            if x.len() != n || x.iter().any(|&a| a >= q) || *p < 0.0 {
                return Err(Error::Invalid(format!("bad support point {x:?} with mass {p}")));
            }
            for &u in index.sets() {
                y[index.offset(u).unwrap() + code_of(u, x, q)] += p;
            }
        }
        Ok(Moments { index, y })
    }

    /// Moments of independent variables with the given per-variable marginals.
    pub fn from_product(q: usize, t: usize, marginals: &[Vec<f64>]) -> Result<Moments> {
        let n = marginals.len();
        for (i, m) in marginals.iter().enumerate() {
            if m.len() != q || m.iter().any(|&p| p < 0.0) || (m.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("marginal {i} is not a distribution on [{q}]")));
            }
        }
        let index = MomentIndex::new(n, q, t)?;
        let mut y = vec![0.0; index.len()];
        let mut vals = vec![0; n];
        for &u in index.sets() {
            let off = index.offset(u).unwrap();
            for code in 0..q.pow(u.len() as u32) {
                write_code(u, code, q, &mut vals);
                y[off + code] = u.iter().map(|v| marginals[v][vals[v]]).product();
            }
        }
        Ok(Moments { index, y })
    }
}
