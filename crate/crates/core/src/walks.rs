//! Up/down steps, canonical walks and swap walks between levels of a complex.
//!
//! Matrices use the row-transition convention: entry `(s, t)` is the
//! probability of moving from face `s` to face `t`. Applied to a function
//! `g` on the destination level, the same matrix averages `g` over the
//! next step, so the down matrix from level `i+1` is the lifting operator
//! `U_i` and the up matrix from level `i` is the averaging operator `D_{i+1}`.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::combinatorics::{binom, binom_i};
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::face::Face;

/// Entries this far below zero after a signed combination are clamped to 0.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapMethod {
    /// Ascend `u` levels, then descend conditioned on swapping exactly `j` vertices.
    Conditioned,
    /// Evaluate the height-free closed form directly.
    ClosedForm,
}

/// Row-stochastic transition matrix from `X(src_level)` to `X(dst_level)`.
#[derive(Clone, Debug)]
pub struct WalkMatrix {
    src_level: usize,
    dst_level: usize,
    matrix: DMatrix<f64>,
    src_measure: Vec<f64>,
    dst_measure: Vec<f64>,
}

impl WalkMatrix {
    pub fn new(
        src_level: usize,
        dst_level: usize,
        matrix: DMatrix<f64>,
        src_measure: Vec<f64>,
        dst_measure: Vec<f64>,
    ) -> Result<WalkMatrix> {
        if matrix.nrows() != src_measure.len() || matrix.ncols() != dst_measure.len() {
            return Err(Error::Dimension(format!(
                "matrix {}x{} against measures of length {} and {}",
                matrix.nrows(),
                matrix.ncols(),
                src_measure.len(),
                dst_measure.len()
            )));
        }
        Ok(WalkMatrix {
            src_level,
            dst_level,
            matrix,
            src_measure,
            dst_measure,
        })
    }

    /// Identity walk on `X(k)`.
    pub fn identity(x: &SimplicialComplex, k: usize) -> Result<WalkMatrix> {
        check_level(x, k)?;
        let n = x.level_size(k);
        WalkMatrix::new(
            k,
            k,
            DMatrix::identity(n, n),
            x.measure(k).to_vec(),
            x.measure(k).to_vec(),
        )
    }

    pub fn src_level(&self) -> usize {
        self.src_level
    }

    pub fn dst_level(&self) -> usize {
        self.dst_level
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn src_measure(&self) -> &[f64] {
        &self.src_measure
    }

    pub fn dst_measure(&self) -> &[f64] {
        &self.dst_measure
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `Wᵀ Π_src` from `Π_dst`.
    pub fn transport_error(&self) -> f64 {
        let pushed = self.push(&DVector::from_column_slice(&self.src_measure));
        pushed
            .iter()
            .zip(&self.dst_measure)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Check stochasticity, nonnegativity and measure transport.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.min_entry() < 0.0 {
            return Err(Error::Numerical(format!("negative entry {}", self.min_entry())));
        }
        if self.row_sum_error() > tol {
            return Err(Error::Numerical(format!("row sums off by {:e}", self.row_sum_error())));
        }
        if self.transport_error() > tol {
            return Err(Error::Numerical(format!(
                "measure transport off by {:e}",
                self.transport_error()
            )));
        }
        Ok(())
    }

    /// Operator view: `(W g)(s) = Σ_t W(s,t) g(t)`.
    pub fn apply(&self, g: &DVector<f64>) -> DVector<f64> {
        &self.matrix * g
    }

    /// Push a distribution on the source level forward one step.
    pub fn push(&self, p: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(p)
    }

    /// Walk `self` then `next`.
    pub fn then(&self, next: &WalkMatrix) -> Result<WalkMatrix> {
        if self.matrix.ncols() != next.matrix.nrows() {
            return Err(Error::Dimension(format!(
                "cannot compose {}->{} with {}->{}",
                self.src_level, self.dst_level, next.src_level, next.dst_level
            )));
        }
        WalkMatrix::new(
            self.src_level,
            next.dst_level,
            &self.matrix * &next.matrix,
            self.src_measure.clone(),
            next.dst_measure.clone(),
        )
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &WalkMatrix) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        (&self.matrix - &other.matrix).amax()
    }

    /// Signed linear combination, clamping roundoff below zero.
    pub fn combine(terms: &[(f64, &WalkMatrix)]) -> Result<WalkMatrix> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Empty("no terms to combine".into()))?
            .1;
        let mut acc = DMatrix::zeros(first.matrix.nrows(), first.matrix.ncols());
        for &(c, w) in terms {
            if w.matrix.shape() != acc.shape() {
                return Err(Error::Dimension(format!(
                    "term {}x{} does not match {}x{}",
                    w.matrix.nrows(),
                    w.matrix.ncols(),
                    acc.nrows(),
                    acc.ncols()
                )));
            }
            acc += &w.matrix * c;
        }
        clamp_negatives(&mut acc)?;
        WalkMatrix::new(
            first.src_level,
            first.dst_level,
            acc,
            first.src_measure.clone(),
            first.dst_measure.clone(),
        )
    }

    /// JSON with face labels for rows and columns.
    pub fn to_json(&self, x: &SimplicialComplex) -> Value {
        let rows: Vec<Vec<f64>> = self
            .matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        json!({
            "src_level": self.src_level,
            "dst_level": self.dst_level,
            "rows": x.faces(self.src_level),
            "cols": x.faces(self.dst_level),
            "matrix": rows,
        })
    }
}

fn clamp_negatives(m: &mut DMatrix<f64>) -> Result<()> {
    for v in m.iter_mut() {
        if *v < 0.0 {
            if *v < -CLAMP_TOL {
                return Err(Error::Numerical(format!(
                    "signed combination produced entry {v:e}"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

fn check_level(x: &SimplicialComplex, level: usize) -> Result<()> {
    if level > x.d() {
        Err(Error::Parameter(format!("level {level} exceeds d = {}", x.d())))
    } else {
        Ok(())
    }
}

fn zero_walk(x: &SimplicialComplex, src: usize, dst: usize) -> WalkMatrix {
    WalkMatrix {
        src_level: src,
        dst_level: dst,
        matrix: DMatrix::zeros(x.level_size(src), x.level_size(dst)),
        src_measure: x.measure(src).to_vec(),
        dst_measure: x.measure(dst).to_vec(),
    }
}

/// One step up (measure-proportional) or down (uniform sub-face) from `level`.
pub fn step_matrix(x: &SimplicialComplex, level: usize, direction: Direction) -> Result<WalkMatrix> {
    match direction {
        Direction::Up => {
            if level >= x.d() {
                return Err(Error::Parameter(format!(
                    "cannot step up from level {level} with d = {}",
                    x.d()
                )));
            }
            let mut w = zero_walk(x, level, level + 1);
            for (j, &t) in x.faces(level + 1).iter().enumerate() {
                let pt = x.measure(level + 1)[j];
                for v in t.iter() {
                    let i = x.index_of(t.without(v)).expect("downward closure");
                    w.matrix[(i, j)] = pt / ((level + 1) as f64 * x.measure(level)[i]);
                }
            }
            Ok(w)
        }
        Direction::Down => {
            if level == 0 || level > x.d() {
                return Err(Error::Parameter(format!(
                    "cannot step down from level {level} with d = {}",
                    x.d()
                )));
            }
            let mut w = zero_walk(x, level, level - 1);
            for (i, &t) in x.faces(level).iter().enumerate() {
                for v in t.iter() {
                    let j = x.index_of(t.without(v)).expect("downward closure");
                    w.matrix[(i, j)] = 1.0 / level as f64;
                }
            }
            Ok(w)
        }
    }
}

/// Law of the face reached from `s` after `u` up steps, aligned with `X(|s|+u)`.
pub fn ascend_distribution(x: &SimplicialComplex, s: Face, u: usize) -> Result<Vec<f64>> {
    let k = s.len();
    if !x.contains(s) {
        return Err(Error::NotAFace(s));
    }
    if k + u > x.d() {
        return Err(Error::Parameter(format!(
            "ascending {u} levels from {s} overshoots d = {}",
            x.d()
        )));
    }
    let scale = binom(k + u, u) * x.pi(s);
    let mut out = vec![0.0; x.level_size(k + u)];
    for a in x.supersets(s, k + u) {
        out[a] = x.measure(k + u)[a] / scale;
    }
    Ok(out)
}

/// `u`-step ascent from every face of `X(k)` at once.
pub fn ascent_matrix(x: &SimplicialComplex, k: usize, u: usize) -> Result<WalkMatrix> {
    check_level(x, k + u)?;
    let mut w = zero_walk(x, k, k + u);
    for (i, &s) in x.faces(k).iter().enumerate() {
        for (a, p) in ascend_distribution(x, s, u)?.into_iter().enumerate() {
            w.matrix[(i, a)] = p;
        }
    }
    Ok(w)
}

/// Uniform descent from `X(from)` to `X(to)`.
pub fn descent_matrix(x: &SimplicialComplex, from: usize, to: usize) -> Result<WalkMatrix> {
    check_level(x, from)?;
    if to > from {
        return Err(Error::Parameter(format!("cannot descend from {from} to {to}")));
    }
    let mut w = zero_walk(x, from, to);
    let p = 1.0 / binom(from, to);
    for (i, &a) in x.faces(from).iter().enumerate() {
        for t in a.subsets_of_size(to) {
            w.matrix[(i, x.index_of(t).expect("downward closure"))] = p;
        }
    }
    Ok(w)
}

/// Canonical walk `N^{k,l,u}`: ascend `u` levels, then descend uniformly to level `l`.
pub fn canonical_walk(x: &SimplicialComplex, k: usize, l: usize, u: usize) -> Result<WalkMatrix> {
    if k + u > x.d() {
        return Err(Error::Parameter(format!(
            "canonical walk needs k + u ≤ d, got {k} + {u} > {}",
            x.d()
        )));
    }
    if l > k + u {
        return Err(Error::Parameter(format!(
            "canonical walk needs l ≤ k + u, got l = {l}"
        )));
    }
    ascent_matrix(x, k, u)?.then(&descent_matrix(x, k + u, l)?)
}

/// Swap walk `S^{k,l}_j`: move from `s ∈ X(k)` to `s' ⊔ t' ∈ X(l)` with `s' ⊆ s`
/// and exactly `j` new vertices `t'`.
pub fn swap_walk(
    x: &SimplicialComplex,
    k: usize,
    l: usize,
    j: usize,
    u: usize,
    method: SwapMethod,
) -> Result<WalkMatrix> {
    if j > l || l - j > k {
        return Err(Error::Parameter(format!(
            "swap walk needs j ≤ l and l − j ≤ k, got k = {k}, l = {l}, j = {j}"
        )));
    }
    if k + j > x.d() {
        return Err(Error::Parameter(format!(
            "swap walk needs k + j ≤ d, got {k} + {j} > {}",
            x.d()
        )));
    }
    let mut w = zero_walk(x, k, l);
    match method {
        SwapMethod::ClosedForm => {
            let c = binom(k, l - j) * binom(k + j, j);
            for (i, &s) in x.faces(k).iter().enumerate() {
                let ps = x.measure(k)[i];
                let keeps = s.subsets_of_size(l - j);
                for a in x.supersets(s, k + j) {
                    let fresh = x.faces(k + j)[a].difference(s);
                    let p = x.measure(k + j)[a] / (c * ps);
                    for &kept in &keeps {
                        let dst = x.index_of(kept.union(fresh)).expect("downward closure");
                        w.matrix[(i, dst)] += p;
                    }
                }
            }
        }
        SwapMethod::Conditioned => {
            if j > u || k + u > x.d() {
                return Err(Error::Parameter(format!(
                    "conditioned swap walk needs j ≤ u and k + u ≤ d, got j = {j}, u = {u}"
                )));
            }
            let c = binom(k, l - j) * binom(u, j);
            for (i, &s) in x.faces(k).iter().enumerate() {
                let keeps = s.subsets_of_size(l - j);
                let asc = ascend_distribution(x, s, u)?;
                for a in x.supersets(s, k + u) {
                    let fresh = x.faces(k + u)[a].difference(s);
                    let p = asc[a] / c;
                    for t in fresh.subsets_of_size(j) {
                        for &kept in &keeps {
                            let dst = x.index_of(kept.union(t)).expect("downward closure");
                            w.matrix[(i, dst)] += p;
                        }
                    }
                }
                if w.matrix.row(i).sum() <= 0.0 {
                    return Err(Error::ZeroProbabilityRow(s));
                }
            }
        }
    }
    Ok(w)
}

/// Mixture weight of `S^{k,l}_j` inside `N^{k,l,u}`.
pub fn mixture_coefficient(k: usize, l: usize, u: usize, j: usize) -> f64 {
    binom(u, j) * binom_i(k as i64, l as i64 - j as i64) / binom(k + u, l)
}

/// `Σ_j [C(u,j) C(k,l−j) / C(k+u,l)] · S_j`.
///
/// `swaps[j]` must be `S^{k,l}_j` for `j = 0..=u`; entries whose coefficient
/// vanishes are ignored.
pub fn expand_canonical_in_swaps(
    k: usize,
    l: usize,
    u: usize,
    swaps: &[WalkMatrix],
) -> Result<WalkMatrix> {
    if swaps.len() != u + 1 {
        return Err(Error::Dimension(format!(
            "expected {} swap walks, got {}",
            u + 1,
            swaps.len()
        )));
    }
    let terms: Vec<(f64, &WalkMatrix)> = (0..=u)
        .map(|j| (mixture_coefficient(k, l, u, j), &swaps[j]))
        .filter(|(c, _)| *c != 0.0)
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Numerical(format!("mixture weights sum to {total}")));
    }
    WalkMatrix::combine(&terms)
}

/// `S^{k,l}_u = Σ_j (−1)^{u−j} C(k+j,l) C(u,j) N^{k,l,j} / C(k,l−u)`.
///
/// `canonicals[j]` must be `N^{k,l,j}` for `j = 0..=u`; entries whose
/// coefficient vanishes are ignored.
pub fn invert_swaps_from_canonical(
    k: usize,
    l: usize,
    u: usize,
    canonicals: &[WalkMatrix],
) -> Result<WalkMatrix> {
    if canonicals.len() != u + 1 {
        return Err(Error::Dimension(format!(
            "expected {} canonical walks, got {}",
            u + 1,
            canonicals.len()
        )));
    }
    let lead = binom_i(k as i64, l as i64 - u as i64);
    if lead == 0.0 {
        return Err(Error::Parameter(format!(
            "S^{{{k},{l}}}_{u} is undefined since l − u ∉ [0, k]"
        )));
    }
    let terms: Vec<(f64, &WalkMatrix)> = (0..=u)
        .map(|j| {
            let sign = if (u - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            (sign * binom(k + j, l) * binom(u, j) / lead, &canonicals[j])
        })
        .filter(|(c, _)| *c != 0.0)
        .collect();
    WalkMatrix::combine(&terms)
}

/// `[S^{k,l}_0, …, S^{k,l}_u]`, with zero placeholders where `S_j` is undefined.
pub fn swap_family(
    x: &SimplicialComplex,
    k: usize,
    l: usize,
    u: usize,
    method: SwapMethod,
) -> Result<Vec<WalkMatrix>> {
    (0..=u)
        .map(|j| {
            if j > l || l - j > k {
                Ok(zero_walk(x, k, l))
            } else {
                swap_walk(x, k, l, j, u, method)
            }
        })
        .collect()
}

/// `[N^{k,l,0}, …, N^{k,l,u}]`, with zero placeholders where `N^{k,l,j}` is undefined.
pub fn canonical_family(x: &SimplicialComplex, k: usize, l: usize, u: usize) -> Result<Vec<WalkMatrix>> {
    (0..=u)
        .map(|j| {
            if l > k + j {
                Ok(zero_walk(x, k, l))
            } else {
                canonical_walk(x, k, l, j)
            }
        })
        .collect()
}
