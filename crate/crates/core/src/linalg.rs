//! Dense linear-algebra helpers. Storage is nalgebra; symmetric eigensolves go through faer.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals = to_faer(m).selfadjoint_eigenvalues(Side::Lower);
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors as columns.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = to_faer(m).selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let vals = order.iter().map(|&i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    (vals, vecs)
}

/// Projection of a symmetric matrix onto the PSD cone in Frobenius norm.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = to_faer(m).selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let pos: Vec<usize> = (0..n).filter(|&j| s[j] > 0.0).collect();
    let b = Mat::<f64>::from_fn(n, pos.len(), |i, k| u[(i, pos[k])] * s[pos[k]].sqrt());
    let p = &b * b.transpose();
    DMatrix::from_fn(n, n, |i, j| p[(i, j)])
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues_desc(m).last().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// `Diag(left)^{1/2} · m · Diag(right)^{-1/2}`.
pub fn symmetrize(m: &DMatrix<f64>, left: &[f64], right: &[f64]) -> Result<DMatrix<f64>> {
    if left.len() != m.nrows() || right.len() != m.ncols() {
        return Err(Error::Dimension(format!(
            "matrix {}x{} against measures of length {} and {}",
            m.nrows(),
            m.ncols(),
            left.len(),
            right.len()
        )));
    }
    if let Some(p) = left.iter().chain(right).find(|&&p| !(p > 0.0)) {
        return Err(Error::Invalid(format!("measure entry {p} is not positive")));
    }
    let ls: Vec<f64> = left.iter().map(|p| p.sqrt()).collect();
    let rs: Vec<f64> = right.iter().map(|p| p.sqrt()).collect();
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        m[(r, c)] * ls[r] / rs[c]
    }))
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// Singular values below `rel_tol · σ_max` count as zero.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cut)
        .collect();
    // Complement of the row space: eigenvectors of I - V_r V_r^T with eigenvalue 1.
    let mut proj = DMatrix::<f64>::identity(n, n);
    for &i in &kept {
        let row = v_t.row(i).transpose();
        proj -= &row * row.transpose();
    }
    let dim = n - kept.len();
    let (_, vecs) = sym_eigen_desc(&proj);
    vecs.columns(0, dim).into_owned()
}

/// Weighted inner product `Σ_i w_i f_i g_i`.
pub fn weighted_dot(w: &[f64], f: &DVector<f64>, g: &DVector<f64>) -> f64 {
    w.iter().zip(f.iter().zip(g.iter())).map(|(w, (a, b))| w * a * b).sum()
}
