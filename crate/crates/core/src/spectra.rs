//! Weighted spectra of walks and graphs.
//!
//! Every walk `W` from `X(a)` to `X(b)` is analysed through the symmetrized
//! matrix `Diag(Π_a)^{1/2} · W · Diag(Π_b)^{-1/2}`, whose singular values are
//! those of `W` as an operator between the `Π`-weighted function spaces.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::combinatorics::{binom, binom_i};
use crate::complex::{complete_complex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg;
use crate::walks::{descent_matrix, step_matrix, swap_walk, Direction, SwapMethod, WalkMatrix};

/// Descending spectrum of a walk or graph.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub values: Vec<f64>,
    pub sigma2: f64,
    pub method: String,
    /// True when `values` are signed eigenvalues rather than singular values.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub signed: bool,
}

impl SpectralReport {
    fn new(values: Vec<f64>, signed: bool) -> SpectralReport {
        let sigma2 = values.get(1).copied().unwrap_or(0.0);
        SpectralReport {
            values,
            sigma2,
            method: "pi-symmetrized".into(),
            signed,
        }
    }
}

/// Singular values of `W` under `Π`-weighted inner products.
pub fn weighted_singular_values(w: &WalkMatrix) -> Result<SpectralReport> {
    let sym = linalg::symmetrize(w.matrix(), w.src_measure(), w.dst_measure())?;
    Ok(SpectralReport::new(linalg::singular_values_desc(&sym), false))
}

/// Signed eigenvalues of a square walk that is self-adjoint under its measure.
pub fn weighted_eigenvalues(w: &WalkMatrix) -> Result<SpectralReport> {
    if w.src_level() != w.dst_level() {
        return Err(Error::Dimension("signed spectrum needs a square walk".into()));
    }
    let sym = linalg::symmetrize(w.matrix(), w.src_measure(), w.dst_measure())?;
    let asym = (&sym - sym.transpose()).amax();
    if asym > 1e-10 {
        return Err(Error::Invalid(format!(
            "walk is not self-adjoint (asymmetry {asym:e})"
        )));
    }
    let sym = (&sym + sym.transpose()) * 0.5;
    Ok(SpectralReport::new(linalg::sym_eigenvalues_desc(&sym), true))
}

/// Number of signed walk eigenvalues `λ ≥ τ`.
pub fn threshold_rank(g: &WeightedGraph, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Parameter(format!("τ = {tau} must lie in (0, 1)")));
    }
    Ok(g.eigenvalues().iter().filter(|&&l| l >= tau).count())
}

/// Analytic Kneser spectra.
///
/// Without `l`: normalized singular values `C(n−k−i, k−i) / C(n−k, k)` of the
/// disjointness graph on `k`-sets, `i = 0..=k`. With `l`: the values
/// `C(n−k−i, l−i) · C(n−l−i, k−i) / (C(n−k, l) · C(n−l, k))` for the
/// bipartite disjointness graph between `k`-sets and `l`-sets,
/// `i = 0..=min(k, l)`.
pub fn kneser_spectrum_analytic(n: usize, k: usize, l: Option<usize>) -> Result<Vec<f64>> {
    let (n, k) = (n as i64, k as i64);
    match l {
        None => {
            if k < 1 || n < 2 * k {
                return Err(Error::Parameter(format!("square Kneser needs n ≥ 2k ≥ 2, got n = {n}, k = {k}")));
            }
            let deg = binom_i(n - k, k);
            Ok((0..=k).map(|i| binom_i(n - k - i, k - i) / deg).collect())
        }
        Some(l) => {
            let l = l as i64;
            if k < 1 || l < 1 || n < k + l {
                return Err(Error::Parameter(format!(
                    "bipartite Kneser needs n ≥ k + l, got n = {n}, k = {k}, l = {l}"
                )));
            }
            let norm = binom_i(n - k, l) * binom_i(n - l, k);
            Ok((0..=k.min(l))
                .map(|i| binom_i(n - k - i, l - i) * binom_i(n - l - i, k - i) / norm)
                .collect())
        }
    }
}

/// Multiplicity `C(n,i) − C(n,i−1)` of the `i`-th Johnson-scheme eigenspace.
pub fn johnson_multiplicity(n: usize, i: usize) -> usize {
    (binom(n, i) - binom_i(n as i64, i as i64 - 1)) as usize
}

/// Group a descending list into `(value, multiplicity)` clusters.
pub fn cluster_values(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((head, count)) if (*head - v).abs() <= tol => *count += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Numeric bipartite swap spectrum against both readings of the analytic list.
#[derive(Clone, Debug, Serialize)]
pub struct KneserConventionCheck {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub analytic: Vec<f64>,
    /// Distinct singular values of `S^{k,l}` on `Δ_{k+l}(n)`.
    pub numeric: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `max_i |σ_i − λ_i|`.
    pub err_direct: f64,
    /// `max_i |σ_i² − λ_i|`.
    pub err_squared: f64,
    pub multiplicities_match: bool,
}

pub fn bipartite_kneser_check(n: usize, k: usize, l: usize) -> Result<KneserConventionCheck> {
    let analytic = kneser_spectrum_analytic(n, k, Some(l))?;
    let x = complete_complex(n, k + l)?;
    let s = swap_walk(&x, k, l, l, l, SwapMethod::ClosedForm)?;
    let values = weighted_singular_values(&s)?.values;
    let clusters = cluster_values(&values, 1e-6);
    let numeric: Vec<f64> = clusters.iter().map(|c| c.0).collect();
    let multiplicities: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    let err = |g: &dyn Fn(f64) -> f64| {
        if numeric.len() != analytic.len() {
            return f64::INFINITY;
        }
        numeric
            .iter()
            .zip(&analytic)
            .map(|(s, a)| (g(*s) - a).abs())
            .fold(0.0, f64::max)
    };
    let err_direct = err(&|s| s);
    let err_squared = err(&|s| s * s);
    let multiplicities_match = multiplicities.len() == analytic.len()
        && multiplicities
            .iter()
            .enumerate()
            .all(|(i, &m)| m == johnson_multiplicity(n, i));
    Ok(KneserConventionCheck {
        n,
        k,
        l,
        analytic,
        numeric,
        multiplicities,
        err_direct,
        err_squared,
        multiplicities_match,
    })
}

/// Upper bound on `σ2(S^{k,l})` for a `γ`-HDX: `sqrt(γ·2^8·k²l²·2^{2k+4l}·k^k)`.
pub fn swap_singular_value_bound(gamma: f64, k: usize, l: usize) -> f64 {
    let (kf, lf) = (k as f64, l as f64);
    (gamma * 256.0 * kf * kf * lf * lf * 2f64.powi((2 * k + 4 * l) as i32) * kf.powi(k as i32)).sqrt()
}

/// EPoset parameter with its per-level contributions.
#[derive(Clone, Debug, Serialize)]
pub struct EposetParameter {
    pub value: f64,
    /// Entry `i − 1` holds `‖M_i^+ − U_{i−1}D_i‖` for `i = 1..d−1`.
    pub per_level: Vec<f64>,
}

/// `max_{1 ≤ i ≤ d−1} ‖M_i^+ − U_{i−1} D_i‖` in the `Π_i`-weighted operator norm,
/// with `M_i^+ = ((i+1)/i)(D_{i+1} U_i − I/(i+1))`.
pub fn eposet_parameter(x: &SimplicialComplex) -> Result<EposetParameter> {
    if x.d() < 2 {
        return Err(Error::Parameter(format!("EPoset parameter needs d ≥ 2, got {}", x.d())));
    }
    let mut per_level = Vec::new();
    for i in 1..x.d() {
        let up = step_matrix(x, i, Direction::Up)?;
        let down = step_matrix(x, i + 1, Direction::Down)?;
        let up_down = up.then(&down)?;
        let down_up = step_matrix(x, i, Direction::Down)?.then(&step_matrix(x, i - 1, Direction::Up)?)?;
        let n = x.level_size(i);
        let ii = i as f64;
        let non_lazy = (up_down.matrix() - DMatrix::identity(n, n) / (ii + 1.0)) * ((ii + 1.0) / ii);
        let diff = non_lazy - down_up.matrix();
        let sym = linalg::symmetrize(&diff, x.measure(i), x.measure(i))?;
        per_level.push(linalg::singular_values_desc(&sym)[0]);
    }
    let value = per_level.iter().copied().fold(0.0, f64::max);
    Ok(EposetParameter { value, per_level })
}

/// Output of [`harmonic_decompose`].
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicDecomposition {
    /// `f_i ∈ C^k_i` for `i = 0..=k`.
    pub components: Vec<Vec<f64>>,
    /// Numerical dimension of each `C^k_i`.
    pub dims: Vec<usize>,
    /// `|X(i)| − |X(i−1)|`, the dimensions on a proper complex.
    pub expected_dims: Vec<i64>,
    /// `‖f − Σ f_i‖_2`.
    pub residual: f64,
    /// Set when the spaces fail to form a direct sum of the expected size.
    pub rank_deficient: bool,
}

/// Split `f ∈ C^k` into lifts `U^{k−i} h_i` of functions `h_i ∈ ker D_i`.
pub fn harmonic_decompose(x: &SimplicialComplex, k: usize, f: &[f64]) -> Result<HarmonicDecomposition> {
    if k > x.d() {
        return Err(Error::Parameter(format!("level {k} exceeds d = {}", x.d())));
    }
    if f.len() != x.level_size(k) {
        return Err(Error::Dimension(format!(
            "function has {} values but |X({k})| = {}",
            f.len(),
            x.level_size(k)
        )));
    }
    const NULL_TOL: f64 = 1e-9;
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
    let mut dims = Vec::with_capacity(k + 1);
    let mut expected_dims = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let kernel = if i == 0 {
            DMatrix::from_element(1, 1, 1.0)
        } else {
            linalg::null_space(step_matrix(x, i - 1, Direction::Up)?.matrix(), NULL_TOL)
        };
        let lift = descent_matrix(x, k, i)?;
        let lifted = lift.matrix() * kernel;
        let rank = numerical_rank(&lifted, NULL_TOL);
        dims.push(rank);
        let below = if i == 0 { 0 } else { x.level_size(i - 1) as i64 };
        expected_dims.push(x.level_size(i) as i64 - below);
        blocks.push(lifted);
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let rows = x.level_size(k);
    let mut basis = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in &blocks {
        basis.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    let total_rank = numerical_rank(&basis, NULL_TOL);
    let rank_deficient = dims.iter().zip(&expected_dims).any(|(&a, &b)| a as i64 != b)
        || total_rank != cols;
    let target = DVector::from_column_slice(f);
    let svd = basis.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let coeffs = svd
        .solve(&target, NULL_TOL * smax)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let mut components = Vec::with_capacity(k + 1);
    let mut sum = DVector::zeros(rows);
    let mut at = 0;
    for b in &blocks {
        let c = coeffs.rows(at, b.ncols());
        let part = b * c;
        sum += &part;
        components.push(part.iter().copied().collect());
        at += b.ncols();
    }
    Ok(HarmonicDecomposition {
        components,
        dims,
        expected_dims,
        residual: (target - sum).norm(),
        rank_deficient,
    })
}

fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = linalg::singular_values_desc(m);
    let cut = sv.first().copied().unwrap_or(0.0) * rel_tol;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Both sides of the local-to-global correlation inequality.
#[derive(Clone, Debug, Serialize)]
pub struct LocalToGlobal {
    /// `E_{i,j∼V} |⟨v_i, v_j⟩|`.
    pub lhs: f64,
    /// `ρ² / (4 · rank_{ρ/4}(G))`.
    pub rhs: f64,
    pub holds: bool,
    /// `E_{ij∼E} ⟨v_i, v_j⟩`.
    pub edge_correlation: f64,
    pub precondition_met: bool,
    pub threshold_rank: usize,
}

/// Evaluate `E_{ij∼E}⟨v_i,v_j⟩ ≥ ρ ⟹ E_{i,j∼V}|⟨v_i,v_j⟩| ≥ ρ²/(4·rank_{ρ/4}(G))`.
pub fn local_to_global_check(vectors: &[Vec<f64>], g: &WeightedGraph, rho: f64) -> Result<LocalToGlobal> {
    if vectors.len() != g.num_vertices() {
        return Err(Error::Dimension(format!(
            "{} vectors for {} vertices",
            vectors.len(),
            g.num_vertices()
        )));
    }
    let dim = vectors.first().map_or(0, |v| v.len());
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Dimension(format!("vector {i} has length {}", v.len())));
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-9 {
            return Err(Error::Invalid(format!("vector {i} has norm {norm} > 1")));
        }
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Parameter(format!("ρ = {rho} must lie in (0, 1]")));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let edge_correlation: f64 = g
        .edges()
        .iter()
        .map(|&(u, v, w)| w * dot(&vectors[u], &vectors[v]))
        .sum();
    let mu = g.vertex_measure();
    let mut lhs = 0.0;
    for i in 0..vectors.len() {
        for j in 0..vectors.len() {
            lhs += mu[i] * mu[j] * dot(&vectors[i], &vectors[j]).abs();
        }
    }
    let rank = threshold_rank(g, rho / 4.0)?;
    let rhs = rho * rho / (4.0 * rank as f64);
    Ok(LocalToGlobal {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12,
        edge_correlation,
        precondition_met: edge_correlation >= rho,
        threshold_rank: rank,
    })
}
