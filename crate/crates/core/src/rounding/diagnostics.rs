//! Correlation and variance diagnostics on local ensembles.

use serde::Serialize;

use super::tree::SplittingTree;
use crate::combinatorics::binom;
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::face::Face;
use crate::sos::{write_code, LocalPsdEnsemble};

/// Terms of the split inequality `lhs ≤ edge + left + right`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitCheck {
    pub l1: usize,
    pub l2: usize,
    /// `E_{a∼Π_ℓ} ‖μ_a − Π_i μ_{a_i}‖_1`.
    pub lhs: f64,
    /// `E_{{s,t}∼w} ‖μ_{s⊔t} − μ_s μ_t‖_1`.
    pub edge: f64,
    /// `E_{s∼Π_{ℓ1}} ‖μ_s − Π_i μ_{s_i}‖_1`.
    pub left: f64,
    /// `E_{t∼Π_{ℓ2}} ‖μ_t − Π_i μ_{t_i}‖_1`.
    pub right: f64,
    pub holds: bool,
}

impl SplitCheck {
    pub fn rhs(&self) -> f64 {
        self.edge + self.left + self.right
    }

    pub fn slack(&self) -> f64 {
        self.rhs() - self.lhs
    }
}

/// `‖μ_a − μ_s ⊗ μ_{a∖s}‖_1` for `s ⊆ a`.
pub fn split_distance(e: &LocalPsdEnsemble, a: Face, s: Face) -> Result<f64> {
    let joint = e.marginal(a)?;
    let ms = joint.marginalize(s)?;
    let mt = joint.marginalize(a.difference(s))?;
    let mut vals = vec![0; e.n()];
    let mut dist = 0.0;
    for (code, &p) in joint.probs.iter().enumerate() {
        write_code(a, code, e.q(), &mut vals);
        dist += (p - ms.prob_of(&vals) * mt.prob_of(&vals)).abs();
    }
    Ok(dist)
}

fn level_correlation(e: &LocalPsdEnsemble, x: &SimplicialComplex, level: usize) -> Result<f64> {
    x.faces(level)
        .iter()
        .zip(x.measure(level))
        .map(|(&a, &p)| Ok(p * e.product_distance(a)?))
        .sum()
}

/// `E_{{s,t}∼w_{ℓ1,ℓ2}} ‖μ_{s⊔t} − μ_s μ_t‖_1`, evaluated over splits of `ℓ`-faces.
pub fn swap_edge_correlation(e: &LocalPsdEnsemble, x: &SimplicialComplex, l1: usize, l2: usize) -> Result<f64> {
    let l = l1 + l2;
    let mut total = 0.0;
    for (&a, &p) in x.faces(l).iter().zip(x.measure(l)) {
        for s in a.subsets_of_size(l1) {
            total += p * split_distance(e, a, s)?;
        }
    }
    Ok(total / binom(l, l1))
}

fn check_levels(x: &SimplicialComplex, l1: usize, l2: usize) -> Result<()> {
    if !(l1 >= l2 && l2 >= 1 && l1 + l2 <= x.d()) {
        return Err(Error::Parameter(format!(
            "split needs ℓ1 ≥ ℓ2 ≥ 1 and ℓ1 + ℓ2 ≤ {}, got ({l1}, {l2})",
            x.d()
        )));
    }
    Ok(())
}

/// Evaluate all four expectations of the split inequality.
pub fn split_inequality_check(e: &LocalPsdEnsemble, x: &SimplicialComplex, l1: usize, l2: usize) -> Result<SplitCheck> {
    check_levels(x, l1, l2)?;
    let lhs = level_correlation(e, x, l1 + l2)?;
    let edge = swap_edge_correlation(e, x, l1, l2)?;
    let left = level_correlation(e, x, l1)?;
    let right = level_correlation(e, x, l2)?;
    Ok(SplitCheck {
        l1,
        l2,
        lhs,
        edge,
        left,
        right,
        holds: lhs <= edge + left + right + 1e-12,
    })
}

/// Recursive splitting bound of one tree.
#[derive(Clone, Debug, Serialize)]
pub struct TreeBound {
    pub tree: SplittingTree,
    pub lhs: f64,
    /// Sum of swap-edge correlations over internal nodes.
    pub bound: f64,
    pub holds: bool,
}

/// `E_{a∼Π_k} ‖μ_a − Π_i μ_{a_i}‖_1 ≤ Σ_{internal nodes} E_{w_{ℓ1,ℓ2}} ‖…‖_1`.
pub fn tree_split_bound(e: &LocalPsdEnsemble, x: &SimplicialComplex, tree: &SplittingTree) -> Result<TreeBound> {
    let k = tree.label();
    if k > x.d() {
        return Err(Error::Parameter(format!("tree with {k} leaves on a complex of top level {}", x.d())));
    }
    let lhs = level_correlation(e, x, k)?;
    let bound = tree
        .splits()
        .iter()
        .map(|&(a, b)| swap_edge_correlation(e, x, a, b))
        .sum::<Result<f64>>()?;
    Ok(TreeBound {
        tree: tree.clone(),
        lhs,
        bound,
        holds: lhs <= bound + 1e-12,
    })
}

/// Expected variance before and after conditioning on `a ∼ Π_{ℓ1,ℓ2}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VarianceDecrement {
    pub l1: usize,
    pub l2: usize,
    pub var_before: f64,
    pub var_after: f64,
    pub decrement: f64,
}

/// `E_{Y_a} Var(Y_s | Y_a) = 1 − Σ_γ μ_{s∪a}(γ)² / μ_a(γ|_a)`.
fn conditional_variance(e: &LocalPsdEnsemble, s: Face, a: Face) -> Result<f64> {
    let u = s.union(a);
    let joint = e.marginal(u)?;
    let ma = joint.marginalize(a)?;
    let mut vals = vec![0; e.n()];
    let mut acc = 0.0;
    for (code, &p) in joint.probs.iter().enumerate() {
        if p > 0.0 {
            write_code(u, code, e.q(), &mut vals);
            acc += p * p / ma.prob_of(&vals);
        }
    }
    Ok(1.0 - acc)
}

/// Variance drop of `X(ℓ1) ∪ X(ℓ2)` when conditioning on a face drawn from `Π_{ℓ1,ℓ2}`.
///
/// Needs joint laws on `2ℓ1` variables.
pub fn variance_decrement_diag(
    e: &LocalPsdEnsemble,
    x: &SimplicialComplex,
    l1: usize,
    l2: usize,
) -> Result<VarianceDecrement> {
    check_levels(x, l1, l2)?;
    let levels: Vec<usize> = if l1 == l2 { vec![l1] } else { vec![l1, l2] };
    let weight = 1.0 / levels.len() as f64;
    let mut before = 0.0;
    let mut after = 0.0;
    for &lv in &[l1, l2] {
        for (&s, &ps) in x.faces(lv).iter().zip(x.measure(lv)) {
            before += ps * e.variance(s)?;
            for &la in &levels {
                for (&a, &pa) in x.faces(la).iter().zip(x.measure(la)) {
                    after += weight * pa * ps * conditional_variance(e, s, a)?;
                }
            }
        }
    }
    Ok(VarianceDecrement {
        l1,
        l2,
        var_before: before,
        var_after: after,
        decrement: before - after,
    })
}
