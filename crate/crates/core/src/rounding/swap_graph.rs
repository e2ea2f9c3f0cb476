//! Swap graphs `G_{ℓ1,ℓ2}` on `X(ℓ1) ⊔ X(ℓ2)`.

use crate::combinatorics::binom;
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::face::Face;
use crate::graph::WeightedGraph;

/// Swap graph with edges `{a, b}` for `a ⊔ b ∈ X(ℓ1 + ℓ2)`.
///
/// When `ℓ1 = ℓ2` the two sides are identified and every edge carries twice the
/// weight of the split formula, so that the weights still form a distribution.
#[derive(Clone, Debug)]
pub struct SwapGraph {
    pub l1: usize,
    pub l2: usize,
    /// Faces of vertex `i`; left side first.
    pub faces: Vec<Face>,
    /// Number of vertices on the `ℓ1` side.
    pub left: usize,
    pub graph: WeightedGraph,
}

/// Build `G_{ℓ1,ℓ2}` for `ℓ1 ≥ ℓ2 ≥ 1`, `ℓ1 + ℓ2 ≤ d`.
pub fn swap_graph(x: &SimplicialComplex, l1: usize, l2: usize) -> Result<SwapGraph> {
    if !(l1 >= l2 && l2 >= 1 && l1 + l2 <= x.d()) {
        return Err(Error::Parameter(format!(
            "swap graph needs ℓ1 ≥ ℓ2 ≥ 1 and ℓ1 + ℓ2 ≤ {}, got ({l1}, {l2})",
            x.d()
        )));
    }
    let l = l1 + l2;
    let left = x.level_size(l1);
    let mut faces: Vec<Face> = x.faces(l1).to_vec();
    let offset = if l1 == l2 {
        0
    } else {
        faces.extend_from_slice(x.faces(l2));
        left
    };
    let scale = if l1 == l2 { 2.0 } else { 1.0 } / binom(l, l1);
    let mut edges = Vec::new();
    for (&c, &p) in x.faces(l).iter().zip(x.measure(l)) {
        for s in c.subsets_of_size(l1) {
            let t = c.difference(s);
            let (a, b) = (x.index_of(s).unwrap(), offset + x.index_of(t).unwrap());
            if l1 == l2 && a > b {
                continue;
            }
            edges.push((a, b, p * scale));
        }
    }
    let labels = faces.iter().map(|f| f.to_string()).collect();
    Ok(SwapGraph {
        l1,
        l2,
        faces,
        left,
        graph: WeightedGraph::new(labels, edges)?,
    })
}

impl SwapGraph {
    /// `Π_{ℓ1,ℓ2}`: half of `Π_{ℓ1}` and half of `Π_{ℓ2}`, or `Π_{ℓ1}` when the sides coincide.
    pub fn stationary(&self, x: &SimplicialComplex) -> Vec<f64> {
        if self.l1 == self.l2 {
            return x.measure(self.l1).to_vec();
        }
        let mut out: Vec<f64> = x.measure(self.l1).iter().map(|p| p / 2.0).collect();
        out.extend(x.measure(self.l2).iter().map(|p| p / 2.0));
        out
    }

    /// Second largest signed eigenvalue of the walk.
    pub fn lambda2(&self) -> f64 {
        self.graph.eigenvalues().get(1).copied().unwrap_or(0.0)
    }

    pub fn num_vertices(&self) -> usize {
        self.faces.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{complete_complex, random_pure_complex};
    use crate::walks::{swap_walk, SwapMethod};
    use proptest::prelude::*;

    #[test]
    fn kneser_type_graph_is_uniform() {
        let x = complete_complex(6, 4).unwrap();
        let g = swap_graph(&x, 2, 2).unwrap();
        assert_eq!(g.num_vertices(), 15);
        assert_eq!(g.graph.edges().len(), 15 * 6 / 2);
        let w0 = g.graph.edges()[0].2;
        for &(a, b, w) in g.graph.edges() {
            assert!(g.faces[a].is_disjoint(g.faces[b]));
            assert!((w - w0).abs() < 1e-15);
        }
        let total: f64 = g.graph.edges().iter().map(|e| e.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_measure_and_walk_blocks() {
        for seed in 0..3 {
            let x = random_pure_complex(9, 4, 14, seed).unwrap();
            for (l1, l2) in [(2, 1), (3, 1), (2, 2), (1, 1)] {
                let g = swap_graph(&x, l1, l2).unwrap();
                let pi = g.stationary(&x);
                for (a, b) in pi.iter().zip(g.graph.vertex_measure()) {
                    assert!((a - b).abs() < 1e-12);
                }
                let w = g.graph.walk_matrix();
                let stat = nalgebra::DVector::from_vec(pi.clone());
                assert!((w.transpose() * &stat - &stat).amax() < 1e-12);
                let s = swap_walk(&x, l1, l2, l2, l2, SwapMethod::ClosedForm).unwrap();
                let off = if l1 == l2 { 0 } else { g.left };
                for i in 0..x.level_size(l1) {
                    for j in 0..x.level_size(l2) {
                        assert!((w[(i, off + j)] - s.get(i, j)).abs() < 1e-12);
                    }
                }
                if l1 != l2 {
                    let adj = swap_walk(&x, l2, l1, l1, l1, SwapMethod::ClosedForm).unwrap();
                    for j in 0..x.level_size(l2) {
                        for i in 0..x.level_size(l1) {
                            assert!((w[(off + j, i)] - adj.get(j, i)).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lambda2_is_below_swap_singular_value() {
        for seed in 0..4 {
            let x = random_pure_complex(10, 4, 18, seed).unwrap();
            for (l1, l2) in [(2, 1), (3, 1), (2, 2), (1, 1)] {
                let g = swap_graph(&x, l1, l2).unwrap();
                let s = swap_walk(&x, l1, l2, l2, l2, SwapMethod::ClosedForm).unwrap();
                let sigma2 = crate::spectra::weighted_singular_values(&s).unwrap().sigma2;
                assert!(g.lambda2() <= sigma2 + 1e-9);
            }
        }
    }

    #[test]
    fn level_bounds() {
        let x = complete_complex(6, 3).unwrap();
        assert!(swap_graph(&x, 1, 2).is_err());
        assert!(swap_graph(&x, 2, 2).is_err());
        assert!(swap_graph(&x, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn edge_expectation_two_ways(seed in 0u64..50, vals in prop::collection::vec(-1.0f64..1.0, 200)) {
            let x = random_pure_complex(8, 3, 10, seed).unwrap();
            let g = swap_graph(&x, 2, 1).unwrap();
            let f = |a: Face, b: Face| vals[(a.bits() as usize * 31 + b.bits() as usize * 7) % 200];
            let lhs: f64 = g.graph.edges().iter().map(|&(a, b, w)| w * f(g.faces[a], g.faces[b])).sum();
            let mut rhs = 0.0;
            for (&c, &p) in x.faces(3).iter().zip(x.measure(3)) {
                for s in c.subsets_of_size(2) {
                    rhs += p * f(s, c.difference(s)) / 3.0;
                }
            }
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
