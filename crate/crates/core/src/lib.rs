//! Random walks, spectra and Sum-of-Squares rounding on high-dimensional expanders.
//!
//! The crate models weighted pure simplicial complexes, the walks between
//! their levels, the spectral quantities that control those walks, and a
//! propagation-rounding pipeline for MAX k-CSP driven by a moment-matrix
//! relaxation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod combinatorics;
pub mod complex;
pub mod csp;
pub mod error;
pub mod face;
pub mod graph;
pub mod linalg;
pub mod report;
pub mod rounding;
pub mod sos;
pub mod spectra;
pub mod walks;

pub use complex::{
    build_pure_complex, complete_complex, hdx_parameter, link, random_pure_complex,
    skeleton_graph, SimplicialComplex,
};
pub use error::{Error, Result};
pub use face::Face;
pub use graph::WeightedGraph;
pub use walks::{
    ascend_distribution, canonical_walk, expand_canonical_in_swaps, invert_swaps_from_canonical,
    step_matrix, swap_walk, Direction, SwapMethod, WalkMatrix,
};
pub use spectra::{
    eposet_parameter, harmonic_decompose, kneser_spectrum_analytic, local_to_global_check,
    threshold_rank, weighted_singular_values, SpectralReport,
};
pub use csp::{
    brute_force_opt, constraint_complex, gen_random_kxor, sat_fraction, Assignment, CspInstance,
};
pub use sos::{build_relaxation, solve_sdp, LocalPsdEnsemble, SdpSolution, SosRelaxation};
pub use rounding::{
    hd_threshold_rank, propagation_rounding, solve_csp_end_to_end, split_inequality_check, splittable_rank, swap_graph,
    variance_decrement_diag, RoundingReport, SplittingTree, SwapGraph,
};
