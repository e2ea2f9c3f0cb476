//! Swap graphs, splitting trees, propagation rounding and its diagnostics.

mod diagnostics;
mod propagation;
mod solve;
mod swap_graph;
mod tree;

pub use diagnostics::{
    split_distance, split_inequality_check, swap_edge_correlation, tree_split_bound, variance_decrement_diag,
    SplitCheck, TreeBound, VarianceDecrement,
};
pub use propagation::{
    propagation_rounding, run_trials, thread_count, EnsembleChecks, RoundingOptions, RoundingReport, TrialSummary,
    THREADS_ENV,
};
pub use solve::{default_level, default_seed_budget, solve_csp_end_to_end, EndToEndReport, SolveOptions, SwapSpectrum};
pub use swap_graph::{swap_graph, SwapGraph};
pub use tree::{hd_threshold_rank, splittable_rank, tree_ranks, SplittingTree, MAX_ENUMERATED_LEAVES};
