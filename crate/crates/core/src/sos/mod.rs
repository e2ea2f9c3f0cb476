//! Level-t Sum-of-Squares relaxation, its solver and the resulting local ensembles.

mod ensemble;
mod moments;
mod relaxation;
mod solver;

pub use ensemble::{Distribution, LocalPsdEnsemble, CLIP_TOL, MASS_TOL, P_MIN};
pub use moments::{code_of, write_code, MomentIndex, Moments, MOMENT_LIMIT};
pub use relaxation::{
    build_relaxation, ConstraintCounts, ConstraintViolation, MomentConstraint, SosRelaxation, INDEX_LIMIT,
};
pub use solver::{solve_sdp, solve_sdp_with, SdpDiagnostic, SdpOptions, SdpSolution};
