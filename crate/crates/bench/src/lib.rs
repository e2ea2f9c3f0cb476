//! Benchmark fixtures shared by the criterion targets.

use hdxcsp_core::csp::{gen_random_kxor, CspInstance};
use hdxcsp_core::sos::{build_relaxation, solve_sdp, LocalPsdEnsemble};
use hdxcsp_core::{complete_complex, random_pure_complex, SimplicialComplex};

/// Complete complex `Δ_d(n)`.
pub fn complete(n: usize, d: usize) -> SimplicialComplex {
    complete_complex(n, d).expect("valid complete complex")
}

/// Seeded random 4-dimensional complex on 12 vertices.
pub fn sparse() -> SimplicialComplex {
    random_pure_complex(12, 4, 60, 3).expect("valid random complex")
}

/// Planted 3-XOR on `n` variables with `m` constraints.
pub fn planted_xor(n: usize, m: usize) -> CspInstance {
    gen_random_kxor(n, 3, m, 2, 1, true).expect("valid instance").0
}

/// Level-`t` ensemble solved for `inst`.
pub fn solved_ensemble(inst: &CspInstance, t: usize) -> LocalPsdEnsemble {
    let rel = build_relaxation(inst, t).expect("relaxation fits");
    solve_sdp(&rel, 1e-6, 50_000).expect("solver runs").ensemble
}
