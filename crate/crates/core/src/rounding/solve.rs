//! End-to-end pipeline: relaxation, solve, propagation rounding.

use serde::Serialize;

use super::propagation::{run_trials, RoundingOptions, TrialSummary};
use super::swap_graph::swap_graph;
use crate::complex::hdx_parameter;
use crate::csp::{brute_force_opt, constraint_complex, Assignment, CspInstance, BRUTE_FORCE_LIMIT};
use crate::error::{Error, Result};
use crate::sos::{build_relaxation, solve_sdp, SdpOptions};

/// Settings of [`solve_csp_end_to_end`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Target error used to scale the reported expansion threshold.
    pub eps: f64,
    /// SoS level; defaults to `k + max(k, 2)`.
    pub t: Option<usize>,
    /// Seed budget `L`; defaults to the largest multiple of `k` the level allows.
    pub big_l: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub sdp: SdpOptions,
    pub rounding: RoundingOptions,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            eps: 0.1,
            t: None,
            big_l: None,
            trials: 100,
            seed: 0,
            sdp: SdpOptions::default(),
            rounding: RoundingOptions::default(),
        }
    }
}

/// Second eigenvalue of one swap graph of the constraint complex.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SwapSpectrum {
    pub l1: usize,
    pub l2: usize,
    pub lambda2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndToEndReport {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub t: usize,
    pub big_l: usize,
    pub sdp_value: f64,
    pub sdp_upper_bound: f64,
    pub sdp_converged: bool,
    pub sdp_iterations: usize,
    pub opt: Option<f64>,
    pub best_sat: f64,
    /// Expansion `γ` of the constraint complex.
    pub gamma: f64,
    /// `ε⁴ / (k^{8+k} 2^{6k} q^{2k})`, the threshold shape without its constant.
    pub gamma_threshold_shape: f64,
    pub gamma_ratio: f64,
    pub swap_spectra: Vec<SwapSpectrum>,
    pub rounding: TrialSummary,
}

/// Default relaxation level `k + max(k, 2)`.
pub fn default_level(k: usize) -> usize {
    k + k.max(2)
}

/// Largest multiple of `k` that leaves the locality needed to condition on the seed set and round.
pub fn default_seed_budget(t: usize, k: usize, n: usize) -> usize {
    let cap = if t >= n { t.saturating_sub(2) } else { (t - k).min(t.saturating_sub(2)) };
    cap / k * k
}

/// Relax at level `t`, solve, and round with seed faces from `Π_k` of the constraint complex.
pub fn solve_csp_end_to_end(inst: &CspInstance, opts: &SolveOptions) -> Result<(Assignment, EndToEndReport)> {
    if !(opts.eps > 0.0) {
        return Err(Error::Parameter(format!("ε = {} must be positive", opts.eps)));
    }
    let (n, k, q) = (inst.n(), inst.k(), inst.q());
    let t = opts.t.unwrap_or_else(|| default_level(k));
    let big_l = opts.big_l.unwrap_or_else(|| default_seed_budget(t, k, n));
    if big_l < k {
        return Err(Error::Parameter(format!("level t = {t} leaves no room for a seed face of size {k}")));
    }
    let x = constraint_complex(inst)?;
    let rel = build_relaxation(inst, t)?;
    let sol = solve_sdp(&rel, opts.sdp.tol, opts.sdp.max_iter)?;
    let rounding = run_trials(
        &sol.ensemble,
        &x,
        Some(inst),
        x.measure(k),
        big_l,
        k,
        opts.trials,
        opts.seed,
        &opts.rounding,
    )?;
    let best = rounding
        .best_assignment()
        .cloned()
        .ok_or_else(|| Error::Numerical("every rounding trial hit a rare conditioning event".into()))?;
    let opt = if (q as f64).powi(n as i32) <= BRUTE_FORCE_LIMIT as f64 {
        Some(brute_force_opt(inst)?.0)
    } else {
        None
    };
    let gamma = if k >= 2 { hdx_parameter(&x)?.gamma } else { 0.0 };
    let shape = opts.eps.powi(4)
        / ((k as f64).powi(8 + k as i32) * 2f64.powi(6 * k as i32) * (q as f64).powi(2 * k as i32));
    let mut swap_spectra = Vec::new();
    for l in 2..=k {
        for l2 in 1..=l / 2 {
            let g = swap_graph(&x, l - l2, l2)?;
            swap_spectra.push(SwapSpectrum {
                l1: l - l2,
                l2,
                lambda2: g.lambda2(),
            });
        }
    }
    let report = EndToEndReport {
        n,
        k,
        q,
        t,
        big_l,
        sdp_value: sol.objective,
        sdp_upper_bound: sol.upper_bound,
        sdp_converged: sol.converged,
        sdp_iterations: sol.iterations,
        opt,
        best_sat: rounding.max_sat.unwrap_or(0.0),
        gamma,
        gamma_threshold_shape: shape,
        gamma_ratio: gamma / shape,
        swap_spectra,
        rounding,
    };
    Ok((best, report))
}
