use std::fs::File;
use std::io::{BufWriter, Write};

use hdxcsp_core::csp::{brute_force_opt, constraint_complex, CspInstance};
use hdxcsp_core::report::{sweep, CRITERIA};
use hdxcsp_core::rounding::{
    default_level, default_seed_budget, run_trials, splittable_rank, tree_ranks, RoundingOptions, SolveOptions,
};
use hdxcsp_core::sos::{build_relaxation, solve_sdp_with, SdpOptions, SdpSolution, SosRelaxation};
use hdxcsp_core::spectra::{cluster_values, kneser_spectrum_analytic, threshold_rank, weighted_singular_values};
use hdxcsp_core::walks::{canonical_walk, swap_walk, SwapMethod, WalkMatrix};
use hdxcsp_core::{
    complete_complex, eposet_parameter, hdx_parameter, solve_csp_end_to_end, Face, SimplicialComplex, SplittingTree,
    WeightedGraph,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    read_input, write_output, CliError, CliResult, Format, Io, KneserArgs, Method, RoundArgs, SdpArgs, SolveArgs,
    SweepArgs, TrankArgs, WalkArgs, WalkKind,
};

fn emit_json<T: Serialize>(io: &Io, value: &T) -> CliResult<()> {
    if io.format != Format::Json {
        return Err(CliError::validation("this command only writes JSON; CSV is for series output"));
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(io.out.as_deref(), &text)
}

fn read_complex(io: &Io) -> CliResult<SimplicialComplex> {
    Ok(SimplicialComplex::from_json(&read_input(io)?)?)
}

fn read_instance(io: &Io) -> CliResult<CspInstance> {
    Ok(CspInstance::from_json(&read_input(io)?)?)
}

fn check_tol(tol: f64) -> CliResult<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("--tol must be positive, got {tol}")))
    }
}

pub fn complex_stats(io: &Io) -> CliResult<()> {
    let x = read_complex(io)?;
    let level_sizes: Vec<usize> = (0..=x.d()).map(|i| x.level_size(i)).collect();
    emit_json(
        io,
        &json!({
            "n": x.n(),
            "d": x.d(),
            "level_sizes": level_sizes,
            "faces": level_sizes.iter().sum::<usize>(),
            "vertex_measure": x.measure(1),
        }),
    )
}

pub fn complex_gamma(io: &Io) -> CliResult<()> {
    let x = read_complex(io)?;
    emit_json(io, &hdx_parameter(&x)?)
}

pub fn complex_eposet(io: &Io) -> CliResult<()> {
    let x = read_complex(io)?;
    let p = eposet_parameter(&x)?;
    emit_json(io, &json!({ "eposet": p.value, "per_level": p.per_level }))
}

fn build_walk(x: &SimplicialComplex, args: &WalkArgs) -> CliResult<WalkMatrix> {
    check_tol(args.tol)?;
    let l = args.l.unwrap_or(args.k);
    let w = match args.kind {
        WalkKind::Canonical => canonical_walk(x, args.k, l, args.u)?,
        WalkKind::Swap => {
            let method = match args.method {
                Method::ClosedForm => SwapMethod::ClosedForm,
                Method::Conditioned => SwapMethod::Conditioned,
            };
            let j = args.j.unwrap_or(l);
            let u = if method == SwapMethod::ClosedForm { args.u.max(j) } else { args.u };
            swap_walk(x, args.k, l, j, u, method)?
        }
        WalkKind::Graph => return Err(CliError::validation("--kind graph is only valid for `spectra sigma2`")),
    };
    w.validate(args.tol)?;
    Ok(w)
}

pub fn walks_build(args: &WalkArgs) -> CliResult<()> {
    let x = read_complex(&args.io)?;
    let w = build_walk(&x, args)?;
    emit_json(&args.io, &w.to_json(&x))
}

pub fn spectra_sigma2(args: &WalkArgs) -> CliResult<()> {
    if args.kind == WalkKind::Graph {
        let g = WeightedGraph::from_json(&read_input(&args.io)?)?;
        return emit_json(
            &args.io,
            &json!({
                "values": g.eigenvalues(),
                "sigma2": g.sigma2(),
                "method": "pi-symmetrized",
                "signed": true,
            }),
        );
    }
    let x = read_complex(&args.io)?;
    let w = build_walk(&x, args)?;
    emit_json(&args.io, &weighted_singular_values(&w)?)
}

pub fn spectra_kneser(args: &KneserArgs) -> CliResult<()> {
    let (n, k) = (args.n, args.k);
    let values = if args.analytic {
        kneser_spectrum_analytic(n, k, args.l)?
    } else {
        let l = args.l.unwrap_or(k);
        if k == 0 || l == 0 || k + l > n {
            return Err(CliError::validation(format!("need 1 ≤ k, l and k + l ≤ n, got n = {n}, k = {k}, l = {l}")));
        }
        let x = complete_complex(n, k + l)?;
        let sv = weighted_singular_values(&swap_walk(&x, k, l, l, l, SwapMethod::ClosedForm)?)?.values;
        let clustered: Vec<f64> = cluster_values(&sv, 1e-6).into_iter().map(|c| c.0).collect();
        // The bipartite closed form lists squared singular values.
        match args.l {
            Some(_) => clustered.iter().map(|s| s * s).collect(),
            None => clustered,
        }
    };
    let sigma2 = values[1..].iter().copied().fold(0.0, f64::max);
    emit_json(
        &args.io,
        &json!({
            "n": n,
            "k": k,
            "l": args.l,
            "analytic": args.analytic,
            "values": values,
            "sigma2": sigma2,
        }),
    )
}

pub fn spectra_trank(args: &TrankArgs) -> CliResult<()> {
    let text = read_input(&args.io)?;
    if !args.complex {
        if args.tree.is_some() {
            return Err(CliError::validation("--tree requires --complex"));
        }
        let g = WeightedGraph::from_json(&text)?;
        return emit_json(&args.io, &json!({ "tau": args.tau, "rank": threshold_rank(&g, args.tau)? }));
    }
    let x = SimplicialComplex::from_json(&text)?;
    let ranks = match &args.tree {
        Some(t) => {
            let tree: SplittingTree = t.parse()?;
            let r = splittable_rank(&x, &tree, args.tau)?;
            vec![(tree, r)]
        }
        None => tree_ranks(&x, args.tau)?,
    };
    let min = ranks.iter().map(|r| r.1).min().unwrap_or(0);
    let trees: Vec<Value> = ranks.iter().map(|(t, r)| json!({ "tree": t.to_string(), "rank": r })).collect();
    emit_json(&args.io, &json!({ "tau": args.tau, "hd_threshold_rank": min, "trees": trees }))
}

pub fn csp_brute(io: &Io) -> CliResult<()> {
    let inst = read_instance(io)?;
    let (opt, eta) = brute_force_opt(&inst)?;
    emit_json(io, &json!({ "opt": opt, "assignment": eta.values }))
}

fn solve(inst: &CspInstance, args: &SdpArgs) -> CliResult<(SosRelaxation, SdpSolution)> {
    check_tol(args.tol)?;
    let t = args.t.unwrap_or_else(|| default_level(inst.k()));
    let rel = build_relaxation(inst, t)?;
    let opts = SdpOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SdpOptions::default()
    };
    let sol = match &args.log {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Validation {
                kind: "io".into(),
                message: format!("cannot create {}: {e}", path.display()),
            })?;
            let mut log = BufWriter::new(file);
            let sol = solve_sdp_with(&rel, &opts, Some(&mut log as &mut dyn Write))?;
            log.flush().map_err(|e| CliError::validation(e.to_string()))?;
            sol
        }
        None => solve_sdp_with(&rel, &opts, None)?,
    };
    Ok((rel, sol))
}

fn sdp_json(rel: &SosRelaxation, sol: &SdpSolution) -> CliResult<Value> {
    let marginals = (0..rel.instance().n())
        .map(|v| sol.ensemble.marginal(Face::singleton(v)).map(|d| d.probs))
        .collect::<hdxcsp_core::Result<Vec<_>>>()?;
    Ok(json!({
        "t": rel.t(),
        "matrix_size": rel.size(),
        "objective": sol.objective,
        "upper_bound": sol.upper_bound,
        "gap": sol.gap(),
        "converged": sol.converged,
        "iterations": sol.iterations,
        "primal_res": sol.primal_res,
        "dual_res": sol.dual_res,
        "psd_min_eig": sol.psd_min_eig,
        "min_moment": sol.min_moment,
        "repair_theta": sol.repair_theta,
        "marginals": marginals,
    }))
}

pub fn csp_sdp(args: &SdpArgs) -> CliResult<()> {
    let inst = read_instance(&args.io)?;
    let (rel, sol) = solve(&inst, args)?;
    emit_json(&args.io, &sdp_json(&rel, &sol)?)
}

fn rounding_options(args: &RoundArgs) -> RoundingOptions {
    RoundingOptions {
        fixed_m: args.fixed_m,
        checks: args.checks,
        ..RoundingOptions::default()
    }
}

fn strip_trials(mut v: Value, keep: bool) -> Value {
    if !keep {
        if let Some(obj) = v.as_object_mut() {
            obj.remove("reports");
        }
    }
    v
}

pub fn csp_round(args: &RoundArgs) -> CliResult<()> {
    let io = &args.sdp.io;
    let inst = read_instance(io)?;
    let (rel, sol) = solve(&inst, &args.sdp)?;
    let (n, k) = (inst.n(), inst.k());
    let big_l = args.big_l.unwrap_or_else(|| default_seed_budget(rel.t(), k, n));
    let x = constraint_complex(&inst)?;
    let summary = run_trials(
        &sol.ensemble,
        &x,
        Some(&inst),
        x.measure(k),
        big_l,
        k,
        args.trials,
        args.seed,
        &rounding_options(args),
    )?;
    if io.format == Format::Csv {
        return write_output(io.out.as_deref(), &summary.to_csv());
    }
    let out = json!({
        "L": big_l,
        "sdp": sdp_json(&rel, &sol)?,
        "rounding": strip_trials(serde_json::to_value(&summary)?, args.per_trial),
    });
    emit_json(io, &out)
}

pub fn csp_solve(args: &SolveArgs) -> CliResult<()> {
    let round = &args.round;
    let io = &round.sdp.io;
    if round.sdp.log.is_some() {
        return Err(CliError::validation("--log is only supported by `csp sdp` and `csp round`"));
    }
    check_tol(round.sdp.tol)?;
    let inst = read_instance(io)?;
    let opts = SolveOptions {
        eps: args.eps,
        t: round.sdp.t,
        big_l: round.big_l,
        trials: round.trials,
        seed: round.seed,
        sdp: SdpOptions {
            tol: round.sdp.tol,
            max_iter: round.sdp.max_iter,
            ..SdpOptions::default()
        },
        rounding: rounding_options(round),
    };
    let (eta, report) = solve_csp_end_to_end(&inst, &opts)?;
    if io.format == Format::Csv {
        return write_output(io.out.as_deref(), &report.rounding.to_csv());
    }
    let mut report = serde_json::to_value(&report)?;
    if let Some(r) = report.get_mut("rounding") {
        *r = strip_trials(r.take(), round.per_trial);
    }
    emit_json(io, &json!({ "assignment": eta.values, "report": report }))
}

pub fn report_sweep(args: &SweepArgs) -> CliResult<()> {
    let ids: Vec<usize> = if args.criteria.is_empty() { CRITERIA.to_vec() } else { args.criteria.clone() };
    let report = sweep(&ids)?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
    };
    write_output(args.out.as_deref(), &text)
}
