//! Propagation rounding of a local ensemble.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::diagnostics::{split_inequality_check, variance_decrement_diag};
use crate::complex::SimplicialComplex;
use crate::csp::{sat_fraction, Assignment, CspInstance};
use crate::error::{Error, Result};
use crate::face::Face;
use crate::sos::{LocalPsdEnsemble, P_MIN};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HDXCSP_THREADS";

/// Knobs of a rounding run.
#[derive(Clone, Debug)]
pub struct RoundingOptions {
    /// Use this `m` instead of drawing it uniformly.
    pub fixed_m: Option<usize>,
    /// Compute `ε_m`, `Φ_m` and per-level variances for every `m`.
    pub diagnostics: bool,
    /// Run split-inequality and variance-decrement checks on every conditioned ensemble.
    pub checks: bool,
    pub max_resamples: usize,
    pub p_min: f64,
}

impl Default for RoundingOptions {
    fn default() -> RoundingOptions {
        RoundingOptions {
            fixed_m: None,
            diagnostics: true,
            checks: false,
            max_resamples: 100,
            p_min: P_MIN,
        }
    }
}

/// Outcome of the intermediate-ensemble checks of one trial.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct EnsembleChecks {
    pub split_checks: usize,
    pub split_failures: usize,
    pub min_split_slack: f64,
    pub decrement_checks: usize,
    pub min_decrement: f64,
    /// Checks not run because the remaining locality was too small.
    pub skipped: usize,
}

/// One run of the rounding algorithm.
#[derive(Clone, Debug, Serialize)]
pub struct RoundingReport {
    /// Number of seed faces used for the output.
    pub m: usize,
    pub seed_set: Face,
    /// Values of the seed variables in sorted order.
    pub eta_seed: Vec<usize>,
    pub assignment: Assignment,
    pub sat: Option<f64>,
    /// Rejected seed assignments before one passed `p_min`.
    pub resamples: usize,
    /// `ε_m` for `m = 0..=M`, with `m = 0` the unconditioned ensemble.
    pub eps: Vec<f64>,
    /// `Φ_m` for `m = 0..=M`.
    pub phi: Vec<f64>,
    /// `E_{a∼Π_i} Var(Y_a | Y_S)` for `i = 1..=k`, per `m`.
    pub var_by_level: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<EnsembleChecks>,
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn series_csv(eps: &[f64], phi: &[f64], var: &[Vec<f64>], stderr: Option<(&[f64], &[f64])>) -> String {
    let k = var.first().map_or(0, Vec::len);
    let mut head = vec!["m".to_string(), "eps_m".into(), "phi_m".into()];
    head.extend((1..=k).map(|i| format!("var_{i}")));
    if stderr.is_some() {
        head.extend(["eps_stderr".into(), "phi_stderr".into()]);
    }
    let mut out = head.join(",") + "\n";
    for m in 0..eps.len() {
        let mut row = vec![m.to_string(), num(eps[m]), num(phi[m])];
        row.extend(var[m].iter().map(|&v| num(v)));
        if let Some((es, ps)) = stderr {
            row.extend([num(es[m]), num(ps[m])]);
        }
        out += &(row.join(",") + "\n");
    }
    out
}

impl RoundingReport {
    /// Diagnostics series as CSV with columns `m, eps_m, phi_m, var_1..var_k`.
    pub fn to_csv(&self) -> String {
        series_csv(&self.eps, &self.phi, &self.var_by_level, None)
    }
}

fn sample<R: Rng>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Numerical(format!("cannot sample: {e}")))?;
    Ok(dist.sample(rng))
}

fn level_variances(e: &LocalPsdEnsemble, x: &SimplicialComplex) -> Result<Vec<f64>> {
    (1..=x.d())
        .map(|i| {
            x.faces(i)
                .iter()
                .zip(x.measure(i))
                .map(|(&a, &p)| Ok(p * e.variance(a)?))
                .sum()
        })
        .collect()
}

fn run_checks(e: &LocalPsdEnsemble, x: &SimplicialComplex, acc: &mut EnsembleChecks) -> Result<()> {
    let k = x.d();
    for l in 2..=k {
        for l2 in 1..=l / 2 {
            let l1 = l - l2;
            match split_inequality_check(e, x, l1, l2) {
                Ok(c) => {
                    acc.split_checks += 1;
                    acc.split_failures += usize::from(!c.holds);
                    acc.min_split_slack = acc.min_split_slack.min(c.slack());
                }
                Err(Error::Locality { .. }) => acc.skipped += 1,
                Err(err) => return Err(err),
            }
            match variance_decrement_diag(e, x, l1, l2) {
                Ok(v) => {
                    acc.decrement_checks += 1;
                    acc.min_decrement = acc.min_decrement.min(v.decrement);
                }
                Err(Error::Locality { .. }) => acc.skipped += 1,
                Err(err) => return Err(err),
            }
        }
    }
    Ok(())
}

/// One run of propagation rounding with seed faces drawn from `pi` on `X(ℓ)`.
///
/// Seed faces `s_1..s_M` (`M = L/ℓ`) and one assignment of `S_M = ∪ s_j` are drawn
/// once; the output uses the prefix `S_m`, and the diagnostics condition on every prefix.
pub fn propagation_rounding<R: Rng>(
    e: &LocalPsdEnsemble,
    x: &SimplicialComplex,
    pi: &[f64],
    big_l: usize,
    ell: usize,
    rng: &mut R,
    opts: &RoundingOptions,
) -> Result<RoundingReport> {
    if ell == 0 || ell > x.d() || big_l < ell {
        return Err(Error::Parameter(format!("need 1 ≤ ℓ ≤ {} and L ≥ ℓ, got L = {big_l}, ℓ = {ell}", x.d())));
    }
    if pi.len() != x.level_size(ell) || pi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Invalid(format!("seed distribution must weight the {} faces of level {ell}", x.level_size(ell))));
    }
    if x.n() > e.n() {
        return Err(Error::Dimension(format!("complex on {} vertices, ensemble on {}", x.n(), e.n())));
    }
    let big_m = big_l / ell;
    let k = x.d();
    let n = e.n();
    let seed_size = (big_m * ell).min(n);
    if seed_size + 2 > e.locality() || (seed_size + k).min(n) > e.locality() {
        return Err(Error::Locality {
            needed: (seed_size + k).min(n).max(seed_size + 2),
            available: e.locality(),
        });
    }
    let m = match opts.fixed_m {
        Some(m) if m == 0 || m > big_m => {
            return Err(Error::Parameter(format!("fixed m = {m} outside 1..={big_m}")))
        }
        Some(m) => m,
        None => rng.gen_range(1..=big_m),
    };
    let faces = x.faces(ell);
    let mut prefixes = vec![Face::EMPTY];
    for _ in 0..big_m {
        let s = faces[sample(pi, rng)?];
        prefixes.push(prefixes.last().unwrap().union(s));
    }
    let full = prefixes[big_m];
    let mu = e.marginal(full)?;
    let mut resamples = 0;
    let (eta_full, top) = loop {
        let code = sample(&mu.probs, rng)?;
        let mut vals = vec![0; n];
        crate::sos::write_code(full, code, e.q(), &mut vals);
        let beta: Vec<usize> = full.iter().map(|v| vals[v]).collect();
        match e.condition_with(full, &beta, opts.p_min) {
            Ok(c) => break (vals, c),
            Err(Error::RareEvent { .. }) if resamples < opts.max_resamples => resamples += 1,
            Err(err) => return Err(err),
        }
    };
    let restrict = |s: Face| -> Vec<usize> { s.iter().map(|v| eta_full[v]).collect() };
    let conditioned = |mm: usize| -> Result<LocalPsdEnsemble> {
        if mm == big_m {
            Ok(top.clone())
        } else {
            e.condition_with(prefixes[mm], &restrict(prefixes[mm]), opts.p_min)
        }
    };

    let seed_set = prefixes[m];
    let y = conditioned(m)?;
    let mut values = vec![0; n];
    for (j, slot) in values.iter_mut().enumerate() {
        *slot = sample(&y.marginal(Face::singleton(j))?.probs, rng)?;
    }

    let (mut eps, mut phi, mut var_by_level) = (Vec::new(), Vec::new(), Vec::new());
    let mut checks = opts.checks.then(|| EnsembleChecks {
        min_split_slack: f64::INFINITY,
        min_decrement: f64::INFINITY,
        ..EnsembleChecks::default()
    });
    if opts.diagnostics || opts.checks {
        for mm in 0..=big_m {
            let ym = conditioned(mm)?;
            if opts.diagnostics {
                eps.push(ym.local_correlation(x, k)?);
                let vars = level_variances(&ym, x)?;
                phi.push(vars.iter().sum::<f64>() / k as f64);
                var_by_level.push(vars);
            }
            if let Some(acc) = checks.as_mut() {
                run_checks(&ym, x, acc)?;
            }
        }
    }
    Ok(RoundingReport {
        m,
        seed_set,
        eta_seed: restrict(seed_set),
        assignment: Assignment::new(values),
        sat: None,
        resamples,
        eps,
        phi,
        var_by_level,
        checks,
    })
}

/// Aggregate of many independent rounding trials.
#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub completed: usize,
    /// Trials abandoned after exhausting seed resamples.
    pub skipped: usize,
    pub mean_sat: Option<f64>,
    pub stderr_sat: Option<f64>,
    pub max_sat: Option<f64>,
    pub best_trial: Option<usize>,
    /// Mean `ε_m` and `Φ_m` over trials, `m = 0..=M`.
    pub eps_mean: Vec<f64>,
    pub eps_stderr: Vec<f64>,
    pub phi_mean: Vec<f64>,
    pub phi_stderr: Vec<f64>,
    pub var_mean: Vec<Vec<f64>>,
    /// `E_{m∼[M]} ε_m`.
    pub eps_expected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<EnsembleChecks>,
    pub reports: Vec<RoundingReport>,
}

impl TrialSummary {
    /// Mean series as CSV with columns `m, eps_m, phi_m, var_1..var_k, eps_stderr, phi_stderr`.
    pub fn to_csv(&self) -> String {
        series_csv(
            &self.eps_mean,
            &self.phi_mean,
            &self.var_mean,
            Some((&self.eps_stderr, &self.phi_stderr)),
        )
    }

    pub fn best_assignment(&self) -> Option<&Assignment> {
        self.best_trial.map(|t| &self.reports[t].assignment)
    }
}

/// Worker count from `HDXCSP_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run `trials` independent roundings; trial `i` uses ChaCha8 seeded with `seed` on stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    e: &LocalPsdEnsemble,
    x: &SimplicialComplex,
    instance: Option<&CspInstance>,
    pi: &[f64],
    big_l: usize,
    ell: usize,
    trials: usize,
    seed: u64,
    opts: &RoundingOptions,
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let threads = thread_count().min(trials);
    let run = |i: usize| -> Result<Option<RoundingReport>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        match propagation_rounding(e, x, pi, big_l, ell, &mut rng, opts) {
            Ok(mut r) => {
                if let Some(inst) = instance {
                    r.sat = Some(sat_fraction(inst, &r.assignment)?);
                }
                Ok(Some(r))
            }
            Err(Error::RareEvent { .. }) => Ok(None),
            Err(err) => Err(err),
        }
    };
    let mut results: Vec<Option<Result<Option<RoundingReport>>>> = (0..trials).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run = &run;
                scope.spawn(move || {
                    (w..trials)
                        .step_by(threads)
                        .map(|i| (i, run(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("rounding worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut reports = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r.expect("every trial ran")? {
            Some(rep) => reports.push(rep),
            None => skipped += 1,
        }
    }
    summarize(trials, skipped, reports)
}

fn summarize(trials: usize, skipped: usize, reports: Vec<RoundingReport>) -> Result<TrialSummary> {
    let sats: Vec<f64> = reports.iter().filter_map(|r| r.sat).collect();
    let (mean_sat, stderr_sat) = if sats.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_stderr(&sats);
        (Some(m), Some(s))
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in reports.iter().enumerate() {
        if let Some(s) = r.sat {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let len = reports.first().map_or(0, |r| r.eps.len());
    let k = reports.first().and_then(|r| r.var_by_level.first()).map_or(0, Vec::len);
    let (mut eps_mean, mut eps_stderr, mut phi_mean, mut phi_stderr) = (vec![], vec![], vec![], vec![]);
    let mut var_mean = Vec::new();
    for m in 0..len {
        let (a, b) = mean_stderr(&reports.iter().map(|r| r.eps[m]).collect::<Vec<_>>());
        eps_mean.push(a);
        eps_stderr.push(b);
        let (a, b) = mean_stderr(&reports.iter().map(|r| r.phi[m]).collect::<Vec<_>>());
        phi_mean.push(a);
        phi_stderr.push(b);
        var_mean.push(
            (0..k)
                .map(|i| reports.iter().map(|r| r.var_by_level[m][i]).sum::<f64>() / reports.len() as f64)
                .collect(),
        );
    }
    let eps_expected = if len > 1 {
        eps_mean[1..].iter().sum::<f64>() / (len - 1) as f64
    } else {
        0.0
    };
    let checks = reports.iter().filter_map(|r| r.checks).reduce(|a, b| EnsembleChecks {
        split_checks: a.split_checks + b.split_checks,
        split_failures: a.split_failures + b.split_failures,
        min_split_slack: a.min_split_slack.min(b.min_split_slack),
        decrement_checks: a.decrement_checks + b.decrement_checks,
        min_decrement: a.min_decrement.min(b.min_decrement),
        skipped: a.skipped + b.skipped,
    });
    Ok(TrialSummary {
        trials,
        completed: reports.len(),
        skipped,
        mean_sat,
        stderr_sat,
        max_sat: best.map(|b| b.1),
        best_trial: best.map(|b| b.0),
        eps_mean,
        eps_stderr,
        phi_mean,
        phi_stderr,
        var_mean,
        eps_expected,
        checks,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::complete_complex;
    use crate::csp::gen_random_kxor;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn product_ensemble_rounds_to_independent_marginals() {
        let x = complete_complex(4, 2).unwrap();
        let marg = vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.2, 0.8]];
        let e = LocalPsdEnsemble::from_product(2, 4, &marg).unwrap();
        let opts = RoundingOptions {
            diagnostics: false,
            ..RoundingOptions::default()
        };
        let mut counts = [0usize; 4];
        let trials = 4000;
        let mut r = rng(5);
        for _ in 0..trials {
            let rep = propagation_rounding(&e, &x, x.measure(2), 2, 2, &mut r, &opts).unwrap();
            for (c, &v) in counts.iter_mut().zip(&rep.assignment.values) {
                *c += v;
            }
        }
        for (c, m) in counts.iter().zip(&marg) {
            let p = *c as f64 / trials as f64;
            let sd = (m[1] * m[0] / trials as f64).sqrt();
            assert!((p - m[1]).abs() < 4.0 * sd + 1e-12, "{p} vs {}", m[1]);
        }
    }

    #[test]
    fn integral_ensemble_reproduces_assignment() {
        let (inst, planted) = gen_random_kxor(6, 3, 12, 2, 3, true).unwrap();
        let planted = planted.unwrap();
        let e = LocalPsdEnsemble::from_assignment(2, 6, &planted).unwrap();
        let x = crate::csp::constraint_complex(&inst).unwrap();
        let s = run_trials(&e, &x, Some(&inst), x.measure(3), 3, 3, 8, 1, &RoundingOptions::default()).unwrap();
        for r in &s.reports {
            assert_eq!(r.assignment, planted);
            assert_eq!(r.sat, Some(1.0));
            assert!(r.eps.iter().all(|&v| v.abs() < 1e-12));
            assert!(r.phi.iter().all(|&v| v.abs() < 1e-12));
        }
        assert_eq!(s.mean_sat, Some(1.0));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let x = complete_complex(6, 3).unwrap();
        let e = LocalPsdEnsemble::from_distribution(6, 2, 9, &[(vec![0; 6], 0.5), (vec![1, 0, 1, 0, 1, 0], 0.5)]).unwrap();
        let a = run_trials(&e, &x, None, x.measure(3), 6, 3, 12, 9, &RoundingOptions::default()).unwrap();
        let b = run_trials(&e, &x, None, x.measure(3), 6, 3, 12, 9, &RoundingOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut r1 = rng(9);
        r1.set_stream(4);
        let single = propagation_rounding(&e, &x, x.measure(3), 6, 3, &mut r1, &RoundingOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&single).unwrap(), serde_json::to_string(&a.reports[4]).unwrap());
    }

    #[test]
    fn conditioning_removes_correlation_of_copies() {
        let x = complete_complex(6, 3).unwrap();
        let e = LocalPsdEnsemble::from_distribution(6, 2, 9, &[(vec![0; 6], 0.5), (vec![1; 6], 0.5)]).unwrap();
        let opts = RoundingOptions {
            checks: true,
            ..RoundingOptions::default()
        };
        let rep = propagation_rounding(&e, &x, x.measure(3), 6, 3, &mut rng(2), &opts).unwrap();
        assert!(rep.eps[0] > 0.5);
        assert!(rep.eps[1..].iter().all(|&v| v.abs() < 1e-12));
        assert!(rep.phi[0] > rep.phi[1]);
        let c = rep.checks.unwrap();
        assert_eq!(c.split_failures, 0);
        assert!(c.min_decrement >= -1e-9);
        let csv = rep.to_csv();
        assert!(csv.starts_with("m,eps_m,phi_m,var_1,var_2,var_3\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn parameter_and_locality_errors() {
        let x = complete_complex(6, 3).unwrap();
        let e = LocalPsdEnsemble::from_product(2, 6, &vec![vec![0.5, 0.5]; 6]).unwrap();
        let opts = RoundingOptions::default();
        assert!(matches!(
            propagation_rounding(&e, &x, x.measure(3), 2, 3, &mut rng(0), &opts),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            propagation_rounding(&e, &x, x.measure(3), 6, 3, &mut rng(0), &opts),
            Err(Error::Locality { .. })
        ));
        let bad = RoundingOptions {
            fixed_m: Some(2),
            ..RoundingOptions::default()
        };
        assert!(propagation_rounding(&e, &x, x.measure(3), 3, 3, &mut rng(0), &bad).is_err());
    }
}
