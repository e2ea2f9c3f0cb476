//! ADMM solver for the moment relaxation.
//!
//! Pseudo-moments are parameterized by `z(W, γ) = P[Y_W = γ]` with `γ` nowhere zero, so
//! that every consistency and normalization constraint holds by construction. The
//! moment matrix factors as `M = Bᵀ G(z) B` with `G` indexed by nowhere-zero pairs, and the
//! solver enforces `G(z) ⪰ 0` and `y(z) ≥ 0` by splitting.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use super::ensemble::LocalPsdEnsemble;
use super::moments::{write_code, Moments};
use super::relaxation::SosRelaxation;
use crate::error::{Error, Result};
use crate::face::Face;

/// Solver settings.
#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Diagnostics are emitted every this many iterations.
    pub log_every: usize,
}

impl Default for SdpOptions {
    fn default() -> SdpOptions {
        SdpOptions {
            tol: 1e-6,
            max_iter: 50_000,
            rho: 1.0,
            relaxation: 1.6,
            check_every: 10,
            log_every: 500,
        }
    }
}

/// One diagnostics line.
#[derive(Clone, Debug, Serialize)]
pub struct SdpDiagnostic {
    pub iter: usize,
    pub primal_res: f64,
    pub psd_min_eig: f64,
    pub objective: f64,
}

/// Solver output.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub ensemble: LocalPsdEnsemble,
    /// Objective of the returned (repaired) pseudo-distribution.
    pub objective: f64,
    /// Certified upper bound on the relaxation value from the dual iterate.
    pub upper_bound: f64,
    pub converged: bool,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    /// Smallest eigenvalue of the reduced moment matrix of the returned point.
    pub psd_min_eig: f64,
    /// Smallest pseudo-moment before the repair step.
    pub min_moment: f64,
    /// Weight of the uniform distribution mixed in to restore nonnegativity.
    pub repair_theta: f64,
}

impl SdpSolution {
    /// Distance between the certified bound and the returned objective.
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.objective
    }
}

struct Reduced {
    dim: usize,
    /// Upper-triangle entries `(r, c, z)` of `G`; `G[0,0] = 1` is constant.
    gmap: Vec<(usize, usize, usize)>,
    nz: usize,
    prow: Vec<Vec<(usize, f64)>>,
    y0: Vec<f64>,
    z_uniform: DVector<f64>,
}

fn nonzero_code(w: Face, vals: &[usize], q: usize) -> usize {
    w.iter().rev().fold(0, |acc, v| acc * (q - 1) + vals[v] - 1)
}

fn write_nonzero(w: Face, mut code: usize, q: usize, vals: &mut [usize]) {
    for v in w.iter() {
        vals[v] = code % (q - 1) + 1;
        code /= q - 1;
    }
}

impl Reduced {
    fn new(rel: &SosRelaxation) -> Reduced {
        let idx = rel.moment_index();
        let (n, q) = (idx.n(), idx.q());
        let mut zoff = HashMap::new();
        let mut nz = 0;
        for &w in idx.sets().iter().filter(|w| !w.is_empty()) {
            zoff.insert(w, nz);
            nz += (q - 1).pow(w.len() as u32);
        }
        let h = rel.t_half().min(n);
        let gidx: Vec<(Face, usize)> = idx
            .sets()
            .iter()
            .filter(|s| s.len() <= h)
            .flat_map(|&s| (0..(q - 1).pow(s.len() as u32)).map(move |c| (s, c)))
            .collect();
        let dim = gidx.len();
        let mut gmap = Vec::new();
        let mut a = vec![0; n];
        let mut b = vec![0; n];
        for r in 0..dim {
            let (s1, c1) = gidx[r];
            write_nonzero(s1, c1, q, &mut a);
            for c in r..dim {
                let (s2, c2) = gidx[c];
                write_nonzero(s2, c2, q, &mut b);
                let w = s1.union(s2);
                if w.is_empty() || s1.intersection(s2).iter().any(|v| a[v] != b[v]) {
                    continue;
                }
                for v in s1.iter() {
                    b[v] = a[v];
                }
                gmap.push((r, c, zoff[&w] + nonzero_code(w, &b, q)));
            }
        }
        let mut prow = Vec::with_capacity(idx.len());
        let mut y0 = Vec::with_capacity(idx.len());
        let mut g = vec![0; n];
        let mut vals = vec![0; n];
        for &u in idx.sets() {
            for code in 0..q.pow(u.len() as u32) {
                write_code(u, code, q, &mut g);
                let support = Face::from_bits(u.iter().filter(|&v| g[v] != 0).fold(0, |m, v| m | 1 << v));
                let zeros = u.difference(support);
                let mut row = Vec::new();
                let mut c0 = 0.0;
                for r in zeros.all_subsets() {
                    let sign = if r.len() % 2 == 0 { 1.0 } else { -1.0 };
                    let w = support.union(r);
                    if w.is_empty() {
                        c0 += sign;
                        continue;
                    }
                    vals.copy_from_slice(&g);
                    for d in 0..(q - 1).pow(r.len() as u32) {
                        write_nonzero(r, d, q, &mut vals);
                        row.push((zoff[&w] + nonzero_code(w, &vals, q), sign));
                    }
                }
                prow.push(row);
                y0.push(c0);
            }
        }
        let mut z_uniform = DVector::zeros(nz);
        for (&w, &off) in &zoff {
            for c in 0..(q - 1).pow(w.len() as u32) {
                z_uniform[off + c] = (q as f64).powi(-(w.len() as i32));
            }
        }
        Reduced {
            dim,
            gmap,
            nz,
            prow,
            y0,
            z_uniform,
        }
    }

    fn g_of(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        m[(0, 0)] = 1.0;
        for &(r, c, zi) in &self.gmap {
            m[(r, c)] = z[zi];
            m[(c, r)] = z[zi];
        }
        m
    }

    fn g_adjoint(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nz);
        for &(r, c, zi) in &self.gmap {
            out[zi] += if r == c { m[(r, c)] } else { m[(r, c)] + m[(c, r)] };
        }
        out
    }

    fn y_of(&self, z: &DVector<f64>) -> Vec<f64> {
        self.prow
            .iter()
            .zip(&self.y0)
            .map(|(row, c)| c + row.iter().map(|&(i, s)| s * z[i]).sum::<f64>())
            .collect()
    }

    fn y_adjoint(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.nz);
        for (row, &x) in self.prow.iter().zip(v) {
            if x != 0.0 {
                for &(i, s) in row {
                    out[i] += s * x;
                }
            }
        }
        out
    }

    /// `AᵀA + PᵀP`, with `AᵀA` diagonal since each entry of `G` reads one coordinate.
    fn normal_matrix(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.nz, self.nz);
        for &(r, c, zi) in &self.gmap {
            k[(zi, zi)] += if r == c { 1.0 } else { 2.0 };
        }
        for row in &self.prow {
            for &(i, si) in row {
                for &(j, sj) in row {
                    k[(i, j)] += si * sj;
                }
            }
        }
        k
    }
}

use crate::linalg::{project_psd, sym_min_eigenvalue as min_eig};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve with default settings apart from `tol` and `max_iter`.
pub fn solve_sdp(rel: &SosRelaxation, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    let opts = SdpOptions {
        tol,
        max_iter,
        ..SdpOptions::default()
    };
    solve_sdp_with(rel, &opts, None)
}

/// Solve, optionally streaming JSON-lines diagnostics to `log`.
pub fn solve_sdp_with(rel: &SosRelaxation, opts: &SdpOptions, mut log: Option<&mut dyn Write>) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance {} must be positive", opts.tol)));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) || !(opts.rho > 0.0) {
        return Err(Error::Parameter("penalty must be positive and relaxation in (0, 2)".into()));
    }
    let red = Reduced::new(rel);
    let c = rel.objective_vector();
    let b = red.y_adjoint(&c);
    let c0 = dot(&c, &red.y0);
    let chol = Cholesky::new(red.normal_matrix())
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?;

    let alpha = opts.relaxation;
    let check_every = opts.check_every.max(1);
    let mut rho = opts.rho;
    let mut z = red.z_uniform.clone();
    let mut x = red.g_of(&z);
    let mut u = DMatrix::zeros(red.dim, red.dim);
    let mut w = red.y_of(&z);
    let mut v = vec![0.0; w.len()];

    let mut best = (f64::INFINITY, z.clone());
    let (mut r_p, mut r_d) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let xu = &x - &u;
        let wv: Vec<f64> = w.iter().zip(&v).zip(&red.y0).map(|((a, b), c)| a - b - c).collect();
        let rhs = &b / rho + red.g_adjoint(&xu) + red.y_adjoint(&wv);
        z = chol.solve(&rhs);

        let gz = red.g_of(&z);
        let yz = red.y_of(&z);
        let gh = &gz * alpha + &x * (1.0 - alpha);
        let yh: Vec<f64> = yz.iter().zip(&w).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();

        let x_old = std::mem::replace(&mut x, project_psd(&(&gh + &u)));
        u += &gh - &x;
        let w_old = std::mem::take(&mut w);
        w = yh.iter().zip(&v).map(|(a, b)| (a + b).max(0.0)).collect();
        for ((vi, a), wi) in v.iter_mut().zip(&yh).zip(&w) {
            *vi += a - wi;
        }

        if iter % check_every == 0 || iter == opts.max_iter {
            let dg = (&gz - &x).norm_squared();
            let dy: f64 = yz.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum();
            r_p = (dg + dy).sqrt();
            let dw: Vec<f64> = w.iter().zip(&w_old).map(|(a, b)| a - b).collect();
            r_d = rho * (red.g_adjoint(&(&x - &x_old)) + red.y_adjoint(&dw)).norm();
            if !r_p.is_finite() || !r_d.is_finite() {
                return Err(Error::Numerical(format!("solver diverged at iteration {iter}")));
            }
            if r_p.max(r_d) < best.0 {
                best = (r_p.max(r_d), z.clone());
            }
            if r_p <= opts.tol && r_d <= opts.tol {
                converged = true;
            }
            if let Some(out) = log.as_deref_mut() {
                if iter % opts.log_every.max(1) == 0 || converged {
                    let line = SdpDiagnostic {
                        iter,
                        primal_res: r_p,
                        psd_min_eig: min_eig(&gz),
                        objective: dot(&c, &yz),
                    };
                    writeln!(out, "{}", serde_json::to_string(&line)?)?;
                }
            }
            if converged {
                break;
            }
            if iter % (10 * check_every) == 0 {
                let scale = if r_p > 10.0 * r_d {
                    2.0
                } else if r_d > 10.0 * r_p {
                    0.5
                } else {
                    1.0
                };
                if scale != 1.0 {
                    rho *= scale;
                    u /= scale;
                    v.iter_mut().for_each(|x| *x /= scale);
                }
            }
        }
    }

    let z_raw = if converged { z } else { best.1 };
    let y_raw = red.y_of(&z_raw);
    let y_uni = red.y_of(&red.z_uniform);
    let min_moment = y_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let theta = y_raw
        .iter()
        .zip(&y_uni)
        .filter(|(a, _)| **a < 0.0)
        .map(|(a, b)| -a / (b - a))
        .fold(0.0, f64::max)
        .min(1.0);
    let z_fin = &z_raw * (1.0 - theta) + &red.z_uniform * theta;
    let y_fin: Vec<f64> = red.y_of(&z_fin).into_iter().map(|a| a.max(0.0)).collect();
    let objective = dot(&c, &y_fin);
    let psd_min_eig = min_eig(&red.g_of(&z_fin));

    let lam = project_psd(&(&u * -rho));
    let nu: Vec<f64> = v.iter().map(|a| (-rho * a).max(0.0)).collect();
    let stationarity = -(&b + red.g_adjoint(&lam) + red.y_adjoint(&nu));
    let upper_bound = (c0 + lam[(0, 0)] + dot(&nu, &red.y0) + stationarity.abs().sum()).min(1.0);

    let moments = Moments {
        index: rel.moment_index().clone(),
        y: y_fin,
    };
    Ok(SdpSolution {
        ensemble: LocalPsdEnsemble::from_moments(moments)?,
        objective,
        upper_bound,
        converged,
        iterations,
        primal_res: r_p,
        dual_res: r_d,
        psd_min_eig,
        min_moment,
        repair_theta: theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{brute_force_opt, gen_random_kxor, CspInstance};
    use crate::linalg::sym_min_eigenvalue;
    use crate::sos::build_relaxation;

    #[test]
    fn inclusion_exclusion_reproduces_a_distribution() {
        let (inst, _) = gen_random_kxor(4, 2, 3, 3, 5, false).unwrap();
        let rel = build_relaxation(&inst, 4).unwrap();
        let red = Reduced::new(&rel);
        let dist: Vec<(Vec<usize>, f64)> = (0..81)
            .map(|c| ((0..4).map(|i| (c / 3usize.pow(i)) % 3).collect(), (1 + c % 7) as f64))
            .collect();
        let total: f64 = dist.iter().map(|d| d.1).sum();
        let dist: Vec<_> = dist.into_iter().map(|(x, p)| (x, p / total)).collect();
        let m = Moments::from_distribution(4, 3, 4, &dist).unwrap();
        let mut z = DVector::zeros(red.nz);
        let mut k = 0;
        for &u in m.index.sets().iter().filter(|u| !u.is_empty()) {
            let off = m.index.offset(u).unwrap();
            let mut vals = vec![0; 4];
            for code in 0..3usize.pow(u.len() as u32) {
                write_code(u, code, 3, &mut vals);
                if u.iter().all(|v| vals[v] != 0) {
                    z[k] = m.y[off + code];
                    k += 1;
                }
            }
        }
        assert_eq!(k, red.nz);
        for (a, b) in red.y_of(&z).iter().zip(&m.y) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(sym_min_eigenvalue(&red.g_of(&z)) > -1e-12);
    }

    #[test]
    fn equality_constraint_reaches_one() {
        let inst = CspInstance::new(2, 2, 2, vec![(Face::new(&[0, 1]).unwrap(), vec![vec![0, 0], vec![1, 1]], 1.0)]).unwrap();
        let sol = solve_sdp(&build_relaxation(&inst, 4).unwrap(), 1e-6, 50_000).unwrap();
        assert!(sol.converged);
        assert!(sol.objective >= 1.0 - 1e-5 && sol.objective <= 1.0 + 1e-5);
    }

    #[test]
    fn random_xor_bounds_the_optimum() {
        let (inst, _) = gen_random_kxor(6, 3, 20, 2, 7, false).unwrap();
        let (opt, _) = brute_force_opt(&inst).unwrap();
        let rel = build_relaxation(&inst, 6).unwrap();
        let sol = solve_sdp(&rel, 1e-6, 50_000).unwrap();
        eprintln!(
            "opt {opt} sdp {} ub {} iters {} conv {} theta {} psd {} minmom {}",
            sol.objective, sol.upper_bound, sol.iterations, sol.converged, sol.repair_theta, sol.psd_min_eig, sol.min_moment
        );
        assert!(sol.objective >= opt - 1e-5);
        assert!(sol.objective <= 1.0 + 1e-5);
        assert!(sol.upper_bound >= sol.objective - 1e-6);
        let m = rel.moment_matrix(sol.ensemble.moments()).unwrap();
        assert!(sym_min_eigenvalue(&m) >= -1e-6);
        assert!(rel.violations(&m).unwrap().max() < 1e-9);
    }

    #[test]
    fn planted_instance_is_satisfied() {
        let (inst, _) = gen_random_kxor(6, 3, 15, 2, 11, true).unwrap();
        let sol = solve_sdp(&build_relaxation(&inst, 6).unwrap(), 1e-6, 50_000).unwrap();
        assert!(sol.objective >= 1.0 - 1e-5, "{}", sol.objective);
    }

    #[test]
    fn unique_solution_concentrates_marginals() {
        let planted = [1, 0, 1, 1];
        let scopes = [[0, 1], [1, 2], [2, 3], [0, 3]];
        let cons = scopes
            .iter()
            .map(|&[a, b]| (Face::new(&[a, b]).unwrap(), vec![vec![planted[a], planted[b]]], 1.0))
            .collect();
        let inst = CspInstance::new(4, 2, 2, cons).unwrap();
        let sol = solve_sdp(&build_relaxation(&inst, 4).unwrap(), 1e-6, 50_000).unwrap();
        for (v, &a) in planted.iter().enumerate() {
            let d = sol.ensemble.marginal(Face::singleton(v)).unwrap();
            assert!(d.probs[a] >= 1.0 - 1e-3);
        }
    }

    #[test]
    fn deterministic_and_logged() {
        let (inst, _) = gen_random_kxor(5, 2, 8, 3, 2, false).unwrap();
        let rel = build_relaxation(&inst, 4).unwrap();
        let opts = SdpOptions {
            log_every: 20,
            ..SdpOptions::default()
        };
        let mut log = Vec::new();
        let a = solve_sdp_with(&rel, &opts, Some(&mut log)).unwrap();
        let b = solve_sdp_with(&rel, &opts, None).unwrap();
        assert_eq!(a.ensemble.moments().y, b.ensemble.moments().y);
        assert_eq!(a.iterations, b.iterations);
        let text = String::from_utf8(log).unwrap();
        assert!(!text.is_empty());
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["iter", "primal_res", "psd_min_eig", "objective"] {
                assert!(v.get(key).is_some());
            }
        }
        assert!(solve_sdp(&rel, 0.0, 10).is_err());
    }

    #[test]
    fn iteration_cap_returns_flagged_iterate() {
        let (inst, _) = gen_random_kxor(6, 3, 15, 2, 4, false).unwrap();
        let sol = solve_sdp(&build_relaxation(&inst, 6).unwrap(), 1e-6, 20).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 20);
        assert!(sol.ensemble.marginal(Face::new(&[0, 1, 2]).unwrap()).is_ok());
    }

    #[test]
    fn conditional_covariances_stay_psd() {
        let (inst, _) = gen_random_kxor(6, 2, 12, 2, 9, false).unwrap();
        let sol = solve_sdp(&build_relaxation(&inst, 4).unwrap(), 1e-6, 50_000).unwrap();
        let e = &sol.ensemble;
        assert!(sym_min_eigenvalue(&e.covariance_matrix().unwrap()) >= -1e-6);
        for v in 0..6 {
            for b in 0..2 {
                if let Ok(c) = e.condition(Face::singleton(v), &[b]) {
                    assert!(sym_min_eigenvalue(&c.covariance_matrix().unwrap()) >= -1e-6);
                }
            }
        }
        let pair = Face::new(&[1, 4]).unwrap();
        let c = e.condition(pair, &[0, 1]).or_else(|_| e.condition(pair, &[1, 1])).unwrap();
        assert_eq!(c.locality(), 2);
        assert!(sym_min_eigenvalue(&c.covariance_matrix().unwrap()) >= -1e-6);
    }
}
