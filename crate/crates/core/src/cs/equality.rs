//! Equality-constrained recoveries in the Fourier domain: `min |E|_1` and
//! `min TV(E)` subject to `Phi idft2(E) = y`.

use serde::{Deserialize, Serialize};

use super::tv::{div, grad, tv_raw, TvCoupling};
use super::{CsOutput, SolverDiagnostics};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, C64};
use crate::sampling::{MeasurementOperator, OperatorMode, SampleSet};

/// Largest grid accepted by basis pursuit unless `allow_large` is set.
pub const BP_MAX_SIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualitySolverConfig {
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Splitting parameter, relative to the sample RMS.
    pub penalty: f64,
    pub coupling: TvCoupling,
    /// Lifts the basis-pursuit grid size guard.
    pub allow_large: bool,
}

impl Default for EqualitySolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            primal_tol: 1e-5,
            dual_tol: 1e-5,
            penalty: 1.0,
            coupling: TvCoupling::Joint,
            allow_large: false,
        }
    }
}

impl EqualitySolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("penalty", self.penalty),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn setup(samples: &SampleSet) -> Result<(MeasurementOperator, Vec<C64>, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (op, y) = MeasurementOperator::from_samples(samples, OperatorMode::PartialFourier)?;
    let scale = norm(&y) / (y.len() as f64).sqrt();
    Ok((op, y, scale))
}

fn constraint_residual(op: &MeasurementOperator, e: &[C64], y: &[C64]) -> f64 {
    diff_norm(&op.forward_raw(e), y)
}

fn finish(op: &MeasurementOperator, mut e: Vec<C64>, diagnostics: SolverDiagnostics) -> CsOutput {
    let (rows, cols) = op.dims();
    op.fft().inverse_in_place(&mut e);
    CsOutput {
        field: ComplexField::from_raw(rows, cols, e),
        diagnostics,
    }
}

fn zero_output(samples: &SampleSet, solver: &'static str) -> CsOutput {
    let (rows, cols) = samples.dims();
    CsOutput {
        field: ComplexField::zeros(rows, cols),
        diagnostics: SolverDiagnostics::trivial(solver),
    }
}

/// Basis pursuit by ADMM on the split `E = Z`, with `E` kept on the
/// constraint set and complex soft-thresholding on `Z`.
///
/// The penalty is rebalanced whenever one residual exceeds the other tenfold.
/// Residuals: primal `|E - Z| / max(|E|, |Z|)`, dual `rho |Z - Z_prev| / |rho U|`.
pub fn bp_solve(samples: &SampleSet, cfg: &EqualitySolverConfig) -> Result<CsOutput> {
    cfg.validate()?;
    let (rows, cols) = samples.dims();
    if !cfg.allow_large && (rows > BP_MAX_SIDE || cols > BP_MAX_SIDE) {
        return Err(Error::InvalidParameter(format!(
            "basis pursuit is limited to {BP_MAX_SIDE}x{BP_MAX_SIDE} grids, got {rows}x{cols}"
        )));
    }
    let (op, y, scale) = setup(samples)?;
    if scale == 0.0 {
        return Ok(zero_output(samples, "bp"));
    }
    let n = rows * cols;
    let mut rho = cfg.penalty / scale;
    let mut e = op.adjoint_raw(&y);
    let mut z = e.clone();
    let mut u = vec![C64::new(0.0, 0.0); n];
    let mut z_prev = z.clone();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        iterations = k + 1;
        for i in 0..n {
            e[i] = z[i] - u[i];
        }
        op.project_consistent(&mut e, &y);
        z_prev.copy_from_slice(&z);
        let thresh = 1.0 / rho;
        for i in 0..n {
            let v = e[i] + u[i];
            let m = v.norm();
            z[i] = if m > thresh { v * ((m - thresh) / m) } else { C64::new(0.0, 0.0) };
            u[i] += e[i] - z[i];
        }
        let r = diff_norm(&e, &z);
        let s = rho * diff_norm(&z, &z_prev);
        primal = r / norm(&e).max(norm(&z)).max(f64::MIN_POSITIVE);
        dual = s / (rho * norm(&u)).max(f64::MIN_POSITIVE);
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            converged = true;
            break;
        }
        if r > 10.0 * s {
            rho *= 2.0;
            u.iter_mut().for_each(|v| *v *= 0.5);
        } else if s > 10.0 * r {
            rho *= 0.5;
            u.iter_mut().for_each(|v| *v *= 2.0);
        }
    }
    let objective = e.iter().map(|v| v.norm()).sum();
    let diagnostics = SolverDiagnostics {
        solver: "bp",
        iterations,
        converged,
        objective,
        primal_residual: primal,
        dual_residual: dual,
        constraint_residual: constraint_residual(&op, &e, &y),
        fixed_point_residual: None,
        lambda: None,
        objective_history: Vec::new(),
    };
    Ok(finish(&op, e, diagnostics))
}

/// Basis pursuit; fails with [`Error::NotConverged`] when the tolerances are
/// not met within `max_iters`.
pub fn bp_reconstruct(samples: &SampleSet, cfg: &EqualitySolverConfig) -> Result<ComplexField> {
    bp_solve(samples, cfg)?.into_converged()
}

/// TV minimization over spectra by the primal-dual hybrid gradient method.
///
/// Each primal step is an exact projection onto the constraint set, so every
/// iterate is feasible; the iterate with the lowest TV is returned. Steps are
/// `tau = penalty * s / sqrt(8)`, `sigma = 1 / (penalty * s * sqrt(8))` with `s`
/// the sample RMS, which makes the result equivariant to scaling the data.
/// Residuals are the relative iterate changes of the primal and dual variables.
pub fn tv_equality_solve(samples: &SampleSet, cfg: &EqualitySolverConfig) -> Result<CsOutput> {
    cfg.validate()?;
    let (op, y, scale) = setup(samples)?;
    if scale == 0.0 {
        return Ok(zero_output(samples, "tv_equality"));
    }
    let (rows, cols) = op.dims();
    let n = rows * cols;
    let lip = 8f64.sqrt();
    let tau = cfg.penalty * scale / lip;
    let sigma = 1.0 / (cfg.penalty * scale * lip);
    let zero = C64::new(0.0, 0.0);

    let mut e = op.adjoint_raw(&y);
    let mut e_bar = e.clone();
    let mut e_prev = e.clone();
    let mut pr = vec![zero; n];
    let mut pc = vec![zero; n];
    let mut gr = vec![zero; n];
    let mut gc = vec![zero; n];
    let mut d = vec![zero; n];
    let mut best = e.clone();
    let mut best_tv = tv_raw(&e, rows, cols, cfg.coupling);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        iterations = k + 1;
        grad(&e_bar, rows, cols, &mut gr, &mut gc);
        let mut dual_change = 0.0;
        let mut dual_norm = 0.0;
        for i in 0..n {
            let (a, b) = (pr[i] + gr[i] * sigma, pc[i] + gc[i] * sigma);
            let (na, nb) = match cfg.coupling {
                TvCoupling::Joint => {
                    let m = (a.norm_sqr() + b.norm_sqr()).sqrt().max(1.0);
                    (a / m, b / m)
                }
                TvCoupling::PerChannel => {
                    let mr = a.re.hypot(b.re).max(1.0);
                    let mi = a.im.hypot(b.im).max(1.0);
                    (C64::new(a.re / mr, a.im / mi), C64::new(b.re / mr, b.im / mi))
                }
            };
            dual_change += (na - pr[i]).norm_sqr() + (nb - pc[i]).norm_sqr();
            dual_norm += na.norm_sqr() + nb.norm_sqr();
            pr[i] = na;
            pc[i] = nb;
        }
        div(&pr, &pc, rows, cols, &mut d);
        e_prev.copy_from_slice(&e);
        for i in 0..n {
            e[i] += d[i] * tau;
        }
        op.project_consistent(&mut e, &y);
        for i in 0..n {
            e_bar[i] = e[i] * 2.0 - e_prev[i];
        }
        let t = tv_raw(&e, rows, cols, cfg.coupling);
        if t < best_tv {
            best_tv = t;
            best.copy_from_slice(&e);
        }
        primal = diff_norm(&e, &e_prev) / norm(&e).max(f64::MIN_POSITIVE);
        dual = (dual_change / dual_norm.max(1.0)).sqrt();
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            converged = true;
            break;
        }
    }
    let diagnostics = SolverDiagnostics {
        solver: "tv_equality",
        iterations,
        converged,
        objective: best_tv,
        primal_residual: primal,
        dual_residual: dual,
        constraint_residual: constraint_residual(&op, &best, &y),
        fixed_point_residual: None,
        lambda: None,
        objective_history: Vec::new(),
    };
    Ok(finish(&op, best, diagnostics))
}

/// TV-minimal spectrum consistent with the samples; fails with
/// [`Error::NotConverged`] when the tolerances are not met.
pub fn tv_equality_reconstruct(samples: &SampleSet, cfg: &EqualitySolverConfig) -> Result<ComplexField> {
    tv_equality_solve(samples, cfg)?.into_converged()
}
