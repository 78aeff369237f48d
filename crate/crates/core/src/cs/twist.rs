//! Two-step iterative shrinkage/thresholding with a TV regularizer on the
//! spectrum, run on the mirror-extended grid.

use serde::{Deserialize, Serialize};

use super::tv::{tv_raw, Chambolle, TvCoupling, TvDual};
use super::{CsOutput, SolverDiagnostics};
use crate::error::{Error, Result};
use crate::grid::{take_quadrant, ComplexField, C64};
use crate::sampling::{mirror_extend_samples, MeasurementOperator, OperatorMode, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoTag {
    Auto,
}

/// A two-step weight: a fixed value or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "StepWeightRepr", into = "StepWeightRepr")]
pub enum StepWeight {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepWeightRepr {
    Tag(AutoTag),
    Value(f64),
}

impl From<StepWeightRepr> for StepWeight {
    fn from(r: StepWeightRepr) -> Self {
        match r {
            StepWeightRepr::Tag(AutoTag::Auto) => StepWeight::Auto,
            StepWeightRepr::Value(v) => StepWeight::Value(v),
        }
    }
}

impl From<StepWeight> for StepWeightRepr {
    fn from(w: StepWeight) -> Self {
        match w {
            StepWeight::Auto => StepWeightRepr::Tag(AutoTag::Auto),
            StepWeight::Value(v) => StepWeightRepr::Value(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistConfig {
    /// Absolute regularization weight; overrides `lambda_factor`.
    pub lambda: Option<f64>,
    /// Weight relative to `max |A^H y|` when `lambda` is unset.
    pub lambda_factor: f64,
    pub max_iters: usize,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    pub alpha: StepWeight,
    pub beta: StepWeight,
    /// Assumed ratio of smallest to largest singular value for the auto weights.
    pub kappa: f64,
    pub monotone: bool,
    pub tv_inner_iters: usize,
    pub coupling: TvCoupling,
    /// Solve on the mirror-extended grid and return its first quadrant.
    pub mirror: bool,
}

impl Default for TwistConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            lambda_factor: 3e-4,
            max_iters: 300,
            tol: 1e-5,
            alpha: StepWeight::Auto,
            beta: StepWeight::Auto,
            kappa: 1e-3,
            monotone: true,
            tv_inner_iters: 10,
            coupling: TvCoupling::Joint,
            mirror: true,
        }
    }
}

impl TwistConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("lambda = {l} must be positive")));
            }
        }
        if !(self.lambda_factor > 0.0 && self.lambda_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_factor = {} must be positive",
                self.lambda_factor
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("tol = {} outside (0, 1)", self.tol)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidParameter(format!("kappa = {} outside (0, 1)", self.kappa)));
        }
        if self.tv_inner_iters == 0 {
            return Err(Error::InvalidParameter("tv_inner_iters must be at least 1".into()));
        }
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta)] {
            if let StepWeight::Value(v) = w {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// `(alpha, beta)` after resolving `"auto"` from `kappa`.
    pub fn step_weights(&self) -> (f64, f64) {
        let k = self.kappa;
        let rho = (1.0 - k) / (1.0 + k);
        let auto_alpha = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
        let alpha = match self.alpha {
            StepWeight::Auto => auto_alpha,
            StepWeight::Value(v) => v,
        };
        let beta = match self.beta {
            StepWeight::Auto => 2.0 * alpha / (1.0 + k),
            StepWeight::Value(v) => v,
        };
        (alpha, beta)
    }
}

/// Objective and residual bookkeeping for one spectrum.
struct Problem<'a> {
    op: &'a MeasurementOperator,
    y: &'a [C64],
    lambda: f64,
    coupling: TvCoupling,
    scratch: Vec<C64>,
}

impl Problem<'_> {
    /// Returns `(objective, y - A x)`.
    fn evaluate(&mut self, x: &[C64]) -> (f64, Vec<C64>) {
        let (rows, cols) = self.op.dims();
        self.scratch.copy_from_slice(x);
        self.op.fft().inverse_in_place(&mut self.scratch);
        let resid: Vec<C64> = self
            .op
            .flat_indices()
            .iter()
            .zip(self.y)
            .map(|(&i, &v)| v - self.scratch[i])
            .collect();
        let fid: f64 = resid.iter().map(|z| z.norm_sqr()).sum();
        let obj = 0.5 * fid + self.lambda * tv_raw(x, rows, cols, self.coupling);
        (obj, resid)
    }
}

/// Extra denoising rounds tried before a monotone step is abandoned.
const REFINE_ROUNDS: usize = 4;
/// Consecutive abandoned steps after which the iteration stops.
const MAX_STALLS: usize = 10;
/// Convergence also needs `|x - Gamma(x)| / |x|` below this multiple of `tol`.
const FIXED_POINT_FACTOR: f64 = 10.0;

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Reconstruction by TwIST on `1/2 |y - A E|^2 + lambda TV(E)`, `A = Phi idft2`.
///
/// The proximal step is the TV denoiser with a dual warm-started across
/// iterations. In monotone mode a two-step update that raises the objective is
/// replaced by the plain shrinkage step, and if that also fails the iterate is
/// kept, so the recorded objectives never increase. Returns the best iterate
/// whether or not the tolerance was reached.
pub fn twist_reconstruct(samples: &SampleSet, cfg: &TwistConfig) -> Result<CsOutput> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let work = if cfg.mirror {
        mirror_extend_samples(samples)
    } else {
        samples.clone()
    };
    let (op, y) = MeasurementOperator::from_samples(&work, OperatorMode::PartialFourier)?;
    let (rows, cols) = op.dims();
    let n = rows * cols;

    let mut x = op.adjoint_raw(&y);
    let scale = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        let (r, c) = samples.dims();
        return Ok(CsOutput {
            field: ComplexField::zeros(r, c),
            diagnostics: SolverDiagnostics::trivial("twist"),
        });
    }
    let lambda = cfg.lambda.unwrap_or(cfg.lambda_factor * scale);
    let (alpha, beta) = cfg.step_weights();
    let mut prob = Problem {
        op: &op,
        y: &y,
        lambda,
        coupling: cfg.coupling,
        scratch: vec![C64::new(0.0, 0.0); n],
    };
    let mut denoiser = Chambolle::new(rows, cols);
    let mut dual = TvDual::zeros(rows, cols);

    let (mut obj, mut resid) = prob.evaluate(&x);
    let mut x_prev = x.clone();
    let mut best = x.clone();
    let mut best_obj = obj;
    let mut history = vec![obj];
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut gamma = vec![C64::new(0.0, 0.0); n];
    let mut cand = vec![C64::new(0.0, 0.0); n];
    let mut converged = false;
    let mut stalls = 0;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    for t in 0..cfg.max_iters {
        iterations = t + 1;
        let back = op.adjoint_raw(&resid);
        for i in 0..n {
            v[i] = x[i] + back[i];
        }
        denoiser.solve(&v, lambda, cfg.tv_inner_iters, cfg.coupling, &mut dual, &mut gamma);
        let fixed_point = {
            let d: f64 = x.iter().zip(&gamma).map(|(a, b)| (a - b).norm_sqr()).sum();
            d.sqrt() / norm(&x).max(f64::MIN_POSITIVE)
        };
        if last_change < cfg.tol && fixed_point < FIXED_POINT_FACTOR * cfg.tol {
            converged = true;
            break;
        }
        if t == 0 {
            cand.copy_from_slice(&gamma);
        } else {
            for i in 0..n {
                cand[i] = x_prev[i] * (1.0 - alpha) + x[i] * (alpha - beta) + gamma[i] * beta;
            }
        }
        let (mut cand_obj, mut cand_resid) = prob.evaluate(&cand);
        if cfg.monotone && cand_obj > obj {
            // plain shrinkage step, with the inexact prox refined if needed
            let mut round = 0;
            loop {
                if t > 0 || round > 0 {
                    cand.copy_from_slice(&gamma);
                    (cand_obj, cand_resid) = prob.evaluate(&cand);
                }
                if cand_obj <= obj || round == REFINE_ROUNDS {
                    break;
                }
                round += 1;
                denoiser.solve(&v, lambda, cfg.tv_inner_iters * 4, cfg.coupling, &mut dual, &mut gamma);
            }
        }
        if cfg.monotone && cand_obj > obj {
            history.push(obj);
            x_prev.copy_from_slice(&x);
            stalls += 1;
            if stalls >= MAX_STALLS {
                converged = true;
                break;
            }
            continue;
        }
        stalls = 0;
        let change = (obj - cand_obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut cand);
        obj = cand_obj;
        resid = cand_resid;
        history.push(obj);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        if t > 0 {
            last_change = change;
        }
    }

    let fixed_point = {
        let (_, r) = prob.evaluate(&best);
        let back = op.adjoint_raw(&r);
        for i in 0..n {
            v[i] = best[i] + back[i];
        }
        denoiser.solve(&v, lambda, cfg.tv_inner_iters, cfg.coupling, &mut dual, &mut gamma);
        let d: f64 = best.iter().zip(&gamma).map(|(a, b)| (a - b).norm_sqr()).sum();
        d.sqrt() / norm(&best).max(f64::MIN_POSITIVE)
    };
    let converged = converged && fixed_point < FIXED_POINT_FACTOR * cfg.tol;
    let constraint_residual = {
        let mut s = best.clone();
        op.fft().inverse_in_place(&mut s);
        op.flat_indices()
            .iter()
            .zip(&y)
            .map(|(&i, &v)| (s[i] - v).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    op.fft().inverse_in_place(&mut best);
    let full = ComplexField::from_raw(rows, cols, best);
    let field = if cfg.mirror { take_quadrant(&full)? } else { full };
    Ok(CsOutput {
        field,
        diagnostics: SolverDiagnostics {
            solver: "twist",
            iterations,
            converged,
            objective: best_obj,
            primal_residual: constraint_residual / norm(&y),
            dual_residual: f64::NAN,
            constraint_residual,
            fixed_point_residual: Some(fixed_point),
            lambda: Some(lambda),
            objective_history: history,
        },
    })
}
