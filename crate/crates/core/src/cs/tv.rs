//! Isotropic total variation with periodic boundary and its proximal map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, C64};

/// How the real and imaginary channels share the gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvCoupling {
    /// `sqrt(|dr z|^2 + |dc z|^2)` with complex magnitudes.
    #[default]
    Joint,
    /// Separate isotropic TV of the real and imaginary parts, summed.
    PerChannel,
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Forward differences with wraparound: `gr = z[r+1, c] - z`, `gc = z[r, c+1] - z`.
pub(crate) fn grad(u: &[C64], rows: usize, cols: usize, gr: &mut [C64], gc: &mut [C64]) {
    for r in 0..rows {
        let down = if r + 1 == rows { 0 } else { (r + 1) * cols };
        let base = r * cols;
        for c in 0..cols {
            let i = base + c;
            let right = if c + 1 == cols { base } else { i + 1 };
            gr[i] = u[down + c] - u[i];
            gc[i] = u[right] - u[i];
        }
    }
}

/// Negative adjoint of [`grad`].
pub(crate) fn div(pr: &[C64], pc: &[C64], rows: usize, cols: usize, out: &mut [C64]) {
    for r in 0..rows {
        let up = if r == 0 { (rows - 1) * cols } else { (r - 1) * cols };
        let base = r * cols;
        for c in 0..cols {
            let i = base + c;
            let left = if c == 0 { base + cols - 1 } else { i - 1 };
            out[i] = pr[i] - pr[up + c] + pc[i] - pc[left];
        }
    }
}

#[inline]
fn magnitude(a: C64, b: C64, coupling: TvCoupling) -> f64 {
    match coupling {
        TvCoupling::Joint => (a.norm_sqr() + b.norm_sqr()).sqrt(),
        TvCoupling::PerChannel => a.re.hypot(b.re) + a.im.hypot(b.im),
    }
}

pub(crate) fn tv_raw(u: &[C64], rows: usize, cols: usize, coupling: TvCoupling) -> f64 {
    let mut acc = 0.0;
    for r in 0..rows {
        let down = if r + 1 == rows { 0 } else { (r + 1) * cols };
        let base = r * cols;
        for c in 0..cols {
            let i = base + c;
            let right = if c + 1 == cols { base } else { i + 1 };
            acc += magnitude(u[down + c] - u[i], u[right] - u[i], coupling);
        }
    }
    acc
}

/// Isotropic TV with periodic forward differences and joint complex coupling.
pub fn tv(field: &ComplexField) -> f64 {
    tv_with(field, TvCoupling::Joint)
}

pub fn tv_with(field: &ComplexField, coupling: TvCoupling) -> f64 {
    tv_raw(field.as_slice(), field.rows(), field.cols(), coupling)
}

/// Dual field of the denoiser; reusable as a warm start.
#[derive(Debug, Clone)]
pub struct TvDual {
    rows: usize,
    cols: usize,
    pr: Vec<C64>,
    pc: Vec<C64>,
}

impl TvDual {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            pr: vec![ZERO; rows * cols],
            pc: vec![ZERO; rows * cols],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvDenoiseOptions {
    pub iters: usize,
    #[serde(default)]
    pub coupling: TvCoupling,
    /// Dual step; the projection converges for steps up to about 1/4.
    pub step: f64,
    /// Stop once the duality gap falls below `gap_tol * objective`.
    #[serde(default)]
    pub gap_tol: Option<f64>,
}

impl Default for TvDenoiseOptions {
    fn default() -> Self {
        Self {
            iters: 100,
            coupling: TvCoupling::Joint,
            step: 0.248,
            gap_tol: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TvDenoiseResult {
    pub field: ComplexField,
    /// Objective of the returned candidate after 0, 1, ... iterations.
    pub objective_history: Vec<f64>,
    /// Primal objective of the returned field minus the dual bound.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Working buffers of the dual projection method.
pub(crate) struct Chambolle {
    rows: usize,
    cols: usize,
    g: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Chambolle {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            g: vec![ZERO; rows * cols],
            a: vec![ZERO; rows * cols],
            b: vec![ZERO; rows * cols],
        }
    }

    /// One projection step on `p` for `min 1/2 |u - f|^2 + weight TV(u)`.
    pub(crate) fn step(&mut self, f: &[C64], weight: f64, tau: f64, coupling: TvCoupling, p: &mut TvDual) {
        let (rows, cols) = (self.rows, self.cols);
        div(&p.pr, &p.pc, rows, cols, &mut self.g);
        let inv = 1.0 / weight;
        for (g, &fv) in self.g.iter_mut().zip(f) {
            *g -= fv * inv;
        }
        grad(&self.g, rows, cols, &mut self.a, &mut self.b);
        for i in 0..rows * cols {
            let (a, b) = (self.a[i], self.b[i]);
            match coupling {
                TvCoupling::Joint => {
                    let d = 1.0 + tau * (a.norm_sqr() + b.norm_sqr()).sqrt();
                    p.pr[i] = (p.pr[i] + a * tau) / d;
                    p.pc[i] = (p.pc[i] + b * tau) / d;
                }
                TvCoupling::PerChannel => {
                    let dr = 1.0 + tau * a.re.hypot(b.re);
                    let di = 1.0 + tau * a.im.hypot(b.im);
                    let (pr, pc) = (p.pr[i], p.pc[i]);
                    p.pr[i] = C64::new((pr.re + tau * a.re) / dr, (pr.im + tau * a.im) / di);
                    p.pc[i] = C64::new((pc.re + tau * b.re) / dr, (pc.im + tau * b.im) / di);
                }
            }
        }
    }

    /// Primal point `u = f - weight * div p`.
    pub(crate) fn primal(&mut self, f: &[C64], weight: f64, p: &TvDual, out: &mut [C64]) {
        div(&p.pr, &p.pc, self.rows, self.cols, &mut self.g);
        for ((o, &fv), &g) in out.iter_mut().zip(f).zip(&self.g) {
            *o = fv - g * weight;
        }
    }

    /// Runs `iters` steps and writes the primal point.
    pub(crate) fn solve(
        &mut self,
        f: &[C64],
        weight: f64,
        iters: usize,
        coupling: TvCoupling,
        p: &mut TvDual,
        out: &mut [C64],
    ) {
        for _ in 0..iters {
            self.step(f, weight, 0.248, coupling, p);
        }
        self.primal(f, weight, p, out);
    }
}

fn denoise_objective(u: &[C64], f: &[C64], weight: f64, rows: usize, cols: usize, coupling: TvCoupling) -> f64 {
    let fid: f64 = u.iter().zip(f).map(|(a, b)| (a - b).norm_sqr()).sum();
    0.5 * fid + weight * tv_raw(u, rows, cols, coupling)
}

/// Approximate minimizer of `1/2 |u - field|^2 + weight * tv(u)`.
pub fn tv_denoise(field: &ComplexField, weight: f64, iters: usize) -> Result<ComplexField> {
    let opts = TvDenoiseOptions {
        iters,
        ..TvDenoiseOptions::default()
    };
    tv_denoise_with(field, weight, &opts, None).map(|r| r.field)
}

/// Dual projection denoiser returning the best primal iterate seen.
///
/// The dual bound `1/2 |f|^2 - 1/2 |f - weight div p|^2` of the final dual
/// point gives the reported gap.
pub fn tv_denoise_with(
    field: &ComplexField,
    weight: f64,
    opts: &TvDenoiseOptions,
    warm: Option<&mut TvDual>,
) -> Result<TvDenoiseResult> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidParameter(format!("TV weight {weight} must be positive")));
    }
    if !(opts.step > 0.0 && opts.step <= 0.25) {
        return Err(Error::InvalidParameter(format!("TV dual step {} outside (0, 1/4]", opts.step)));
    }
    let (rows, cols) = field.dims();
    let f = field.as_slice();
    let mut own = None;
    let p = match warm {
        Some(p) => {
            if p.dims() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{rows}x{cols} dual"),
                    actual: format!("{}x{}", p.rows, p.cols),
                });
            }
            p
        }
        None => own.insert(TvDual::zeros(rows, cols)),
    };
    let mut solver = Chambolle::new(rows, cols);
    let mut u = vec![ZERO; rows * cols];
    solver.primal(f, weight, p, &mut u);
    let mut best = u.clone();
    let mut best_obj = denoise_objective(&u, f, weight, rows, cols, opts.coupling);
    let mut history = vec![best_obj];
    let norm_f: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let gap_of = |u: &[C64], best_obj: f64| -> f64 {
        let resid: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        best_obj - 0.5 * (norm_f - resid)
    };
    let mut iterations = 0;
    for _ in 0..opts.iters {
        solver.step(f, weight, opts.step, opts.coupling, p);
        solver.primal(f, weight, p, &mut u);
        iterations += 1;
        let obj = denoise_objective(&u, f, weight, rows, cols, opts.coupling);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&u);
        }
        history.push(best_obj);
        if let Some(tol) = opts.gap_tol {
            if gap_of(&u, best_obj) <= tol * best_obj.max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    // `u` holds the primal point of the final dual iterate: |u|^2 = |f - weight div p|^2.
    let duality_gap = gap_of(&u, best_obj).max(0.0);
    Ok(TvDenoiseResult {
        field: ComplexField::from_raw(rows, cols, best),
        objective_history: history,
        duality_gap,
        iterations,
    })
}
