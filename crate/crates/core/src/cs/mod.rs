//! Compressive-sampling reconstructions over the unitary DFT basis.
//!
//! All solvers take the unknown to be the spectrum `E` of the field and the
//! measurements to be spatial samples, `A = Phi idft2`.

mod compress;
mod equality;
mod tv;
mod twist;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ComplexField;

pub use compress::{
    best_k_error, compressibility_diagnostics, sorted_magnitudes, BestKError, CompressibilityReport,
    BEST_K_FRACTIONS,
};
pub use equality::{
    bp_reconstruct, bp_solve, tv_equality_reconstruct, tv_equality_solve, EqualitySolverConfig,
    BP_MAX_SIDE,
};
pub use tv::{
    tv, tv_denoise, tv_denoise_with, tv_with, TvCoupling, TvDenoiseOptions, TvDenoiseResult, TvDual,
};
pub use twist::{twist_reconstruct, StepWeight, TwistConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub solver: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `|A E - y|` of the returned spectrum.
    pub constraint_residual: f64,
    /// `|x - Gamma(x)| / |x|` of the returned TwIST iterate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

impl SolverDiagnostics {
    /// Diagnostics for all-zero data, whose solution is the zero field.
    pub(crate) fn trivial(solver: &'static str) -> Self {
        Self {
            solver,
            iterations: 0,
            converged: true,
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            constraint_residual: 0.0,
            fixed_point_residual: None,
            lambda: None,
            objective_history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsOutput {
    pub field: ComplexField,
    pub diagnostics: SolverDiagnostics,
}

impl CsOutput {
    pub(crate) fn into_converged(self) -> Result<ComplexField> {
        if self.diagnostics.converged {
            return Ok(self.field);
        }
        Err(Error::NotConverged {
            solver: self.diagnostics.solver,
            iterations: self.diagnostics.iterations,
            primal_residual: self.diagnostics.primal_residual,
            dual_residual: self.diagnostics.dual_residual,
        })
    }
}
