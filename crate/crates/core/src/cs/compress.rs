//! Decay of sorted spectral magnitudes and best-K approximation errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dft2, ComplexField};
use crate::metrics::least_squares_slope;

/// Coefficient fractions reported by [`compressibility_diagnostics`].
pub const BEST_K_FRACTIONS: [f64; 4] = [0.01, 0.05, 0.10, 0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestKError {
    pub fraction: f64,
    pub k: usize,
    /// `|e - e_K|` with `e_K` keeping the K largest spectral coefficients.
    pub error: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressibilityReport {
    /// Decay exponent `q` of `|a_k| <= C1 k^-q` (sorted magnitudes, 1-based k).
    pub q: f64,
    pub c1: f64,
    pub best_k: Vec<BestKError>,
}

/// Spectral magnitudes in decreasing order.
pub fn sorted_magnitudes(field: &ComplexField) -> Vec<f64> {
    let mut m: Vec<f64> = dft2(field).as_slice().iter().map(|z| z.norm()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    m
}

/// Best-K errors from sorted magnitudes; by Parseval the spatial error equals
/// the energy of the dropped coefficients.
fn tail_errors(sorted: &[f64], ks: &[usize]) -> Vec<f64> {
    let mut tail = vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        tail[i] = tail[i + 1] + sorted[i] * sorted[i];
    }
    ks.iter().map(|&k| tail[k.min(sorted.len())].sqrt()).collect()
}

pub fn best_k_error(field: &ComplexField, k: usize) -> f64 {
    tail_errors(&sorted_magnitudes(field), &[k])[0]
}

pub fn compressibility_diagnostics(field: &ComplexField) -> Result<CompressibilityReport> {
    let sorted = sorted_magnitudes(field);
    let n = sorted.len();
    let pts: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| (((i + 1) as f64).ln(), m.ln()))
        .collect();
    let (q, c1) = match least_squares_slope(&pts) {
        Some(slope) => {
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            (-slope, (my - slope * mx).exp())
        }
        None if pts.len() == 1 => (f64::INFINITY, pts[0].1.exp()),
        None => return Err(Error::Degenerate("spectrum is identically zero".into())),
    };
    let ks: Vec<usize> = BEST_K_FRACTIONS
        .iter()
        .map(|f| ((f * n as f64).ceil() as usize).max(1))
        .collect();
    let total = field.norm();
    let best_k = BEST_K_FRACTIONS
        .iter()
        .zip(&ks)
        .zip(tail_errors(&sorted, &ks))
        .map(|((&fraction, &k), error)| BestKError {
            fraction,
            k,
            error,
            relative_error: error / total,
        })
        .collect();
    Ok(CompressibilityReport { q, c1, best_k })
}
