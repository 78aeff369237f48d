//! Reconstruction error metrics and spectral slope estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::radial_frequency;
use crate::grid::{dft2, mirror_extend, ComplexField};

/// Reported when the estimate reproduces the truth exactly.
pub const SNR_CAP_DB: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mse: f64,
    pub snr_db: f64,
    pub n_points: usize,
}

/// Mean of `|est - truth|^2` over all pixels.
pub fn mse(truth: &ComplexField, est: &ComplexField) -> Result<f64> {
    truth.check_same_dims(est)?;
    Ok(error_energy(truth, est) / truth.len() as f64)
}

pub fn rmse(truth: &ComplexField, est: &ComplexField) -> Result<f64> {
    mse(truth, est).map(f64::sqrt)
}

/// `10 log10(sum |truth|^2 / sum |est - truth|^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(truth: &ComplexField, est: &ComplexField) -> Result<f64> {
    truth.check_same_dims(est)?;
    let signal = truth.energy();
    if signal == 0.0 {
        return Err(Error::Degenerate("SNR of an all-zero truth field".into()));
    }
    let noise = error_energy(truth, est);
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

pub fn evaluate(truth: &ComplexField, est: &ComplexField) -> Result<EvalReport> {
    let mse = mse(truth, est)?;
    Ok(EvalReport {
        rmse: mse.sqrt(),
        mse,
        snr_db: snr_db(truth, est)?,
        n_points: truth.len(),
    })
}

fn error_energy(truth: &ComplexField, est: &ComplexField) -> f64 {
    truth
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum()
}

/// Boundary treatment before the spectrum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumBoundary {
    /// The field is treated as one period.
    Periodic,
    /// The field is mirror-extended first, which removes the edge jumps of a
    /// non-periodic patch. Frequencies are reported in units of the extended grid.
    #[default]
    Mirror,
}

/// One ring of the radially binned magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialBin {
    /// Integer radius (nearest integer of `|w|`).
    pub bin: usize,
    pub count: usize,
    pub mean_magnitude: f64,
    /// Mean of `ln |w|` over the ring.
    pub mean_log_frequency: f64,
    /// Mean of `ln |F|` over the nonzero coefficients of the ring.
    pub mean_log_magnitude: f64,
}

/// Rings of `|dft2|` for integer radii `0..=max_bin` of the (possibly extended) grid.
pub fn radial_spectrum(field: &ComplexField, boundary: SpectrumBoundary) -> Vec<RadialBin> {
    let work = match boundary {
        SpectrumBoundary::Periodic => field.clone(),
        SpectrumBoundary::Mirror => mirror_extend(field),
    };
    let (rows, cols) = work.dims();
    let spec = dft2(&work);
    let max_bin = rows.min(cols) / 2;
    let mut acc = vec![(0usize, 0.0f64, 0.0f64, 0.0f64, 0usize); max_bin + 1];
    for r in 0..rows {
        for c in 0..cols {
            let w = radial_frequency(r, c, rows, cols);
            let b = w.round() as usize;
            if b > max_bin {
                continue;
            }
            let m = spec[(r, c)].norm();
            let slot = &mut acc[b];
            slot.0 += 1;
            slot.1 += m;
            if m > 0.0 && w > 0.0 {
                slot.2 += w.ln();
                slot.3 += m.ln();
                slot.4 += 1;
            }
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(bin, (count, sum, lw, lm, nz))| RadialBin {
            bin,
            count,
            mean_magnitude: if count > 0 { sum / count as f64 } else { 0.0 },
            mean_log_frequency: if nz > 0 { lw / nz as f64 } else { f64::NAN },
            mean_log_magnitude: if nz > 0 { lm / nz as f64 } else { f64::NAN },
        })
        .collect()
}

/// Log-log slope of the radially averaged magnitude spectrum (mirror boundary).
pub fn radial_spectrum_slope(field: &ComplexField) -> Result<f64> {
    radial_spectrum_slope_with(field, SpectrumBoundary::Mirror)
}

/// Least-squares slope of ring-averaged `ln |F|` against ring-averaged
/// `ln |w|` over rings `1..=min(rows, cols)/4` of the transformed grid.
///
/// Averaging logarithms inside each ring makes the fit exact for a pure power law.
pub fn radial_spectrum_slope_with(field: &ComplexField, boundary: SpectrumBoundary) -> Result<f64> {
    let (rows, cols) = field.dims();
    if rows < 16 || cols < 16 {
        return Err(Error::Shape(format!(
            "slope estimation needs at least 16x16, got {rows}x{cols}"
        )));
    }
    let bins = radial_spectrum(field, boundary);
    let max_bin = match boundary {
        SpectrumBoundary::Periodic => rows.min(cols) / 4,
        SpectrumBoundary::Mirror => rows.min(cols) / 2,
    };
    let pts: Vec<(f64, f64)> = bins[1..=max_bin]
        .iter()
        .filter(|b| b.mean_log_magnitude.is_finite())
        .map(|b| (b.mean_log_frequency, b.mean_log_magnitude))
        .collect();
    least_squares_slope(&pts)
        .ok_or_else(|| Error::Degenerate("spectrum is zero on the fitted rings".into()))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
