//! Complex-valued fBm fields by Fourier spectral synthesis.
//!
//! Complex white noise on a 2Mx2N grid is transformed, its coefficients are
//! multiplied by the power-law envelope `|w|^-(2H+1)`, the result is
//! transformed back and the top-left MxN quadrant is returned.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{signed_frequency, take_quadrant, ComplexField, Fft2, C64};

/// Hurst exponent, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidParameter(format!(
                "Hurst exponent {h} outside (0, 1)"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// How the power law is applied to the Fourier magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// Magnitudes scale as `|w|^-(2H+1)`.
    #[default]
    Amplitude,
    /// `|w|^-(2H+1)` is the power spectrum; magnitudes scale as `|w|^-(2H+1)/2`.
    Power,
}

impl EnvelopeMode {
    pub fn amplitude_exponent(self, h: HurstParam) -> f64 {
        let e = 2.0 * h.value() + 1.0;
        match self {
            EnvelopeMode::Amplitude => e,
            EnvelopeMode::Power => e / 2.0,
        }
    }
}

/// Non-negative gains per DFT bin with zero DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    rows: usize,
    cols: usize,
    gains: Vec<f64>,
}

impl SpectralEnvelope {
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, row: usize, col: usize) -> f64 {
        self.gains[row * self.cols + col]
    }
}

/// Radial frequency `sqrt(wx^2 + wy^2)` of bin (row, col) with signed frequencies.
pub fn radial_frequency(row: usize, col: usize, rows: usize, cols: usize) -> f64 {
    signed_frequency(row, rows).hypot(signed_frequency(col, cols))
}

pub fn spectral_envelope(h: HurstParam, rows: usize, cols: usize) -> Result<SpectralEnvelope> {
    spectral_envelope_with(h, rows, cols, EnvelopeMode::Amplitude)
}

pub fn spectral_envelope_with(
    h: HurstParam,
    rows: usize,
    cols: usize,
    mode: EnvelopeMode,
) -> Result<SpectralEnvelope> {
    if rows < 2 || cols < 2 {
        return Err(Error::Shape(format!(
            "envelope needs at least 2x2 bins, got {rows}x{cols}"
        )));
    }
    let exponent = mode.amplitude_exponent(h);
    let mut gains = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let w = radial_frequency(r, c, rows, cols);
            gains.push(if w == 0.0 { 0.0 } else { w.powf(-exponent) });
        }
    }
    Ok(SpectralEnvelope { rows, cols, gains })
}

/// Synthesis options beyond (H, size, seed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SynthOptions {
    #[serde(default)]
    pub envelope: EnvelopeMode,
}

/// Standard complex normal noise (re, im i.i.d. N(0, 1/2)), deterministic in `seed`.
pub fn complex_white_noise(rows: usize, cols: usize, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexField::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * s, im * s)
    })
}

/// An MxN CV-fBm field with the default (amplitude) envelope.
pub fn synthesize_cvfbm(h: HurstParam, m: usize, n: usize, seed: u64) -> Result<ComplexField> {
    synthesize_cvfbm_with(h, m, n, seed, SynthOptions::default())
}

pub fn synthesize_cvfbm_with(
    h: HurstParam,
    m: usize,
    n: usize,
    seed: u64,
    opts: SynthOptions,
) -> Result<ComplexField> {
    if m < 2 || n < 2 {
        return Err(Error::Shape(format!(
            "synthesis needs at least 2x2, got {m}x{n}"
        )));
    }
    let (rows, cols) = (2 * m, 2 * n);
    let envelope = spectral_envelope_with(h, rows, cols, opts.envelope)?;
    let fft = Fft2::new(rows, cols);
    let mut data = complex_white_noise(rows, cols, seed).into_vec();
    fft.forward_in_place(&mut data);
    for (z, g) in data.iter_mut().zip(envelope.gains()) {
        *z *= *g;
    }
    fft.inverse_in_place(&mut data);
    take_quadrant(&ComplexField::from_raw(rows, cols, data))
}

/// Rescales `field` so the RMS of its magnitudes equals `target_rms`.
pub fn normalize_dynamic_range(field: &ComplexField, target_rms: f64) -> Result<ComplexField> {
    if !(target_rms > 0.0 && target_rms.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target RMS {target_rms} must be positive"
        )));
    }
    let rms = field.rms();
    if rms == 0.0 {
        return Err(Error::Degenerate("cannot normalize an all-zero field".into()));
    }
    Ok(field.scale(target_rms / rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_range() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(HurstParam::new(0.5).is_ok());
        let parsed: std::result::Result<HurstParam, _> = serde_json::from_str("1.5");
        assert!(parsed.is_err());
    }

    #[test]
    fn envelope_values() {
        for hv in [0.1, 0.5, 0.9] {
            let env = spectral_envelope(h(hv), 16, 16).unwrap();
            assert_eq!(env.gain(0, 0), 0.0);
            assert!((env.gain(0, 1) - 1.0).abs() < 1e-15);
            assert!((env.gain(15, 0) - 1.0).abs() < 1e-15);
        }
        let env = spectral_envelope(h(0.5), 16, 16).unwrap();
        assert!((env.gain(0, 2) - 0.25).abs() < 1e-15);
        assert!((env.gain(14, 0) - 0.25).abs() < 1e-15);
        assert!(spectral_envelope(h(0.5), 1, 16).is_err());

        let p = spectral_envelope_with(h(0.5), 16, 16, EnvelopeMode::Power).unwrap();
        assert!((p.gain(0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_log_log_slope() {
        // Least-squares fit of log gain against log |w| over 1 <= |w| <= N/4.
        let n = 64;
        for hv in [0.2, 0.5, 0.8] {
            let env = spectral_envelope(h(hv), n, n).unwrap();
            let mut pts = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    let w = radial_frequency(r, c, n, n);
                    if (1.0..=(n / 4) as f64).contains(&w) {
                        pts.push((w.ln(), env.gain(r, c).ln()));
                    }
                }
            }
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            assert!((sxy / sxx + (2.0 * hv + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_cvfbm(h(0.7), 12, 10, 99).unwrap();
        let b = synthesize_cvfbm(h(0.7), 12, 10, 99).unwrap();
        assert_eq!(a.dims(), (12, 10));
        let bytes = |f: &ComplexField| {
            f.as_slice()
                .iter()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                .collect::<Vec<_>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(a, synthesize_cvfbm(h(0.7), 12, 10, 100).unwrap());
    }

    #[test]
    fn periodic_field_has_zero_mean() {
        // DC is removed on the 2Mx2N grid; the full periodic field has zero mean.
        let (rows, cols) = (32, 32);
        let env = spectral_envelope(h(0.6), rows, cols).unwrap();
        let fft = Fft2::new(rows, cols);
        let mut data = complex_white_noise(rows, cols, 5).into_vec();
        fft.forward_in_place(&mut data);
        for (z, g) in data.iter_mut().zip(env.gains()) {
            *z *= *g;
        }
        fft.inverse_in_place(&mut data);
        let f = ComplexField::new(rows, cols, data).unwrap();
        assert!(f.mean().norm() < 1e-10 * f.rms());
    }

    #[test]
    fn white_noise_statistics() {
        let f = complex_white_noise(128, 128, 3);
        let n = f.len() as f64;
        let var_re = f.as_slice().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        let var_im = f.as_slice().iter().map(|z| z.im * z.im).sum::<f64>() / n;
        assert!((var_re - 0.5).abs() < 0.03);
        assert!((var_im - 0.5).abs() < 0.03);
    }

    #[test]
    fn normalization() {
        let f = ComplexField::constant(3, 3, C64::new(2.0, 0.0));
        let g = normalize_dynamic_range(&f, 0.05).unwrap();
        for z in g.as_slice() {
            assert!((z - C64::new(0.05, 0.0)).norm() < 1e-15);
        }
        let f = synthesize_cvfbm(h(0.4), 16, 16, 1).unwrap();
        let g = normalize_dynamic_range(&f, 0.05).unwrap();
        assert!((g.rms() - 0.05).abs() < 1e-12 * 0.05);
        let again = normalize_dynamic_range(&g, 0.05).unwrap();
        assert!(again.max_abs_diff(&g) < 1e-12 * g.max_abs());
        assert!(normalize_dynamic_range(&ComplexField::zeros(2, 2), 1.0).is_err());
        assert!(normalize_dynamic_range(&f, 0.0).is_err());
    }
}
