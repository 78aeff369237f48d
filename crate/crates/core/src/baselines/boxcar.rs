use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, C64};
use crate::sampling::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeAdjust {
    #[default]
    None,
    /// Least-squares complex map `a z + b` fitted at the sample positions.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxcarConfig {
    pub window: usize,
    pub range_adjust: RangeAdjust,
}

impl Default for BoxcarConfig {
    fn default() -> Self {
        Self {
            window: 11,
            range_adjust: RangeAdjust::Affine,
        }
    }
}

impl BoxcarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "boxcar window {} must be odd and positive",
                self.window
            )));
        }
        Ok(())
    }
}

/// Inclusive-exclusive 2D prefix sums of sample counts and values.
struct SummedArea {
    cols: usize,
    count: Vec<u32>,
    sum: Vec<C64>,
}

impl SummedArea {
    fn new(samples: &SampleSet) -> Self {
        let (rows, cols) = samples.dims();
        let w = cols + 1;
        let mut count = vec![0u32; (rows + 1) * w];
        let mut sum = vec![C64::new(0.0, 0.0); (rows + 1) * w];
        for s in samples.entries() {
            let i = (s.index.row + 1) * w + s.index.col + 1;
            count[i] += 1;
            sum[i] += s.value;
        }
        for r in 1..=rows {
            for c in 1..=cols {
                let i = r * w + c;
                count[i] += count[i - 1] + count[i - w] - count[i - w - 1];
                sum[i] = sum[i] + sum[i - 1] + sum[i - w] - sum[i - w - 1];
            }
        }
        Self { cols, count, sum }
    }

    /// Count and sum over rows `r0..r1`, cols `c0..c1` (half-open).
    fn query(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> (u32, C64) {
        let w = self.cols + 1;
        let at = |r: usize, c: usize| r * w + c;
        let n = self.count[at(r1, c1)] + self.count[at(r0, c0)]
            - self.count[at(r0, c1)]
            - self.count[at(r1, c0)];
        let s = self.sum[at(r1, c1)] + self.sum[at(r0, c0)]
            - self.sum[at(r0, c1)]
            - self.sum[at(r1, c0)];
        (n, s)
    }
}

/// Sliding-window average of the known values around every grid point.
///
/// Windows are clipped at the border; a window that holds no sample grows
/// by two pixels until it does.
pub fn boxcar_reconstruct(samples: &SampleSet, cfg: &BoxcarConfig) -> Result<ComplexField> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (rows, cols) = samples.dims();
    let table = SummedArea::new(samples);
    let half0 = (cfg.window - 1) / 2;
    let reach = rows.max(cols);
    let mut out = ComplexField::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut half = half0;
            loop {
                let (n, s) = table.query(
                    r.saturating_sub(half),
                    (r + half + 1).min(rows),
                    c.saturating_sub(half),
                    (c + half + 1).min(cols),
                );
                if n > 0 {
                    out[(r, c)] = s / n as f64;
                    break;
                }
                debug_assert!(half <= reach);
                half += 1;
            }
        }
    }
    if cfg.range_adjust == RangeAdjust::Affine {
        let (a, b) = affine_fit(&out, samples);
        out = out.map(|z| a * z + b);
    }
    Ok(out)
}

/// Complex least squares `min sum |a p_i + b - v_i|^2` with `p_i` the
/// reconstruction at the sample positions.
fn affine_fit(recon: &ComplexField, samples: &SampleSet) -> (C64, C64) {
    let n = samples.len() as f64;
    let pred: Vec<C64> = samples
        .entries()
        .iter()
        .map(|s| recon[(s.index.row, s.index.col)])
        .collect();
    let pm = pred.iter().sum::<C64>() / n;
    let vm = samples.entries().iter().map(|s| s.value).sum::<C64>() / n;
    let mut sxx = 0.0;
    let mut sxy = C64::new(0.0, 0.0);
    for (p, s) in pred.iter().zip(samples.entries()) {
        let dp = p - pm;
        sxx += dp.norm_sqr();
        sxy += dp.conj() * (s.value - vm);
    }
    let a = if sxx > 0.0 { sxy / sxx } else { C64::new(1.0, 0.0) };
    (a, vm - a * pm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridIndex;
    use crate::sampling::{random_mask, subsample, Sample};

    fn plain(window: usize) -> BoxcarConfig {
        BoxcarConfig {
            window,
            range_adjust: RangeAdjust::None,
        }
    }

    fn sample(r: usize, c: usize, v: C64) -> Sample {
        Sample {
            index: GridIndex::new(r, c),
            value: v,
        }
    }

    #[test]
    fn full_sampling_window_one_is_identity() {
        let f = crate::fbm::complex_white_noise(5, 6, 2);
        let all: Vec<_> = (0..5)
            .flat_map(|r| (0..6).map(move |c| GridIndex::new(r, c)))
            .collect();
        let s = subsample(&f, &all).unwrap();
        let out = boxcar_reconstruct(&s, &plain(1)).unwrap();
        assert!(out.max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn single_sample_fills_grid() {
        let z = C64::new(0.2, -0.7);
        let s = SampleSet::new(9, 7, vec![sample(8, 0, z)]).unwrap();
        let out = boxcar_reconstruct(&s, &plain(3)).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - z).norm() < 1e-15));
    }

    #[test]
    fn hand_enumerated_windows() {
        let one = C64::new(1.0, 0.0);
        let three = C64::new(3.0, 0.0);
        let s = SampleSet::new(3, 3, vec![sample(0, 0, one), sample(2, 2, three)]).unwrap();
        let out = boxcar_reconstruct(&s, &plain(3)).unwrap();
        assert!((out[(1, 1)] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((out[(0, 0)] - one).norm() < 1e-15);
        assert!((out[(2, 2)] - three).norm() < 1e-15);
        // (0, 2): its 3x3 window (clipped) contains neither sample, grows to 5x5
        assert!((out[(0, 2)] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn output_in_convex_hull() {
        let f = crate::fbm::complex_white_noise(20, 20, 4);
        let mask = random_mask(20, 20, 30, 1).unwrap();
        let s = subsample(&f, &mask).unwrap();
        let out = boxcar_reconstruct(&s, &plain(5)).unwrap();
        let v = s.values();
        let (lo_re, hi_re) = v.iter().fold((f64::MAX, f64::MIN), |a, z| (a.0.min(z.re), a.1.max(z.re)));
        let (lo_im, hi_im) = v.iter().fold((f64::MAX, f64::MIN), |a, z| (a.0.min(z.im), a.1.max(z.im)));
        for z in out.as_slice() {
            assert!(z.re >= lo_re - 1e-12 && z.re <= hi_re + 1e-12);
            assert!(z.im >= lo_im - 1e-12 && z.im <= hi_im + 1e-12);
        }
    }

    #[test]
    fn affine_adjust_fits_known_values() {
        let f = crate::fbm::complex_white_noise(16, 16, 6);
        let mask = random_mask(16, 16, 40, 2).unwrap();
        let s = subsample(&f, &mask).unwrap();
        let plain_out = boxcar_reconstruct(&s, &plain(5)).unwrap();
        let adj = boxcar_reconstruct(
            &s,
            &BoxcarConfig {
                window: 5,
                range_adjust: RangeAdjust::Affine,
            },
        )
        .unwrap();
        let resid = |g: &ComplexField| -> f64 {
            s.entries()
                .iter()
                .map(|e| (g[(e.index.row, e.index.col)] - e.value).norm_sqr())
                .sum()
        };
        assert!(resid(&adj) <= resid(&plain_out) + 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let s = SampleSet::new(3, 3, vec![]).unwrap();
        assert!(matches!(boxcar_reconstruct(&s, &plain(3)), Err(Error::EmptySamples)));
        let s = SampleSet::new(3, 3, vec![sample(0, 0, C64::new(1.0, 0.0))]).unwrap();
        assert!(boxcar_reconstruct(&s, &plain(4)).is_err());
    }
}
