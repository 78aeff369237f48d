//! Plot-ready dumps: field images, radial spectra and 1-D traces.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::metrics::{radial_spectrum, SpectrumBoundary};

/// Flattened (row-major, 0-based) indices of the trace: samples 101 to 200.
pub const TRACE_RANGE: std::ops::Range<usize> = 100..200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    FieldImages,
    Spectrum,
    Trace,
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "field-images" => Ok(Self::FieldImages),
            "spectrum" => Ok(Self::Spectrum),
            "trace" => Ok(Self::Trace),
            other => Err(Error::InvalidParameter(format!("unknown figure kind '{other}'"))),
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FieldImages => "field-images",
            Self::Spectrum => "spectrum",
            Self::Trace => "trace",
        })
    }
}

/// Binary 8-bit PGM with linear min-max scaling; a constant image is mid gray.
pub fn write_pgm<W: Write>(mut w: W, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let pixels: Vec<u8> = if hi > lo {
        values
            .iter()
            .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
            .collect()
    } else {
        vec![128; values.len()]
    };
    w.write_all(&pixels)?;
    Ok(())
}

/// Writes `<stem>_re.pgm` and `<stem>_im.pgm` into `dir`.
pub fn write_field_images(field: &ComplexField, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir)?;
    let (rows, cols) = field.dims();
    let re = dir.join(format!("{stem}_re.pgm"));
    let im = dir.join(format!("{stem}_im.pgm"));
    write_pgm(std::fs::File::create(&re)?, rows, cols, &field.real_part())?;
    write_pgm(std::fs::File::create(&im)?, rows, cols, &field.imag_part())?;
    Ok([re, im])
}

/// Ring-mean spectral magnitude per labelled field; one row per integer radius.
pub fn write_spectrum_csv<W: Write>(w: W, fields: &[(String, ComplexField)]) -> Result<()> {
    if fields.is_empty() {
        return Err(Error::InvalidParameter("spectrum needs at least one field".into()));
    }
    let spectra: Vec<_> = fields
        .iter()
        .map(|(_, f)| radial_spectrum(f, SpectrumBoundary::Mirror))
        .collect();
    let bins = spectra.iter().map(Vec::len).min().unwrap_or(0);
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["bin".to_string()];
    header.extend(fields.iter().map(|(l, _)| l.clone()));
    wr.write_record(&header)?;
    for b in 0..bins {
        let mut rec = vec![b.to_string()];
        rec.extend(spectra.iter().map(|s| format!("{:e}", s[b].mean_magnitude)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Values at flattened samples 101..=200 of the truth and each reconstruction,
/// one `<label>_re,<label>_im` column pair per field.
pub fn write_trace_csv<W: Write>(w: W, truth: &ComplexField, recons: &[(String, ComplexField)]) -> Result<()> {
    if truth.len() < TRACE_RANGE.end {
        return Err(Error::Shape(format!(
            "trace needs at least {} pixels, field has {}",
            TRACE_RANGE.end,
            truth.len()
        )));
    }
    for (label, f) in recons {
        if f.dims() != truth.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} for '{label}'", truth.rows(), truth.cols()),
                actual: format!("{}x{}", f.rows(), f.cols()),
            });
        }
    }
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["sample".to_string(), "truth_re".into(), "truth_im".into()];
    for (label, _) in recons {
        header.push(format!("{label}_re"));
        header.push(format!("{label}_im"));
    }
    wr.write_record(&header)?;
    for i in TRACE_RANGE {
        let mut rec = vec![(i + 1).to_string()];
        for f in std::iter::once(truth).chain(recons.iter().map(|(_, f)| f)) {
            let z = f.as_slice()[i];
            rec.push(format!("{:?}", z.re));
            rec.push(format!("{:?}", z.im));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
