//! Random subsampling and the matrix-free measurement operators.
//!
//! Two operator modes share one mask:
//! * `Selection` picks grid values, `y = x[mask]`.
//! * `PartialFourier` treats its input as a unitary spectrum and picks the
//!   spatial values, `y = idft2(X)[mask]`.
//!
//! Operators sort their mask row-major so the measurement vector layout is
//! the same for every method that consumes a given sample set.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mirror_source, ComplexField, Fft2, GridIndex, C64};

/// One known value on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub index: GridIndex,
    pub value: C64,
}

/// Known values at unique, in-bounds positions of a rows x cols grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    rows: usize,
    cols: usize,
    entries: Vec<Sample>,
}

impl SampleSet {
    pub fn new(rows: usize, cols: usize, entries: Vec<Sample>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} grid is empty")));
        }
        check_positions(rows, cols, entries.iter().map(|s| s.index))?;
        if entries
            .iter()
            .any(|s| !s.value.re.is_finite() || !s.value.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite sample value".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positions(&self) -> Vec<GridIndex> {
        self.entries.iter().map(|s| s.index).collect()
    }

    pub fn values(&self) -> Vec<C64> {
        self.entries.iter().map(|s| s.value).collect()
    }

    /// Euclidean norm of the sample values.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|s| s.value.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Same positions in row-major order.
    pub fn sorted(&self) -> SampleSet {
        let mut entries = self.entries.clone();
        entries.sort_by_key(|s| s.index);
        SampleSet {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    /// Linear combination `a*self + other` on identical positions.
    pub fn axpy(&self, a: C64, other: &SampleSet) -> Result<SampleSet> {
        if self.dims() != other.dims() || self.positions() != other.positions() {
            return Err(Error::DimensionMismatch {
                expected: "identical sample positions".into(),
                actual: "different positions".into(),
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(s, t)| Sample {
                index: s.index,
                value: a * s.value + t.value,
            })
            .collect();
        Ok(SampleSet {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Field with sample values at their positions and zeros elsewhere.
    pub fn zero_filled(&self) -> ComplexField {
        let mut f = ComplexField::zeros(self.rows, self.cols);
        for s in &self.entries {
            f[(s.index.row, s.index.col)] = s.value;
        }
        f
    }
}

fn check_positions(
    rows: usize,
    cols: usize,
    positions: impl Iterator<Item = GridIndex>,
) -> Result<()> {
    let mut seen = HashSet::new();
    for idx in positions {
        idx.check(rows, cols)?;
        if !seen.insert(idx) {
            return Err(Error::DuplicatePosition {
                row: idx.row,
                col: idx.col,
            });
        }
    }
    Ok(())
}

/// `n_sub` distinct positions drawn uniformly without replacement, sorted row-major.
pub fn random_mask(rows: usize, cols: usize, n_sub: usize, seed: u64) -> Result<Vec<GridIndex>> {
    let total = rows * cols;
    if n_sub == 0 || n_sub > total {
        return Err(Error::InvalidParameter(format!(
            "n_sub = {n_sub} outside 1..={total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask: Vec<GridIndex> = rand::seq::index::sample(&mut rng, total, n_sub)
        .into_iter()
        .map(|i| GridIndex::new(i / cols, i % cols))
        .collect();
    mask.sort_unstable();
    Ok(mask)
}

/// Field values at the mask positions, in mask order.
pub fn subsample(field: &ComplexField, mask: &[GridIndex]) -> Result<SampleSet> {
    let (rows, cols) = field.dims();
    check_positions(rows, cols, mask.iter().copied())?;
    let entries = mask
        .iter()
        .map(|&index| Sample {
            index,
            value: field[(index.row, index.col)],
        })
        .collect();
    Ok(SampleSet {
        rows,
        cols,
        entries,
    })
}

/// Places every sample at its four mirror images on the 2Mx2N grid.
pub fn mirror_extend_samples(samples: &SampleSet) -> SampleSet {
    let (m, n) = samples.dims();
    let mut entries = Vec::with_capacity(4 * samples.len());
    for s in samples.entries() {
        let (r, c) = (s.index.row, s.index.col);
        for (rr, cc) in [
            (r, c),
            (r, 2 * n - 1 - c),
            (2 * m - 1 - r, c),
            (2 * m - 1 - r, 2 * n - 1 - c),
        ] {
            debug_assert_eq!(mirror_source(rr, cc, m, n), (r, c));
            entries.push(Sample {
                index: GridIndex::new(rr, cc),
                value: s.value,
            });
        }
    }
    SampleSet {
        rows: 2 * m,
        cols: 2 * n,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    Selection,
    PartialFourier,
}

/// Matrix-free row-selection (`Phi`) or partial-Fourier (`A = Phi Psi`) operator.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    rows: usize,
    cols: usize,
    mask: Vec<GridIndex>,
    flat: Vec<usize>,
    mode: OperatorMode,
    fft: Fft2,
}

impl MeasurementOperator {
    pub fn new(rows: usize, cols: usize, mask: &[GridIndex], mode: OperatorMode) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} grid is empty")));
        }
        check_positions(rows, cols, mask.iter().copied())?;
        let mut mask = mask.to_vec();
        mask.sort_unstable();
        let flat = mask.iter().map(|i| i.flat(cols)).collect();
        Ok(Self {
            rows,
            cols,
            mask,
            flat,
            mode,
            fft: Fft2::new(rows, cols),
        })
    }

    /// Operator for a sample set together with its measurement vector (mask order).
    pub fn from_samples(samples: &SampleSet, mode: OperatorMode) -> Result<(Self, Vec<C64>)> {
        let (rows, cols) = samples.dims();
        let op = Self::new(rows, cols, &samples.positions(), mode)?;
        let y = samples.sorted().values();
        Ok((op, y))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn mask(&self) -> &[GridIndex] {
        &self.mask
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn n_measurements(&self) -> usize {
        self.mask.len()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn forward(&self, x: &ComplexField) -> Result<Vec<C64>> {
        if x.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        Ok(self.forward_raw(x.as_slice()))
    }

    pub fn adjoint(&self, y: &[C64]) -> Result<ComplexField> {
        if y.len() != self.mask.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} measurements", self.mask.len()),
                actual: format!("{}", y.len()),
            });
        }
        Ok(ComplexField::from_raw(
            self.rows,
            self.cols,
            self.adjoint_raw(y),
        ))
    }

    /// Row-major flat indices of the mask, in measurement order.
    pub(crate) fn flat_indices(&self) -> &[usize] {
        &self.flat
    }

    pub(crate) fn forward_raw(&self, x: &[C64]) -> Vec<C64> {
        match self.mode {
            OperatorMode::Selection => self.flat.iter().map(|&i| x[i]).collect(),
            OperatorMode::PartialFourier => {
                let mut buf = x.to_vec();
                self.fft.inverse_in_place(&mut buf);
                self.flat.iter().map(|&i| buf[i]).collect()
            }
        }
    }

    pub(crate) fn adjoint_raw(&self, y: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.rows * self.cols];
        for (&i, &v) in self.flat.iter().zip(y) {
            buf[i] = v;
        }
        if self.mode == OperatorMode::PartialFourier {
            self.fft.forward_in_place(&mut buf);
        }
        buf
    }

    /// Euclidean projection of a spectrum onto `{X : A X = y}`.
    ///
    /// Valid for the partial-Fourier mode, whose rows are orthonormal.
    pub(crate) fn project_consistent(&self, x: &mut [C64], y: &[C64]) {
        debug_assert_eq!(self.mode, OperatorMode::PartialFourier);
        self.fft.inverse_in_place(x);
        for (&i, &v) in self.flat.iter().zip(y) {
            x[i] = v;
        }
        self.fft.forward_in_place(x);
    }
}

/// `sqrt(N) * max |<phi_k, psi_j>|` for the spike basis against the unitary
/// inverse-DFT basis of a rows x cols grid.
///
/// Every basis vector is evaluated with the FFT, so this is O(N^2 log N).
pub fn spike_fourier_coherence(rows: usize, cols: usize) -> f64 {
    let n = rows * cols;
    let fft = Fft2::new(rows, cols);
    let mut best: f64 = 0.0;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        buf.fill(C64::new(0.0, 0.0));
        buf[j] = C64::new(1.0, 0.0);
        fft.inverse_in_place(&mut buf);
        best = buf.iter().map(|z| z.norm()).fold(best, f64::max);
    }
    best * (n as f64).sqrt()
}

/// Advisory sample count `C * mu^2 * K * ln(N)` for recovering a K-sparse signal.
pub fn sample_count_bound(c: f64, mu: f64, k: usize, n: usize) -> f64 {
    c * mu * mu * k as f64 * (n as f64).ln()
}
