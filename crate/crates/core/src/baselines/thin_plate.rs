//! Thin-plate smoothing spline `f(x) = sum_j c_j phi(|x - x_j|) + d0 + d1 x + d2 y`
//! with `phi(r) = r^2 ln r`.
//!
//! Coefficients solve `[[K + rho I, P], [P^T, 0]] [c; d] = [v; 0]` with
//! `rho = (1 - p) / p`. The system matrix is real; the complex values are
//! carried as two right-hand sides of one factorization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, C64};
use crate::sampling::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinPlateConfig {
    /// Smoothing weight in (0, 1]; `None` selects it from the sample spacing.
    #[serde(default)]
    pub p: Option<f64>,
    /// Extra diagonal term for the linear solve.
    #[serde(default)]
    pub epsilon: f64,
}

impl ThinPlateConfig {
    pub fn interpolating() -> Self {
        Self {
            p: Some(1.0),
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1]")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be non-negative",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn tps_kernel(r: f64) -> f64 {
    if r > 0.0 {
        r * r * r.ln()
    } else {
        0.0
    }
}

/// Mean distance from each site to its nearest neighbour.
pub fn mean_nearest_neighbor_spacing(sites: &[(f64, f64)]) -> f64 {
    if sites.len() < 2 {
        return 0.0;
    }
    let total: f64 = sites
        .iter()
        .enumerate()
        .map(|(i, a)| {
            sites
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (a.0 - b.0).hypot(a.1 - b.1))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / sites.len() as f64
}

/// `p = 1 / (1 + h^3 / 6)` with `h` the mean nearest-neighbour spacing.
pub fn default_smoothing(sites: &[(f64, f64)]) -> f64 {
    let h = mean_nearest_neighbor_spacing(sites);
    1.0 / (1.0 + h.powi(3) / 6.0)
}

/// A fitted spline in pixel coordinates `x = col`, `y = row`.
#[derive(Debug, Clone)]
pub struct ThinPlateSpline {
    sites: Vec<(f64, f64)>,
    weights: Vec<C64>,
    affine: [C64; 3],
    p: f64,
}

impl ThinPlateSpline {
    pub fn fit(samples: &SampleSet, cfg: &ThinPlateConfig) -> Result<Self> {
        cfg.validate()?;
        let sites: Vec<(f64, f64)> = samples
            .entries()
            .iter()
            .map(|s| (s.index.col as f64, s.index.row as f64))
            .collect();
        let values = samples.values();
        Self::fit_points(&sites, &values, cfg)
    }

    pub fn fit_points(sites: &[(f64, f64)], values: &[C64], cfg: &ThinPlateConfig) -> Result<Self> {
        cfg.validate()?;
        let n = sites.len();
        if n != values.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} values"),
                actual: format!("{}", values.len()),
            });
        }
        if n < 3 {
            return Err(Error::Degenerate(format!(
                "thin-plate fit needs at least 3 sites, got {n}"
            )));
        }
        check_not_collinear(sites)?;
        let p = cfg.p.unwrap_or_else(|| default_smoothing(sites));
        let rho = (1.0 - p) / p + cfg.epsilon;

        let dim = n + 3;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            for j in (i + 1)..n {
                let r = (sites[i].0 - sites[j].0).hypot(sites[i].1 - sites[j].1);
                let k = tps_kernel(r);
                m[(i, j)] = k;
                m[(j, i)] = k;
            }
            m[(i, i)] = rho;
            let row = [1.0, sites[i].0, sites[i].1];
            for (a, v) in row.into_iter().enumerate() {
                m[(i, n + a)] = v;
                m[(n + a, i)] = v;
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(dim, 2);
        for (i, v) in values.iter().enumerate() {
            rhs[(i, 0)] = v.re;
            rhs[(i, 1)] = v.im;
        }
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("thin-plate system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("thin-plate system".into()));
        }
        let weights = (0..n).map(|i| C64::new(sol[(i, 0)], sol[(i, 1)])).collect();
        let affine = [0, 1, 2].map(|a| C64::new(sol[(n + a, 0)], sol[(n + a, 1)]));
        Ok(Self {
            sites: sites.to_vec(),
            weights,
            affine,
            p,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// `[d0, d1, d2]` of the affine part `d0 + d1 x + d2 y`.
    pub fn affine(&self) -> [C64; 3] {
        self.affine
    }

    pub fn sites(&self) -> &[(f64, f64)] {
        &self.sites
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        let mut acc = self.affine[0] + self.affine[1] * x + self.affine[2] * y;
        for (&(sx, sy), &w) in self.sites.iter().zip(&self.weights) {
            acc += w * tps_kernel((x - sx).hypot(y - sy));
        }
        acc
    }

    /// Evaluates the spline at every pixel of a rows x cols grid.
    pub fn evaluate_grid(&self, rows: usize, cols: usize) -> ComplexField {
        ComplexField::from_fn(rows, cols, |r, c| self.eval(c as f64, r as f64))
    }
}

fn check_not_collinear(sites: &[(f64, f64)]) -> Result<()> {
    let n = sites.len() as f64;
    let mx = sites.iter().map(|s| s.0).sum::<f64>() / n;
    let my = sites.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for s in sites {
        let (dx, dy) = (s.0 - mx, s.1 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let det = sxx * syy - sxy * sxy;
    if det <= 1e-12 * (sxx + syy).powi(2) {
        return Err(Error::Degenerate("sample sites are collinear".into()));
    }
    Ok(())
}

pub fn thin_plate_reconstruct(samples: &SampleSet, cfg: &ThinPlateConfig) -> Result<ComplexField> {
    let (rows, cols) = samples.dims();
    let spline = ThinPlateSpline::fit(samples, cfg)?;
    Ok(spline.evaluate_grid(rows, cols))
}
