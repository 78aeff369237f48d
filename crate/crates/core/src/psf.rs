//! Star images, quadrupole brightness moments, ellipticity and PSF radius.
//!
//! Pixel coordinates are `x = col`, `y = row`. Rendering samples the profile
//! at pixel centres; there is no sub-pixel integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::C64;

/// Shape distortion `e1 + i e2` with `|e| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub e1: f64,
    pub e2: f64,
}

impl Ellipticity {
    pub fn new(e1: f64, e2: f64) -> Result<Self> {
        let m = e1.hypot(e2);
        if !(m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipticity magnitude {m} must be below 1"
            )));
        }
        Ok(Self { e1, e2 })
    }

    pub fn zero() -> Self {
        Self { e1: 0.0, e2: 0.0 }
    }

    pub fn as_complex(self) -> C64 {
        C64::new(self.e1, self.e2)
    }
}

/// Radially symmetric profile evaluated at `r / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    Gaussian { scale: f64 },
    Moffat { scale: f64, beta: f64 },
    Airy { scale: f64 },
}

impl RadialProfile {
    pub const DEFAULT_MOFFAT_BETA: f64 = 3.0;

    pub fn validate(&self) -> Result<()> {
        let scale = self.scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "profile scale {scale} must be positive"
            )));
        }
        if let RadialProfile::Moffat { beta, .. } = *self {
            if !(beta > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "Moffat beta {beta} must exceed 1"
                )));
            }
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        match *self {
            RadialProfile::Gaussian { scale }
            | RadialProfile::Moffat { scale, .. }
            | RadialProfile::Airy { scale } => scale,
        }
    }

    /// Unnormalized profile value at radius `r` (pixels); 1 at the centre.
    pub fn eval(&self, r: f64) -> f64 {
        let u = r / self.scale();
        match *self {
            RadialProfile::Gaussian { .. } => (-0.5 * u * u).exp(),
            RadialProfile::Moffat { beta, .. } => (1.0 + u * u).powf(-beta),
            RadialProfile::Airy { .. } => {
                if u.abs() < 1e-8 {
                    1.0
                } else {
                    let a = 2.0 * bessel_j1(u) / u;
                    a * a
                }
            }
        }
    }
}

/// Bessel function of the first kind, order one.
///
/// Uses the integral `J1(x) = (1/pi) int_0^pi cos(t - x sin t) dt`; the
/// integrand is smooth and periodic so the trapezoid rule converges
/// geometrically once the node count exceeds |x|.
pub fn bessel_j1(x: f64) -> f64 {
    let nodes = (2.0 * x.abs()).ceil() as usize + 48;
    let h = std::f64::consts::PI / nodes as f64;
    let f = |t: f64| (t - x * t.sin()).cos();
    let mut sum = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for k in 1..nodes {
        sum += f(k as f64 * h);
    }
    sum * h / std::f64::consts::PI
}

/// A square star image with non-negative intensities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StarImage {
    size: usize,
    intensities: Vec<f64>,
}

impl StarImage {
    pub fn new(size: usize, intensities: Vec<f64>) -> Result<Self> {
        if size == 0 || intensities.len() != size * size {
            return Err(Error::Shape(format!(
                "star image needs {0}x{0} intensities, got {1}",
                size,
                intensities.len()
            )));
        }
        if intensities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "intensities must be finite and non-negative".into(),
            ));
        }
        if intensities.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Degenerate("star image has no flux".into()));
        }
        Ok(Self { size, intensities })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.intensities[row * self.size + col]
    }

    pub fn total_flux(&self) -> f64 {
        self.intensities.iter().sum()
    }

    /// Rotates the image by 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> StarImage {
        let n = self.size;
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[(n - 1 - c) * n + r] = self.intensities[r * n + c];
            }
        }
        StarImage {
            size: n,
            intensities: out,
        }
    }

    pub fn scaled(&self, k: f64) -> Result<StarImage> {
        StarImage::new(self.size, self.intensities.iter().map(|v| v * k).collect())
    }
}

/// Second-order brightness moments (pixel^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTensor {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl MomentTensor {
    pub fn new(q11: f64, q12: f64, q22: f64) -> Result<Self> {
        let scale = (q11.abs() + q22.abs()).max(f64::MIN_POSITIVE);
        let det = q11 * q22 - q12 * q12;
        if !(q11 >= 0.0 && q22 >= 0.0) || det < -1e-12 * scale * scale {
            return Err(Error::InvalidParameter(format!(
                "moments ({q11}, {q12}, {q22}) are not positive semidefinite"
            )));
        }
        Ok(Self { q11, q12, q22 })
    }

    pub fn determinant(&self) -> f64 {
        self.q11 * self.q22 - self.q12 * self.q12
    }
}

/// Which ellipticity expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticityForm {
    /// `(q11^2 - q22^2 + 2i q12) / (q11^2 + q22^2 + 2 sqrt(q11 q22 - q12^2))`
    #[default]
    Paper,
    /// `(q11 - q22 + 2i q12) / (q11 + q22 + 2 sqrt(q11 q22 - q12^2))`
    Standard,
}

/// Applies the shear matrix `[[1-e1, -e2], [-e2, 1+e1]]` to `(x0, y0)`.
pub fn shear_coords(e: Ellipticity, x0: f64, y0: f64) -> (f64, f64) {
    (
        (1.0 - e.e1) * x0 - e.e2 * y0,
        -e.e2 * x0 + (1.0 + e.e1) * y0,
    )
}

/// Renders a sheared profile on an odd `size` grid, normalized to `flux`.
pub fn render_star(
    profile: RadialProfile,
    e: Ellipticity,
    size: usize,
    flux: f64,
) -> Result<StarImage> {
    profile.validate()?;
    if size % 2 == 0 {
        return Err(Error::Shape(format!("star size {size} must be odd")));
    }
    if !(flux > 0.0 && flux.is_finite()) {
        return Err(Error::InvalidParameter(format!("flux {flux} must be positive")));
    }
    Ellipticity::new(e.e1, e.e2)?;
    let centre = (size / 2) as f64;
    let mut img = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (xp, yp) = shear_coords(e, c as f64 - centre, r as f64 - centre);
            img.push(profile.eval(xp.hypot(yp)));
        }
    }
    let total: f64 = img.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("rendered profile has no flux".into()));
    }
    for v in img.iter_mut() {
        *v *= flux / total;
    }
    StarImage::new(size, img)
}

const CENTROID_MAX_ITERS: usize = 50;
const CENTROID_TOL: f64 = 1e-8;

/// Weighted second moments about the weighted centroid.
///
/// With `weight = None` every pixel has unit weight. Otherwise the weight
/// profile is centred on the current centroid estimate and the centroid is
/// refined by fixed-point iteration.
pub fn brightness_moments(img: &StarImage, weight: Option<RadialProfile>) -> Result<MomentTensor> {
    if let Some(w) = weight {
        w.validate()?;
    }
    let n = img.size();
    let weight_at = |x: f64, y: f64, cx: f64, cy: f64| match weight {
        None => 1.0,
        Some(w) => w.eval((x - cx).hypot(y - cy)),
    };
    let centroid = |cx: f64, cy: f64| -> Result<(f64, f64, f64)> {
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                let (x, y) = (c as f64, r as f64);
                let wi = weight_at(x, y, cx, cy) * img.at(r, c);
                s += wi;
                sx += wi * x;
                sy += wi * y;
            }
        }
        if !(s > 0.0) {
            return Err(Error::Degenerate("total weighted flux is zero".into()));
        }
        Ok((sx / s, sy / s, s))
    };

    // Unit-weight centroid, then fixed-point refinement for a centred weight.
    let flux = img.total_flux();
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            sx += img.at(r, c) * c as f64;
            sy += img.at(r, c) * r as f64;
        }
    }
    let (mut cx, mut cy) = (sx / flux, sy / flux);
    if weight.is_some() {
        let mut converged = false;
        for _ in 0..CENTROID_MAX_ITERS {
            let (nx, ny, _) = centroid(cx, cy)?;
            let step = (nx - cx).hypot(ny - cy);
            cx = nx;
            cy = ny;
            if step < CENTROID_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                solver: "weighted centroid",
                iterations: CENTROID_MAX_ITERS,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
            });
        }
    }

    let (mut s, mut q11, mut q12, mut q22) = (0.0, 0.0, 0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (c as f64, r as f64);
            let wi = weight_at(x, y, cx, cy) * img.at(r, c);
            let (dx, dy) = (x - cx, y - cy);
            s += wi;
            q11 += wi * dx * dx;
            q12 += wi * dx * dy;
            q22 += wi * dy * dy;
        }
    }
    if !(s > 0.0) {
        return Err(Error::Degenerate("total weighted flux is zero".into()));
    }
    MomentTensor::new(q11 / s, q12 / s, q22 / s)
}

pub fn ellipticity_from_moments(q: &MomentTensor, form: EllipticityForm) -> Result<C64> {
    let det = q.determinant();
    let scale = (q.q11 + q.q22).max(f64::MIN_POSITIVE);
    if det < -1e-12 * scale * scale {
        return Err(Error::Degenerate(format!("negative discriminant {det}")));
    }
    let root = det.max(0.0).sqrt();
    let (num, den) = match form {
        EllipticityForm::Paper => (
            C64::new(q.q11 * q.q11 - q.q22 * q.q22, 2.0 * q.q12),
            q.q11 * q.q11 + q.q22 * q.q22 + 2.0 * root,
        ),
        EllipticityForm::Standard => (
            C64::new(q.q11 - q.q22, 2.0 * q.q12),
            q.q11 + q.q22 + 2.0 * root,
        ),
    };
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!(
            "ellipticity denominator {den} is not positive"
        )));
    }
    Ok(num / den)
}

/// `sqrt(q11 + q22)`.
pub fn psf_radius(q: &MomentTensor) -> f64 {
    (q.q11 + q.q22).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(e1: f64, e2: f64) -> Ellipticity {
        Ellipticity::new(e1, e2).unwrap()
    }

    #[test]
    fn shear_examples() {
        assert_eq!(shear_coords(Ellipticity::zero(), 3.0, 4.0), (3.0, 4.0));
        let (x, y) = shear_coords(e(0.1, 0.0), 1.0, 1.0);
        assert!((x - 0.9).abs() < 1e-15 && (y - 1.1).abs() < 1e-15);
        let (x, y) = shear_coords(e(0.0, 0.2), 1.0, 0.0);
        assert!((x - 1.0).abs() < 1e-15 && (y + 0.2).abs() < 1e-15);
    }

    #[test]
    fn ellipticity_examples() {
        let round = MomentTensor::new(2.0, 0.0, 2.0).unwrap();
        for form in [EllipticityForm::Paper, EllipticityForm::Standard] {
            assert_eq!(ellipticity_from_moments(&round, form).unwrap(), C64::new(0.0, 0.0));
        }
        let q = MomentTensor::new(2.0, 0.0, 1.0).unwrap();
        let paper = ellipticity_from_moments(&q, EllipticityForm::Paper).unwrap();
        let expected = 3.0 / (5.0 + 2.0 * 2f64.sqrt());
        assert!((paper.re - expected).abs() < 1e-15 && paper.im == 0.0);
        assert!((paper.re - 0.38320).abs() < 5e-5);
        let std = ellipticity_from_moments(&q, EllipticityForm::Standard).unwrap();
        assert!((std.re - 1.0 / (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((std.re - 0.17157).abs() < 5e-6);

        let zero = MomentTensor::new(0.0, 0.0, 0.0).unwrap();
        assert!(ellipticity_from_moments(&zero, EllipticityForm::Standard).is_err());
    }

    #[test]
    fn radius_examples() {
        assert_eq!(psf_radius(&MomentTensor::new(2.0, 0.0, 2.0).unwrap()), 2.0);
        assert_eq!(psf_radius(&MomentTensor::new(0.0, 0.0, 0.0).unwrap()), 0.0);
        assert_eq!(psf_radius(&MomentTensor::new(1.0, 0.5, 3.0).unwrap()), 2.0);
    }

    #[test]
    fn moment_tensor_validation() {
        assert!(MomentTensor::new(-1.0, 0.0, 1.0).is_err());
        assert!(MomentTensor::new(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn two_pixel_moments() {
        let mut px = vec![0.0; 9];
        px[3] = 1.0; // (row 1, col 0): x = -1 about the centroid
        px[5] = 1.0; // (row 1, col 2): x = +1
        let img = StarImage::new(3, px).unwrap();
        let q = brightness_moments(&img, None).unwrap();
        assert!((q.q11 - 1.0).abs() < 1e-15);
        assert_eq!(q.q22, 0.0);
        assert_eq!(q.q12, 0.0);
    }

    #[test]
    fn circular_star_moments() {
        let g = RadialProfile::Gaussian { scale: 3.0 };
        let img = render_star(g, Ellipticity::zero(), 33, 1.0).unwrap();
        let rot = img.rotate90();
        let asym = img
            .intensities()
            .iter()
            .zip(rot.intensities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(asym < 1e-12);
        let q = brightness_moments(&img, None).unwrap();
        assert!((q.q11 - q.q22).abs() < 1e-10 * q.q11);
        assert!(q.q12.abs() < 1e-10 * q.q11);
        let qs = brightness_moments(&img.scaled(7.5).unwrap(), None).unwrap();
        assert!((qs.q11 - q.q11).abs() < 1e-12 * q.q11);
        assert!((qs.q22 - q.q22).abs() < 1e-12 * q.q22);
    }

    #[test]
    fn flux_normalization_all_profiles() {
        let profiles = [
            RadialProfile::Gaussian { scale: 2.0 },
            RadialProfile::Moffat {
                scale: 2.0,
                beta: RadialProfile::DEFAULT_MOFFAT_BETA,
            },
            RadialProfile::Airy { scale: 1.5 },
        ];
        for p in profiles {
            let img = render_star(p, e(0.05, -0.1), 21, 1.0).unwrap();
            assert!((img.total_flux() - 1.0).abs() < 1e-9);
        }
        assert!(render_star(profiles[0], Ellipticity::zero(), 20, 1.0).is_err());
        assert!(render_star(RadialProfile::Moffat { scale: 1.0, beta: 0.5 }, Ellipticity::zero(), 5, 1.0).is_err());
    }

    #[test]
    fn round_trip_standard_form() {
        let g = RadialProfile::Gaussian { scale: 3.0 };
        let target = e(0.1, 0.05);
        let img = render_star(g, target, 33, 1.0).unwrap();
        let q = brightness_moments(&img, None).unwrap();
        let got = ellipticity_from_moments(&q, EllipticityForm::Standard).unwrap();
        assert!((got.re - 0.1).abs() < 0.005, "{got}");
        assert!((got.im - 0.05).abs() < 0.005, "{got}");
    }

    #[test]
    fn weighted_moments_converge() {
        let g = RadialProfile::Gaussian { scale: 2.5 };
        let img = render_star(g, e(0.15, 0.0), 31, 3.0).unwrap();
        let q = brightness_moments(&img, Some(RadialProfile::Gaussian { scale: 4.0 })).unwrap();
        assert!(q.q11 > q.q22, "{q:?}");
        assert!(q.q12.abs() < 1e-10);
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j1(2.5) - 0.497_094_102_464_274_4).abs() < 1e-14);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert!(bessel_j1(3.831_705_970_207_512).abs() < 1e-13);
    }

    #[test]
    fn airy_is_one_at_centre() {
        let a = RadialProfile::Airy { scale: 1.0 };
        assert_eq!(a.eval(0.0), 1.0);
        assert!((a.eval(1e-4) - 1.0).abs() < 1e-8);
    }
}
