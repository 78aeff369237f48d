use cvfbm::psf::{
    brightness_moments, ellipticity_from_moments, render_star, Ellipticity, EllipticityForm, RadialProfile,
    StarImage,
};
use proptest::prelude::*;

const FORMS: [EllipticityForm; 2] = [EllipticityForm::Paper, EllipticityForm::Standard];

fn disc() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..0.3, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| (r * t.cos(), r * t.sin()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_round_trip((e1, e2) in disc(), scale in 2.0f64..4.0, size in (16usize..=24).prop_map(|k| 2 * k + 1)) {
        let img = render_star(RadialProfile::Gaussian { scale }, Ellipticity::new(e1, e2).unwrap(), size, 1.0).unwrap();
        let q = brightness_moments(&img, None).unwrap();
        let e = ellipticity_from_moments(&q, EllipticityForm::Standard).unwrap();
        prop_assert!((e.re - e1).abs() < 0.005 && (e.im - e2).abs() < 0.005, "{e} vs ({e1}, {e2})");
    }

    #[test]
    fn quarter_turn_negates_ellipticity((e1, e2) in disc(), scale in 2.0f64..3.5) {
        let img = render_star(RadialProfile::Gaussian { scale }, Ellipticity::new(e1, e2).unwrap(), 33, 1.0).unwrap();
        let rot = img.rotate90();
        for form in FORMS {
            let a = ellipticity_from_moments(&brightness_moments(&img, None).unwrap(), form).unwrap();
            let b = ellipticity_from_moments(&brightness_moments(&rot, None).unwrap(), form).unwrap();
            prop_assert!((a.re + b.re).abs() < 0.002 && (a.im + b.im).abs() < 0.002, "{form:?}: {a} vs {b}");
        }
    }

    #[test]
    fn moments_are_positive_semidefinite(
        pixels in proptest::collection::vec(0.0f64..1.0, 49),
        hot in 0usize..49,
    ) {
        let mut pixels = pixels;
        pixels[hot] += 1.0;
        let img = StarImage::new(7, pixels).unwrap();
        let q = brightness_moments(&img, None).unwrap();
        prop_assert!(q.q11 >= 0.0 && q.q22 >= 0.0);
        prop_assert!(q.determinant() >= -1e-12 * (q.q11 + q.q22).powi(2));
    }
}
