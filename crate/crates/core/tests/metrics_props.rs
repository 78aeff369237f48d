mod common;

use cvfbm::grid::dft2;
use cvfbm::metrics::{evaluate, mse, rmse, snr_db};
use cvfbm::ComplexField;
use proptest::prelude::*;

use common::random_field;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmse_squared_is_mse(rows in 1usize..=20, cols in 1usize..=20, seed: u64) {
        let (a, b) = (random_field(rows, cols, seed), random_field(rows, cols, seed ^ 1));
        let r = rmse(&a, &b).unwrap();
        prop_assert_eq!(r, mse(&a, &b).unwrap().sqrt());
        prop_assert!((r * r - mse(&a, &b).unwrap()).abs() <= 4.0 * f64::EPSILON * r * r);
        let report = evaluate(&a, &b).unwrap();
        prop_assert_eq!(report.rmse, r);
        prop_assert_eq!(report.n_points, rows * cols);
    }

    #[test]
    fn rmse_survives_unitary_dft(rows in 1usize..=32, cols in 1usize..=32, seed: u64) {
        let (a, b) = (random_field(rows, cols, seed), random_field(rows, cols, seed ^ 2));
        let spatial = rmse(&a, &b).unwrap();
        let spectral = rmse(&dft2(&a), &dft2(&b)).unwrap();
        prop_assert!((spatial - spectral).abs() <= 1e-10 * spatial.max(1.0));
    }

    #[test]
    fn snr_falls_as_noise_grows(seed: u64, steps in proptest::collection::vec(0.01f64..1.0, 2..6)) {
        let truth = random_field(12, 12, seed);
        let noise = random_field(12, 12, seed ^ 3);
        let mut amp = 0.0;
        let mut last = f64::INFINITY;
        for s in steps {
            amp += s;
            let est = ComplexField::from_fn(12, 12, |r, c| {
                let i = r * 12 + c;
                truth.as_slice()[i] + noise.as_slice()[i] * amp
            });
            let v = snr_db(&truth, &est).unwrap();
            prop_assert!(v < last);
            last = v;
        }
    }
}
