//! Independent oracles used by the acceptance run.
//!
//! Nothing here calls the crate's transforms or solvers; the sparse-recovery
//! oracle builds its measurement columns straight from the DFT formula.

use std::f64::consts::PI;

use cvfbm::grid::idft2;
use cvfbm::{ComplexField, GridIndex, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// A spectrum with `k` nonzero coefficients drawn uniformly, and its field.
pub fn planted_sparse(rows: usize, cols: usize, k: usize, seed: u64) -> (ComplexField, ComplexField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = ComplexField::zeros(rows, cols);
    for i in rand::seq::index::sample(&mut rng, rows * cols, k) {
        let mag = rng.random_range(0.5..1.5);
        let phase = rng.random_range(0.0..2.0 * PI);
        spec.as_mut_slice()[i] = C64::from_polar(mag, phase);
    }
    let field = idft2(&spec);
    (spec, field)
}

pub fn rel_err(est: &ComplexField, truth: &ComplexField) -> f64 {
    let num: f64 = est
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    num.sqrt() / truth.norm()
}

/// Exhaustive search for the sparsest spectrum consistent with spatial
/// samples `values` at `mask`, over supports of size up to `max_k`.
///
/// Columns are `exp(2 pi i (k r / M + l c / N)) / sqrt(MN)`, built directly
/// from the formula rather than from the crate's FFT. Returns `None` when no
/// support fits or the sparsest fit is not unique.
pub fn sparsest_spectrum(
    rows: usize,
    cols: usize,
    mask: &[GridIndex],
    values: &[C64],
    max_k: usize,
) -> Option<ComplexField> {
    assert!((1..=3).contains(&max_k));
    let n = rows * cols;
    let scale = 1.0 / (n as f64).sqrt();
    let atoms: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let (k, l) = (j / cols, j % cols);
            mask.iter()
                .map(|g| {
                    let t = 2.0 * PI * ((k * g.row) as f64 / rows as f64 + (l * g.col) as f64 / cols as f64);
                    C64::from_polar(scale, t)
                })
                .collect()
        })
        .collect();
    let b: Vec<C64> = atoms.iter().map(|a| inner(a, values)).collect();
    let gram = |i: usize, j: usize| inner(&atoms[i], &atoms[j]);
    let y2: f64 = values.iter().map(|v| v.norm_sqr()).sum();

    let mut g = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let v = gram(i, j);
            g[i * n + j] = v;
            g[j * n + i] = v.conj();
        }
    }
    for k in 1..=max_k {
        let mut found: Vec<(Vec<usize>, Vec<C64>)> = Vec::new();
        let mut support = (0..k).collect::<Vec<_>>();
        loop {
            let m: Vec<C64> = support
                .iter()
                .flat_map(|&i| support.iter().map(move |&j| (i, j)))
                .map(|(i, j)| g[i * n + j])
                .collect();
            let rhs: Vec<C64> = support.iter().map(|&i| b[i]).collect();
            if let Some(x) = solve_small(m, rhs.clone()) {
                let fit: f64 = rhs.iter().zip(&x).map(|(r, xi)| (r.conj() * xi).re).sum();
                if y2 - fit <= 1e-12 * y2 {
                    found.push((support.clone(), x));
                    if found.len() > 1 {
                        return None;
                    }
                }
            }
            if !next_combination(&mut support, n) {
                break;
            }
        }
        if let Some((s, x)) = found.pop() {
            let mut spec = ComplexField::zeros(rows, cols);
            for (i, v) in s.into_iter().zip(x) {
                spec.as_mut_slice()[i] = v;
            }
            return Some(spec);
        }
    }
    None
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on a tiny dense system.
fn solve_small(mut m: Vec<C64>, mut rhs: Vec<C64>) -> Option<Vec<C64>> {
    let k = rhs.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a * k + col].norm().total_cmp(&m[b * k + col].norm()))?;
        if m[piv * k + col].norm() < 1e-10 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                m.swap(piv * k + j, col * k + j);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..k {
            let f = m[r * k + col] / m[col * k + col];
            for j in col..k {
                let v = m[col * k + j];
                m[r * k + j] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); k];
    for r in (0..k).rev() {
        let mut acc = rhs[r];
        for j in r + 1..k {
            acc -= m[r * k + j] * x[j];
        }
        x[r] = acc / m[r * k + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvfbm::cs::{bp_reconstruct, EqualitySolverConfig};
    use cvfbm::grid::dft2;
    use cvfbm::sampling::{random_mask, subsample};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn sparse_oracle_finds_planted_spectrum(seed: u64, k in 1usize..=2) {
            let (spec, field) = planted_sparse(8, 8, k, seed);
            let mask = random_mask(8, 8, 24, seed ^ 9).unwrap();
            let s = subsample(&field, &mask).unwrap();
            let oracle = sparsest_spectrum(8, 8, &mask, &s.values(), 2).unwrap();
            prop_assert!(rel_err(&oracle, &spec) < 1e-8);
        }
    }

    #[test]
    fn oracle_rejects_underdetermined_data() {
        let (_, field) = planted_sparse(8, 8, 2, 4);
        let mask = random_mask(8, 8, 2, 4).unwrap();
        let s = subsample(&field, &mask).unwrap();
        assert!(sparsest_spectrum(8, 8, &mask, &s.values(), 2).is_none());
    }

    #[test]
    fn basis_pursuit_agrees_with_sparse_oracle() {
        let cfg = EqualitySolverConfig {
            max_iters: 20_000,
            primal_tol: 1e-10,
            dual_tol: 1e-10,
            ..EqualitySolverConfig::default()
        };
        for seed in 0..2 {
            let (spec, field) = planted_sparse(16, 16, 3, seed);
            let mask = random_mask(16, 16, 64, 1000 + seed).unwrap();
            let s = subsample(&field, &mask).unwrap();
            let oracle = sparsest_spectrum(16, 16, &mask, &s.values(), 3).expect("unique sparsest fit");
            assert!(rel_err(&oracle, &spec) < 1e-8);
            let rec = bp_reconstruct(&s, &cfg).unwrap();
            assert!(rel_err(&dft2(&rec), &oracle) < 1e-6, "seed {seed}");
        }
    }
}
