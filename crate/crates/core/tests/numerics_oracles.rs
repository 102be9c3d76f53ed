mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

use twic_core::numerics::{least_norm_solve, pinv_apply, pseudo_inverse, LinearSystem, DEFAULT_TOL};

fn wide_dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..6).prop_flat_map(|r| (Just(r), r..9))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn least_norm_matches_normal_equations((r, n) in wide_dims(), seed in any::<u64>()) {
        let a = random_matrix(r, n, seed);
        let b = random_vector(r, seed ^ 1);
        let x = least_norm_solve(&LinearSystem::new(a.clone(), b.clone()).unwrap(), DEFAULT_TOL).unwrap();
        let oracle = min_norm_lu(&a, &b);
        prop_assert!((&x - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0));
        prop_assert!((&a * &x - &b).norm() <= 1e-9 * b.norm().max(1.0));
    }

    #[test]
    fn least_norm_is_no_longer_than_any_feasible_point((r, n) in wide_dims(), seed in any::<u64>()) {
        prop_assume!(n > r);
        let a = random_matrix(r, n, seed);
        let b = random_vector(r, seed ^ 2);
        let x = least_norm_solve(&LinearSystem::new(a.clone(), b.clone()).unwrap(), DEFAULT_TOL).unwrap();
        for trial in 0..4u64 {
            let w = random_vector(n - r, seed ^ (10 + trial));
            let x0 = feasible_point(&a, &b, &(w * Complex64::new(3.0, 0.0)));
            prop_assert!((&a * &x0 - &b).norm() <= 1e-8 * b.norm().max(1.0));
            prop_assert!(x.norm() <= x0.norm() * (1.0 + 1e-10));
            // the difference lies in null(A), and x is orthogonal to it
            let d = &x0 - &x;
            prop_assert!(x.dotc(&d).norm() <= 1e-8 * x.norm() * d.norm().max(1.0));
        }
    }

    #[test]
    fn least_norm_scales_with_rhs((r, n) in wide_dims(), seed in any::<u64>(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3);
        let a = random_matrix(r, n, seed);
        let b = random_vector(r, seed ^ 3);
        let x = least_norm_solve(&LinearSystem::new(a.clone(), b.clone()).unwrap(), DEFAULT_TOL).unwrap();
        let xc = least_norm_solve(&LinearSystem::new(a, &b * c).unwrap(), DEFAULT_TOL).unwrap();
        prop_assert!((&xc - &x * c).norm() <= 1e-9 * (x.norm() * c.norm()).max(1.0));
    }

    #[test]
    fn pinv_recovers_exact_symbols(m in 2usize..8, seed in any::<u64>()) {
        let n = 1 + (seed as usize) % m;
        let a = random_matrix(m, n, seed);
        let s = random_vector(n, seed ^ 4);
        let y = &a * &s;
        let est = pinv_apply(&a, &y, DEFAULT_TOL).unwrap();
        prop_assert!((&est - &s).norm() <= 1e-10 * s.norm());
    }
}

#[test]
fn pinv_noise_variance_matches_inverse_gram() {
    let a = random_matrix(4, 3, 77);
    let pinv = pseudo_inverse(&a, DEFAULT_TOL).unwrap();
    let diag = zf_noise_diag(&a);
    let p: f64 = 1e6;
    let sp = p.sqrt();
    let s = random_vector(3, 78);
    let mut r = rng(79);
    let trials = 10_000;
    let mut acc = [0.0f64; 3];
    for _ in 0..trials {
        // unit-variance circular noise
        let noise = V::from_fn(4, |_, _| cgauss(&mut r));
        let y = &a * &s * Complex64::new(sp, 0.0) + noise;
        let est = &pinv * y / Complex64::new(sp, 0.0);
        for (i, e) in est.iter().enumerate() {
            acc[i] += (e - s[i]).norm_sqr();
        }
    }
    for i in 0..3 {
        let empirical = acc[i] / trials as f64;
        let analytic = diag[i] / p;
        assert!(rel_close(empirical, analytic, 0.1), "stream {i}: {empirical} vs {analytic}");
    }
}
