//! Semidefinite programs with known optima.

use isac_core::channels::complex_normal;
use isac_core::linalg::{herm_eig, outer, CMat, CVec};
use isac_core::sdp::{rank_one, solve, Constraint, LinearForm, SdpOptions, SdpProblem, SdpStatus};
use isac_core::{trial_rng, C64};
use proptest::prelude::*;

fn tight() -> SdpOptions {
    SdpOptions { tol: 1e-9, ..SdpOptions::default() }
}

fn random_hermitian(n: usize, seed: u64) -> CMat {
    let mut rng = trial_rng(seed, 1);
    let a = CMat::from_fn(n, n, |_, _| complex_normal(&mut rng));
    (&a + a.adjoint()).scale(0.5)
}

fn unit(n: usize, i: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, i)] = C64::new(1.0, 0.0);
    m
}

/// `max Tr(C X)` with `Tr X = 1` is `λ_max(C)`.
fn max_eigen_problem(c: &CMat) -> SdpProblem {
    let n = c.nrows();
    SdpProblem {
        block_sizes: vec![n],
        nonneg_count: 0,
        free_count: 0,
        objective: LinearForm::default().block(0, -c.clone()),
        constraints: vec![Constraint { form: LinearForm::default().block(0, CMat::identity(n, n)), rhs: 1.0 }],
    }
}

#[test]
fn max_eigenvalue_program() {
    for seed in 0..5 {
        let c = random_hermitian(6, seed);
        let sol = solve(&max_eigen_problem(&c), &tight(), None).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let (vals, _) = herm_eig(&c);
        let top = vals[vals.len() - 1];
        assert!((-sol.primal_objective - top).abs() <= 1e-6 * top.abs().max(1.0), "{} vs {top}", -sol.primal_objective);
    }
}

/// `min Tr(diag(c) X)` with `X_ii ≥ d_i` is `Σ c_i d_i` for `c > 0`.
#[test]
fn diagonal_floor_program() {
    let c = [0.7, 2.0, 1.3, 0.2];
    let d = [1.0, 0.5, 2.0, 3.0];
    let n = c.len();
    let cm = CMat::from_diagonal(&CVec::from_iterator(n, c.iter().map(|&x| C64::new(x, 0.0))));
    let p = SdpProblem {
        block_sizes: vec![n],
        nonneg_count: n,
        free_count: 0,
        objective: LinearForm::default().block(0, cm),
        constraints: (0..n)
            .map(|i| Constraint { form: LinearForm::default().block(0, unit(n, i)).nonneg(i, -1.0), rhs: d[i] })
            .collect(),
    };
    let sol = solve(&p, &tight(), None).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    let expect: f64 = c.iter().zip(&d).map(|(a, b)| a * b).sum();
    assert!((sol.primal_objective - expect).abs() <= 1e-6 * expect, "{} vs {expect}", sol.primal_objective);
}

#[test]
fn planted_rank_one_is_recovered() {
    let mut rng = trial_rng(77, 0);
    let z = CVec::from_fn(5, |_, _| complex_normal(&mut rng));
    let sol = solve(&max_eigen_problem(&outer(&z)), &tight(), None).unwrap();
    let (v, defect) = rank_one(&sol.blocks[0]);
    let cos = v.dotc(&z).norm() / (v.norm() * z.norm());
    assert!(cos.min(1.0).acos() <= 1e-3, "angle {}", cos.acos());
    assert!(defect < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_are_psd_and_feasible(seed in 0u64..1000, n in 2usize..5) {
        let c = random_hermitian(n, seed);
        let sol = solve(&max_eigen_problem(&c), &tight(), None).unwrap();
        let (vals, _) = herm_eig(&sol.blocks[0]);
        prop_assert!(vals[0] >= -1e-8);
        prop_assert!((sol.blocks[0].trace().re - 1.0).abs() < 1e-6);
        prop_assert!((sol.primal_objective - sol.dual_objective).abs() < 1e-5);
    }
}
