//! Complex dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// Row-vector product `h M`, with `h` stored as a column.
pub fn row_mul(h: &CVec, m: &CMat) -> CVec {
    m.transpose() * h
}

/// `v vᴴ`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `xᴴ v` treating `x` as a row: returns `Σ x_i v_i` (no conjugation).
pub fn dotu(x: &CVec, v: &CVec) -> C64 {
    x.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// Real part of the trace.
pub fn re_trace(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `Re Tr(A B)` without forming the product.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `Tr(A B)` as a complex number.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Quadratic form `vᴴ M v`, real part.
pub fn quad(v: &CVec, m: &CMat) -> f64 {
    v.dotc(&(m * v)).re
}

/// Symmetrizes a nearly Hermitian matrix.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(m: &CMat) -> f64 {
    let (v, _) = herm_eig(m);
    v.last().copied().unwrap_or(0.0)
}

/// Projection onto the PSD cone in Frobenius norm.
pub fn psd_project(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (j, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let u = vecs.column(j);
            out += (u * u.adjoint()).scale(l);
        }
    }
    out
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Diagonal matrix from a vector.
pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// Hermitian check to an absolute tolerance scaled by the matrix norm.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= tol * m.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn eig_reconstructs() {
        let a = sample(5, 3);
        let h = &a * a.adjoint();
        let (vals, vecs) = herm_eig(&h);
        let rec = &vecs * CMat::from_diagonal(&CVec::from_iterator(5, vals.iter().map(|&l| C64::new(l, 0.0)))) * vecs.adjoint();
        assert!(rel_err(&rec, &h) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_helpers_agree() {
        let a = sample(4, 1);
        let b = sample(4, 2);
        let direct = (&a * &b).trace();
        assert!((trace_prod(&a, &b) - direct).norm() < 1e-12);
        assert!((re_trace_prod(&a, &b) - direct.re).abs() < 1e-12);
    }

    #[test]
    fn projection_is_psd_and_idempotent() {
        let a = hermitian_part(&sample(6, 9));
        let p = psd_project(&a);
        let (vals, _) = herm_eig(&p);
        assert!(vals[0] > -1e-12);
        assert!(rel_err(&psd_project(&p), &p) < 1e-10);
    }
}
