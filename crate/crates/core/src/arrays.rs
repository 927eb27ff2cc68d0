//! Steering vectors for the BS linear array and the surface planar array.

use thiserror::Error;

use crate::linalg::{CVec, C64};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArrayError {
    #[error("array must have at least one element")]
    Empty,
}

/// A horizontal/vertical angle pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub horizontal: f64,
    pub vertical: f64,
}

impl AnglePair {
    pub fn new(horizontal: f64, vertical: f64) -> Self {
        Self { horizontal, vertical }
    }

    pub fn from_degrees(h: f64, v: f64) -> Self {
        Self::new(h.to_radians(), v.to_radians())
    }

    pub fn to_degrees(self) -> (f64, f64) {
        (self.horizontal.to_degrees(), self.vertical.to_degrees())
    }
}

/// Linear-array phase weight `sin θ_h · cos θ_v`.
pub fn ula_weight(a: AnglePair) -> f64 {
    a.horizontal.sin() * a.vertical.cos()
}

/// Partial derivatives of [`ula_weight`] with respect to (θ_h, θ_v).
pub fn ula_weight_grad(a: AnglePair) -> (f64, f64) {
    (
        a.horizontal.cos() * a.vertical.cos(),
        -a.horizontal.sin() * a.vertical.sin(),
    )
}

/// `a_m = exp(j η m sinθ_h cosθ_v)` for `m = 0..t_x`.
pub fn ula_steering(a: AnglePair, t_x: usize, eta_bs: f64) -> Result<CVec, ArrayError> {
    if t_x == 0 {
        return Err(ArrayError::Empty);
    }
    let w = ula_weight(a);
    Ok(CVec::from_fn(t_x, |m, _| C64::from_polar(1.0, eta_bs * m as f64 * w)))
}

/// Element index offsets along x and y for a row-major `n_x × n_y` grid.
pub fn grid_offsets(n_x: usize, n_y: usize) -> (Vec<f64>, Vec<f64>) {
    let mut kx = Vec::with_capacity(n_x * n_y);
    let mut ky = Vec::with_capacity(n_x * n_y);
    for ix in 0..n_x {
        for iy in 0..n_y {
            kx.push(ix as f64);
            ky.push(iy as f64);
        }
    }
    (kx, ky)
}

/// Per-element phase multipliers `k_x sinφ_h cosφ_v + k_y sinφ_h sinφ_v`.
pub fn upa_wavevector(a: AnglePair, n_x: usize, n_y: usize) -> Result<Vec<f64>, ArrayError> {
    if n_x == 0 || n_y == 0 {
        return Err(ArrayError::Empty);
    }
    let (kx, ky) = grid_offsets(n_x, n_y);
    let (wx, wy) = upa_weights(a);
    Ok(kx.iter().zip(&ky).map(|(x, y)| x * wx + y * wy).collect())
}

/// Coefficients multiplying the x and y offsets.
pub fn upa_weights(a: AnglePair) -> (f64, f64) {
    let s = a.horizontal.sin();
    (s * a.vertical.cos(), s * a.vertical.sin())
}

/// Jacobian of [`upa_weights`]: rows are (w_x, w_y), columns (φ_h, φ_v).
pub fn upa_weights_jacobian(a: AnglePair) -> [[f64; 2]; 2] {
    let (sh, ch) = a.horizontal.sin_cos();
    let (sv, cv) = a.vertical.sin_cos();
    [[ch * cv, -sh * sv], [ch * sv, sh * cv]]
}

/// `b = exp(j η k)` over the planar grid.
pub fn upa_steering(a: AnglePair, n_x: usize, n_y: usize, eta_ris: f64) -> Result<CVec, ArrayError> {
    let k = upa_wavevector(a, n_x, n_y)?;
    Ok(CVec::from_iterator(k.len(), k.iter().map(|&p| C64::from_polar(1.0, eta_ris * p))))
}
