//! Hybrid surface state: active transmissive coefficients and passive
//! reflective phases, with feasibility repair and power bookkeeping.

use thiserror::Error;

use crate::linalg::{outer, CMat, CVec, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarRisError {
    #[error("amplification budget below unit-gain floor: P_A^2 = {budget_sq} < N = {n}")]
    BudgetBelowFloor { budget_sq: f64, n: usize },
    #[error("coefficient vectors must have equal nonzero length ({t} vs {r})")]
    Length { t: usize, r: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Surface coefficients for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StarRisState {
    /// Transmissive coefficients, `|z_t(n)| ≥ 1`.
    pub z_t: CVec,
    /// Reflective coefficients, `|z_r(n)| = 1`.
    pub z_r: CVec,
}

impl StarRisState {
    /// Uniform amplitude `p_a/√N`, zero phase, and unit reflection.
    pub fn uniform(n: usize, p_a: f64) -> Self {
        let amp = p_a / (n as f64).sqrt();
        Self {
            z_t: CVec::from_element(n, C64::new(amp, 0.0)),
            z_r: CVec::from_element(n, C64::new(1.0, 0.0)),
        }
    }

    /// All elements at unit gain and zero phase on both sides.
    pub fn passive(n: usize) -> Self {
        Self::uniform(n, (n as f64).sqrt())
    }

    pub fn n(&self) -> usize {
        self.z_t.len()
    }

    /// `Z_t = z_t z_tᴴ`.
    pub fn lifted_t(&self) -> CMat {
        outer(&self.z_t)
    }

    /// `Z_r = z_r z_rᴴ`.
    pub fn lifted_r(&self) -> CMat {
        outer(&self.z_r)
    }

    /// Checks the three state invariants to tolerance `tol`.
    pub fn is_feasible(&self, p_a: f64, tol: f64) -> bool {
        self.z_r.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
            && self.z_t.iter().all(|z| z.norm() >= 1.0 - tol)
            && self.z_t.norm_squared() <= p_a * p_a * (1.0 + tol)
    }
}

/// `√Σ|z_t(n)|²`.
pub fn amplification_factor(state: &StarRisState) -> f64 {
    state.z_t.norm()
}

/// Repairs raw solver output into a feasible state.
///
/// Reflective entries keep their phase at unit modulus. Transmissive moduli are
/// raised to at least one and, if the budget is exceeded, the excess above the
/// floor is shrunk until `Σ|z_t|² = P_A²`.
pub fn project_feasible(raw_zt: &CVec, raw_zr: &CVec, p_a: f64) -> Result<StarRisState, StarRisError> {
    let n = raw_zt.len();
    if n == 0 || raw_zr.len() != n {
        return Err(StarRisError::Length { t: n, r: raw_zr.len() });
    }
    let budget_sq = p_a * p_a;
    if budget_sq < n as f64 * (1.0 - 1e-12) {
        return Err(StarRisError::BudgetBelowFloor { budget_sq, n });
    }
    let unit = |z: C64| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
    let z_r = raw_zr.map(unit);
    let mut mods: Vec<f64> = raw_zt.iter().map(|z| z.norm().max(1.0)).collect();
    let energy: f64 = mods.iter().map(|m| m * m).sum();
    if energy > budget_sq {
        shrink_to_budget(&mut mods, budget_sq);
    }
    let z_t = CVec::from_iterator(n, raw_zt.iter().zip(&mods).map(|(z, &m)| unit(*z) * m));
    Ok(StarRisState { z_t, z_r })
}

/// Like [`project_feasible`], then raises every transmissive modulus by a
/// common factor so that `Σ|z_t|² = P_A²` exactly.
pub fn project_full_budget(raw_zt: &CVec, raw_zr: &CVec, p_a: f64) -> Result<StarRisState, StarRisError> {
    let mut s = project_feasible(raw_zt, raw_zr, p_a)?;
    let norm = s.z_t.norm();
    if norm < p_a {
        s.z_t *= C64::new(p_a / norm, 0.0);
    }
    Ok(s)
}

/// Scales moduli toward one, `m ← 1 + s(m − 1)`, choosing `s ∈ [0, 1]` by
/// bisection so the energy meets the budget. Keeps every modulus at or above one.
fn shrink_to_budget(mods: &mut [f64], budget_sq: f64) {
    let energy = |s: f64, m: &[f64]| m.iter().map(|&x| (1.0 + s * (x - 1.0)).powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if energy(mid, mods) > budget_sq {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for m in mods.iter_mut() {
        *m = 1.0 + lo * (*m - 1.0);
    }
}

/// `Ψ = Φ_tᴴ B Φ_t` for `B = bᴴb` with `b` the surface steering row.
pub fn echo_kernel(z_t: &CVec, b: &CVec) -> CMat {
    // B_{ij} = conj(b_i) b_j; Φ_t = diag(z_t).
    CMat::from_fn(z_t.len(), z_t.len(), |i, j| z_t[i].conj() * b[i].conj() * b[j] * z_t[j])
}

/// Power drawn by the active elements.
///
/// Terms: forward signal `Tr(Φ G R Gᴴ Φᴴ)`; for each Side-T target the
/// re-amplified echo `β² Tr(Ψ G R Gᴴ Ψᴴ)` and re-amplified forward noise
/// `σ² Tr(Ψ Ψᴴ)`; own noise `σ² Tr(Φᴴ Φ)`.
pub fn ris_power(
    state: &StarRisState,
    g: &CMat,
    r_x: &CMat,
    side_t_targets: &[(CVec, f64)],
    noise_var: f64,
) -> Result<f64, StarRisError> {
    let n = state.n();
    if g.nrows() != n || g.ncols() != r_x.nrows() || !r_x.is_square() {
        return Err(StarRisError::Dimension(format!(
            "G is {}x{}, R_x is {}x{}, N = {n}",
            g.nrows(),
            g.ncols(),
            r_x.nrows(),
            r_x.ncols()
        )));
    }
    let grg = g * r_x * g.adjoint();
    let zt = &state.z_t;
    let forward: f64 = (0..n).map(|i| zt[i].norm_sqr() * grg[(i, i)].re).sum();
    let own_noise = noise_var * zt.norm_squared();
    let mut echo = 0.0;
    for (b, beta) in side_t_targets {
        if b.len() != n {
            return Err(StarRisError::Dimension(format!("steering length {} vs N = {n}", b.len())));
        }
        let psi = echo_kernel(zt, b);
        echo += beta * beta * crate::linalg::re_trace(&(&psi * &grg * psi.adjoint()));
        echo += noise_var * psi.norm_squared();
    }
    Ok(forward + echo + own_noise)
}
