//! Fisher information and Cramér-Rao bounds for two-dimensional departure
//! angles, with the complex echo amplitude as a nuisance parameter.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use thiserror::Error;

use crate::arrays::{self, AnglePair, ArrayError};
use crate::channels::ChannelDraw;
use crate::config::{Side, SystemConfig};
use crate::linalg::{trace_prod, CMat, CVec, C64, J};
use crate::link_metrics::{echo_noise_variance, NoiseModel};
use crate::star_ris::StarRisState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrbError {
    #[error("noise variance must be positive, got {0}")]
    Noise(f64),
    #[error("observation length must be at least one")]
    Length,
    #[error("unidentifiable geometry: information vanishes along angle direction ({0:.3}, {1:.3})")]
    Unidentifiable(f64, f64),
    #[error("no target with index {0}")]
    UnknownTarget(usize),
    #[error(transparent)]
    Array(#[from] ArrayError),
}

/// Parameters of one target: two angles and the complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams {
    pub angles: AnglePair,
    pub beta: C64,
}

impl TargetParams {
    /// `[angle_h, angle_v, Re β, Im β]`.
    pub fn zeta(&self) -> [f64; 4] {
        [self.angles.horizontal, self.angles.vertical, self.beta.re, self.beta.im]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimBlocks {
    pub angle_angle: Matrix2<f64>,
    pub angle_gain: Matrix2<f64>,
    pub gain_gain: Matrix2<f64>,
}

impl FimBlocks {
    pub fn assembled(&self) -> Matrix4<f64> {
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.angle_angle);
        j.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.angle_gain);
        j.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.angle_gain.transpose());
        j.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.gain_gain);
        j
    }

    /// `J_φφ − J_φβ J_ββ⁻¹ J_βφ`; `None` when the amplitude block is zero.
    pub fn schur(&self) -> Option<Matrix2<f64>> {
        let g = self.gain_gain[(0, 0)];
        if !(g > 0.0) {
            return None;
        }
        Some(self.angle_angle - self.angle_gain * self.angle_gain.transpose() / g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbReport {
    pub crb: Matrix2<f64>,
    /// `√diag(CRB)` in degrees, horizontal then vertical.
    pub root_crb_deg: [f64; 2],
    /// Number of identifiable angle directions (2, or 1 for a linear array).
    pub rank: usize,
}

/// `B = bᴴb` for the surface steering row and its derivatives in both
/// angles. With `∂b = jη k̇ ⊙ b`, the product rule gives
/// `Ḃ = jη (B diag(k̇) − diag(k̇) B)`.
pub fn b_matrix_derivatives(a: AnglePair, n_x: usize, n_y: usize, eta: f64) -> Result<(CMat, CMat, CMat), CrbError> {
    let b = arrays::upa_steering(a, n_x, n_y, eta)?;
    let (kx, ky) = arrays::grid_offsets(n_x, n_y);
    let jac = arrays::upa_weights_jacobian(a);
    let kdot = |col: usize| -> Vec<f64> { kx.iter().zip(&ky).map(|(x, y)| x * jac[0][col] + y * jac[1][col]).collect() };
    Ok(outer_with_derivatives(&b, &kdot(0), &kdot(1), eta))
}

/// `A = aᴴa` for the BS steering row and its angle derivatives.
pub fn a_matrix_derivatives(a: AnglePair, t_x: usize, eta: f64) -> Result<(CMat, CMat, CMat), CrbError> {
    let v = arrays::ula_steering(a, t_x, eta)?;
    let (gh, gv) = arrays::ula_weight_grad(a);
    let idx: Vec<f64> = (0..t_x).map(|m| m as f64).collect();
    let kh: Vec<f64> = idx.iter().map(|m| m * gh).collect();
    let kv: Vec<f64> = idx.iter().map(|m| m * gv).collect();
    Ok(outer_with_derivatives(&v, &kh, &kv, eta))
}

fn outer_with_derivatives(b: &CVec, kh: &[f64], kv: &[f64], eta: f64) -> (CMat, CMat, CMat) {
    let n = b.len();
    let big = CMat::from_fn(n, n, |i, j| b[i].conj() * b[j]);
    let d = |k: &[f64]| CMat::from_fn(n, n, |i, j| J * eta * (k[j] - k[i]) * big[(i, j)]);
    let dh = d(kh);
    let dv = d(kv);
    (big, dh, dv)
}

/// Fisher blocks for an echo `β F x` observed over `l` samples in white
/// noise of variance `sigma2`, with `F` and its angle derivatives given.
pub fn fim_blocks(
    f: &CMat,
    f_h: &CMat,
    f_v: &CMat,
    r_x: &CMat,
    beta: C64,
    l: usize,
    sigma2: f64,
) -> Result<FimBlocks, CrbError> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(CrbError::Noise(sigma2));
    }
    if l == 0 {
        return Err(CrbError::Length);
    }
    let k = 2.0 * l as f64 / sigma2;
    // Tr(X R Yᴴ) for the pairs we need.
    let cross = |x: &CMat, y: &CMat| trace_prod(&(x * r_x), &y.adjoint());
    let d = [f_h, f_v];
    let b2 = beta.norm_sqr();
    let mut aa = Matrix2::zeros();
    let mut ag = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            aa[(i, j)] = k * b2 * cross(d[j], d[i]).re;
        }
        let c = beta.conj() * cross(f, d[i]);
        ag[(i, 0)] = k * c.re;
        ag[(i, 1)] = k * (c * J).re;
    }
    let aa = (aa + aa.transpose()) * 0.5;
    let g = k * cross(f, f).re;
    Ok(FimBlocks { angle_angle: aa, angle_gain: ag, gain_gain: Matrix2::identity() * g })
}

/// Inverts the Schur complement of the amplitude block.
pub fn crb_aod(blocks: &FimBlocks) -> Result<CrbReport, CrbError> {
    let s = blocks.schur().ok_or(CrbError::Unidentifiable(1.0, 0.0))?;
    let eig = SymmetricEigen::new(s);
    let (imin, lmin) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    let lmax = eig.eigenvalues.max();
    if !(lmin > 1e-12 * lmax.abs()) || !(lmax > 0.0) {
        let v = eig.eigenvectors.column(imin);
        return Err(CrbError::Unidentifiable(v[0], v[1]));
    }
    let crb = s.try_inverse().ok_or(CrbError::Unidentifiable(1.0, 0.0))?;
    let crb = (crb + crb.transpose()) * 0.5;
    Ok(report(crb, 2))
}

fn report(crb: Matrix2<f64>, rank: usize) -> CrbReport {
    let root_crb_deg = [crb[(0, 0)].max(0.0).sqrt().to_degrees(), crb[(1, 1)].max(0.0).sqrt().to_degrees()];
    CrbReport { crb, root_crb_deg, rank }
}

/// Bound restricted to the identifiable directions: the pseudo-inverse of
/// the Schur complement. A linear array sees both angles only through one
/// spatial frequency, so its information matrix has rank one by
/// construction and the plain inverse does not exist.
pub fn crb_identifiable(blocks: &FimBlocks) -> Result<CrbReport, CrbError> {
    let s = blocks.schur().ok_or(CrbError::Unidentifiable(1.0, 0.0))?;
    let eig = SymmetricEigen::new(s);
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(CrbError::Unidentifiable(1.0, 0.0));
    }
    let mut crb = Matrix2::zeros();
    let mut rank = 0;
    for i in 0..2 {
        let l = eig.eigenvalues[i];
        if l > 1e-9 * lmax {
            let v = eig.eigenvectors.column(i);
            crb += v * v.transpose() / l;
            rank += 1;
        }
    }
    Ok(report(crb, rank))
}

/// Echo kernel `F` and its angle derivatives for target `m`.
///
/// Side-T: `F = Gᴴ Φ_tᴴ B Φ_t G`, angles at the surface. Side-R:
/// `F = gᴴ g` with `g = a + b̃ Φ_r G`, angles at the BS.
pub fn target_kernels(
    m: usize,
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    state: &StarRisState,
    angles: AnglePair,
) -> Result<(CMat, CMat, CMat, C64), CrbError> {
    let side = *ch.target_side.get(m).ok_or(CrbError::UnknownTarget(m))?;
    match side {
        Side::Transmit => {
            let (b, bh, bv) = b_matrix_derivatives(angles, cfg.ris_nx, cfg.ris_ny, cfg.eta_ris())?;
            let phi = CMat::from_diagonal(&state.z_t);
            let left = ch.g.adjoint() * phi.adjoint();
            let right = &phi * &ch.g;
            let wrap = |k: &CMat| &left * k * &right;
            Ok((wrap(&b), wrap(&bh), wrap(&bv), C64::new(ch.beta_ris[m], 0.0)))
        }
        Side::Reflect => {
            let a = arrays::ula_steering(angles, cfg.bs_antennas, cfg.eta_bs())?;
            let (gh, gv) = arrays::ula_weight_grad(angles);
            let eta = cfg.eta_bs();
            let da = |w: f64| CVec::from_fn(a.len(), |k, _| J * eta * (k as f64) * w * a[k]);
            let surface = crate::linalg::row_mul(&ch.scaled_target_ris(m).component_mul(&state.z_r), &ch.g);
            let g = &a + surface;
            let f = g.conjugate() * g.transpose();
            let deriv = |dg: &CVec| dg.conjugate() * g.transpose() + g.conjugate() * dg.transpose();
            let beta = ch.beta_bs[m].expect("side R target carries a BS amplitude");
            Ok((f, deriv(&da(gh)), deriv(&da(gv)), C64::new(beta, 0.0)))
        }
    }
}

/// CRB of target `m` at the given angles. Side-R angles are seen by the
/// linear BS array, so only their identifiable direction is bounded.
pub fn crb_for_target(
    m: usize,
    angles: AnglePair,
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    state: &StarRisState,
    r_x: &CMat,
    noise: &NoiseModel,
) -> Result<CrbReport, CrbError> {
    let (f, fh, fv, beta) = target_kernels(m, cfg, ch, state, angles)?;
    let sigma2 = match ch.target_side[m] {
        Side::Transmit => echo_noise_variance(ch, state, m, noise),
        Side::Reflect => noise.static_var,
    };
    let blocks = fim_blocks(&f, &fh, &fv, r_x, beta, cfg.chirp_length, sigma2)?;
    match ch.target_side[m] {
        Side::Transmit => crb_aod(&blocks),
        Side::Reflect => crb_identifiable(&blocks),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{draw_channels, trial_rng};
    use crate::config::reference_scenario;

    fn fd<F: Fn(f64) -> CMat>(f: F, x: f64) -> CMat {
        let e = 1e-6;
        (f(x + e) - f(x - e)).scale(0.5 / e)
    }

    #[test]
    fn surface_derivatives_match_differences() {
        let eta = std::f64::consts::PI;
        for (h, v) in [(0.7, 1.88), (-0.35, 1.95), (1.2, 0.4)] {
            let a = AnglePair::new(h, v);
            let (_, dh, dv) = b_matrix_derivatives(a, 6, 6, eta).unwrap();
            let nh = fd(|x| b_matrix_derivatives(AnglePair::new(x, v), 6, 6, eta).unwrap().0, h);
            let nv = fd(|x| b_matrix_derivatives(AnglePair::new(h, x), 6, 6, eta).unwrap().0, v);
            assert!((&dh - nh).norm() / dh.norm() < 1e-5);
            assert!((&dv - nv).norm() / dv.norm() < 1e-5);
        }
        let (b, _, dv) = b_matrix_derivatives(AnglePair::new(0.0, 0.9), 3, 4, eta).unwrap();
        assert!(dv.norm() < 1e-12);
        assert!((b.trace().re - 12.0).abs() < 1e-12);
    }

    #[test]
    fn bs_derivatives_match_differences() {
        let eta = std::f64::consts::PI;
        let (h, v) = (0.61, 1.92);
        let (_, dh, dv) = a_matrix_derivatives(AnglePair::new(h, v), 8, eta).unwrap();
        let nh = fd(|x| a_matrix_derivatives(AnglePair::new(x, v), 8, eta).unwrap().0, h);
        let nv = fd(|x| a_matrix_derivatives(AnglePair::new(h, x), 8, eta).unwrap().0, v);
        assert!((&dh - nh).norm() / dh.norm() < 1e-5);
        assert!((&dv - nv).norm() / dv.norm() < 1e-5);
    }

    #[test]
    fn zero_surface_is_unidentifiable() {
        let (cfg, sc) = reference_scenario();
        let ch = draw_channels(&cfg, &sc, &mut trial_rng(1, 0)).unwrap();
        let mut st = StarRisState::uniform(cfg.n(), cfg.amplification_factor);
        st.z_t.fill(C64::new(0.0, 0.0));
        let r = CMat::identity(8, 8);
        let m = ch.target_side.iter().position(|&s| s == Side::Transmit).unwrap();
        let noise = NoiseModel::from_config(&cfg);
        let err = crb_for_target(m, sc.targets[m].angles_ris, &cfg, &ch, &st, &r, &noise).unwrap_err();
        assert!(err.to_string().contains("unidentifiable geometry"));
    }

    #[test]
    fn linear_array_information_is_rank_one() {
        let (cfg, sc) = reference_scenario();
        let ch = draw_channels(&cfg, &sc, &mut trial_rng(3, 0)).unwrap();
        let st = StarRisState::uniform(cfg.n(), cfg.amplification_factor);
        let m = ch.target_side.iter().position(|&s| s == Side::Reflect).unwrap();
        let angles = sc.targets[m].angles_bs.unwrap();
        let (f, fh, fv, beta) = target_kernels(m, &cfg, &ch, &st, angles).unwrap();
        let r = CMat::identity(8, 8);
        let blocks = fim_blocks(&f, &fh, &fv, &r, beta, 100, 1e-11).unwrap();
        assert!(matches!(crb_aod(&blocks), Err(CrbError::Unidentifiable(..))));
        let rep = crb_identifiable(&blocks).unwrap();
        assert_eq!(rep.rank, 1);
        // The bound along the identifiable direction inverts the information there.
        let s = blocks.schur().unwrap();
        let pinv_check = s * rep.crb * s;
        assert!((pinv_check - s).norm() <= 1e-9 * s.norm());
    }

    #[test]
    fn side_t_kernel_matches_echo_kernel() {
        let (cfg, sc) = reference_scenario();
        let ch = draw_channels(&cfg, &sc, &mut trial_rng(2, 0)).unwrap();
        let st = StarRisState::uniform(cfg.n(), cfg.amplification_factor);
        let m = ch.target_side.iter().position(|&s| s == Side::Transmit).unwrap();
        let (f, ..) = target_kernels(m, &cfg, &ch, &st, sc.targets[m].angles_ris).unwrap();
        let direct = ch.g.adjoint() * crate::star_ris::echo_kernel(&st.z_t, &ch.target_ris[m]) * &ch.g;
        assert!((&f - &direct).norm() <= 1e-9 * direct.norm());
    }

    #[test]
    fn decoupled_nuisance_gives_plain_inverse() {
        let blocks = FimBlocks {
            angle_angle: Matrix2::new(4.0, 1.0, 1.0, 3.0),
            angle_gain: Matrix2::zeros(),
            gain_gain: Matrix2::identity() * 2.0,
        };
        let r = crb_aod(&blocks).unwrap();
        let inv = blocks.angle_angle.try_inverse().unwrap();
        assert!((r.crb - inv).norm() < 1e-14);
    }
}
