//! Rician communication links and deterministic sensing links.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::arrays::{self, ArrayError};
use crate::config::{Side, Scenario, SystemConfig};
use crate::linalg::{CMat, CVec, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    Distance(f64),
    #[error("radar parameters must be nonnegative and finite")]
    Radar,
    #[error(transparent)]
    Array(#[from] ArrayError),
}

/// Per-trial random stream: a ChaCha8 generator keyed by the master seed and
/// positioned on its own stream for each trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `α_0 d^{−ρ}`.
pub fn path_loss(d_m: f64, alpha0: f64, rho: f64) -> Result<f64, ChannelError> {
    if !(d_m > 0.0) || !d_m.is_finite() {
        return Err(ChannelError::Distance(d_m));
    }
    Ok(alpha0 * d_m.powf(-rho))
}

/// Round-trip amplitude `√(λ²Λ / ((4π)³ d⁴))`.
pub fn radar_round_trip(lambda_m: f64, rcs_m2: f64, d_m: f64) -> Result<f64, ChannelError> {
    if !(d_m > 0.0) || !d_m.is_finite() {
        return Err(ChannelError::Distance(d_m));
    }
    if !(lambda_m >= 0.0) || !(rcs_m2 >= 0.0) || !lambda_m.is_finite() || !rcs_m2.is_finite() {
        return Err(ChannelError::Radar);
    }
    let four_pi_cubed = (4.0 * std::f64::consts::PI).powi(3);
    Ok((lambda_m * lambda_m * rcs_m2 / (four_pi_cubed * d_m.powi(4))).sqrt())
}

/// One `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `√α (√(κ/(1+κ)) LOS + √(1/(1+κ)) NLOS)` with i.i.d. `CN(0,1)` NLOS entries.
pub fn rician_sample<R: Rng + ?Sized>(los: &CMat, alpha: f64, kappa: f64, rng: &mut R) -> CMat {
    let w_los = (kappa / (1.0 + kappa)).sqrt();
    let w_nlos = (1.0 / (1.0 + kappa)).sqrt();
    let sa = alpha.sqrt();
    // Column-major fill keeps the draw order fixed for a given shape.
    let mut out = CMat::zeros(los.nrows(), los.ncols());
    for j in 0..los.ncols() {
        for i in 0..los.nrows() {
            let nlos = complex_normal(rng);
            out[(i, j)] = (los[(i, j)] * w_los + nlos * w_nlos) * sa;
        }
    }
    out
}

fn rician_vec<R: Rng + ?Sized>(los: &CVec, alpha: f64, kappa: f64, rng: &mut R) -> CVec {
    let m = CMat::from_column_slice(los.len(), 1, los.as_slice());
    let s = rician_sample(&m, alpha, kappa, rng);
    CVec::from_column_slice(s.as_slice())
}

/// All link matrices for one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// BS to surface, `N × T_x`.
    pub g: CMat,
    /// Line-of-sight part of `g` (unit-modulus entries).
    pub g_los: CMat,
    pub alpha_bs_ris: f64,
    /// Linear Rician factor the draw was made with.
    pub rician_factor: f64,
    /// Surface to user, length `N`, stored as a column but used as a row.
    pub user_ris: Vec<CVec>,
    pub user_ris_los: Vec<CVec>,
    pub alpha_ris_user: Vec<f64>,
    /// BS to user, length `T_x`, present for Side-R users.
    pub user_direct: Vec<Option<CVec>>,
    pub user_side: Vec<Side>,
    /// BS steering `a(θ)` of each Side-R target.
    pub target_bs: Vec<Option<CVec>>,
    /// Surface steering `b(φ)` of each target.
    pub target_ris: Vec<CVec>,
    pub target_side: Vec<Side>,
    /// Round-trip amplitude through the surface.
    pub beta_ris: Vec<f64>,
    /// Round-trip amplitude from the BS, Side-R targets only.
    pub beta_bs: Vec<Option<f64>>,
}

impl ChannelDraw {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn t_x(&self) -> usize {
        self.g.ncols()
    }

    /// `b̃ = √(β_RIS/β_BS) b` for Side-R targets, `b` otherwise.
    pub fn scaled_target_ris(&self, m: usize) -> CVec {
        match self.beta_bs[m] {
            Some(bb) => self.target_ris[m].scale((self.beta_ris[m] / bb).sqrt()),
            None => self.target_ris[m].clone(),
        }
    }

    /// The amplitude that multiplies the whole echo of target `m`.
    pub fn echo_amplitude(&self, m: usize) -> f64 {
        self.beta_bs[m].unwrap_or(self.beta_ris[m])
    }
}

/// Samples every link for one trial.
pub fn draw_channels<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    sc: &Scenario,
    rng: &mut R,
) -> Result<ChannelDraw, ChannelError> {
    let (nx, ny, tx) = (cfg.ris_nx, cfg.ris_ny, cfg.bs_antennas);
    let (eb, er) = (cfg.eta_bs(), cfg.eta_ris());
    let pl = |d: f64| path_loss(d, cfg.reference_path_loss, cfg.path_loss_exponent);
    let k = cfg.rician_factor;

    let a_bs = arrays::ula_steering(sc.bs_ris.angles_bs, tx, eb)?;
    let b_ris = arrays::upa_steering(sc.bs_ris.angles_ris, nx, ny, er)?;
    // Receive response on the surface times transmit response at the BS.
    let g_los = b_ris.conjugate() * a_bs.transpose();
    let alpha_bs_ris = pl(sc.bs_ris.distance_m)?;
    let g = rician_sample(&g_los, alpha_bs_ris, k, rng);

    let mut user_ris = Vec::new();
    let mut user_ris_los = Vec::new();
    let mut alpha_ris_user = Vec::new();
    let mut user_direct = Vec::new();
    let mut user_side = Vec::new();
    for u in &sc.users {
        let los = arrays::upa_steering(u.angles_ris, nx, ny, er)?;
        let a = pl(u.distance_ris_m)?;
        user_ris.push(rician_vec(&los, a, k, rng));
        user_ris_los.push(los);
        alpha_ris_user.push(a);
        user_side.push(u.side);
        user_direct.push(match (u.side, u.angles_bs, u.distance_bs_m) {
            (Side::Reflect, Some(ang), Some(d)) => {
                let los = arrays::ula_steering(ang, tx, eb)?;
                Some(rician_vec(&los, pl(d)?, k, rng))
            }
            _ => None,
        });
    }

    let lambda = cfg.wavelength();
    let rcs = cfg.radar_cross_section_m2;
    let mut target_bs = Vec::new();
    let mut target_ris = Vec::new();
    let mut target_side = Vec::new();
    let mut beta_ris = Vec::new();
    let mut beta_bs = Vec::new();
    for t in &sc.targets {
        target_ris.push(arrays::upa_steering(t.angles_ris, nx, ny, er)?);
        beta_ris.push(radar_round_trip(lambda, rcs, t.distance_ris_m)?);
        target_side.push(t.side);
        match (t.side, t.angles_bs, t.distance_bs_m) {
            (Side::Reflect, Some(ang), Some(d)) => {
                target_bs.push(Some(arrays::ula_steering(ang, tx, eb)?));
                beta_bs.push(Some(radar_round_trip(lambda, rcs, d)?));
            }
            _ => {
                target_bs.push(None);
                beta_bs.push(None);
            }
        }
    }

    Ok(ChannelDraw {
        g,
        g_los,
        alpha_bs_ris,
        rician_factor: k,
        user_ris,
        user_ris_los,
        alpha_ris_user,
        user_direct,
        user_side,
        target_bs,
        target_ris,
        target_side,
        beta_ris,
        beta_bs,
    })
}
