//! Received-signal synthesis and SINR evaluation for users and targets.
//!
//! Target SINRs come in two forms: the exact echo-power ratio and a trace
//! upper bound that is linear in the lifted surface variables. The bound uses
//! `‖u‖⁴ ≤ ‖z‖² λ_max(Q) Tr(Q Z)` for `u = b Φ G`, and shares the exact
//! interference terms in its denominator so that it always dominates.

use rand::Rng;
use thiserror::Error;

use crate::channels::{complex_normal, ChannelDraw};
use crate::config::{NoiseRegime, Side, SystemConfig};
use crate::linalg::{dotu, lambda_max, re_trace_prod, CMat, CVec, C64};
use crate::star_ris::{echo_kernel, StarRisState};
use crate::waveforms::{effective_channel, Link, TransmitFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no {kind} with index {index} on side {side}")]
    Unknown { kind: &'static str, index: usize, side: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Noise variances and the regime used for amplified noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub static_var: f64,
    pub v1_var: f64,
    pub v2_var: f64,
    pub regime: NoiseRegime,
}

impl NoiseModel {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let s = cfg.noise_power_w;
        Self { static_var: s, v1_var: s, v2_var: s, regime: cfg.noise_regime }
    }

    pub fn with_regime(mut self, regime: NoiseRegime) -> Self {
        self.regime = regime;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.static_var *= factor;
        self.v1_var *= factor;
        self.v2_var *= factor;
        self
    }
}

/// `Q = (b̄ bᵀ) ⊙ conj(G Gᴴ)`, so that `‖(b ⊙ z) G‖² = zᴴ Q z`.
pub fn lifted_kernel(b: &CVec, g: &CMat) -> CMat {
    let ggh = g * g.adjoint();
    CMat::from_fn(b.len(), b.len(), |i, j| b[i].conj() * b[j] * ggh[(i, j)].conj())
}

/// `V = (d̄ dᵀ)` with `d = h ⊙ (G w)`, so that `|(h ⊙ z) G w|² = zᴴ V z`.
pub fn user_kernel(h: &CVec, g: &CMat, w: &CVec) -> CMat {
    let gw = g * w;
    let d = h.component_mul(&gw);
    CMat::from_fn(d.len(), d.len(), |i, j| d[i].conj() * d[j])
}

/// `u R uᴴ` for a row vector `u` stored as a column.
pub fn row_quad(u: &CVec, r: &CMat) -> f64 {
    let ru = r * u.conjugate();
    dotu(u, &ru).re
}

/// Echo power `β² ‖u‖² (u R uᴴ)` of a rank-one round trip `β uᴴ u x`.
pub fn echo_power(u: &CVec, beta: f64, r: &CMat) -> f64 {
    beta * beta * u.norm_squared() * row_quad(u, r)
}

fn side_t_echo_row(ch: &ChannelDraw, state: &StarRisState, m: usize) -> CVec {
    effective_channel(Link::Target(m), ch, state).expect("target exists")
}

/// Per-antenna noise variance at the BS for the echo of Side-T target `m`.
pub fn echo_noise_variance(ch: &ChannelDraw, state: &StarRisState, m: usize, noise: &NoiseModel) -> f64 {
    let tx = ch.t_x() as f64;
    let zt = &state.z_t;
    match noise.regime {
        NoiseRegime::LowGain => noise.static_var,
        NoiseRegime::Exact => {
            let u = side_t_echo_row(ch, state, m);
            let first = noise.v1_var * zt.norm_squared() * u.norm_squared();
            let second: f64 = (0..ch.n())
                .map(|n| zt[n].norm_sqr() * ch.g.row(n).norm_squared())
                .sum::<f64>()
                * noise.v2_var;
            noise.static_var + (first + second) / tx
        }
        NoiseRegime::HighGain => {
            let k = rician_weight(ch);
            let n = ch.n();
            let mean: f64 = (0..n)
                .map(|i| {
                    let psi = zt[i].norm_sqr();
                    let los: f64 = ch.g_los.row(i).norm_squared();
                    psi * psi * (k.0 * los + k.1)
                })
                .sum::<f64>()
                / n as f64;
            noise.v1_var * mean * ch.alpha_bs_ris
        }
    }
}

/// `(κ/(1+κ), 1/(1+κ))`, recovered from the stored draw.
fn rician_weight(ch: &ChannelDraw) -> (f64, f64) {
    let k = ch.rician_factor;
    (k / (1.0 + k), 1.0 / (1.0 + k))
}

/// Monte Carlo estimate of the per-antenna echo noise variance using the
/// full propagation `Gᴴ Φᴴ B Φ v₁ + Gᴴ Φᴴ v₂ + n`.
pub fn simulated_echo_noise_variance<R: Rng + ?Sized>(
    ch: &ChannelDraw,
    state: &StarRisState,
    m: usize,
    noise: &NoiseModel,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let n = ch.n();
    let tx = ch.t_x();
    let psi = echo_kernel(&state.z_t, &ch.target_ris[m]);
    let gh = ch.g.adjoint();
    let phi_h = CMat::from_diagonal(&state.z_t.conjugate());
    let a1 = &gh * &psi;
    let a2 = &gh * &phi_h;
    let mut acc = 0.0;
    for _ in 0..samples {
        let v1 = CVec::from_fn(n, |_, _| complex_normal(rng) * noise.v1_var.sqrt());
        let v2 = CVec::from_fn(n, |_, _| complex_normal(rng) * noise.v2_var.sqrt());
        let s = CVec::from_fn(tx, |_, _| complex_normal(rng) * noise.static_var.sqrt());
        acc += (&a1 * v1 + &a2 * v2 + s).norm_squared();
    }
    acc / (samples * tx) as f64
}

/// Noise variance at user `k`.
pub fn user_noise_variance(ch: &ChannelDraw, state: &StarRisState, k: usize, noise: &NoiseModel) -> f64 {
    if ch.user_side[k] == Side::Reflect {
        return noise.static_var;
    }
    let h = &ch.user_ris[k];
    match noise.regime {
        NoiseRegime::LowGain => noise.static_var,
        NoiseRegime::Exact => {
            let amp: f64 = (0..h.len()).map(|n| state.z_t[n].norm_sqr() * h[n].norm_sqr()).sum();
            noise.static_var + noise.v1_var * amp
        }
        NoiseRegime::HighGain => {
            let (wl, wn) = rician_weight(ch);
            let pa2 = state.z_t.norm_squared();
            noise.v1_var * pa2 * ch.alpha_ris_user[k] * (wl * ch.user_ris_los[k].norm_squared() + wn)
        }
    }
}

/// SINR of a Side-T user from the composite channel (norm form).
pub fn sinr_user_t(
    k: usize,
    w: &CMat,
    ch: &ChannelDraw,
    state: &StarRisState,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    if ch.user_side.get(k) != Some(&Side::Transmit) {
        return Err(MetricsError::Unknown { kind: "user", index: k, side: "T" });
    }
    let h = effective_channel(Link::User(k), ch, state).expect("user exists");
    let powers: Vec<f64> = (0..w.ncols()).map(|j| dotu(&h, &w.column(j).into_owned()).norm_sqr()).collect();
    let desired = powers[k];
    let interference: f64 = powers.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, p)| p).sum();
    Ok(desired / (interference + user_noise_variance(ch, state, k, noise)))
}

/// The same SINR assembled from lifted kernels `Tr(V_j Z_t)`.
pub fn sinr_user_t_trace(
    k: usize,
    w: &CMat,
    ch: &ChannelDraw,
    z_t: &CMat,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    if ch.user_side.get(k) != Some(&Side::Transmit) {
        return Err(MetricsError::Unknown { kind: "user", index: k, side: "T" });
    }
    let h = &ch.user_ris[k];
    let mut desired = 0.0;
    let mut interference = 0.0;
    for j in 0..w.ncols() {
        let v = user_kernel(h, &ch.g, &w.column(j).into_owned());
        let p = re_trace_prod(&v, z_t);
        if j == k {
            desired = p;
        } else {
            interference += p;
        }
    }
    let noise_var = match noise.regime {
        NoiseRegime::LowGain => noise.static_var,
        NoiseRegime::Exact => {
            let amp: f64 = (0..h.len()).map(|n| z_t[(n, n)].re * h[n].norm_sqr()).sum();
            noise.static_var + noise.v1_var * amp
        }
        NoiseRegime::HighGain => {
            let (wl, wn) = rician_weight(ch);
            noise.v1_var * z_t.trace().re * ch.alpha_ris_user[k] * (wl * ch.user_ris_los[k].norm_squared() + wn)
        }
    };
    Ok(desired / (interference + noise_var))
}

/// Side-R user SINR over the direct link only.
pub fn sinr_user_r_approx(k: usize, w: &CMat, ch: &ChannelDraw, noise: &NoiseModel) -> Result<f64, MetricsError> {
    let g = ch
        .user_direct
        .get(k)
        .and_then(|g| g.as_ref())
        .ok_or(MetricsError::Unknown { kind: "user", index: k, side: "R" })?;
    let powers: Vec<f64> = (0..w.ncols()).map(|j| dotu(g, &w.column(j).into_owned()).norm_sqr()).collect();
    let interference: f64 = powers.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, p)| p).sum();
    Ok(powers[k] / (interference + noise.static_var))
}

/// Echo power of every target at the BS, in target order.
pub fn target_echo_powers(ch: &ChannelDraw, state: &StarRisState, r_x: &CMat) -> Vec<f64> {
    (0..ch.target_ris.len())
        .map(|m| {
            let u = effective_channel(Link::Target(m), ch, state).expect("target exists");
            echo_power(&u, ch.echo_amplitude(m), r_x)
        })
        .collect()
}

fn interference_for(m: usize, powers: &[f64]) -> f64 {
    powers.iter().enumerate().filter(|(j, _)| *j != m).map(|(_, p)| p).sum()
}

fn check_target(ch: &ChannelDraw, m: usize, side: Side) -> Result<(), MetricsError> {
    if ch.target_side.get(m) != Some(&side) {
        return Err(MetricsError::Unknown { kind: "target", index: m, side: side.tag() });
    }
    Ok(())
}

/// Exact SINR of Side-T target `m`: desired echo over every other echo plus
/// the regime's noise.
pub fn sinr_target_t_exact(
    m: usize,
    r_x: &CMat,
    ch: &ChannelDraw,
    state: &StarRisState,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    check_target(ch, m, Side::Transmit)?;
    let p = target_echo_powers(ch, state, r_x);
    Ok(p[m] / (interference_for(m, &p) + echo_noise_variance(ch, state, m, noise)))
}

/// Trace upper bound on the Side-T target SINR for lifted `Z_t`.
pub fn sinr_target_t_bound(
    m: usize,
    r_x: &CMat,
    ch: &ChannelDraw,
    state: &StarRisState,
    z_t: &CMat,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    check_target(ch, m, Side::Transmit)?;
    let q = lifted_kernel(&ch.target_ris[m], &ch.g);
    let beta = ch.beta_ris[m];
    let num = z_t.trace().re * beta * beta * lambda_max(&q) * re_trace_prod(&q, z_t) * r_x.trace().re;
    let p = target_echo_powers(ch, state, r_x);
    Ok(num / (interference_for(m, &p) + echo_noise_variance(ch, state, m, noise)))
}

/// Exact SINR of Side-R target `m`.
pub fn sinr_target_r_exact(
    m: usize,
    r_x: &CMat,
    ch: &ChannelDraw,
    state: &StarRisState,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    check_target(ch, m, Side::Reflect)?;
    let p = target_echo_powers(ch, state, r_x);
    Ok(p[m] / (interference_for(m, &p) + noise.static_var))
}

/// Numerator coefficients of the Side-R bound: `(c₀, c₁)` such that the
/// bound numerator is `c₀ + c₁ Tr(Q_R Z_r)`, with `Q_R` returned alongside.
pub fn side_r_bound_terms(m: usize, r_x_trace: f64, ch: &ChannelDraw) -> (f64, f64, CMat) {
    let a = ch.target_bs[m].as_ref().expect("side R target");
    let q = lifted_kernel(&ch.scaled_target_ris(m), &ch.g);
    let n = ch.n() as f64;
    let a2 = a.norm_squared();
    let reach = (a2.sqrt() + (n * lambda_max(&q)).max(0.0).sqrt()).powi(2);
    let beta = ch.beta_bs[m].expect("side R target");
    let scale = beta * beta * r_x_trace * reach * 2.0;
    (scale * a2, scale, q)
}

/// Trace upper bound on the Side-R target SINR:
/// `‖g‖⁴ ≤ (‖a‖ + √(N λ_max(Q_R)))² · 2(‖a‖² + Tr(Q_R Z_r))`.
pub fn sinr_target_r_bound(
    m: usize,
    r_x: &CMat,
    ch: &ChannelDraw,
    state: &StarRisState,
    z_r: &CMat,
    noise: &NoiseModel,
) -> Result<f64, MetricsError> {
    check_target(ch, m, Side::Reflect)?;
    let (c0, c1, q) = side_r_bound_terms(m, r_x.trace().re, ch);
    let num = c0 + c1 * re_trace_prod(&q, z_r);
    let p = target_echo_powers(ch, state, r_x);
    Ok(num / (interference_for(m, &p) + noise.static_var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSinr {
    pub index: usize,
    pub side: Side,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSinr {
    pub index: usize,
    pub side: Side,
    pub exact: f64,
    pub bound: f64,
    pub noise_var: f64,
}

/// Every link metric of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub users: Vec<UserSinr>,
    pub targets: Vec<TargetSinr>,
    pub p_ris: f64,
    pub regime: NoiseRegime,
}

impl MetricsReport {
    /// Smallest target bound SINR, the optimizer's objective.
    pub fn min_target_bound(&self) -> f64 {
        self.targets.iter().map(|t| t.bound).fold(f64::INFINITY, f64::min)
    }

    pub fn first_target(&self, side: Side) -> Option<&TargetSinr> {
        self.targets.iter().find(|t| t.side == side)
    }

    pub fn first_user(&self, side: Side) -> Option<&UserSinr> {
        self.users.iter().find(|u| u.side == side)
    }
}

/// Evaluates all metrics for a surface state and beamforming matrix.
pub fn evaluate(w: &CMat, ch: &ChannelDraw, state: &StarRisState, noise: &NoiseModel) -> MetricsReport {
    let r_x = w * w.adjoint();
    let z_t = state.lifted_t();
    let z_r = state.lifted_r();
    let users = (0..ch.user_ris.len())
        .map(|k| {
            let side = ch.user_side[k];
            let sinr = match side {
                Side::Transmit => sinr_user_t(k, w, ch, state, noise),
                Side::Reflect => sinr_user_r_approx(k, w, ch, noise),
            }
            .expect("user index valid");
            UserSinr { index: k, side, sinr }
        })
        .collect();
    let targets = (0..ch.target_ris.len())
        .map(|m| {
            let side = ch.target_side[m];
            let (exact, bound, noise_var) = match side {
                Side::Transmit => (
                    sinr_target_t_exact(m, &r_x, ch, state, noise).expect("valid"),
                    sinr_target_t_bound(m, &r_x, ch, state, &z_t, noise).expect("valid"),
                    echo_noise_variance(ch, state, m, noise),
                ),
                Side::Reflect => (
                    sinr_target_r_exact(m, &r_x, ch, state, noise).expect("valid"),
                    sinr_target_r_bound(m, &r_x, ch, state, &z_r, noise).expect("valid"),
                    noise.static_var,
                ),
            };
            TargetSinr { index: m, side, exact, bound, noise_var }
        })
        .collect();
    let side_t: Vec<(CVec, f64)> = (0..ch.target_ris.len())
        .filter(|&m| ch.target_side[m] == Side::Transmit)
        .map(|m| (ch.target_ris[m].clone(), ch.beta_ris[m]))
        .collect();
    let p_ris = crate::star_ris::ris_power(state, &ch.g, &r_x, &side_t, noise.v1_var).expect("dimensions agree");
    MetricsReport { users, targets, p_ris, regime: noise.regime }
}

/// What a receiver observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    UserT(usize),
    UserR(usize),
    EchoT(usize),
    EchoR(usize),
}

/// A received block split into its parts; rows are receive antennas.
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    pub desired: CMat,
    pub interference: CMat,
    pub noise: CMat,
}

impl ReceivedBlock {
    pub fn total(&self) -> CMat {
        &self.desired + &self.interference + &self.noise
    }
}

/// Sample-level realization of a received block, including amplified
/// surface noise where the receiver sees it.
pub fn synthesize_received<R: Rng + ?Sized>(
    rx: Receiver,
    frame: &TransmitFrame,
    ch: &ChannelDraw,
    state: &StarRisState,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ReceivedBlock, MetricsError> {
    let l = frame.x.ncols();
    let n = ch.n();
    let tx = ch.t_x();
    let cn = |rows: usize, var: f64, rng: &mut R| CMat::from_fn(rows, l, |_, _| complex_normal(rng) * var.sqrt());
    let k_users = ch.user_ris.len();
    match rx {
        Receiver::UserT(k) | Receiver::UserR(k) => {
            let want = if matches!(rx, Receiver::UserT(_)) { Side::Transmit } else { Side::Reflect };
            if ch.user_side.get(k) != Some(&want) {
                return Err(MetricsError::Unknown { kind: "user", index: k, side: want.tag() });
            }
            let h = effective_channel(Link::User(k), ch, state).expect("user exists");
            let hrow = CMat::from_row_slice(1, h.len(), h.as_slice());
            let mut streams = CMat::zeros(frame.w.ncols(), l);
            streams.rows_mut(0, k_users).copy_from(&frame.comm_symbols);
            let m = frame.sense_symbols.nrows();
            streams.rows_mut(k_users, m).copy_from(&frame.sense_symbols);
            let wk = frame.w.column(k).into_owned();
            let desired = &hrow * wk * streams.row(k);
            let mut w_other = frame.w.clone();
            w_other.column_mut(k).fill(C64::new(0.0, 0.0));
            let interference = &hrow * (w_other * &streams);
            let mut nz = cn(1, noise.static_var, rng);
            if want == Side::Transmit {
                let v1 = cn(n, noise.v1_var, rng);
                let route = ch.user_ris[k].component_mul(&state.z_t);
                let route = CMat::from_row_slice(1, n, route.as_slice());
                nz += route * v1;
            }
            Ok(ReceivedBlock { desired, interference, noise: nz })
        }
        Receiver::EchoT(m) | Receiver::EchoR(m) => {
            let want = if matches!(rx, Receiver::EchoT(_)) { Side::Transmit } else { Side::Reflect };
            check_target(ch, m, want)?;
            let mut desired = CMat::zeros(tx, l);
            let mut interference = CMat::zeros(tx, l);
            for j in 0..ch.target_ris.len() {
                let u = effective_channel(Link::Target(j), ch, state).expect("target exists");
                let f = u.conjugate() * u.transpose();
                let echo = (f * &frame.x).scale(ch.echo_amplitude(j));
                if j == m {
                    desired += echo;
                } else {
                    interference += echo;
                }
            }
            let mut nz = cn(tx, noise.static_var, rng);
            if want == Side::Transmit {
                let psi = echo_kernel(&state.z_t, &ch.target_ris[m]);
                let gh = ch.g.adjoint();
                let phi_h = CMat::from_diagonal(&state.z_t.conjugate());
                nz += &gh * psi * cn(n, noise.v1_var, rng) + gh * phi_h * cn(n, noise.v2_var, rng);
            }
            Ok(ReceivedBlock { desired, interference, noise: nz })
        }
    }
}
