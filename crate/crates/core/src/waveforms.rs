//! Joint transmit frame: matched beamformers, symbol streams and FMCW chirps.

use rand::Rng;
use thiserror::Error;

use crate::channels::{complex_normal, ChannelDraw};
use crate::config::Side;
use crate::linalg::{row_mul, CMat, CVec, C64};
use crate::star_ris::StarRisState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("chirp length {len} is not a multiple of chip count {chips}")]
    ChipGrid { len: usize, chips: usize },
    #[error("sample index {l} outside chirp of length {len}")]
    Index { l: usize, len: usize },
    #[error("chip amplitudes must be +1 or -1")]
    Amplitude,
    #[error("effective channel {0} is zero; beam direction undefined")]
    ZeroChannel(usize),
    #[error("expected {expected} channels, got {got}")]
    Count { expected: usize, got: usize },
    #[error("no {kind} with index {index}")]
    Unknown { kind: &'static str, index: usize },
}

/// Parameters of one FMCW chirp block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpParams {
    pub len: usize,
    pub chips: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
}

impl ChirpParams {
    pub fn chip_len(&self) -> Result<usize, WaveformError> {
        if self.chips == 0 || !self.len.is_multiple_of(self.chips) {
            return Err(WaveformError::ChipGrid { len: self.len, chips: self.chips });
        }
        Ok(self.len / self.chips)
    }
}

/// Sample `l` of a sign-modulated linear chirp,
/// `A_τ(l) cos(2π f̃_c l + π (B/f_s) l² / L)` with `f̃_c = f_c/f_s`.
pub fn fmcw_chirp(l: usize, p: &ChirpParams, amplitudes: &[f64]) -> Result<f64, WaveformError> {
    let tc = p.chip_len()?;
    if l >= p.len {
        return Err(WaveformError::Index { l, len: p.len });
    }
    if amplitudes.len() != p.chips {
        return Err(WaveformError::Count { expected: p.chips, got: amplitudes.len() });
    }
    let a = amplitudes[l / tc];
    if a != 1.0 && a != -1.0 {
        return Err(WaveformError::Amplitude);
    }
    let lf = l as f64;
    let fc = p.carrier_hz / p.sample_rate_hz;
    let rate = p.bandwidth_hz / p.sample_rate_hz / p.len as f64;
    let phase = 2.0 * std::f64::consts::PI * fc * lf + std::f64::consts::PI * rate * lf * lf;
    Ok(a * phase.cos())
}

/// A full chirp block.
pub fn fmcw_block(p: &ChirpParams, amplitudes: &[f64]) -> Result<Vec<f64>, WaveformError> {
    (0..p.len).map(|l| fmcw_chirp(l, p, amplitudes)).collect()
}

/// Independent uniform ±1 chip signs.
pub fn chip_signs<R: Rng + ?Sized>(chips: usize, rng: &mut R) -> Vec<f64> {
    (0..chips).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Which link an effective channel refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    User(usize),
    Target(usize),
}

/// Composite BS-side channel (length `T_x`, used as a row).
///
/// Side-T user `h Φ_t G`, Side-R user `h Φ_r G + g`, Side-T target `b Φ_t G`,
/// Side-R target `a + b̃ Φ_r G`.
pub fn effective_channel(link: Link, ch: &ChannelDraw, state: &StarRisState) -> Result<CVec, WaveformError> {
    let through = |row: &CVec, z: &CVec| row_mul(&row.component_mul(z), &ch.g);
    match link {
        Link::User(k) => {
            let h = ch.user_ris.get(k).ok_or(WaveformError::Unknown { kind: "user", index: k })?;
            Ok(match ch.user_side[k] {
                Side::Transmit => through(h, &state.z_t),
                Side::Reflect => {
                    let direct = ch.user_direct[k].as_ref().expect("side R user has a direct link");
                    through(h, &state.z_r) + direct
                }
            })
        }
        Link::Target(m) => {
            if m >= ch.target_ris.len() {
                return Err(WaveformError::Unknown { kind: "target", index: m });
            }
            Ok(match ch.target_side[m] {
                Side::Transmit => through(&ch.target_ris[m], &state.z_t),
                Side::Reflect => {
                    let a = ch.target_bs[m].as_ref().expect("side R target has a BS steering vector");
                    through(&ch.scaled_target_ris(m), &state.z_r) + a
                }
            })
        }
    }
}

/// Effective channels in beam order: users first, then targets.
pub fn all_effective_channels(ch: &ChannelDraw, state: &StarRisState) -> Vec<CVec> {
    let users = (0..ch.user_ris.len()).map(Link::User);
    let targets = (0..ch.target_ris.len()).map(Link::Target);
    users
        .chain(targets)
        .map(|l| effective_channel(l, ch, state).expect("index in range"))
        .collect()
}

/// Conjugate-matched beams with equal power split.
pub fn matched_beamformers(channels: &[CVec], p_bs: f64, k: usize, m: usize) -> Result<CMat, WaveformError> {
    if channels.len() != k + m {
        return Err(WaveformError::Count { expected: k + m, got: channels.len() });
    }
    let t_x = channels.first().map_or(0, |h| h.len());
    let amp = (p_bs / (k + m) as f64).sqrt();
    let mut w = CMat::zeros(t_x, k + m);
    for (j, h) in channels.iter().enumerate() {
        let norm = h.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(WaveformError::ZeroChannel(j));
        }
        w.set_column(j, &h.conjugate().scale(amp / norm));
    }
    Ok(w)
}

/// `R_x = W Wᴴ` for unit-power uncorrelated streams.
pub fn transmit_covariance(w: &CMat) -> CMat {
    w * w.adjoint()
}

/// One transmitted block.
#[derive(Debug, Clone)]
pub struct TransmitFrame {
    pub w: CMat,
    pub comm_symbols: CMat,
    pub sense_symbols: CMat,
    pub x: CMat,
    pub r_x: CMat,
}

/// Draws symbol streams and forms `X = W [c; s]`. Sensing streams are chirps
/// scaled to unit average power.
pub fn assemble_frame<R: Rng + ?Sized>(
    w: &CMat,
    k: usize,
    chirp: &ChirpParams,
    rng: &mut R,
) -> Result<TransmitFrame, WaveformError> {
    let m = w.ncols().saturating_sub(k);
    let l = chirp.len;
    let mut comm = CMat::zeros(k, l);
    for j in 0..l {
        for i in 0..k {
            comm[(i, j)] = complex_normal(rng);
        }
    }
    let mut sense = CMat::zeros(m, l);
    for i in 0..m {
        let signs = chip_signs(chirp.chips, rng);
        let block = fmcw_block(chirp, &signs)?;
        for (j, v) in block.into_iter().enumerate() {
            sense[(i, j)] = C64::new(v * std::f64::consts::SQRT_2, 0.0);
        }
    }
    let mut stacked = CMat::zeros(k + m, l);
    stacked.rows_mut(0, k).copy_from(&comm);
    stacked.rows_mut(k, m).copy_from(&sense);
    let x = w * &stacked;
    Ok(TransmitFrame { w: w.clone(), comm_symbols: comm, sense_symbols: sense, x, r_x: transmit_covariance(w) })
}
