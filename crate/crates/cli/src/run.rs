//! One pipeline run: channels, surface design, metrics and CRBs.

use thiserror::Error;

use isac_core::channels::ChannelError;
use isac_core::optimizer::{
    baseline, direct_link_precheck, optimize_star_ris, passive_benchmark, passive_noise, Design, OptimizerError,
    OptimizerOptions,
};
use isac_core::sensing_crb::{crb_for_target, CrbError, CrbReport};
use isac_core::{draw_channels, trial_rng, ChannelDraw, ConfigError, NoiseModel, Scenario, Side, SystemConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid geometry: {0}")]
    Geometry(#[from] ChannelError),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Geometry(_) | RunError::Sweep(_) | RunError::Io(_) => 1,
            RunError::Infeasible(_) => 2,
            RunError::Solver(_) => 3,
        }
    }
}

impl From<OptimizerError> for RunError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Sdp(_) | OptimizerError::NegativeLevel(_) => RunError::Solver(e.to_string()),
            _ => RunError::Infeasible(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Run the SDP design; otherwise report the full-budget starting state.
    pub optimize: bool,
    pub optimizer: OptimizerOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { optimize: true, optimizer: OptimizerOptions::default() }
    }
}

/// Everything measured in one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub design: Design,
    pub noise: NoiseModel,
    pub crb: Vec<Result<CrbReport, CrbError>>,
}

impl Outcome {
    /// `√Tr(CRB)` in degrees, NaN when the geometry is unidentifiable.
    pub fn root_crb_deg(&self, m: usize) -> f64 {
        match &self.crb[m] {
            Ok(r) => r.crb.trace().max(0.0).sqrt().to_degrees(),
            Err(_) => f64::NAN,
        }
    }
}

fn optimizer_seed(seed: u64, trial: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ trial
}

/// Hybrid design for one draw.
pub fn hybrid_design(
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    noise: &NoiseModel,
    run: &RunOptions,
    seed: u64,
    trial: u64,
) -> Result<Design, RunError> {
    if run.optimize {
        let opts = OptimizerOptions { seed: optimizer_seed(seed, trial), ..run.optimizer };
        Ok(optimize_star_ris(cfg, ch, noise, &opts)?)
    } else {
        let d = baseline(cfg, ch, noise)?;
        direct_link_precheck(cfg, ch, &d.w, noise)?;
        Ok(d)
    }
}

/// Root CRBs of every target for a design.
pub fn target_crbs(
    cfg: &SystemConfig,
    sc: &Scenario,
    ch: &ChannelDraw,
    design: &Design,
    noise: &NoiseModel,
) -> Vec<Result<CrbReport, CrbError>> {
    let r_x = &design.w * design.w.adjoint();
    sc.targets
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let angles = match t.side {
                Side::Transmit => t.angles_ris,
                Side::Reflect => t.angles_bs.unwrap_or(t.angles_ris),
            };
            crb_for_target(m, angles, cfg, ch, &design.state, &r_x, noise)
        })
        .collect()
}

/// Draws channels for `(seed, trial)` and runs the hybrid design, or the
/// power-matched passive reference when `passive` is set.
pub fn run_pipeline(
    cfg: &SystemConfig,
    sc: &Scenario,
    run: &RunOptions,
    seed: u64,
    trial: u64,
    passive: bool,
) -> Result<Outcome, RunError> {
    let ch = draw_channels(cfg, sc, &mut trial_rng(seed, trial))?;
    let noise = NoiseModel::from_config(cfg);
    let hybrid = hybrid_design(cfg, &ch, &noise, run, seed, trial)?;
    let (design, noise) = if passive {
        (passive_benchmark(cfg, &ch, &noise, hybrid.report.p_ris)?, passive_noise(&noise))
    } else {
        (hybrid, noise)
    };
    let crb = target_crbs(cfg, sc, &ch, &design, &noise);
    Ok(Outcome { design, noise, crb })
}
