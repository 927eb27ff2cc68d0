#![allow(dead_code)]

use isac_core::channels::complex_normal;
use isac_core::optimizer::beams_for;
use isac_core::star_ris::project_feasible;
use isac_core::{draw_channels, reference_scenario, trial_rng, CMat, CVec, ChannelDraw, NoiseModel, NoiseRegime, Scenario, StarRisState, SystemConfig};
use rand::Rng;

pub struct Instance {
    pub cfg: SystemConfig,
    pub sc: Scenario,
    pub ch: ChannelDraw,
    pub state: StarRisState,
    pub w: CMat,
    pub noise: NoiseModel,
}

/// Random surface size, budget, phases, amplitudes and noise regime.
pub fn instance(seed: u64) -> Instance {
    let mut rng = trial_rng(seed, 7);
    let (cfg, sc) = reference_scenario();
    let side = rng.random_range(2..=5);
    let c = rng.random_range(1.5..30.0);
    let cfg = cfg.with_grid(side, side).with_amplification_per_root_n(c);
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(seed, 0)).unwrap();
    let n = cfg.n();
    let zt = CVec::from_fn(n, |_, _| complex_normal(&mut rng) * c);
    let zr = CVec::from_fn(n, |_, _| complex_normal(&mut rng));
    let state = project_feasible(&zt, &zr, cfg.amplification_factor).unwrap();
    let w = beams_for(&cfg, &ch, &state).unwrap();
    let regime = [NoiseRegime::LowGain, NoiseRegime::Exact, NoiseRegime::HighGain][rng.random_range(0..3)];
    let noise = NoiseModel::from_config(&cfg).with_regime(regime);
    Instance { cfg, sc, ch, state, w, noise }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
