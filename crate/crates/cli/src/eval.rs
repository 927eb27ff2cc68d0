//! Single-scenario evaluation with all diagnostics.

use std::fmt::Write as _;

use isac_core::channels::trial_rng as rng_for;
use isac_core::config::{linear_to_db, watts_to_dbm};
use isac_core::optimizer::{assemble_q_matrices, baseline, build_feasibility_sdp};
use isac_core::sdp;
use isac_core::waveforms::{chip_signs, fmcw_block, ChirpParams};
use isac_core::{draw_channels, trial_rng, NoiseModel, Scenario, SystemConfig};

use crate::run::{run_pipeline, Outcome, RunError, RunOptions};

/// Tag on the first line of the evaluation CSV.
pub const EVAL_SCHEMA: &str = "isac-eval/1";

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub seed: u64,
    pub optimized: bool,
    pub outcome: Outcome,
    labels_users: Vec<String>,
    labels_targets: Vec<String>,
}

/// Runs the full pipeline once on trial 0 of `seed`.
pub fn evaluate_once(cfg: &SystemConfig, sc: &Scenario, seed: u64, run: &RunOptions) -> Result<EvalReport, RunError> {
    let outcome = run_pipeline(cfg, sc, run, seed, 0, false)?;
    Ok(EvalReport {
        seed,
        optimized: run.optimize,
        outcome,
        labels_users: sc.users.iter().enumerate().map(|(k, u)| format!("user{k}_{}", u.side.tag())).collect(),
        labels_targets: sc.targets.iter().enumerate().map(|(m, t)| format!("target{m}_{}", t.side.tag())).collect(),
    })
}

impl EvalReport {
    /// `(name, value)` pairs in output order; SINRs in dB, power in dBm.
    pub fn quantities(&self) -> Vec<(String, f64)> {
        let r = &self.outcome.design.report;
        let mut q = Vec::new();
        for (u, l) in r.users.iter().zip(&self.labels_users) {
            q.push((format!("{l}_sinr_db"), linear_to_db(u.sinr)));
        }
        for (m, (t, l)) in r.targets.iter().zip(&self.labels_targets).enumerate() {
            q.push((format!("{l}_bound_db"), linear_to_db(t.bound)));
            q.push((format!("{l}_exact_db"), linear_to_db(t.exact)));
            let (h, v) = match &self.outcome.crb[m] {
                Ok(c) => (c.root_crb_deg[0], c.root_crb_deg[1]),
                Err(_) => (f64::NAN, f64::NAN),
            };
            q.push((format!("{l}_rcrb_h_deg"), h));
            q.push((format!("{l}_rcrb_v_deg"), v));
        }
        q.push(("p_ris_dbm".into(), watts_to_dbm(r.p_ris)));
        q
    }

    pub fn pretty(&self) -> String {
        let d = &self.outcome.design;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {}  regime {}  {}",
            self.seed,
            d.report.regime.tag(),
            if self.optimized { format!("design {}", d.status.tag()) } else { "initialization only".into() }
        );
        for (name, v) in self.quantities() {
            let _ = writeln!(s, "  {name:<24} {v:>10.3}");
        }
        for (m, c) in self.outcome.crb.iter().enumerate() {
            if let Err(e) = c {
                let _ = writeln!(s, "  {}: {e}", self.labels_targets[m]);
            }
        }
        for (i, l) in d.rounds.iter().enumerate() {
            let _ = writeln!(
                s,
                "  round {i}: level {:.3} dB, achieved {:.3} dB, defects {:.3}/{:.3}, {} SDPs, {} iterations",
                linear_to_db(l.level),
                linear_to_db(l.achieved),
                l.defect_t,
                l.defect_r,
                l.sdp_calls,
                l.iterations
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("#schema={EVAL_SCHEMA}\nquantity,value\n");
        for (name, v) in self.quantities() {
            let v = if v.is_nan() { "nan".to_string() } else { format!("{v}") };
            let _ = writeln!(s, "{name},{v}");
        }
        s
    }
}

/// One chirp block with random chip signs, as `l,value` CSV.
pub fn waveform_csv(cfg: &SystemConfig, seed: u64) -> Result<String, RunError> {
    let p = ChirpParams {
        len: cfg.chirp_length,
        chips: 1,
        carrier_hz: cfg.carrier_frequency_hz,
        bandwidth_hz: cfg.bandwidth_hz,
        sample_rate_hz: 2.0 * cfg.bandwidth_hz,
    };
    let signs = chip_signs(p.chips, &mut rng_for(seed, u64::MAX));
    let block = fmcw_block(&p, &signs).map_err(|e| RunError::Sweep(e.to_string()))?;
    let mut s = String::from("l,value\n");
    for (l, v) in block.iter().enumerate() {
        let _ = writeln!(s, "{l},{v}");
    }
    Ok(s)
}

/// The first feasibility SDP the optimizer would solve, in dump format.
pub fn first_sdp_dump(cfg: &SystemConfig, sc: &Scenario, seed: u64) -> Result<String, RunError> {
    let ch = draw_channels(cfg, sc, &mut trial_rng(seed, 0))?;
    let noise = NoiseModel::from_config(cfg);
    let start = baseline(cfg, &ch, &noise)?;
    let q = assemble_q_matrices(cfg, &ch, &start.state, &start.w, &noise);
    let level = start.report.min_target_bound();
    Ok(sdp::dump(&build_feasibility_sdp(&q, level)?))
}
