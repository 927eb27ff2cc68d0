mod common;

use isac_core::link_metrics::lifted_kernel;
use isac_core::linalg::{herm_eig, is_hermitian, outer, CMat, CVec};
use isac_core::optimizer::{
    assemble_q_matrices, baseline, build_feasibility_sdp, check_level, max_min_bisection, optimize_star_ris, OptimizerOptions,
};
use isac_core::{draw_channels, load_scenario, reference_scenario, trial_rng, NoiseModel, C64};

const SINGLE_TARGET: &str = r#"
[system]
carrier_frequency_hz = 3.315e9
bs_antennas = 2
ris_grid = [1, 2]
rician_factor_db = 3.0
noise_power_dbm = -80.0
coherence_length = 100
reference_path_loss_db = 30.0
path_loss_exponent = 2.2
radar_cross_section_m2 = 100.0
bs_power_dbw = 10.0
amplification_per_root_n = 3.0
comm_sinr_threshold_db = -10.0
noise_regime = "low-gain"

[bs_ris]
distance_m = 5.0
aod_bs_deg = [20.0, 100.0]
aoa_ris_deg = [30.0, 120.0]

[[users]]
side = "R"
distance_ris_m = 27.0
aod_ris_deg = [50.0, 100.0]
distance_bs_m = 25.0
aod_bs_deg = [-30.0, 95.0]

[[targets]]
side = "T"
distance_ris_m = 17.0
aod_ris_deg = [40.0, 108.0]
"#;

#[test]
fn lifted_kernel_of_identity_channel() {
    let n = 4;
    let ones = CVec::from_element(n, C64::new(1.0, 0.0));
    let q = lifted_kernel(&ones, &CMat::identity(n, n));
    assert!((q - CMat::identity(n, n)).norm() < 1e-15);
    let g = CMat::from_fn(n, 3, |i, j| C64::new(i as f64 - j as f64, 0.5 * (i * j) as f64));
    let q = lifted_kernel(&ones, &g);
    let ggh = &g * g.adjoint();
    for i in 0..n {
        for j in 0..n {
            assert!((q[(i, j)] - ggh[(i, j)].conj()).norm() < 1e-12);
        }
    }
    assert!(lifted_kernel(&CVec::zeros(n), &g).norm() == 0.0);
}

#[test]
fn assembled_kernels_are_hermitian_psd() {
    for seed in 0..10 {
        let it = common::instance(seed);
        let q = assemble_q_matrices(&it.cfg, &it.ch, &it.state, &it.w, &it.noise);
        for r in q.targets.iter().map(|r| [&r.desired, &r.denominator]).chain(q.users_t.iter().map(|(_, r)| [&r.desired, &r.denominator])) {
            for a in r {
                for m in [&a.t, &a.r] {
                    assert!(is_hermitian(m, 1e-9 * (1.0 + m.norm())));
                    let (vals, _) = herm_eig(m);
                    assert!(vals[0] >= -1e-9 * (1.0 + vals[vals.len() - 1].abs()), "seed {seed}");
                }
                assert!(a.c >= 0.0);
            }
        }
    }
}

fn small_table() -> (isac_core::SystemConfig, isac_core::ChannelDraw, NoiseModel) {
    let (cfg, sc) = reference_scenario();
    let cfg = cfg.with_grid(3, 3).with_amplification_per_root_n(6.0);
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(8, 0)).unwrap();
    let noise = NoiseModel::from_config(&cfg);
    (cfg, ch, noise)
}

#[test]
fn zero_level_is_feasible_and_huge_level_is_not() {
    let (cfg, ch, noise) = small_table();
    let d = baseline(&cfg, &ch, &noise).unwrap();
    let q = assemble_q_matrices(&cfg, &ch, &d.state, &d.w, &noise);
    let opts = OptimizerOptions::default();
    assert!(check_level(&q, 0.0, &opts.sdp, None).unwrap().feasible);
    // Cap from the largest reachable desired term over the smallest denominator.
    let cap = q
        .targets
        .iter()
        .map(|r| {
            let top = |m: &CMat| herm_eig(m).0.last().copied().unwrap_or(0.0);
            (top(&r.desired.t) * q.budget_sq + top(&r.desired.r) * q.n as f64 + r.desired.c) / r.denominator.c
        })
        .fold(f64::INFINITY, f64::min);
    assert!(!check_level(&q, 2.0 * cap, &opts.sdp, None).unwrap().feasible);
    assert!(build_feasibility_sdp(&q, -1.0).is_err());
}

#[test]
fn bisection_matches_two_element_brute_force() {
    let (cfg, sc) = load_scenario(SINGLE_TARGET).unwrap();
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(1, 0)).unwrap();
    let noise = NoiseModel::from_config(&cfg);
    let d = baseline(&cfg, &ch, &noise).unwrap();
    let q = assemble_q_matrices(&cfg, &ch, &d.state, &d.w, &noise);
    let zr = d.state.lifted_r();
    let r = &q.targets[0];
    let value = |z: &CVec| {
        let zt = outer(z);
        r.desired.at(&zt, &zr) / r.denominator.at(&zt, &zr)
    };
    // Exhaustive grid over amplitude split and relative phase.
    let p2 = q.budget_sq;
    let mut best = 0.0f64;
    for i in 0..=400 {
        let a1 = 1.0 + (p2 - 2.0).max(0.0).sqrt() * i as f64 / 400.0;
        let a1 = a1.min((p2 - 1.0).sqrt());
        let a2 = (p2 - a1 * a1).max(1.0).sqrt();
        for k in 0..720 {
            let th = k as f64 * std::f64::consts::PI / 360.0;
            let z = CVec::from_vec(vec![C64::new(a1, 0.0), C64::from_polar(a2, th)]);
            best = best.max(value(&z));
        }
    }
    let opts = OptimizerOptions { bisect_tol: 1e-3, ..OptimizerOptions::default() };
    let start = value(&d.state.z_t);
    let b = max_min_bisection(&q, start, &opts).unwrap();
    assert!((b.level - best).abs() <= 5e-3 * best, "bisection {} vs grid {best}", b.level);
}

#[test]
fn coarse_tolerance_bounds_solver_calls() {
    let (cfg, ch, noise) = small_table();
    let d = baseline(&cfg, &ch, &noise).unwrap();
    let q = assemble_q_matrices(&cfg, &ch, &d.state, &d.w, &noise);
    let start = 1e-3;
    let opts = OptimizerOptions { bisect_tol: 0.5, ..OptimizerOptions::default() };
    let b = max_min_bisection(&q, start, &opts).unwrap();
    // Doubling from `start` reaches `level` after log₂(level/start) feasible
    // solves; one more is infeasible, and a ratio-2 bracket already meets 0.5.
    let doublings = (b.level / start).log2().round() as usize;
    assert!(b.sdp_calls <= doublings + 2, "{} calls for {doublings} doublings", b.sdp_calls);
}

#[test]
fn zero_rounds_returns_the_start() {
    let (cfg, ch, noise) = small_table();
    let start = baseline(&cfg, &ch, &noise).unwrap();
    let d = optimize_star_ris(&cfg, &ch, &noise, &OptimizerOptions { rounds: 0, ..OptimizerOptions::default() }).unwrap();
    assert_eq!(d.state, start.state);
    assert!(d.rounds.is_empty());
}

#[test]
fn no_side_t_users_means_no_rate_rows() {
    let (cfg, sc) = load_scenario(SINGLE_TARGET).unwrap();
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(1, 0)).unwrap();
    let noise = NoiseModel::from_config(&cfg);
    let d = baseline(&cfg, &ch, &noise).unwrap();
    let q = assemble_q_matrices(&cfg, &ch, &d.state, &d.w, &noise);
    assert!(q.users_t.is_empty());
    let p = build_feasibility_sdp(&q, 1.0).unwrap();
    assert_eq!(p.constraints.len(), 1 + 2 * 2 + 1);
}

#[test]
fn seeded_reference_run_improves_on_start() {
    let (cfg, sc) = reference_scenario();
    let cfg = cfg.with_amplification_per_root_n(20.0);
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(42, 0)).unwrap();
    let noise = NoiseModel::from_config(&cfg);
    let start = baseline(&cfg, &ch, &noise).unwrap().report.min_target_bound();
    let d = optimize_star_ris(&cfg, &ch, &noise, &OptimizerOptions::default()).unwrap();
    assert!(d.report.min_target_bound() >= start);
    assert!(d.state.is_feasible(cfg.amplification_factor, 1e-9));
}

fn single_target_level(amp: f64) -> (f64, f64) {
    let (cfg, sc) = load_scenario(SINGLE_TARGET).unwrap();
    let cfg = cfg.with_amplification_per_root_n(amp);
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(1, 0)).unwrap();
    let noise = NoiseModel::from_config(&cfg);
    let d = baseline(&cfg, &ch, &noise).unwrap();
    let q = assemble_q_matrices(&cfg, &ch, &d.state, &d.w, &noise);
    let opts = OptimizerOptions { bisect_tol: 1e-3, rounds: 1, ..OptimizerOptions::default() };
    let level = max_min_bisection(&q, d.report.min_target_bound(), &opts).unwrap().level;
    let achieved = optimize_star_ris(&cfg, &ch, &noise, &opts).unwrap().report.min_target_bound();
    (level, achieved)
}

#[test]
fn single_target_relaxation_is_sound_and_monotone_in_budget() {
    let mut last = 0.0;
    for amp in [2.0, 3.0, 4.0] {
        let (level, achieved) = single_target_level(amp);
        assert!(achieved <= level * (1.0 + 2e-3), "amp {amp}: achieved {achieved} above relaxed {level}");
        assert!(level >= last * (1.0 - 1e-3), "amp {amp}: {level} < {last}");
        last = level;
    }
}
