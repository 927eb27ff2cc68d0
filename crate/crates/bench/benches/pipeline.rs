use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use isac_core::link_metrics::evaluate;
use isac_core::optimizer::{assemble_q_matrices, baseline, build_feasibility_sdp};
use isac_core::sdp::{solve, SdpOptions};
use isac_core::sensing_crb::crb_for_target;
use isac_core::{draw_channels, reference_scenario, trial_rng, NoiseModel};

fn benches(c: &mut Criterion) {
    let (cfg, sc) = reference_scenario();
    let noise = NoiseModel::from_config(&cfg);
    let ch = draw_channels(&cfg, &sc, &mut trial_rng(1, 0)).unwrap();
    let start = baseline(&cfg, &ch, &noise).unwrap();
    let r_x = &start.w * start.w.adjoint();

    c.bench_function("channel_draw", |b| {
        let mut trial = 0;
        b.iter(|| {
            trial += 1;
            draw_channels(&cfg, &sc, &mut trial_rng(1, trial)).unwrap()
        })
    });
    c.bench_function("evaluate", |b| b.iter(|| evaluate(black_box(&start.w), &ch, &start.state, &noise)));
    c.bench_function("crb_both_targets", |b| {
        b.iter(|| {
            for (m, t) in sc.targets.iter().enumerate() {
                let a = t.angles_bs.unwrap_or(t.angles_ris);
                let _ = black_box(crb_for_target(m, a, &cfg, &ch, &start.state, &r_x, &noise));
            }
        })
    });

    let q = assemble_q_matrices(&cfg, &ch, &start.state, &start.w, &noise);
    let problem = build_feasibility_sdp(&q, start.report.min_target_bound()).unwrap();
    let mut g = c.benchmark_group("sdp");
    g.sample_size(10);
    g.bench_function("feasibility_n36", |b| b.iter(|| solve(black_box(&problem), &SdpOptions::default(), None).unwrap()));
    g.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
