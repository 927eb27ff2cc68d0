use std::process::Command;

use isac_cli::eval::waveform_csv;
use isac_cli::{evaluate_once, run_sweep, Figure, RunOptions, SweepSpec, SCHEMA};
use isac_core::reference_scenario;

fn initial_only() -> RunOptions {
    RunOptions { optimize: false, ..RunOptions::default() }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isac-lab"))
}

fn parse(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn aggregated_row_counts() {
    let (cfg, sc) = reference_scenario();
    for (fig, points) in [(Figure::Fig4b, 4), (Figure::Fig7, 9)] {
        let t = run_sweep(&SweepSpec::for_figure(fig, 2, 5), &cfg, &sc, &initial_only()).unwrap();
        assert_eq!(t.means().count(), points);
        assert_eq!(t.rows.len(), points * 3);
    }
}

#[test]
fn csv_is_versioned_and_means_match_trials() {
    let (cfg, sc) = reference_scenario();
    let t = run_sweep(&SweepSpec::for_figure(Figure::Fig9, 4, 3), &cfg, &sc, &initial_only()).unwrap();
    let text = t.to_csv();
    assert_eq!(text.lines().next().unwrap(), format!("#schema={SCHEMA}"));
    let (header, rows) = parse(&text);
    let trial = header.iter().position(|h| h == "trial").unwrap();
    let first_metric = header.iter().position(|h| h == "status").unwrap() + 1;
    let mut pending: Vec<&Vec<String>> = Vec::new();
    let mut checked = 0;
    for row in &rows {
        if row[trial] != "mean" {
            pending.push(row);
            continue;
        }
        for c in first_metric..header.len() {
            let vals: Vec<f64> = pending.iter().map(|r| r[c].parse::<f64>().unwrap()).filter(|v| !v.is_nan()).collect();
            let mean: f64 = row[c].parse().unwrap();
            if vals.is_empty() {
                assert!(mean.is_nan());
            } else {
                let expect = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((mean - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{}: {mean} vs {expect}", header[c]);
            }
            checked += 1;
        }
        pending.clear();
    }
    assert!(checked > 0);
}

#[test]
fn rows_are_ordered_by_point_then_trial() {
    let (cfg, sc) = reference_scenario();
    let t = run_sweep(&SweepSpec::for_figure(Figure::Fig7, 3, 9), &cfg, &sc, &initial_only()).unwrap();
    let keys: Vec<(usize, u64)> = t.rows.iter().map(|r| (r.point, r.trial.unwrap_or(u64::MAX))).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn same_seed_same_bytes() {
    let (cfg, sc) = reference_scenario();
    let spec = SweepSpec::for_figure(Figure::Fig5, 1, 42);
    let a = run_sweep(&spec, &cfg, &sc, &initial_only()).unwrap().to_csv();
    let b = run_sweep(&spec, &cfg, &sc, &initial_only()).unwrap().to_csv();
    assert_eq!(a, b);
}

#[test]
fn infeasible_points_are_kept_with_status() {
    let (mut cfg, sc) = reference_scenario();
    cfg.comm_sinr_threshold = 1e6;
    let t = run_sweep(&SweepSpec::for_figure(Figure::Fig4b, 2, 1), &cfg, &sc, &initial_only()).unwrap();
    assert_eq!(t.rows.len(), 12);
    assert!(t.rows.iter().filter(|r| r.trial.is_some()).all(|r| r.status == "infeasible"));
}

#[test]
fn eval_reports_every_entity() {
    let (cfg, sc) = reference_scenario();
    let r = evaluate_once(&cfg, &sc, 42, &initial_only()).unwrap();
    let q = r.quantities();
    assert_eq!(q.iter().filter(|(n, _)| n.ends_with("_sinr_db")).count(), 2);
    assert_eq!(q.iter().filter(|(n, _)| n.ends_with("_bound_db")).count(), 2);
    assert_eq!(q.iter().filter(|(n, _)| n.ends_with("_rcrb_h_deg")).count(), 2);
    assert!(q.iter().filter(|(n, _)| n.contains("rcrb")).all(|(_, v)| v.is_finite() && *v > 0.0));
    assert!(q.iter().any(|(n, _)| n == "p_ris_dbm"));
    assert!(r.outcome.design.rounds.is_empty());
}

#[test]
fn waveform_dump_has_one_row_per_sample() {
    let (cfg, _) = reference_scenario();
    let text = waveform_csv(&cfg, 1).unwrap();
    let (header, rows) = parse(&text);
    assert_eq!(header, ["l", "value"]);
    assert_eq!(rows.len(), cfg.chirp_length);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin().args(["eval", "--seed", "3", "--no-optimize"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("target1_R_rcrb_h_deg"));

    let bad = dir.path().join("bad.cfg");
    let text = include_str!("../../../configs/table1.cfg").replace("bs_antennas = 8", "bs_antennas = -8");
    std::fs::write(&bad, text).unwrap();
    let out = bin().args(["eval", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bs_antennas"));

    let hard = dir.path().join("hard.cfg");
    let text = include_str!("../../../configs/table1.cfg").replace("comm_sinr_threshold_db = -10.0", "comm_sinr_threshold_db = 60.0");
    std::fs::write(&hard, text).unwrap();
    let out = bin().args(["eval", "--config", hard.to_str().unwrap(), "--no-optimize"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let usage = bin().args(["sweep", "--figure", "fig99"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn sdp_dump_solves_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let sdp = dir.path().join("first.sdp");
    let wave = dir.path().join("wave.csv");
    let out = bin()
        .args(["eval", "--no-optimize", "--seed", "2", "--dump-sdp", sdp.to_str().unwrap(), "--dump-waveform", wave.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&wave).unwrap().starts_with("l,value\n0,"));
    let solved = bin().args(["solve-sdp", sdp.to_str().unwrap()]).output().unwrap();
    assert!(String::from_utf8_lossy(&solved.stdout).starts_with("status "));
    assert!(matches!(solved.status.code(), Some(0) | Some(3)));
}

#[test]
fn binary_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let s = bin()
            .args(["sweep", "--figure", "fig7", "--seed", "42", "--trials", "1", "--rounds", "1", "--out", p.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(s.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
