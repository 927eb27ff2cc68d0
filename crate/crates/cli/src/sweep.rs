//! Monte Carlo sweeps over operating points.
//!
//! Every `(point, trial)` pair is an independent job keyed by the master
//! seed and the trial index, so the same trial sees the same channel draw
//! at every point of equal size. Jobs run on a thread pool and are
//! collected in order, which keeps the CSV byte-stable.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use isac_core::config::{db_to_linear, linear_to_db, watts_to_dbm};
use isac_core::{Scenario, SystemConfig};

use crate::run::{run_pipeline, RunError, RunOptions};

/// Tag written on the first line of every sweep CSV.
pub const SCHEMA: &str = "isac-sweep/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Side-T target SINR against amplification, one curve per BS power.
    Fig3,
    /// Side-R target SINR against amplification.
    Fig4a,
    /// Side-R target SINR against BS power.
    Fig4b,
    /// Both target SINRs against surface size, with the passive reference.
    Fig5,
    /// Side-T user SINR against surface size.
    Fig6,
    /// Active-element power against surface size and amplification.
    Fig7,
    /// Side-T root CRB against surface size, with the passive reference.
    Fig8,
    /// Side-R root CRB against BS power and surface size.
    Fig9,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Fig3,
        Figure::Fig4a,
        Figure::Fig4b,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Figure {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| RunError::Sweep(format!("unknown figure {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Hybrid,
    /// Unit-modulus surface with the BS budget raised by the hybrid's
    /// active-element power.
    Passive,
}

impl Scheme {
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Hybrid => "hybrid",
            Scheme::Passive => "passive",
        }
    }
}

/// One operating point. The surface is a `side × side` grid and the
/// amplification budget is `amp_per_root_n · √N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub scheme: Scheme,
    pub p_bs_db: f64,
    pub side: usize,
    pub amp_per_root_n: f64,
}

impl Point {
    pub fn hybrid(p_bs_db: f64, side: usize, amp_per_root_n: f64) -> Self {
        Self { scheme: Scheme::Hybrid, p_bs_db, side, amp_per_root_n }
    }

    pub fn n(&self) -> usize {
        self.side * self.side
    }

    /// The base config specialized to this point.
    pub fn config(&self, base: &SystemConfig) -> SystemConfig {
        let mut cfg = base.with_grid(self.side, self.side).with_amplification_per_root_n(self.amp_per_root_n);
        cfg.bs_power_w = db_to_linear(self.p_bs_db);
        cfg
    }

    fn key(&self) -> (Scheme, f64, f64, usize) {
        (self.scheme, self.p_bs_db, self.amp_per_root_n, self.side)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub figure: Figure,
    pub points: Vec<Point>,
    pub trials: usize,
    pub seed: u64,
}

fn grid(schemes: &[Scheme], p_bs: &[f64], amps: &[f64], sides: &[usize]) -> Vec<Point> {
    let mut out = Vec::new();
    for &scheme in schemes {
        for &p_bs_db in p_bs {
            for &amp_per_root_n in amps {
                for &side in sides {
                    out.push(Point { scheme, p_bs_db, side, amp_per_root_n });
                }
            }
        }
    }
    out
}

const AMP_STEPS: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];
const BS_POWERS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

impl SweepSpec {
    /// Default operating points for a figure.
    pub fn for_figure(figure: Figure, trials: usize, seed: u64) -> Self {
        use Scheme::*;
        let points = match figure {
            Figure::Fig3 => grid(&[Hybrid], &BS_POWERS, &AMP_STEPS, &[6]),
            Figure::Fig4a => grid(&[Hybrid], &[10.0], &AMP_STEPS, &[6]),
            Figure::Fig4b => grid(&[Hybrid], &BS_POWERS, &[25.0], &[6]),
            Figure::Fig5 => {
                let sides = [2, 3, 4, 5, 6, 7, 8];
                let mut p = grid(&[Hybrid], &[10.0], &[15.0, 20.0, 25.0], &sides);
                p.extend(grid(&[Passive], &[10.0], &[25.0], &sides));
                p
            }
            Figure::Fig6 => grid(&[Hybrid], &[10.0, 20.0], &[25.0], &[4, 5, 6, 7, 8]),
            Figure::Fig7 => grid(&[Hybrid], &[10.0], &[15.0, 20.0, 25.0], &[4, 6, 7]),
            Figure::Fig8 => {
                let mut p = grid(&[Hybrid], &[20.0], &[15.0, 20.0, 25.0], &[4, 6, 7]);
                p.extend(grid(&[Passive], &[20.0], &[25.0], &[4, 6, 7]));
                p
            }
            Figure::Fig9 => grid(&[Hybrid], &BS_POWERS, &[25.0], &[4, 6, 7]),
        };
        Self { figure, points, trials, seed }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.trials == 0 {
            return Err(RunError::Sweep("trials must be at least 1".into()));
        }
        if self.points.is_empty() {
            return Err(RunError::Sweep("no operating points".into()));
        }
        for p in &self.points {
            if !p.p_bs_db.is_finite() || !p.amp_per_root_n.is_finite() || p.side == 0 {
                return Err(RunError::Sweep(format!("bad operating point {p:?}")));
            }
            if p.amp_per_root_n < 1.0 {
                return Err(RunError::Sweep(format!("amplification per √N must be at least 1, got {}", p.amp_per_root_n)));
            }
        }
        for w in self.points.windows(2) {
            if w[0].key().partial_cmp(&w[1].key()) != Some(std::cmp::Ordering::Less) {
                return Err(RunError::Sweep("operating points must be sorted and distinct".into()));
            }
        }
        Ok(())
    }
}

/// A row of the sweep: one trial, or the mean over a point's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: usize,
    /// `None` for the aggregated mean row.
    pub trial: Option<u64>,
    pub status: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub spec: SweepSpec,
    /// Names of the metric columns, matching `Row::values`.
    pub metrics: Vec<String>,
    pub rows: Vec<Row>,
}

/// Leading, non-metric columns.
pub const KEY_COLUMNS: [&str; 8] = ["figure", "scheme", "p_bs_db", "n", "amp_per_root_n", "trial", "seed", "status"];

/// Statuses whose trial rows are excluded from the means.
const FAILED: [&str; 2] = ["infeasible", "solver-failure"];

pub fn metric_columns(sc: &Scenario) -> Vec<String> {
    let mut cols = Vec::new();
    for (k, u) in sc.users.iter().enumerate() {
        cols.push(format!("user{k}_{}_sinr_db", u.side.tag()));
    }
    for (m, t) in sc.targets.iter().enumerate() {
        let s = t.side.tag();
        cols.push(format!("target{m}_{s}_bound_db"));
        cols.push(format!("target{m}_{s}_exact_db"));
        cols.push(format!("target{m}_{s}_rcrb_deg"));
    }
    for c in ["p_ris_dbm", "defect_t", "defect_r", "sdp_iterations", "rounds"] {
        cols.push(c.to_string());
    }
    cols
}

fn trial_values(
    base: &SystemConfig,
    sc: &Scenario,
    p: &Point,
    run: &RunOptions,
    seed: u64,
    trial: u64,
    width: usize,
) -> Result<(String, Vec<f64>), RunError> {
    let cfg = p.config(base);
    let out = match run_pipeline(&cfg, sc, run, seed, trial, p.scheme == Scheme::Passive) {
        Ok(o) => o,
        Err(RunError::Infeasible(_)) => return Ok(("infeasible".into(), vec![f64::NAN; width])),
        Err(RunError::Solver(_)) => return Ok(("solver-failure".into(), vec![f64::NAN; width])),
        Err(e) => return Err(e),
    };
    let r = &out.design.report;
    let mut v = Vec::with_capacity(width);
    v.extend(r.users.iter().map(|u| linear_to_db(u.sinr)));
    for (m, t) in r.targets.iter().enumerate() {
        v.push(linear_to_db(t.bound));
        v.push(linear_to_db(t.exact));
        v.push(out.root_crb_deg(m));
    }
    v.push(watts_to_dbm(r.p_ris));
    let last = out.design.rounds.iter().rev().find(|l| l.defect_t.is_finite());
    v.push(last.map_or(f64::NAN, |l| l.defect_t));
    v.push(last.map_or(f64::NAN, |l| l.defect_r));
    v.push(out.design.rounds.iter().map(|l| l.iterations).sum::<usize>() as f64);
    v.push(out.design.rounds.len() as f64);
    debug_assert_eq!(v.len(), width);
    Ok((out.design.status.tag().to_string(), v))
}

/// Mean of the non-NaN entries, NaN when there are none.
fn column_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.filter(|v| !v.is_nan()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs every `(point, trial)` job and appends a mean row per point.
pub fn run_sweep(spec: &SweepSpec, base: &SystemConfig, sc: &Scenario, run: &RunOptions) -> Result<SweepTable, RunError> {
    spec.validate()?;
    let metrics = metric_columns(sc);
    let width = metrics.len();
    let jobs: Vec<(usize, u64)> =
        (0..spec.points.len()).flat_map(|p| (0..spec.trials as u64).map(move |t| (p, t))).collect();
    let results: Vec<(String, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(p, t)| trial_values(base, sc, &spec.points[p], run, spec.seed, t, width))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(jobs.len() + spec.points.len());
    for (p, chunk) in results.chunks(spec.trials).enumerate() {
        let start = rows.len();
        for (t, (status, values)) in chunk.iter().enumerate() {
            rows.push(Row { point: p, trial: Some(t as u64), status: status.clone(), values: values.clone() });
        }
        let kept: Vec<&Row> = rows[start..].iter().filter(|r| !FAILED.contains(&r.status.as_str())).collect();
        let values = (0..width).map(|c| column_mean(kept.iter().map(|r| r.values[c]))).collect();
        rows.push(Row { point: p, trial: None, status: "mean".into(), values });
    }
    Ok(SweepTable { spec: spec.clone(), metrics, rows })
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

impl SweepTable {
    pub fn columns(&self) -> Vec<String> {
        KEY_COLUMNS.iter().map(|s| s.to_string()).chain(self.metrics.iter().cloned()).collect()
    }

    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    /// Mean rows paired with their points, in sweep order.
    pub fn means(&self) -> impl Iterator<Item = (&Point, &Row)> {
        self.rows.iter().filter(|r| r.trial.is_none()).map(|r| (&self.spec.points[r.point], r))
    }

    /// Mean of metric `name` at the point matching `pred`.
    pub fn mean_at(&self, name: &str, pred: impl Fn(&Point) -> bool) -> Option<f64> {
        let c = self.metric_index(name)?;
        self.means().find(|(p, _)| pred(p)).map(|(_, r)| r.values[c])
    }

    /// Serializes to CSV: a `#schema=` line, the header, then the rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns()).expect("in-memory write");
        for r in &self.rows {
            let p = &self.spec.points[r.point];
            let mut rec = vec![
                self.spec.figure.tag().to_string(),
                p.scheme.tag().to_string(),
                number(p.p_bs_db),
                p.n().to_string(),
                number(p.amp_per_root_n),
                r.trial.map_or_else(|| "mean".to_string(), |t| t.to_string()),
                self.spec.seed.to_string(),
                r.status.clone(),
            ];
            rec.extend(r.values.iter().map(|&v| number(v)));
            w.write_record(&rec).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("ascii output");
        format!("#schema={SCHEMA}\n{body}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_specs_are_valid() {
        for f in Figure::ALL {
            SweepSpec::for_figure(f, 3, 1).validate().unwrap();
            assert_eq!(f.tag().parse::<Figure>().unwrap(), f);
        }
        assert_eq!(SweepSpec::for_figure(Figure::Fig4b, 1, 0).points.len(), 4);
        assert_eq!(SweepSpec::for_figure(Figure::Fig7, 1, 0).points.len(), 9);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = SweepSpec::for_figure(Figure::Fig7, 0, 0);
        assert!(s.validate().is_err());
        s.trials = 2;
        s.points.reverse();
        assert!(s.validate().is_err());
        s.points = vec![Point::hybrid(f64::NAN, 6, 25.0)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn nan_skipping_mean() {
        assert_eq!(column_mean([1.0, f64::NAN, 3.0].into_iter()), 2.0);
        assert!(column_mean([f64::NAN].into_iter()).is_nan());
    }
}
