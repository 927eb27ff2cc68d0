//! Max-min target SINR design of the surface coefficients.
//!
//! Each round freezes the beamformers at the current state, lifts both
//! coefficient vectors to PSD matrices, and bisects on a common SINR level.
//! A level is feasible when the margin program (maximize `δ` with every
//! SINR and rate constraint holding with slack `δ`) has `δ* ≥ 0`. The best
//! candidate seen so far is kept, so the result never falls below the
//! starting point. Candidates come from the principal eigenvector and from
//! Gaussian randomization, and always spend the full amplification budget.

use thiserror::Error;

use crate::channels::{complex_normal, trial_rng, ChannelDraw};
use crate::config::{NoiseRegime, Side, SystemConfig};
use crate::linalg::{herm_eig, lambda_max, CMat, CVec, C64};
use crate::link_metrics::{
    echo_power, evaluate, lifted_kernel, side_r_bound_terms, sinr_user_r_approx, user_kernel, MetricsReport,
    NoiseModel,
};
use crate::sdp::{self, Constraint, LinearForm, SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::star_ris::{project_full_budget, StarRisError, StarRisState};
use crate::waveforms::{all_effective_channels, effective_channel, matched_beamformers, Link, WaveformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Surface(#[from] StarRisError),
    #[error(transparent)]
    Beam(#[from] WaveformError),
    #[error(transparent)]
    Sdp(#[from] sdp::SdpError),
    #[error("reflect-side user {index} misses the rate threshold on its direct link ({sinr_db:.2} dB)")]
    DirectLinkInfeasible { index: usize, sinr_db: f64 },
    #[error("SINR level must be nonnegative, got {0}")]
    NegativeLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub rounds: usize,
    /// Relative width at which bisection stops.
    pub bisect_tol: f64,
    pub sdp: SdpOptions,
    /// Extra candidates drawn from `CN(0, Z)` per round.
    pub randomization: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            rounds: 3,
            bisect_tol: 1e-2,
            sdp: SdpOptions { sign_stop: true, ..SdpOptions::default() },
            randomization: 32,
            seed: 0,
        }
    }
}

/// An affine function `Re Tr(T Z_t) + Re Tr(R Z_r) + c` of the lifted variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub t: CMat,
    pub r: CMat,
    pub c: f64,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Self { t: CMat::zeros(n, n), r: CMat::zeros(n, n), c: 0.0 }
    }

    fn constant(n: usize, c: f64) -> Self {
        Self { c, ..Self::zero(n) }
    }

    fn on_t(m: CMat, c: f64) -> Self {
        let n = m.nrows();
        Self { t: m, r: CMat::zeros(n, n), c }
    }

    fn on_r(m: CMat, c: f64) -> Self {
        let n = m.nrows();
        Self { t: CMat::zeros(n, n), r: m, c }
    }

    fn add(&self, o: &Affine) -> Affine {
        Affine { t: &self.t + &o.t, r: &self.r + &o.r, c: self.c + o.c }
    }

    fn scale(&self, k: f64) -> Affine {
        Affine { t: self.t.scale(k), r: self.r.scale(k), c: self.c * k }
    }

    pub fn at(&self, z_t: &CMat, z_r: &CMat) -> f64 {
        crate::linalg::re_trace_prod(&self.t, z_t) + crate::linalg::re_trace_prod(&self.r, z_r) + self.c
    }
}

/// One ratio `desired / (interference + noise)` to be pushed above a level.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratio {
    pub desired: Affine,
    pub denominator: Affine,
}

/// Linearized SINR constraints for one frozen beamformer.
#[derive(Debug, Clone)]
pub struct QMatrices {
    pub n: usize,
    pub budget_sq: f64,
    /// Target bounds in target order.
    pub targets: Vec<Ratio>,
    /// Transmit-side user SINRs with their user index.
    pub users_t: Vec<(usize, Ratio)>,
    pub rate_threshold: f64,
}

/// Builds every lifted kernel for beamformer `w`.
///
/// Side-T echo interference enters through its linear upper bound
/// `P_A² β² λ_max(Q) Tr(R) Tr(Q Z_t)`, Side-R echo interference at its
/// current value, and the amplitude `‖z_t‖²` of the Side-T numerator at `P_A²`.
pub fn assemble_q_matrices(
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    state: &StarRisState,
    w: &CMat,
    noise: &NoiseModel,
) -> QMatrices {
    let n = ch.n();
    let p2 = cfg.amplification_factor.powi(2);
    let r_x = w * w.adjoint();
    let tr_r = r_x.trace().re;
    let n_targets = ch.target_ris.len();

    let mut echo_t = Vec::with_capacity(n_targets);
    let mut echo_r_now = vec![0.0; n_targets];
    let mut kernels = Vec::with_capacity(n_targets);
    #[allow(clippy::needless_range_loop)]
    for m in 0..n_targets {
        match ch.target_side[m] {
            Side::Transmit => {
                let q = lifted_kernel(&ch.target_ris[m], &ch.g);
                let lam = lambda_max(&q);
                let beta = ch.beta_ris[m];
                echo_t.push(Some(q.scale(p2 * beta * beta * lam * tr_r)));
                kernels.push(Some(q));
            }
            Side::Reflect => {
                let u = effective_channel(Link::Target(m), ch, state).expect("target exists");
                echo_r_now[m] = echo_power(&u, ch.echo_amplitude(m), &r_x);
                echo_t.push(None);
                kernels.push(None);
            }
        }
    }
    let interference = |m: usize| {
        let mut a = Affine::zero(n);
        for j in (0..n_targets).filter(|&j| j != m) {
            match &echo_t[j] {
                Some(e) => a.t += e,
                None => a.c += echo_r_now[j],
            }
        }
        a
    };

    let s2 = noise.static_var;
    let row_energy: Vec<f64> = (0..n).map(|i| ch.g.row(i).norm_squared()).collect();
    let (wl, wn) = (ch.rician_factor / (1.0 + ch.rician_factor), 1.0 / (1.0 + ch.rician_factor));
    let tx = ch.t_x() as f64;

    let mut targets = Vec::with_capacity(n_targets);
    for m in 0..n_targets {
        let ratio = match ch.target_side[m] {
            Side::Transmit => {
                let q = kernels[m].as_ref().expect("side T kernel");
                let desired = Affine::on_t(echo_t[m].clone().expect("side T"), 0.0);
                let noise_term = match noise.regime {
                    NoiseRegime::LowGain => Affine::constant(n, s2),
                    NoiseRegime::Exact => {
                        let dg = CMat::from_diagonal(&CVec::from_iterator(
                            n,
                            row_energy.iter().map(|&e| C64::new(noise.v2_var * e, 0.0)),
                        ));
                        Affine::on_t((q.scale(noise.v1_var * p2) + dg).scale(1.0 / tx), s2)
                    }
                    NoiseRegime::HighGain => {
                        // |z_n|⁴ ≤ P_A² |z_n|² keeps the quartic noise linear.
                        let d = CVec::from_iterator(
                            n,
                            (0..n).map(|i| {
                                let los = ch.g_los.row(i).norm_squared();
                                C64::new(noise.v1_var * ch.alpha_bs_ris * p2 * (wl * los + wn) / n as f64, 0.0)
                            }),
                        );
                        Affine::on_t(CMat::from_diagonal(&d), 0.0)
                    }
                };
                Ratio { desired, denominator: interference(m).add(&noise_term) }
            }
            Side::Reflect => {
                let (c0, c1, q) = side_r_bound_terms(m, tr_r, ch);
                Ratio {
                    desired: Affine::on_r(q.scale(c1), c0),
                    denominator: interference(m).add(&Affine::constant(n, s2)),
                }
            }
        };
        targets.push(ratio);
    }

    let mut users_t = Vec::new();
    for k in (0..ch.user_ris.len()).filter(|&k| ch.user_side[k] == Side::Transmit) {
        let h = &ch.user_ris[k];
        let mut desired = Affine::zero(n);
        let mut denominator = Affine::zero(n);
        for j in 0..w.ncols() {
            let v = user_kernel(h, &ch.g, &w.column(j).into_owned());
            if j == k {
                desired.t = v;
            } else {
                denominator.t += v;
            }
        }
        let noise_term = match noise.regime {
            NoiseRegime::LowGain => Affine::constant(n, s2),
            NoiseRegime::Exact => {
                let d = CVec::from_iterator(n, h.iter().map(|x| C64::new(noise.v1_var * x.norm_sqr(), 0.0)));
                Affine::on_t(CMat::from_diagonal(&d), s2)
            }
            NoiseRegime::HighGain => {
                let k_eff = noise.v1_var * ch.alpha_ris_user[k] * (wl * ch.user_ris_los[k].norm_squared() + wn);
                Affine::on_t(CMat::identity(n, n).scale(k_eff), 0.0)
            }
        };
        users_t.push((k, Ratio { desired, denominator: denominator.add(&noise_term) }));
    }

    QMatrices { n, budget_sq: p2, targets, users_t, rate_threshold: cfg.comm_sinr_threshold }
}

/// The margin program for level `level`, in the scaled variables
/// `X_t = Z_t / P_A²` and `X_r = Z_r / N`.
///
/// Rows: one per target and per Side-T user, `N` unit-modulus rows, `N`
/// unit-gain floor rows and one budget row.
pub fn build_feasibility_sdp(q: &QMatrices, level: f64) -> Result<SdpProblem, OptimizerError> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(OptimizerError::NegativeLevel(level));
    }
    let n = q.n;
    let nf = n as f64;
    let mut rows: Vec<Affine> = q
        .targets
        .iter()
        .map(|r| r.desired.add(&r.denominator.scale(-level)))
        .collect();
    rows.extend(q.users_t.iter().map(|(_, r)| r.desired.add(&r.denominator.scale(-q.rate_threshold))));
    let n_ineq = rows.len();

    let mut constraints = Vec::with_capacity(n_ineq + 2 * n + 1);
    for (i, a) in rows.iter().enumerate() {
        let at = a.t.scale(q.budget_sq);
        let ar = a.r.scale(nf);
        let norm = (at.norm_squared() + ar.norm_squared()).sqrt().max(a.c.abs()).max(f64::MIN_POSITIVE);
        let mut form = LinearForm::default().nonneg(i, -1.0).free(0, -1.0);
        if at.norm() > 0.0 {
            form = form.block(0, at.scale(1.0 / norm));
        }
        if ar.norm() > 0.0 {
            form = form.block(1, ar.scale(1.0 / norm));
        }
        constraints.push(Constraint { form, rhs: -a.c / norm });
    }
    let unit = |i: usize| {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = C64::new(1.0, 0.0);
        e
    };
    for i in 0..n {
        constraints.push(Constraint { form: LinearForm::default().block(1, unit(i)), rhs: 1.0 / nf });
    }
    for i in 0..n {
        constraints.push(Constraint {
            form: LinearForm::default().block(0, unit(i)).nonneg(n_ineq + i, -1.0),
            rhs: 1.0 / q.budget_sq,
        });
    }
    constraints.push(Constraint {
        form: LinearForm::default().block(0, CMat::identity(n, n)).nonneg(n_ineq + n, 1.0),
        rhs: 1.0,
    });
    Ok(SdpProblem {
        block_sizes: vec![n, n],
        nonneg_count: n_ineq + n + 1,
        free_count: 1,
        objective: LinearForm::default().free(0, -1.0),
        constraints,
    })
}

/// Outcome of one feasibility query.
#[derive(Debug, Clone)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    pub margin: f64,
    pub status: SdpStatus,
    /// `(Z_t, Z_r)` in unscaled units.
    pub lifted: (CMat, CMat),
    solution: SdpSolution,
}

pub fn check_level(
    q: &QMatrices,
    level: f64,
    opts: &SdpOptions,
    warm: Option<&FeasibilityCheck>,
) -> Result<FeasibilityCheck, OptimizerError> {
    let p = build_feasibility_sdp(q, level)?;
    let sol = sdp::solve(&p, opts, warm.map(|w| &w.solution))?;
    let margin = sol.free[0];
    let feasible = sol.status != SdpStatus::Infeasible && margin >= 0.0;
    let lifted = (sol.blocks[0].scale(q.budget_sq), sol.blocks[1].scale(q.n as f64));
    Ok(FeasibilityCheck { feasible, margin, status: sol.status, lifted, solution: sol })
}

/// Result of a bisection: the highest level found feasible and its solution.
#[derive(Debug, Clone)]
pub struct Bisection {
    pub level: f64,
    pub best: Option<FeasibilityCheck>,
    pub sdp_calls: usize,
    /// ADMM iterations summed over all calls.
    pub iterations: usize,
    pub unconverged: usize,
}

/// Bisects on the common SINR level, starting from `start` and doubling the
/// bracket until it is infeasible.
pub fn max_min_bisection(q: &QMatrices, start: f64, opts: &OptimizerOptions) -> Result<Bisection, OptimizerError> {
    let mut calls = 0;
    let mut iterations = 0;
    let mut unconverged = 0;
    let mut last: Option<FeasibilityCheck> = None;
    let mut probe = |level: f64, last: &mut Option<FeasibilityCheck>| -> Result<FeasibilityCheck, OptimizerError> {
        calls += 1;
        let c = check_level(q, level, &opts.sdp, last.as_ref())?;
        iterations += c.solution.iterations;
        if c.status == SdpStatus::MaxIterations {
            unconverged += 1;
        }
        *last = Some(c.clone());
        Ok(c)
    };

    let mut lo = 0.0;
    let mut best = None;
    let mut hi = start.max(1e-6);
    loop {
        let c = probe(hi, &mut last)?;
        if !c.feasible {
            break;
        }
        lo = hi;
        best = Some(c);
        hi *= 2.0;
        if hi > 1e30 {
            break;
        }
    }
    if best.is_none() {
        // Shrink until something is feasible or the level is negligible.
        let c = probe(0.0, &mut last)?;
        if !c.feasible {
            return Ok(Bisection { level: 0.0, best: None, sdp_calls: calls, iterations, unconverged });
        }
        best = Some(c);
    }
    while hi - lo > opts.bisect_tol * hi {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi / 8.0 };
        let c = probe(mid, &mut last)?;
        if c.feasible {
            lo = mid;
            best = Some(c);
        } else {
            hi = mid;
        }
        if lo == 0.0 && hi < 1e-12 {
            break;
        }
    }
    Ok(Bisection { level: lo, best, sdp_calls: calls, iterations, unconverged })
}

/// Per-round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub level: f64,
    pub achieved: f64,
    pub defect_t: f64,
    pub defect_r: f64,
    pub sdp_calls: usize,
    pub iterations: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeStatus {
    /// At least one round improved on the starting point.
    Improved,
    /// The starting point was kept.
    Kept,
    /// Some SDP hit the iteration cap.
    SolverLimit,
}

impl OptimizeStatus {
    pub fn tag(self) -> &'static str {
        match self {
            OptimizeStatus::Improved => "improved",
            OptimizeStatus::Kept => "kept",
            OptimizeStatus::SolverLimit => "solver-limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub state: StarRisState,
    pub w: CMat,
    pub report: MetricsReport,
    pub rounds: Vec<RoundLog>,
    pub status: OptimizeStatus,
}

/// Matched beams for a state.
pub fn beams_for(cfg: &SystemConfig, ch: &ChannelDraw, state: &StarRisState) -> Result<CMat, OptimizerError> {
    let chans = all_effective_channels(ch, state);
    Ok(matched_beamformers(&chans, cfg.bs_power_w, ch.user_ris.len(), ch.target_ris.len())?)
}

/// Reports the uniform starting state without optimizing.
pub fn baseline(cfg: &SystemConfig, ch: &ChannelDraw, noise: &NoiseModel) -> Result<Design, OptimizerError> {
    let state = project_full_budget(
        &StarRisState::uniform(ch.n(), cfg.amplification_factor).z_t,
        &CVec::from_element(ch.n(), C64::new(1.0, 0.0)),
        cfg.amplification_factor,
    )?;
    let w = beams_for(cfg, ch, &state)?;
    let report = evaluate(&w, ch, &state, noise);
    Ok(Design { state, w, report, rounds: Vec::new(), status: OptimizeStatus::Kept })
}

/// Noise seen when no element amplifies: the static floor only.
pub fn passive_noise(noise: &NoiseModel) -> NoiseModel {
    NoiseModel { v1_var: 0.0, v2_var: 0.0, ..noise.with_regime(NoiseRegime::LowGain) }
}

/// Fully passive reference: unit-modulus transmission, no amplifier noise,
/// and `extra_power_w` added to the BS budget.
pub fn passive_benchmark(
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    noise: &NoiseModel,
    extra_power_w: f64,
) -> Result<Design, OptimizerError> {
    let mut cfg = cfg.clone();
    cfg.bs_power_w += extra_power_w.max(0.0);
    let quiet = passive_noise(noise);
    let state = StarRisState::passive(ch.n());
    let w = beams_for(&cfg, ch, &state)?;
    let report = evaluate(&w, ch, &state, &quiet);
    Ok(Design { state, w, report, rounds: Vec::new(), status: OptimizeStatus::Kept })
}

/// Fails when a Side-R user cannot meet the rate threshold over its direct
/// link, which no surface setting can change.
pub fn direct_link_precheck(cfg: &SystemConfig, ch: &ChannelDraw, w: &CMat, noise: &NoiseModel) -> Result<(), OptimizerError> {
    for k in (0..ch.user_ris.len()).filter(|&k| ch.user_side[k] == Side::Reflect) {
        let s = sinr_user_r_approx(k, w, ch, noise).expect("side R user");
        if s < cfg.comm_sinr_threshold {
            return Err(OptimizerError::DirectLinkInfeasible { index: k, sinr_db: 10.0 * s.log10() });
        }
    }
    Ok(())
}

/// `Z^{1/2}` of a PSD matrix, negative eigenvalues clipped.
fn psd_root(z: &CMat) -> CMat {
    let (vals, vecs) = herm_eig(z);
    CMat::from_fn(z.nrows(), z.ncols(), |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt())
}

/// Alternates frozen-beam SDP rounds with rank-one recovery.
pub fn optimize_star_ris(
    cfg: &SystemConfig,
    ch: &ChannelDraw,
    noise: &NoiseModel,
    opts: &OptimizerOptions,
) -> Result<Design, OptimizerError> {
    let mut best = baseline(cfg, ch, noise)?;
    direct_link_precheck(cfg, ch, &best.w, noise)?;
    let mut value = best.report.min_target_bound();
    let mut current = best.state.clone();
    let mut current_w = best.w.clone();
    let mut rounds = Vec::new();
    let mut improved = false;
    let mut limited = false;
    let mut rng = trial_rng(opts.seed, 0);
    for _ in 0..opts.rounds {
        let q = assemble_q_matrices(cfg, ch, &current, &current_w, noise);
        let start = q
            .targets
            .iter()
            .map(|r| r.desired.at(&current.lifted_t(), &current.lifted_r()) / r.denominator.at(&current.lifted_t(), &current.lifted_r()))
            .fold(f64::INFINITY, f64::min);
        let bis = max_min_bisection(&q, start, opts)?;
        limited |= bis.unconverged > 0;
        let Some(sol) = bis.best else {
            rounds.push(RoundLog {
                level: 0.0,
                achieved: value,
                defect_t: f64::NAN,
                defect_r: f64::NAN,
                sdp_calls: bis.sdp_calls,
                iterations: bis.iterations,
                unconverged: bis.unconverged,
            });
            break;
        };
        let sources = [sol.lifted.clone()];
        let score = |zt: &CVec, zr: &CVec| -> Result<(f64, StarRisState, CMat, MetricsReport), OptimizerError> {
            let state = project_full_budget(zt, zr, cfg.amplification_factor)?;
            let w = beams_for(cfg, ch, &state)?;
            let report = evaluate(&w, ch, &state, noise);
            Ok((report.min_target_bound(), state, w, report))
        };
        let (zt, defect_t) = sdp::rank_one(&sources[0].0);
        let (zr, defect_r) = sdp::rank_one(&sources[0].1);
        let mut cand = score(&zt, &zr)?;
        for (k, (lt, lr)) in sources.iter().enumerate() {
            if k > 0 {
                let c = score(&sdp::rank_one(lt).0, &sdp::rank_one(lr).0)?;
                if c.0 > cand.0 {
                    cand = c;
                }
            }
            let root_t = psd_root(lt);
            let root_r = psd_root(lr);
            for _ in 0..opts.randomization {
                let xt = &root_t * CVec::from_fn(ch.n(), |_, _| complex_normal(&mut rng));
                let xr = &root_r * CVec::from_fn(ch.n(), |_, _| complex_normal(&mut rng));
                let c = score(&xt, &xr)?;
                if c.0 > cand.0 {
                    cand = c;
                }
            }
        }
        let (achieved, state, w, report) = cand;
        rounds.push(RoundLog {
            level: bis.level,
            achieved,
            defect_t,
            defect_r,
            sdp_calls: bis.sdp_calls,
            iterations: bis.iterations,
            unconverged: bis.unconverged,
        });
        current = state.clone();
        current_w = w.clone();
        if achieved > value {
            value = achieved;
            improved = true;
            best = Design { state, w, report, rounds: Vec::new(), status: OptimizeStatus::Improved };
        }
    }
    best.rounds = rounds;
    best.status = if limited {
        OptimizeStatus::SolverLimit
    } else if improved {
        OptimizeStatus::Improved
    } else {
        OptimizeStatus::Kept
    };
    Ok(best)
}
