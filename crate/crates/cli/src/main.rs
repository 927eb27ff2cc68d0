use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isac_cli::eval::{first_sdp_dump, waveform_csv};
use isac_cli::{evaluate_once, run_sweep, Figure, RunError, RunOptions, SweepSpec};
use isac_core::optimizer::OptimizerOptions;
use isac_core::sdp::{self, SdpOptions, SdpStatus};
use isac_core::{load_scenario, reference_scenario, Scenario, SystemConfig};

#[derive(Parser)]
#[command(name = "isac-lab", version, about = "Hybrid surface sensing and communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep for one figure, written as CSV.
    Sweep {
        #[arg(long)]
        figure: Figure,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One pipeline run with all diagnostics.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write one chirp block as `l,value` CSV.
        #[arg(long)]
        dump_waveform: Option<PathBuf>,
        /// Write the first feasibility SDP in text form.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
    },
    /// Solve an SDP previously written with `--dump-sdp`.
    SolveSdp {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        sdp_tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Report the initial surface state without running the design.
    #[arg(long)]
    no_optimize: bool,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long, default_value_t = 1e-2)]
    bisect_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    sdp_tol: f64,
}

impl Common {
    fn scenario(&self) -> Result<(SystemConfig, Scenario), RunError> {
        match &self.config {
            None => Ok(reference_scenario()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
                Ok(load_scenario(&text)?)
            }
        }
    }

    fn run_options(&self) -> Result<RunOptions, RunError> {
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return Err(RunError::Sweep(format!("--bisect-tol must lie in (0, 1), got {}", self.bisect_tol)));
        }
        if self.sdp_tol.is_nan() || self.sdp_tol <= 0.0 {
            return Err(RunError::Sweep(format!("--sdp-tol must be positive, got {}", self.sdp_tol)));
        }
        let base = OptimizerOptions::default();
        Ok(RunOptions {
            optimize: !self.no_optimize,
            optimizer: OptimizerOptions {
                rounds: self.rounds,
                bisect_tol: self.bisect_tol,
                sdp: SdpOptions { tol: self.sdp_tol, ..base.sdp },
                ..base
            },
        })
    }
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Sweep { figure, common, trials, out } => {
            let (cfg, sc) = common.scenario()?;
            let spec = SweepSpec::for_figure(figure, trials, common.seed);
            let table = run_sweep(&spec, &cfg, &sc, &common.run_options()?)?;
            let text = table.to_csv();
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Eval { common, csv, dump_waveform, dump_sdp } => {
            let (cfg, sc) = common.scenario()?;
            if let Some(p) = dump_waveform {
                write(&p, &waveform_csv(&cfg, common.seed)?)?;
            }
            if let Some(p) = dump_sdp {
                write(&p, &first_sdp_dump(&cfg, &sc, common.seed)?)?;
            }
            let report = evaluate_once(&cfg, &sc, common.seed, &common.run_options()?)?;
            print!("{}", report.pretty());
            if let Some(p) = csv {
                write(&p, &report.to_csv())?;
            }
        }
        Command::SolveSdp { input, sdp_tol } => {
            let text = std::fs::read_to_string(&input)?;
            let problem = sdp::load(&text).map_err(|e| RunError::Sweep(e.to_string()))?;
            let opts = SdpOptions { tol: sdp_tol, ..SdpOptions::default() };
            let sol = sdp::solve(&problem, &opts, None).map_err(|e| RunError::Solver(e.to_string()))?;
            println!(
                "status {}  objective {:.9e}  dual {:.9e}  residuals {:.2e}/{:.2e}  iterations {}",
                sol.status.tag(),
                sol.primal_objective,
                sol.dual_objective,
                sol.primal_residual,
                sol.dual_residual,
                sol.iterations
            );
            match sol.status {
                SdpStatus::Optimal => {}
                SdpStatus::Infeasible => return Err(RunError::Infeasible("SDP is infeasible".into())),
                SdpStatus::MaxIterations => return Err(RunError::Solver("iteration limit reached".into())),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the config exit code; 2 means infeasible.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isac-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
