//! Command-line front end.
//!
//! Exit codes: 0 success, 2 blow-up detected where the preset expects it,
//! 3 unexpected blow-up or failed checks, 4 configuration error, 5 internal error.

pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{fit_decay, AnalysisError, FIT_FLOOR};
use crate::experiments::{
    self, condition_summary, convergence_study, preset, ExpectedOutcome, ExperimentError, ExperimentPreset, SweepSpec,
};
use crate::functionals::poincare_lambda1;
use crate::gamma::admissible_b;
use crate::solver::{simulate, SimulationConfig, SolverError, StepStatus};
use config::{parse_config_with, ConfigError, ParsedConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECTED_BLOWUP: i32 = 2;
pub const EXIT_FAILED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "thermovisco",
    version,
    about = "1D thermoviscoelastic simulations, condition checks and decay analysis"
)]
pub struct Cli {
    /// More output on stderr (repeatable)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only errors on stderr
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArgs {
    /// Configuration file (`key = value` lines)
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a key after the file, e.g. `--set a=0.5` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the structural conditions on gamma for a configuration
    CheckGamma {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run one simulation and write its series
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (default: the artifacts tree)
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write gnuplot data files
        #[arg(long)]
        plot_data: bool,
    },
    /// Run a named preset with its checks
    RunPreset {
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Artifacts root (default: $THERMOVISCO_RUNS_DIR or ./runs)
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        #[arg(long)]
        plot_data: bool,
    },
    /// Cross-product parameter sweep over a base preset
    Sweep {
        #[arg(long)]
        base: String,
        /// `key=v1,v2,...` (repeatable)
        #[arg(long = "axis", value_name = "KEY=VALUES", required = true)]
        axes: Vec<String>,
        #[arg(short, long)]
        out: PathBuf,
        /// Worker threads (0 = all cores)
        #[arg(short, long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value_t = experiments::SWEEP_DEFAULT_CAP)]
        cap: usize,
    },
    /// Fit `C exp(-beta t)` to a column of a series CSV
    FitDecay {
        series: PathBuf,
        #[arg(long, default_value = "ux_linf")]
        column: String,
        #[arg(long, default_value_t = FIT_FLOOR)]
        floor: f64,
    },
    /// Manufactured-solution convergence study
    Convergence {
        /// Preset to refine (must use manufactured forcing)
        #[arg(long, default_value = "mms")]
        preset: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1.8)]
        min_order: f64,
        #[arg(long, default_value_t = 2.2)]
        max_order: f64,
    },
}

/// Error with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: format!("config error: {e}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::UnknownPreset(_)
            | ExperimentError::Inconsistent { .. }
            | ExperimentError::Config(_)
            | ExperimentError::Sweep(_)
            | ExperimentError::Gamma(_) => EXIT_CONFIG,
            ExperimentError::Solver { source, .. } => solver_code(source),
            ExperimentError::Io { .. } => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        Self {
            code: solver_code(&e),
            message: e.to_string(),
        }
    }
}

fn solver_code(e: &SolverError) -> i32 {
    match e {
        SolverError::InvalidConfig(_) | SolverError::Manufactured(_) | SolverError::Gamma(_) => EXIT_CONFIG,
        _ => EXIT_INTERNAL,
    }
}

fn internal(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_INTERNAL,
        message: format!("{context}: {e}"),
    }
}

struct Out {
    verbose: u8,
    quiet: bool,
}

impl Out {
    fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Results go to stdout; progress and diagnostics to stderr.
    fn result(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn debug(&self, msg: &str) {
        if self.verbose > 0 && !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = Out {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    match dispatch(cli.command, &out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load(args: &ConfigArgs) -> Result<ParsedConfig, CliError> {
    let (text, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError {
                code: EXIT_CONFIG,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            (text, path.parent().map(Path::to_path_buf))
        }
        None => (String::new(), None),
    };
    Ok(parse_config_with(&text, &args.set, base.as_deref())?)
}

fn preset_with_overrides(name: &str, set: &[String]) -> Result<ExperimentPreset, CliError> {
    let mut p = preset(name).ok_or_else(|| ExperimentError::UnknownPreset(name.into()))?;
    if !set.is_empty() {
        p.config = parse_config_with(&format!("preset = \"{name}\"\n"), set, None)?.config;
    }
    Ok(p)
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| internal("serializing", e))?;
    println!("{text}");
    Ok(())
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| internal(&path.display().to_string(), e))
}

fn write_plot_data(dir: &Path, config: &SimulationConfig, result: &crate::solver::SimulationResult) -> Result<(), CliError> {
    write(&dir.join("series.dat"), &csv::series_plot_data(&result.series))?;
    let mut states: Vec<&crate::solver::State> = result.trace.snapshots.iter().collect();
    states.push(&result.final_state);
    write(
        &dir.join("profiles.dat"),
        &csv::profile_plot_data(&config.grid, config.a, &states),
    )
}

fn dispatch(command: Command, out: &Out) -> Result<i32, CliError> {
    match command {
        Command::CheckGamma { config } => {
            let parsed = load(&config)?;
            let c = &parsed.config;
            let conditions = condition_summary(c).map_err(|e| internal("condition checks", e))?;
            let lambda1 = poincare_lambda1(c.grid.length()).lambda1;
            let admissible = admissible_b(c.a, c.d, c.gamma.at_zero(), lambda1);
            #[derive(Serialize)]
            struct Report<'a> {
                family: &'static str,
                conditions: &'a experiments::ConditionSummary,
                admissible_b: Option<crate::gamma::AdmissibleB>,
                admissible_b_error: Option<String>,
            }
            print_json(&Report {
                family: c.gamma.family(),
                conditions: &conditions,
                admissible_b: admissible.as_ref().ok().copied(),
                admissible_b_error: admissible.err().map(|e| e.to_string()),
            })?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            out: dir,
            plot_data,
        } => {
            let parsed = load(&config)?;
            let c = &parsed.config;
            let result = simulate(c)?;
            let name = parsed.preset.as_deref().unwrap_or("simulate");
            let dir = dir.unwrap_or_else(|| experiments::artifact_dir(&experiments::runs_root(), name, c));
            std::fs::create_dir_all(&dir).map_err(|e| internal(&dir.display().to_string(), e))?;
            write(&dir.join("series.csv"), &csv::series_to_csv(&result.series))?;
            write(&dir.join("config.snapshot"), &config::canonical_text(c))?;
            #[derive(Serialize)]
            struct Report<'a> {
                outcome: &'a crate::solver::StepOutcome,
                t_final: f64,
                weight: &'a crate::functionals::FunctionalWeight,
                accepted_steps: usize,
                rejected_steps: usize,
            }
            let report = Report {
                outcome: &result.outcome,
                t_final: result.final_state.t,
                weight: &result.weight,
                accepted_steps: result.trace.accepted_steps,
                rejected_steps: result.trace.rejected_steps,
            };
            let json = serde_json::to_string_pretty(&report).map_err(|e| internal("serializing", e))?;
            write(&dir.join("reports.json"), &format!("{json}\n"))?;
            if plot_data {
                write_plot_data(&dir, c, &result)?;
            }
            out.info(&format!(
                "{:?} at t = {} -> {}",
                result.outcome.status,
                result.final_state.t,
                dir.display()
            ));
            let expected_blowup = parsed
                .preset
                .as_deref()
                .and_then(preset)
                .is_some_and(|p| p.expected == ExpectedOutcome::BlowUpDetected);
            Ok(match (result.blew_up(), expected_blowup) {
                (false, _) => EXIT_OK,
                (true, true) => EXIT_EXPECTED_BLOWUP,
                (true, false) => EXIT_FAILED,
            })
        }
        Command::RunPreset {
            name,
            set,
            runs_dir,
            plot_data,
        } => {
            let p = preset_with_overrides(&name, &set)?;
            let root = runs_dir.unwrap_or_else(experiments::runs_root);
            let (run, dir) = experiments::run_preset_with(&p, &root)?;
            if plot_data {
                write_plot_data(&dir, &p.config, &run.result)?;
            }
            for r in &run.reports {
                out.result(&format!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.check));
                for (k, v) in &r.metrics {
                    out.debug(&format!("    {k} = {v:e}"));
                }
                if let Some(e) = &r.error {
                    out.result(&format!("    {e}"));
                }
            }
            out.info(&format!("{:?}; artifacts in {}", run.result.outcome.status, dir.display()));
            let blew = matches!(run.result.outcome.status, StepStatus::BlownUp { .. });
            Ok(if !run.passed() || (blew && p.expected != ExpectedOutcome::BlowUpDetected) {
                EXIT_FAILED
            } else if blew {
                EXIT_EXPECTED_BLOWUP
            } else {
                EXIT_OK
            })
        }
        Command::Sweep {
            base,
            axes,
            out: path,
            jobs,
            cap,
        } => {
            let mut spec = SweepSpec::new(&base, path);
            spec.parallelism = jobs;
            spec.cap = cap;
            for axis in &axes {
                let (k, vs) = axis.split_once('=').ok_or_else(|| CliError {
                    code: EXIT_CONFIG,
                    message: format!("axis `{axis}`: expected KEY=V1,V2,..."),
                })?;
                let values: Vec<&str> = vs.split(',').map(str::trim).collect();
                spec = spec.axis(k.trim(), &values);
            }
            let summary = experiments::run_sweep(&spec)?;
            out.info(&format!(
                "{} rows: {} computed, {} already present, {} failed",
                summary.total,
                summary.rows.len(),
                summary.skipped,
                summary.failed()
            ));
            Ok(EXIT_OK)
        }
        Command::FitDecay { series, column, floor } => {
            let s = csv::read_series(&series).map_err(|e| CliError {
                code: EXIT_CONFIG,
                message: format!("{}: {e}", series.display()),
            })?;
            match fit_decay(&s, &column, floor) {
                Ok(fit) => {
                    print_json(&fit)?;
                    Ok(EXIT_OK)
                }
                Err(e @ AnalysisError::UnknownColumn(_)) => Err(CliError {
                    code: EXIT_CONFIG,
                    message: e.to_string(),
                }),
                Err(e) => {
                    out.info(&format!("fit failed: {e}"));
                    Ok(EXIT_FAILED)
                }
            }
        }
        Command::Convergence {
            preset: name,
            set,
            levels,
            min_order,
            max_order,
        } => {
            let p = preset_with_overrides(&name, &set)?;
            let report = convergence_study(&p.config, levels)?;
            print_json(&report)?;
            let check = report.to_report(min_order, max_order);
            out.result(&format!("{} convergence_order", if check.pass { "PASS" } else { "FAIL" }));
            Ok(if check.pass { EXIT_OK } else { EXIT_FAILED })
        }
    }
}
