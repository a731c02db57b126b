use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use satee::experiment::{self, ReportRow, SweepKind};
use satee::{load_channel, save_channel, ExperimentConfig, Preset};
use satee_core::precoder::{initial_precoder, INITIAL_BETA_MARGIN};
use satee_core::subproblem::{build_feasibility_subproblem, ExpansionPoint};

/// Exit codes: 0 success, 2 config/IO/usage error, 3 infeasible QoS
/// thresholds, 4 solver failure.
#[derive(Parser)]
#[command(
    name = "satee",
    version,
    about = "Energy-efficient multicast precoding for multibeam satellites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; omitted fields come from the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers for sweeps (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
    /// Named parameter preset: desk or paper16.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write one channel realization in the plain-text channel format.
    GenerateChannel {
        #[command(flatten)]
        common: Common,
        /// Defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run EE-SCA once; writes a report CSV and `<out>.trace.csv`.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Solve on a saved channel instead of generating one.
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Also dump the first restoration cone program as text.
        #[arg(long)]
        dump_program: Option<PathBuf>,
    },
    /// Sweep the total power budget over `sweep.p_t_dbw`.
    SweepPower {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep users per beam over `sweep.users_per_beam`.
    SweepUsers {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the configured algorithms at the nominal operating point.
    Baselines {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Solver(String),
}

impl Failure {
    fn from_core(e: satee_core::Error) -> Self {
        match experiment::status_of(&e) {
            "infeasible" => Failure::Infeasible(e.to_string()),
            "solver-failure" => Failure::Solver(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let preset = c
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()
        .map_err(usage)?;
    let mut config = match &c.config {
        Some(path) => ExperimentConfig::from_path(path, preset).map_err(usage)?,
        None => ExperimentConfig::preset(preset.unwrap_or(Preset::Desk)),
    };
    if let Some(out) = &c.out {
        config.output = out.clone();
    }
    if let Some(w) = c.workers {
        if w == 0 {
            return Err(usage("--workers must be positive"));
        }
        config.workers = w;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenerateChannel { common, seed } => {
            let config = load_config(&common)?;
            let seed = seed.unwrap_or(config.seeds[0]);
            let h = experiment::channel_for(&config, seed, config.users_per_beam).map_err(Failure::from_core)?;
            save_channel(&config.output, &h).map_err(usage)?;
            eprintln!(
                "wrote {}x{} channel (seed {seed}) to {}",
                h.num_users(),
                h.num_feeds(),
                config.output.display()
            );
        }
        Command::Solve {
            common,
            seed,
            channel,
            dump_program,
        } => {
            let config = load_config(&common)?;
            let h = match channel {
                Some(path) => load_channel(&path, config.users_per_beam).map_err(usage)?,
                None => {
                    let seed = seed.unwrap_or(config.seeds[0]);
                    experiment::channel_for(&config, seed, config.users_per_beam).map_err(Failure::from_core)?
                }
            };
            if let Some(path) = dump_program {
                let mut params = config.system_params(config.params.max_power_w, h.users_per_beam());
                params.feeds = h.num_feeds();
                params.beams = h.num_beams();
                let point = ExpansionPoint::tight(
                    &h,
                    initial_precoder(&h, &params),
                    params.noise_power,
                    INITIAL_BETA_MARGIN,
                )
                .map_err(Failure::from_core)?;
                let sp = build_feasibility_subproblem(&h, &params, &point).map_err(Failure::from_core)?;
                let mut text = String::new();
                sp.program.write_dump(&mut text).map_err(usage)?;
                std::fs::write(&path, text).map_err(usage)?;
            }
            let trace_path = experiment::companion_path(&config.output, "trace.csv");
            match experiment::run_single(&h, &config) {
                Ok(sol) => {
                    experiment::write_csv(&trace_path, &experiment::trace_rows(&sol.trace)).map_err(usage)?;
                    let row = ReportRow::new(&sol.report, sol.converged, sol.iterations);
                    experiment::write_csv(&config.output, &[row]).map_err(usage)?;
                    eprintln!(
                        "ee = {:.6} bit/s/Hz/W after {} iterations (converged: {})",
                        sol.report.ee, sol.iterations, sol.converged
                    );
                }
                Err(e) => {
                    if let Some(trace) = experiment::error_trace(&e) {
                        experiment::write_csv(&trace_path, &experiment::trace_rows(trace)).map_err(usage)?;
                    }
                    return Err(Failure::from_core(e));
                }
            }
        }
        Command::SweepPower { common } => sweep(&common, SweepKind::Power)?,
        Command::SweepUsers { common } => sweep(&common, SweepKind::Users)?,
        Command::Baselines { common } => sweep(&common, SweepKind::Point)?,
    }
    Ok(())
}

fn sweep(common: &Common, kind: SweepKind) -> Result<(), Failure> {
    let config = load_config(common)?;
    let rows = experiment::run_sweep(&config, kind);
    experiment::write_sweep(&config.output, &rows, kind).map_err(usage)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    eprintln!(
        "wrote {} rows ({failed} failed) to {}",
        rows.len(),
        config.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (2, m),
                Failure::Infeasible(m) => (3, m),
                Failure::Solver(m) => (4, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
