use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hrc_core::config::{load_config, parse_lq_problem, serialize_config};
use hrc_core::error::{Error, Result};
use hrc_core::output::{
    emit_all_plots, read_phase1, read_reference, write_metrics, write_phase1, write_timeseries, write_tracking,
    METRICS_FILE, PHASE1_FILE, TRACKING_FILE,
};
use hrc_core::riccati::{rollout, solve_riccati_backward};
use hrc_core::simulation::{
    phase1_metrics, phase1_optimize, phase2_track, run_scenario, setting_metrics, tracking_metrics, Metrics,
    ScenarioConfig,
};
use hrc_core::transcription::transcription_oracle;
use hrc_core::verify::{run_suite, Suite};

const VERIFY_FAILED: u8 = 6;

#[derive(Parser)]
#[command(name = "hrc", version, about = "Optimal human-robot cooperation trajectories and adaptive tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize, convert to joint space and track; write all series.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides both the grid and the tracking step.
        #[arg(long)]
        step: Option<f64>,
        /// Overrides the RBF centre seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        emit_plots: bool,
    },
    /// Phase 1 only: write phase1_state.csv and metrics.csv.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Phase 2 only, against a joint reference from a previous run.
    Track {
        #[arg(long)]
        config: PathBuf,
        /// reference.csv with columns t,qd1,qd2,qdd1,qdd2.
        #[arg(long)]
        reference: PathBuf,
        /// phase1_state.csv supplying the human force; zero force if omitted.
        #[arg(long)]
        phase1: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Randomized property and oracle checks.
    Verify {
        #[arg(long, default_value = "all", value_parser = ["manipulator", "riccati", "controller", "all"])]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare the Riccati rollout with direct transcription on an LQ problem file.
    Oracle {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 200)]
        intervals: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

fn load(path: &Path, step: Option<f64>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut config = load_config(path)?;
    if let Some(h) = step {
        config.step = h;
        config.tracking_step = h;
    }
    if let Some(s) = seed {
        config.network.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn print_metrics(metrics: &Metrics) {
    for (k, v) in &metrics.entries {
        println!("{k:<34} {v:.6e}");
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            out,
            step,
            seed,
            emit_plots,
        } => {
            let config = load(&config, step, seed)?;
            let report = run_scenario(&config)?;
            let mut bundle = write_timeseries(&report, &out)?;
            let echo = out.join("config.toml");
            fs::write(&echo, serialize_config(&config)).map_err(|source| Error::Io { path: echo, source })?;
            if emit_plots {
                emit_all_plots(&mut bundle)?;
            }
            print_metrics(&report.metrics);
            println!("wrote {}", bundle.dir.display());
        }
        Command::Optimize { config, out, step } => {
            let config = load(&config, step, None)?;
            let (traj, _) = phase1_optimize(&config)?;
            create_dir(&out)?;
            write_phase1(&out.join(PHASE1_FILE), &traj)?;
            let mut metrics = phase1_metrics(&config, &traj);
            metrics.extend(setting_metrics(&config));
            write_metrics(&out.join(METRICS_FILE), &metrics)?;
            print_metrics(&metrics);
        }
        Command::Track {
            config,
            reference,
            phase1,
            out,
            seed,
        } => {
            let config = load(&config, None, seed)?;
            let p1 = phase1.as_deref().map(read_phase1).transpose()?;
            let reference = read_reference(&reference, p1.as_ref())?;
            let rec = phase2_track(&config, &reference)?;
            create_dir(&out)?;
            write_tracking(&out.join(TRACKING_FILE), &rec)?;
            let mut metrics = tracking_metrics(&config, &rec);
            metrics.extend(setting_metrics(&config));
            write_metrics(&out.join(METRICS_FILE), &metrics)?;
            print_metrics(&metrics);
        }
        Command::Verify { suite, cases, seed } => {
            let suite = Suite::parse(&suite).expect("clap restricts the suite names");
            let checks = run_suite(suite, cases, seed)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed()) {
                return Ok(VERIFY_FAILED);
            }
        }
        Command::Oracle {
            problem,
            intervals,
            step,
        } => {
            let text = fs::read_to_string(&problem).map_err(|source| Error::Io {
                path: problem.clone(),
                source,
            })?;
            let problem = parse_lq_problem(&text)?;
            let oracle = transcription_oracle(&problem, intervals)?;
            let sol = solve_riccati_backward(&problem, step)?;
            let traj = rollout(&problem, &sol, step)?;
            let gap = (traj.cost - oracle.cost).abs() / oracle.cost.max(1.0);
            println!("transcription cost  {:.12e}", oracle.cost);
            println!("riccati cost        {:.12e}", traj.cost);
            println!("relative gap        {gap:.3e}");
            println!(
                "terminal error      {:.3e}",
                (traj.terminal_state() - &problem.xf).norm()
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
