use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnjscc::commands::{self, SimulateExtras};
use nnjscc::config::{ExperimentConfig, Overrides};
use nnjscc::output::write_atomic;
use nnjscc::AppResult;

/// Simulator and calculator for mismatched nearest-neighbour joint
/// source-channel coding.
#[derive(Parser, Debug)]
#[command(name = "nnjscc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity, rate-distortion, dispersions and the resolved scheme (JSON).
    Analyze(Common),
    /// Non-excess-distortion probabilities over a (k, p) grid (CSV).
    Psi(Common),
    /// One Monte Carlo run (JSON).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the per-trial table to this path.
        #[arg(long, value_name = "PATH")]
        trials_out: Option<PathBuf>,
        /// Also write the fixed ensemble to this path (needs --fixed-ensemble).
        #[arg(long, value_name = "PATH")]
        dump_ensemble: Option<PathBuf>,
    },
    /// Monte Carlo runs over the source lengths of [sweep] (CSV).
    Sweep(Common),
    /// Channel-decoder bound estimates per type (JSON).
    Rcu(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output path; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Draw the ensemble once and reuse it for every trial.
    #[arg(long)]
    fixed_ensemble: bool,
    /// Drop types whose subcodebook would be unbounded.
    #[arg(long)]
    truncate_types: bool,
}

impl Common {
    fn load(&self) -> AppResult<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        let overrides = Overrides {
            seed: self.seed,
            workers: self.workers,
            trials: self.trials,
            fixed_ensemble: self.fixed_ensemble,
            truncate_types: self.truncate_types,
            codeword_cap: None,
        }
        .with_env()?;
        config.apply(&overrides);
        Ok(config)
    }
}

/// Files to write once everything has been computed.
type Outputs = Vec<(Option<PathBuf>, Vec<u8>)>;

fn execute(command: Command) -> AppResult<Outputs> {
    let single = |common: &Common, text: String| vec![(common.out.clone(), text.into_bytes())];
    Ok(match command {
        Command::Analyze(c) => single(&c, commands::analyze(&c.load()?)?),
        Command::Psi(c) => single(&c, commands::psi(&c.load()?)?),
        Command::Sweep(c) => single(&c, commands::sweep(&c.load()?)?),
        Command::Rcu(c) => single(&c, commands::rcu(&c.load()?)?),
        Command::Simulate { common, trials_out, dump_ensemble } => {
            let extras = SimulateExtras { trials_csv: trials_out.is_some(), ensemble_dump: dump_ensemble.is_some() };
            let out = commands::simulate(&common.load()?, extras)?;
            let mut files = single(&common, out.json);
            if let (Some(path), Some(csv)) = (trials_out, out.trials_csv) {
                files.push((Some(path), csv.into_bytes()));
            }
            if let (Some(path), Some(bytes)) = (dump_ensemble, out.ensemble) {
                files.push((Some(path), bytes));
            }
            files
        }
    })
}

fn emit(files: Outputs) -> AppResult<()> {
    use std::io::Write;
    for (path, bytes) in files {
        match path {
            Some(p) => write_atomic(&p, &bytes)?,
            None => std::io::stdout().write_all(&bytes)?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command).and_then(emit) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nnjscc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

