//! `atlab`: batch runner for the biased adjacent-transposition experiments.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 for
//! usage and configuration errors, 3 when the run itself fails.

mod config;
mod output;
mod run;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use atshuffle::BiasMatrix;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{Command, ConfigError, Family, Overrides};
use output::{RunDir, Status};

#[derive(Parser)]
#[command(name = "atlab", version, about = "Simulation and exact checks for biased adjacent-transposition shuffles")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest n for full enumeration.
    #[arg(long)]
    cap_enum: Option<usize>,
    /// Largest band width of the transfer-matrix engine.
    #[arg(long)]
    cap_window: Option<usize>,
}

#[derive(Args, Clone, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Bias strength; constant-q uses q = (1+ε)/(2+ε).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Constant bias, as an alternative to --epsilon.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the command named in the configuration file.
    Run(RunArgs),
    /// Exact stationary measure by enumeration.
    Exact(RunArgs),
    /// Exact draws from a localized stationary measure.
    Sample(RunArgs),
    /// One trajectory with checkpoints and an optional domination audit.
    Chain(RunArgs),
    /// Rightmost-particle tail of the exclusion process.
    Asep(RunArgs),
    /// Displacement after burn-in.
    Burnin(RunArgs),
    /// Decay of boundary influence with distance.
    Spatial(RunArgs),
    /// Probability that a position is disconnecting.
    Disconnect(RunArgs),
    /// Spectral-gap inequality of the block decomposition.
    Blockcheck(RunArgs),
    /// Mixing-time estimates and scaling fits.
    Mix(RunArgs),
    /// Lower bound from the position of particle 1.
    Lowerbound(RunArgs),
    /// Write a bias matrix file with its certified epsilon.
    GenInstance(GenArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (command, args) = match cli.cmd {
        Cmd::GenInstance(g) => return report(gen_instance(&g).map(|_| ExitCode::SUCCESS)),
        Cmd::Run(a) => (None, a),
        Cmd::Exact(a) => (Some(Command::Exact), a),
        Cmd::Sample(a) => (Some(Command::Sample), a),
        Cmd::Chain(a) => (Some(Command::Chain), a),
        Cmd::Asep(a) => (Some(Command::Asep), a),
        Cmd::Burnin(a) => (Some(Command::Burnin), a),
        Cmd::Spatial(a) => (Some(Command::Spatial), a),
        Cmd::Disconnect(a) => (Some(Command::Disconnect), a),
        Cmd::Blockcheck(a) => (Some(Command::Blockcheck), a),
        Cmd::Mix(a) => (Some(Command::Mix), a),
        Cmd::Lowerbound(a) => (Some(Command::Lowerbound), a),
    };
    report(execute(command, &args))
}

fn report(r: Result<ExitCode>) -> ExitCode {
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn execute(command: Option<Command>, args: &RunArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(path) => config::load(path)?,
        None => config::RunConfig::default(),
    };
    let ov = Overrides {
        seed: args.seed,
        jobs: args.jobs,
        out: args.out.clone(),
        cap_enum: args.cap_enum,
        cap_window: args.cap_window,
    };
    let cfg = config::resolve(file, command, &ov)?;
    let dir = RunDir::begin(&cfg)?;
    let outcome = match run::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            dir.fail(&e)?;
            return Err(e);
        }
    };
    let where_ = dir.dir().display().to_string();
    let status = dir.finish(&outcome)?;
    let mut stdout = std::io::stdout().lock();
    for line in &outcome.summary {
        writeln!(stdout, "{line}")?;
    }
    writeln!(stdout, "results in {where_}")?;
    if status == Status::Failed {
        let failed: Vec<&str> = outcome.result.failures().iter().map(|v| v.name.as_str()).collect();
        eprintln!("failed verdicts: {}", failed.join(", "));
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn usage(key: &str, message: impl Into<String>) -> anyhow::Error {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
    .into()
}

fn gen_instance(g: &GenArgs) -> Result<()> {
    if g.n == 0 {
        return Err(usage("--n", "must be positive"));
    }
    if let Some(e) = g.epsilon {
        if !(e >= 0.0) {
            return Err(usage("--epsilon", "must be nonnegative"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let p = match g.family {
        Family::ConstantQ => {
            let q = match (g.q, g.epsilon) {
                (Some(_), Some(_)) => return Err(usage("--q", "give either --q or --epsilon")),
                (Some(q), None) => q,
                (None, Some(e)) => atshuffle::perm::q_for_epsilon(e),
                (None, None) => return Err(usage("--epsilon", "constant-q needs --q or --epsilon")),
            };
            BiasMatrix::constant(g.n, q)?
        }
        Family::TotallyAsymmetric => BiasMatrix::totally_asymmetric(g.n),
        Family::RandomEps | Family::MonotoneEps => {
            let e = g.epsilon.ok_or_else(|| usage("--epsilon", "required for the random families"))?;
            if g.family == Family::RandomEps {
                BiasMatrix::random_eps(g.n, e, &mut rng)?
            } else {
                BiasMatrix::monotone_eps(g.n, e, &mut rng)?
            }
        }
        Family::File => return Err(usage("--family", "file is not a generator")),
    };
    let text = p.to_json()? + "\n";
    match &g.file {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
