use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use solvorder_core::group::DEFAULT_CLOSURE_CAP;
use solvorder_core::harness::{
    cmd_fixtures, cmd_run, cmd_sampler_test, pcgs_view, records_to_ndjson, ExperimentConfig, HarnessError, Timing,
};
use solvorder_core::protocol::{Combiner, ProtocolConfig, ProtocolKind};
use solvorder_core::prover::{AdversaryStrategy, ProverKind};
use solvorder_core::sampling::{SamplerConfig, SamplerMode};

#[derive(Debug, Parser)]
#[command(name = "solvorder", version, about = "Order-verification protocols for black-box solvable groups")]
struct Cli {
    /// List the adversarial prover strategies and exit.
    #[arg(long)]
    list_adversaries: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a seeded Monte-Carlo campaign and print its report.
    Run(RunArgs),
    /// Print the built-in fixture catalog.
    Fixtures {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Score a sampler against the enumerated group.
    SamplerTest(SamplerArgs),
    /// Print the PCGS, its refinement, primes and quotient orders as JSON.
    Pcgs {
        #[arg(long)]
        group: String,
        /// Comma-separated primes; defaults to the primes dividing |G|.
        #[arg(long, value_delimiter = ',')]
        primes: Option<Vec<u64>>,
        #[arg(long, default_value_t = DEFAULT_CLOSURE_CAP)]
        cap: usize,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Group spec, e.g. `cyclic:12`, `direct:cyclic:3,cyclic:9`, `perm:4:(1 2),(1 2 3 4)@seed=5`.
    #[arg(long)]
    group: String,
    #[arg(long, value_parser = parse_protocol)]
    protocol: ProtocolKind,
    /// `honest` or an adversary name.
    #[arg(long, default_value = "honest", value_parser = parse_prover, conflicts_with = "adversary")]
    prover: ProverKind,
    /// Shorthand for `--prover <name>` with an adversary.
    #[arg(long, value_parser = parse_adversary)]
    adversary: Option<AdversaryStrategy>,
    /// Comma-separated primes known to the verifier (2msg only).
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// `unanimous` or `majority`.
    #[arg(long, default_value = "unanimous")]
    combiner: Combiner,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-run records as newline-delimited JSON.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Keep full message bodies in the transcript log.
    #[arg(long)]
    message_bodies: bool,
    /// Add wall-clock figures to the report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = DEFAULT_CLOSURE_CAP)]
    cap: usize,
    /// Subgroups up to this size are sampled exactly.
    #[arg(long, default_value_t = 10_000)]
    exact_limit: usize,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    #[arg(long)]
    group: String,
    #[arg(long, default_value = "subproduct")]
    mode: SamplerMode,
    #[arg(long, default_value_t = 1.0 / 256.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CLOSURE_CAP)]
    cap: usize,
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    s.parse()
}

fn parse_prover(s: &str) -> Result<ProverKind, String> {
    s.parse()
}

fn parse_adversary(s: &str) -> Result<AdversaryStrategy, String> {
    match s.parse::<ProverKind>()? {
        ProverKind::Adversary(a) => Ok(a),
        ProverKind::Honest => Err("honest is not an adversary".into()),
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no command given; see --help")]
    NoCommand,
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let prover = args.adversary.map_or(args.prover, ProverKind::Adversary);
    let config = ExperimentConfig {
        group: args.group,
        protocol: args.protocol,
        prover,
        primes: args.primes,
        trials: args.trials,
        repetitions: args.repetitions,
        combiner: args.combiner,
        seed: args.seed,
        protocol_config: ProtocolConfig {
            cap: args.cap,
            exact_sampler_limit: args.exact_limit,
            keep_bodies: args.message_bodies,
            ..ProtocolConfig::default()
        },
    };
    let start = Instant::now();
    let (mut report, records) = cmd_run(&config)?;
    if args.timing {
        let total_ms = start.elapsed().as_secs_f64() * 1e3;
        report.timing = Some(Timing { total_ms, mean_trial_ms: total_ms / config.trials as f64 });
    }
    if let Some(path) = &args.transcripts {
        write(path, &records_to_ndjson(&records))?;
    }
    let text = report.to_json_pretty() + "\n";
    match &args.out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fixtures(json: bool) -> Result<(), CliError> {
    let all = cmd_fixtures(DEFAULT_CLOSURE_CAP)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&all).expect("serializable"));
        return Ok(());
    }
    println!("{:<14} {:>6} {:>9} {:>7}  spec", "name", "order", "solvable", "primes");
    for f in all {
        let primes: Vec<String> = f.primes.iter().map(u64::to_string).collect();
        println!(
            "{:<14} {:>6} {:>9} {:>7}  {}",
            f.name,
            f.order,
            if f.solvable { "yes" } else { "no" },
            primes.join(","),
            f.spec
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if cli.list_adversaries {
        for s in AdversaryStrategy::ALL {
            println!("{:<20} {}", s.name(), s.description());
        }
        return Ok(());
    }
    match cli.command.ok_or(CliError::NoCommand)? {
        Command::Run(args) => run(args),
        Command::Fixtures { json } => fixtures(json),
        Command::SamplerTest(a) => {
            let config = SamplerConfig { epsilon: a.epsilon, mode: a.mode, rng_seed: a.seed };
            let report = cmd_sampler_test(&a.group, &config, a.draws, a.cap)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(())
        }
        Command::Pcgs { group, primes, cap } => {
            let view = pcgs_view(&group, primes.as_deref(), cap)?;
            println!("{}", serde_json::to_string_pretty(&view).expect("serializable"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
