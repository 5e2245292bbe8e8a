use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crowding::pipeline::{run, Command, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Synth,
    Panel,
    Signal,
    Scan,
    Lags,
    Evolve,
    Profit,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Panel => Command::Panel,
            Cmd::Signal => Command::Signal,
            Cmd::Scan => Command::Scan,
            Cmd::Lags => Command::Lags,
            Cmd::Evolve => Command::Evolve,
            Cmd::Profit => Command::Profit,
        }
    }
}

/// Factor crowding pipeline: synthesize or ingest market data, build daily
/// imbalances and slowed factor signals, then correlate them.
#[derive(Debug, Parser)]
#[command(name = "crowding", version)]
struct Args {
    command: Cmd,
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(n) = cfg.threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(args.command.into(), &cfg) {
        Ok(outcome) => {
            for w in outcome.warnings() {
                eprintln!("warning: {w}");
            }
            for e in outcome.errors() {
                eprintln!("error: {e}");
            }
            for o in &outcome.manifest.outputs {
                println!("{}  {}", o.sha256, cfg.out.join(&o.path).display());
            }
            println!("manifest: {}", outcome.manifest_path.display());
            if outcome.succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
