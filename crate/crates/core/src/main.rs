use std::path::PathBuf;
use std::process::ExitCode;

use catramp::cli::{execute, parse_override, RunManifest};
use catramp::error::{Error, ManifestError};
use catramp::lab::WORKERS_ENV;
use clap::{Args, Parser, Subcommand};

/// Quasi-adiabatic ramp design and cat-state fidelity for trapped-ion spin models.
#[derive(Parser)]
#[command(name = "catramp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a ramp and write it as CSV.
    Design(Common),
    /// Evolve the initial state along a ramp and report the fidelity.
    Evolve(Common),
    /// Fidelity against final time.
    SweepTf(Common),
    /// Peak fidelity against decoupling amplitude.
    SweepDd(Common),
    /// Peak fidelity against dephasing rate.
    SweepGamma(Common),
    /// Peak fidelity against chain size.
    SweepSize(Common),
    /// Run the invariant suite and report pass/fail per property.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Manifest file (`section.key = value` lines).
    manifest: Option<PathBuf>,
    /// Override a manifest key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (`output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Golden-section refinement of the best decoupling amplitude.
    #[arg(long)]
    refine: bool,
    /// Record the trajectory every STRIDE steps (`output.stride`).
    #[arg(long, value_name = "STRIDE")]
    dump_trajectory: Option<usize>,
}

impl Command {
    fn split(self) -> (&'static str, Common) {
        match self {
            Command::Design(c) => ("design", c),
            Command::Evolve(c) => ("evolve", c),
            Command::SweepTf(c) => ("sweep-tf", c),
            Command::SweepDd(c) => ("sweep-dd", c),
            Command::SweepGamma(c) => ("sweep-gamma", c),
            Command::SweepSize(c) => ("sweep-size", c),
            Command::Validate(c) => ("validate", c),
        }
    }
}

fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 2,
        "io" => 3,
        "model" => 4,
        "spectrum" => 5,
        "schedule" => 6,
        "integration" => 7,
        "validation" => 8,
        _ => 1,
    }
}

fn init_workers() -> Result<(), Error> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{WORKERS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn resolve(command: &str, args: Common) -> Result<RunManifest, Error> {
    let text = match &args.manifest {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides = args.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, ManifestError>>()?;
    overrides.push(("command".into(), command.into()));
    if let Some(dir) = args.out {
        overrides.push(("output.dir".into(), dir));
    }
    if args.refine {
        overrides.push(("sweep.refine".into(), "true".into()));
    }
    if let Some(stride) = args.dump_trajectory {
        overrides.push(("output.stride".into(), stride.to_string()));
    }
    Ok(RunManifest::parse(&text, &overrides)?)
}

fn run(cli: Cli) -> Result<bool, Error> {
    init_workers()?;
    let (command, args) = cli.command.split();
    let manifest = resolve(command, args)?;
    eprint!("# manifest_hash={}\n{}", manifest.hash(), manifest.echo());
    let outcome = execute(&manifest)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for file in &outcome.files {
        eprintln!("wrote {}", file.display());
    }
    if !outcome.failed.is_empty() {
        return Err(Error::PropertyFailed(outcome.failed.join(", ")));
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": { "category": e.category(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
