use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use flagcheck::{executor_from_env, load_config, run, CommandKind, RunConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "flagcheck", version, about = "Numerical checks of flag additivity for resource measures")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sweep random instances (or replay one) and check properties.
    Check(Args),
    /// Search for the largest violation of one property.
    Search(Args),
    /// Per-copy values M(ρ^⊗N)/N, optionally with sandwich checks.
    Regularize(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// `key = value` file (or a JSON report whose config is reused); flags override it.
    #[arg(long)]
    config: Option<String>,
    /// Measure ids, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    measure: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    property: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `1e-7` for every measure, or `c_tr=1e-6` for one.
    #[arg(long, value_delimiter = ',')]
    tol: Vec<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sandwich: bool,
    /// Instance file to replay (check).
    #[arg(long)]
    instance: Option<String>,
    /// QSTATE file to probe (regularize).
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn build_config(command: CommandKind, a: &Args) -> Result<RunConfig, UsageError> {
    let mut c = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config `{path}`: {e}")))?;
            load_config(command, &text)?
        }
        None => RunConfig::new(command),
    };
    let list = |v: &[String]| v.join(",");
    if !a.measure.is_empty() {
        c.set("measure", &list(&a.measure))?;
    }
    if !a.property.is_empty() {
        c.set("property", &list(&a.property))?;
    }
    if !a.dim.is_empty() {
        c.dims = a.dim.clone();
    }
    if !a.tol.is_empty() {
        c.set("tol", &list(&a.tol))?;
    }
    let pairs: [(&str, Option<String>); 11] = [
        ("trials", a.trials.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("budget", a.budget.map(|v| v.to_string())),
        ("nmax", a.nmax.map(|v| v.to_string())),
        ("copies", a.copies.map(|v| v.to_string())),
        ("delta", a.delta.map(|v| v.to_string())),
        ("sandwich", a.sandwich.then(|| "true".to_string())),
        ("instance", a.instance.clone()),
        ("state", a.state.clone()),
        ("out", a.out.clone()),
        ("format", a.format.clone()),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            c.set(k, &v)?;
        }
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (command, args) = match &cli.command {
        Cmd::Check(a) => (CommandKind::Check, a),
        Cmd::Search(a) => (CommandKind::Search, a),
        Cmd::Regularize(a) => (CommandKind::Regularize, a),
    };
    let start = Instant::now();
    let outcome = build_config(command, args).and_then(|config| {
        let report = run(&config, &executor_from_env())?;
        Ok((config, report))
    });
    let (config, mut report) = match outcome {
        Ok(v) => v,
        Err(e) => {
            eprintln!("flagcheck: {e}");
            return ExitCode::from(1);
        }
    };
    if args.timing {
        report.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    let text = report.render();
    match &config.output_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("flagcheck: cannot write `{path}`: {e}");
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    let unexpected = report.unexpected_violations();
    if unexpected > 0 {
        eprintln!("flagcheck: {unexpected} unexpected violation(s) for measures labelled flag additive");
    }
    ExitCode::from(report.exit_code() as u8)
}
