//! `proxmix --config job.json [--out path] [--format csv|json] [--seed n] [--scale small|default|large]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use proxmix::cli::{self, CliError, Command, ConfigError, Format};
use proxmix::verify::Scale;

#[derive(Parser, Debug)]
#[command(name = "proxmix", version, about = "Proximal compositions, cocompositions and mixtures")]
struct Args {
    /// Job configuration (JSON).
    #[arg(long, required_unless_present = "example")]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (overrides the job's).
    #[arg(long)]
    format: Option<Format>,
    /// Random seed (overrides the job's).
    #[arg(long)]
    seed: Option<u64>,
    /// Problem-size preset for verification (overrides the job's).
    #[arg(long)]
    scale: Option<Scale>,
    /// Print an example job for a command and exit.
    #[arg(long, value_name = "COMMAND", conflicts_with = "config")]
    example: Option<String>,
}

fn example(name: &str) -> Result<String, CliError> {
    let json = format!("\"{name}\"");
    let command: Command = serde_json::from_str(&json)
        .map_err(|_| ConfigError::at("example", format!("unknown command `{name}`")))?;
    Ok(cli::example_config(command).to_json())
}

fn main_inner(args: Args) -> Result<i32, CliError> {
    if let Some(name) = &args.example {
        println!("{}", example(name)?);
        return Ok(0);
    }
    let path = args.config.expect("clap enforces --config");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = cli::parse_config(&text)?;
    if let Some(out) = args.out {
        cfg.output.path = Some(out);
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.scale {
        cfg.scale = Some(s);
    }
    let out = cli::run(&cfg)?;
    cli::write_output(&out, &cfg.output)?;
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("proxmix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
