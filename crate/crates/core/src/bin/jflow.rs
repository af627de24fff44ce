use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jflow::cli::{execute, load_config, parse_eps_list, Command, Overrides};
use jflow::presets::Preset;

/// J-flow laboratory on the flat complex 2-torus.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// check-classes | run | family | solve-ma | functionals | report
    #[arg(long, default_value = "run")]
    command: String,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ε list, e.g. 0.2,0.1,0.05
    #[arg(long)]
    eps: Option<String>,
    /// identity | smooth_split | degenerate_split | nonsplit_perturbed
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let setup = || -> jflow::Result<_> {
        let command: Command = args.command.parse()?;
        let overrides = Overrides {
            preset: args.preset.as_deref().map(str::parse::<Preset>).transpose()?,
            eps: args.eps.as_deref().map(parse_eps_list).transpose()?,
            out: args.out.clone(),
            seed: args.seed,
        };
        Ok((command, load_config(args.config.as_deref(), &overrides)?))
    };
    let (command, config) = match setup() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let record = match execute(&config, command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for v in &record.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    if let Some(e) = &record.error {
        eprintln!("error: {e}");
    }
    println!("{} -> {}", command, config.out.display());
    if record.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
