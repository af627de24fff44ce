//! Drives the command layer in a temporary directory and reads back its artifacts.

use jflow::cli::{execute, read_record, Command, RunConfig, RECORD_FILE};
use jflow::presets::Preset;
use jflow::snapshot::Snapshot;

fn main() -> jflow::Result<()> {
    let out = std::env::temp_dir().join(format!("jflow-example-{}", std::process::id()));
    let mut cfg = RunConfig::for_preset(Preset::SmoothSplit);
    cfg.grid.n = 16;
    cfg.out = out.clone();
    for command in [Command::CheckClasses, Command::SolveMa, Command::Run] {
        let rec = execute(&cfg, command)?;
        println!("{command}: passed = {}, artifacts {:?}", rec.passed(), rec.artifacts);
    }
    let rec = read_record(&out.join(RECORD_FILE))?;
    println!("record for '{}' has {} history rows, config hash {}", rec.command, rec.rows.len(), rec.config_hash);
    let phi = Snapshot::read(&out.join("fields/phi_final.jflw"))?.into_scalar()?;
    println!("phi_final: {} points, sup |φ| = {:.6}", phi.values().len(), phi.sup_abs());
    std::fs::remove_dir_all(&out)?;
    Ok(())
}
