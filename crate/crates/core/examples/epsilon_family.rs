//! Regularized family on the degenerate preset with the uniform-estimate report.

use std::f64::consts::PI;

use jflow::calculus::{Grid, ScalarField};
use jflow::diagnostics::{uniformity_report, QMonitorConfig, UniformityBudget};
use jflow::flow::{epsilon_family_with, FlowConfig};
use jflow::presets::Preset;

fn main() -> jflow::Result<()> {
    let grid = Grid::split(16)?;
    let s = Preset::DegenerateSplit.build(grid)?;
    let div = s.divisor.as_ref().expect("degenerate preset has a divisor");
    let cfg = FlowConfig { stop_tolerance: 1e-6, ..FlowConfig::default() };
    let q = QMonitorConfig { a: 2.0, delta: 1.0, c0_shift: 1.0 };
    let fam = epsilon_family_with(&cfg, &[0.2, 0.1], &s.chi0, &s.omega0, &s.omega_hat, Some(div), &ScalarField::zeros(grid), Some(q))?;
    for m in &fam.members {
        println!(
            "ε = {}: c = {}, t = {:.3}, sup|φ| = {:.5}, sup|φ̇(0)| = {:.4}, q_max {:.3} -> {:.3}",
            m.eps,
            m.c,
            m.final_time,
            m.sup_phi,
            m.sup_phidot0,
            m.q_max_series[0].1,
            m.q_max_series.last().map_or(f64::NAN, |q| q.1)
        );
    }
    println!("consecutive differences off the divisor: {:?}", fam.consecutive_diff_off_divisor);
    let est = uniformity_report(&fam, &UniformityBudget::new(1.0 / (PI * PI) + 0.01, 1.05));
    println!("uniform estimates: passed = {}, failures = {:?}", est.passed(), est.failures);
    Ok(())
}
