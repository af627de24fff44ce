//! A single flow run on the smooth split preset, compared with the closed form.

use std::f64::consts::PI;

use jflow::calculus::{Grid, ScalarField};
use jflow::diagnostics::compare_up_to_constant;
use jflow::flow::{evolve, max_principle_monitor, FlowConfig, FlowProblem};
use jflow::presets::Preset;

fn main() -> jflow::Result<()> {
    let grid = Grid::split(16)?;
    let s = Preset::SmoothSplit.build(grid)?;
    let cfg = FlowConfig { stop_tolerance: 1e-8, snapshot_stride: 2000, ..FlowConfig::default() };
    let problem = FlowProblem::new(&cfg, &s.chi0, &s.omega0, &s.omega_hat, None)?;
    let tr = evolve(&problem, &cfg, &ScalarField::zeros(grid))?;
    print!("{}", tr.to_csv());
    let exact = ScalarField::from_fn(grid, |x| -(2.0 * PI * x[0]).sin() / (2.0 * PI * PI));
    println!("converged: {} after {} steps", tr.converged, tr.steps);
    println!("distance to closed form: {:e}", compare_up_to_constant(tr.limit(), &exact, None)?);
    println!("max principle: passed = {}", max_principle_monitor(&tr)?.passed());
    Ok(())
}
