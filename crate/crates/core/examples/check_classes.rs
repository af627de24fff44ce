//! Intersection numbers, the critical constant and the cone condition.

use jflow::cohomology::{c_constant, class_pairing, cone_condition, verify_omega0_conditions, CohomologyClass};
use jflow::presets::Preset;
use jflow::calculus::Grid;

fn main() -> jflow::Result<()> {
    let x = CohomologyClass::identity();
    for (name, w) in [("Id", CohomologyClass::identity()), ("diag(1, 0)", CohomologyClass::diag(1.0, 0.0)), ("diag(1, 3)", CohomologyClass::diag(1.0, 3.0))] {
        let v = cone_condition(&x, &w)?;
        println!(
            "[W] = {name}: X·W = {}, c = {}, margin = {:.4}, holds = {}",
            class_pairing(&x, &w),
            c_constant(&x, &w)?,
            v.margin,
            v.holds()
        );
    }
    let s = Preset::DegenerateSplit.build(Grid::split(16)?)?;
    let div = s.divisor.as_ref().expect("degenerate preset has a divisor");
    println!("ω₀ conditions: {:?}", verify_omega0_conditions(&s.omega0, div, &s.omega_hat));
    Ok(())
}
