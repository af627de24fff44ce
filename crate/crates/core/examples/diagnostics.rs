//! Singular-profile fit, the Q-monitor and comparison up to constants.

use jflow::calculus::{Grid, Hermitian2, HermitianFormField, ScalarField};
use jflow::diagnostics::{compare_up_to_constant, q_monitor, singular_profile_fit, QMonitorConfig};
use jflow::presets::Preset;

fn main() -> jflow::Result<()> {
    let grid = Grid::split(32)?;
    let s = Preset::DegenerateSplit.build(grid)?;
    let div = s.divisor.as_ref().expect("degenerate preset has a divisor");
    for gamma in [0.25, 0.5, 1.0] {
        let mut chi = HermitianFormField::constant(grid, Hermitian2::IDENTITY);
        for (i, s2) in div.s2_proxy.values().iter().enumerate() {
            let u = 2.0 * s2.max(1e-300).powf(-gamma);
            chi.set(i, Hermitian2::diag(0.5 * u, 0.5 * u));
        }
        println!("synthetic γ = {gamma}: {:?}", singular_profile_fit(&chi, div)?);
    }

    let phi = ScalarField::zeros(grid);
    let q = QMonitorConfig { a: 2.0, delta: 1.0, c0_shift: 1.0 }.calibrated(&phi, div, 1.0)?;
    println!("Q at φ = 0, χ = χ₀: {:?}", q_monitor(&phi, &s.chi0.realized, div, &q)?);

    let a = ScalarField::from_fn(grid, |x| x[0].sin());
    let b = a.shift(3.0);
    println!("sin vs sin + 3 up to constant: {:e}", compare_up_to_constant(&a, &b, None)?);
    Ok(())
}
