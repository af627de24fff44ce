//! Spectral complex Hessian, wedge density and integration on the torus.

use std::f64::consts::PI;

use jflow::calculus::{complex_hessian, integrate, positivity_margin, trace_with, wedge_density, Grid, Hermitian2, ScalarField};

fn main() -> jflow::Result<()> {
    let grid = Grid::full(8)?;
    // dd^c of cos 2π(x1 + x2) has entries −π² cos(..) in every slot.
    let phi = ScalarField::from_fn(grid, |x| 0.05 * (2.0 * PI * (x[0] + x[2])).cos());
    let h = complex_hessian(&phi)?;
    let expect = -PI * PI * 0.05;
    println!("H at origin: {:?} (expected all entries {expect:.6})", h.at(0));

    let chi = h.add_constant(Hermitian2::IDENTITY);
    println!("positivity margin of Id + dd^c φ: {:.4}", positivity_margin(&chi));
    let vol = integrate(&wedge_density(&chi, &chi));
    println!("∫ χ² = {vol:.12} (class value 4·D(Id, Id) = 8)");
    let tr = trace_with(&chi, &chi)?;
    println!("tr_χ χ ranges over [{:.12}, {:.12}]", tr.min(), tr.max());
    Ok(())
}
