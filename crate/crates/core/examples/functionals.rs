//! J, I and Aubin–Yau energies with a finite-difference gradient check.

use jflow::calculus::Grid;
use jflow::functionals::{functional_report, Functionals};
use jflow::presets::{random_potential, Preset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> jflow::Result<()> {
    let grid = Grid::split(32)?;
    let s = Preset::SmoothSplit.build(grid)?;
    let f = Functionals::new(&s.chi0, &s.omega0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_potential(&mut rng, true, 4, 0.003, 2).sample(grid)?;
    let v = phi.axpy(1.0, &random_potential(&mut rng, true, 3, 0.01, 3).sample(grid)?);
    println!("J closed {:.12}, J along the path {:.12}", f.j_closed(&phi)?, f.j_path(&phi, 64)?);
    println!("gradient check: {:?}", f.j_gradient_check(&phi, &v, 1e-4)?);
    let c = jflow::cohomology::c_constant(&s.chi0.cls, &s.omega0.cls)?;
    println!("{:#?}", functional_report(&phi, &s.chi0, &s.omega0, c, 32)?);
    Ok(())
}
