//! Newton–Krylov solve of the critical equation via its Monge–Ampère form.

use jflow::calculus::Grid;
use jflow::cohomology::epsilon_form;
use jflow::ma::{critical_residual, epsilon_continuation, solve_critical, MaSolverConfig};
use jflow::presets::Preset;

fn main() -> jflow::Result<()> {
    let cfg = MaSolverConfig::default();
    let s = Preset::SmoothSplit.build(Grid::split(32)?)?;
    let (c, sol) = solve_critical(&s.chi0, &s.omega0, &cfg, None)?;
    println!("smooth split: c = {c}, Newton residuals {:?}", sol.residuals);
    println!("Krylov iterations per step {:?}", sol.krylov_iterations);
    println!("critical residual {:e}", critical_residual(&sol.psi, &s.chi0, &s.omega0, c)?);

    let s = Preset::DegenerateSplit.build(Grid::split(16)?)?;
    for st in epsilon_continuation(&s.chi0, &s.omega0, &s.omega_hat, &[0.4, 0.2, 0.1, 0.05], &cfg)? {
        let w = epsilon_form(&s.omega0, st.eps, &s.omega_hat);
        println!(
            "ε = {}: {} Newton steps, sup|ψ| = {:.6}, critical residual {:e}",
            st.eps,
            st.solution.newton_iterations(),
            st.solution.psi.sup_abs(),
            critical_residual(&st.solution.psi, &s.chi0, &w, st.c)?
        );
    }
    Ok(())
}
