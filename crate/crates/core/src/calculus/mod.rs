//! Discrete calculus on the flat torus `T⁴ = [0,1)⁴`: spectral complex
//! Hessians, wedge and trace kernels, integration.
//!
//! Conventions:
//! - `(dd^c φ)_{j k̄} = ∂²φ / ∂z_j ∂z̄_k`;
//! - `α ∧ β = D(α,β) (i dz1∧dz̄1)(i dz2∧dz̄2)` with
//!   `D(α,β) = α11 β22 + α22 β11 − 2 Re(α12 conj β12)`;
//! - `i dz∧dz̄ = 2 dx∧dy`, hence `∫ f (i dz1 dz̄1)(i dz2 dz̄2) = 4 · mean(f)`.

mod field;
mod grid;
mod hermitian;
pub(crate) mod spectral;

pub use field::{HermitianFormField, ScalarField};
pub use grid::Grid;
pub use hermitian::Hermitian2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use spectral::Spectral;

/// Volume factor of the integration convention.
pub const VOLUME_FACTOR: f64 = 4.0;

/// Complex Hessian `∂²φ/∂z_j∂z̄_k`, computed spectrally.
pub fn complex_hessian(phi: &ScalarField) -> Result<HermitianFormField> {
    phi.ensure_finite()?;
    Ok(hessian_unchecked(phi))
}

pub(crate) fn hessian_unchecked(phi: &ScalarField) -> HermitianFormField {
    let grid = *phi.grid();
    let sp = Spectral::for_grid(&grid);
    let spectrum = sp.to_spectrum(phi.values());
    let diag = sp.apply(&spectrum, &sp.diag);
    let h11 = diag.iter().map(|c| c.re).collect();
    let h22 = diag.iter().map(|c| c.im).collect();
    let h12 = match &sp.mixed {
        Some(sym) => sp.apply(&spectrum, sym),
        None => vec![Complex64::new(0.0, 0.0); grid.len()],
    };
    HermitianFormField::from_parts(grid, h11, h22, h12).expect("lengths match grid")
}

/// Holomorphic first derivatives `(∂_{z1} φ, ∂_{z2} φ)`.
pub fn dz(phi: &ScalarField) -> (Vec<Complex64>, Vec<Complex64>) {
    let sp = Spectral::for_grid(phi.grid());
    let spectrum = sp.to_spectrum(phi.values());
    (sp.apply(&spectrum, &sp.dz[0]), sp.apply(&spectrum, &sp.dz[1]))
}

/// Pointwise `D(α, β)`; `α ∧ β` as a density.
pub fn wedge_density(alpha: &HermitianFormField, beta: &HermitianFormField) -> ScalarField {
    let values = (0..alpha.len()).map(|i| alpha.at(i).wedge(&beta.at(i))).collect();
    ScalarField::new(*alpha.grid(), values).expect("lengths match grid")
}

/// Smallest eigenvalue over the grid and where it occurs.
pub fn positivity_scan(alpha: &HermitianFormField) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for i in 0..alpha.len() {
        let lo = alpha.at(i).eigenvalues().0;
        if lo < best.0 {
            best = (lo, i);
        }
    }
    best
}

/// `min` over the grid of the smaller eigenvalue of `α` against the identity.
pub fn positivity_margin(alpha: &HermitianFormField) -> f64 {
    positivity_scan(alpha).0
}

fn ensure_positive(alpha: &HermitianFormField) -> Result<()> {
    for i in 0..alpha.len() {
        let a = alpha.at(i);
        if !a.is_positive() {
            return Err(not_positive(alpha, i));
        }
    }
    Ok(())
}

pub(crate) fn not_positive(alpha: &HermitianFormField, i: usize) -> Error {
    Error::NotPositive {
        at: alpha.grid().point(i),
        margin: alpha.at(i).eigenvalues().0,
    }
}

/// `tr_α β = α^{j k̄} β_{j k̄}`, equal to `2 D(α,β) / D(α,α)` in dimension 2.
pub fn trace_with(alpha: &HermitianFormField, beta: &HermitianFormField) -> Result<ScalarField> {
    ensure_positive(alpha)?;
    let values = (0..alpha.len())
        .map(|i| {
            let a = alpha.at(i);
            a.wedge(&beta.at(i)) / a.det()
        })
        .collect();
    ScalarField::new(*alpha.grid(), values)
}

/// Pointwise roots of `det(β − λα) = 0`, ascending.
pub fn generalized_eigenvalues(
    alpha: &HermitianFormField,
    beta: &HermitianFormField,
) -> Result<(ScalarField, ScalarField)> {
    ensure_positive(alpha)?;
    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..alpha.len())
        .map(|i| alpha.at(i).generalized_eigenvalues(&beta.at(i)))
        .unzip();
    let g = *alpha.grid();
    Ok((ScalarField::new(g, lo)?, ScalarField::new(g, hi)?))
}

/// `∫_M density = 4 · mean(density)`.
pub fn integrate(density: &ScalarField) -> f64 {
    VOLUME_FACTOR * density.mean()
}

/// Symbol of `u ↦ D(A, dd^c u)` for a constant Hermitian `A`.
pub(crate) fn constant_operator_symbol(grid: &Grid, a: Hermitian2) -> Vec<f64> {
    let sp = Spectral::for_grid(grid);
    (0..grid.len())
        .map(|i| {
            let mut s = a.a11 * sp.s22[i] + a.a22 * sp.s11[i];
            if let (Some(m), Some(mc)) = (&sp.mixed, &sp.mixed_conj) {
                s -= (a.a12 * mc[i] + a.a12.conj() * m[i]).re;
            }
            s
        })
        .collect()
}

/// Mean-zero solution of `scale · D(A, dd^c u) = src − mean(src)` for constant `A`.
pub(crate) fn solve_constant_operator(src: &ScalarField, a: Hermitian2, scale: f64) -> ScalarField {
    let grid = *src.grid();
    let sp = Spectral::for_grid(&grid);
    let symbol = constant_operator_symbol(&grid, a);
    let mut buf = sp.to_spectrum(src.values());
    for (v, s) in buf.iter_mut().zip(&symbol) {
        let s = s * scale;
        *v = if s.abs() > 1e-300 { *v / s } else { Complex64::new(0.0, 0.0) };
    }
    sp.inverse(&mut buf);
    let values = buf.iter().map(|c| c.re).collect();
    ScalarField::new(grid, values).expect("lengths match grid")
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn id(grid: Grid) -> HermitianFormField {
        HermitianFormField::constant(grid, Hermitian2::IDENTITY)
    }

    #[test]
    fn hessian_of_zero_is_zero() {
        let g = Grid::full(4).unwrap();
        let h = complex_hessian(&ScalarField::zeros(g)).unwrap();
        assert_eq!(h.sup_abs_diff(&HermitianFormField::constant(g, Hermitian2::ZERO)), 0.0);
    }

    #[test]
    fn hessian_single_mode_x1() {
        let g = Grid::full(8).unwrap();
        let phi = ScalarField::from_fn(g, |x| 0.1 * (2.0 * PI * x[0]).cos());
        let h = complex_hessian(&phi).unwrap();
        let expect = HermitianFormField::from_fn(g, |x| {
            Hermitian2::diag(-0.1 * PI * PI * (2.0 * PI * x[0]).cos(), 0.0)
        });
        assert!(h.sup_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn hessian_diagonal_mode_fills_every_component() {
        let g = Grid::full(8).unwrap();
        let phi = ScalarField::from_fn(g, |x| 0.1 * (2.0 * PI * (x[0] + x[2])).cos());
        let h = complex_hessian(&phi).unwrap();
        let expect = HermitianFormField::from_fn(g, |x| {
            let v = -0.1 * PI * PI * (2.0 * PI * (x[0] + x[2])).cos();
            Hermitian2::new(v, v, Complex64::new(v, 0.0))
        });
        assert!(h.sup_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn hessian_rejects_nan() {
        let g = Grid::split(4).unwrap();
        let mut phi = ScalarField::zeros(g);
        phi.values_mut()[3] = f64::NAN;
        assert!(matches!(complex_hessian(&phi), Err(Error::NonFinite(_))));
    }

    #[test]
    fn wedge_examples() {
        let g = Grid::split(4).unwrap();
        assert!(wedge_density(&id(g), &id(g)).values().iter().all(|&v| v == 2.0));
        let a = HermitianFormField::constant(g, Hermitian2::diag(2.0, 3.0));
        let b = HermitianFormField::constant(g, Hermitian2::diag(5.0, 7.0));
        assert_eq!(wedge_density(&a, &b).values()[0], 2.0 * 7.0 + 3.0 * 5.0);
        let c = HermitianFormField::constant(
            g,
            Hermitian2::new(1.0, 1.0, Complex64::new(0.0, 0.5)),
        );
        assert!((wedge_density(&c, &c).values()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn trace_examples() {
        let g = Grid::split(4).unwrap();
        let t = trace_with(&id(g), &HermitianFormField::constant(g, Hermitian2::diag(2.0, 5.0))).unwrap();
        assert_eq!(t.values()[0], 7.0);
        let a = HermitianFormField::constant(g, Hermitian2::diag(2.0, 4.0));
        assert!((trace_with(&a, &a).unwrap().values()[0] - 2.0).abs() < 1e-15);
        let bad = HermitianFormField::constant(g, Hermitian2::diag(-1.0, 1.0));
        assert!(matches!(trace_with(&bad, &a), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::full(4).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 1.0)), 4.0);
        let c = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        assert!(integrate(&c).abs() < 1e-15);
        assert_eq!(integrate(&wedge_density(&id(g), &id(g))), 8.0);
    }

    #[test]
    fn margin_examples() {
        let g = Grid::split(8).unwrap();
        assert_eq!(positivity_margin(&id(g)), 1.0);
        let f = HermitianFormField::from_fn(g, |x| {
            Hermitian2::diag((PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2), 1.0)
        });
        assert_eq!(positivity_margin(&f), 0.0);
        let n = HermitianFormField::constant(g, Hermitian2::diag(-1.0, 1.0));
        assert_eq!(positivity_margin(&n), -1.0);
    }

    #[test]
    fn generalized_eigenvalue_fields() {
        let g = Grid::split(4).unwrap();
        let (lo, hi) = generalized_eigenvalues(
            &id(g),
            &HermitianFormField::constant(g, Hermitian2::new(2.0, 2.0, Complex64::new(1.0, 0.0))),
        )
        .unwrap();
        assert!((lo.values()[0] - 1.0).abs() < 1e-14);
        assert!((hi.values()[0] - 3.0).abs() < 1e-14);
    }
}
