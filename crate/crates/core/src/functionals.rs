//! Energy functionals on Kähler potentials: the J-functional in closed and
//! path form, the conserved I-functional, the Aubin–Yau functional, scalar
//! curvature and the Mabuchi energy.
//!
//! All integrals use the torus convention `∫ f · vol = 4 · mean(f)`.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    complex_hessian, dz, hessian_unchecked, integrate, not_positive, trace_with, Hermitian2,
    HermitianFormField, ScalarField, VOLUME_FACTOR,
};
use crate::cohomology::{c_constant, ClosedForm};
use crate::error::Result;

/// Background data `(χ₀, ω, c)` shared by the J- and I-functionals.
#[derive(Debug, Clone, Copy)]
pub struct Functionals<'a> {
    pub chi0: &'a ClosedForm,
    pub omega: &'a ClosedForm,
    pub c: f64,
}

/// Parametrization of the path from 0 to φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathShape {
    /// `φ_s = s φ`
    Linear,
    /// `φ_s = s² φ`
    Quadratic,
}

impl PathShape {
    fn value(self, s: f64) -> (f64, f64) {
        match self {
            PathShape::Linear => (s, 1.0),
            PathShape::Quadratic => (s * s, 2.0 * s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub finite_difference: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

impl<'a> Functionals<'a> {
    /// Uses `c = 2[χ₀]·[ω]/[χ₀]²`.
    pub fn new(chi0: &'a ClosedForm, omega: &'a ClosedForm) -> Result<Self> {
        let c = c_constant(&chi0.cls, &omega.cls)?;
        Ok(Self { chi0, omega, c })
    }

    pub fn with_c(chi0: &'a ClosedForm, omega: &'a ClosedForm, c: f64) -> Self {
        Self { chi0, omega, c }
    }

    pub fn chi(&self, phi: &ScalarField) -> Result<HermitianFormField> {
        Ok(self.chi0.realized.add(&complex_hessian(phi)?))
    }

    /// `∫φ(χ_φ∧ω + χ₀∧ω) − (c/3)∫φ(χ_φ² + χ_φ∧χ₀ + χ₀²)`.
    pub fn j_closed(&self, phi: &ScalarField) -> Result<f64> {
        let chi = self.chi(phi)?;
        Ok(self.j_closed_with(phi, &chi))
    }

    pub fn j_closed_with(&self, phi: &ScalarField, chi: &HermitianFormField) -> f64 {
        let mut acc = 0.0;
        for i in 0..chi.len() {
            let x = chi.at(i);
            let x0 = self.chi0.realized.at(i);
            let w = self.omega.realized.at(i);
            let first = x.wedge(&w) + x0.wedge(&w);
            let second = x.wedge(&x) + x.wedge(&x0) + x0.wedge(&x0);
            acc += phi.values()[i] * (first - self.c / 3.0 * second);
        }
        VOLUME_FACTOR * acc / chi.len() as f64
    }

    /// `(1/3)∫φ(χ_φ² + χ_φ∧χ₀ + χ₀²)`.
    pub fn i_functional(&self, phi: &ScalarField) -> Result<f64> {
        let chi = self.chi(phi)?;
        Ok(self.i_with(phi, &chi))
    }

    pub fn i_with(&self, phi: &ScalarField, chi: &HermitianFormField) -> f64 {
        let mut acc = 0.0;
        for i in 0..chi.len() {
            let x = chi.at(i);
            let x0 = self.chi0.realized.at(i);
            acc += phi.values()[i] * (x.wedge(&x) + x.wedge(&x0) + x0.wedge(&x0));
        }
        VOLUME_FACTOR * acc / (3.0 * chi.len() as f64)
    }

    /// Density `2 D(χ_φ, ω) − c D(χ_φ, χ_φ)`, the L²-gradient of J.
    pub fn gradient_density(&self, chi: &HermitianFormField) -> ScalarField {
        let values = (0..chi.len())
            .map(|i| {
                let x = chi.at(i);
                2.0 * x.wedge(&self.omega.realized.at(i)) - self.c * x.wedge(&x)
            })
            .collect();
        ScalarField::new(*chi.grid(), values).expect("lengths match grid")
    }

    /// Directional derivative `∫ v (2χ_φ∧ω − cχ_φ²)`.
    pub fn directional_derivative(&self, phi: &ScalarField, v: &ScalarField) -> Result<f64> {
        let g = self.gradient_density(&self.chi(phi)?);
        Ok(integrate(&g.zip_map(v, |a, b| a * b)))
    }

    /// Path integral of the J-integrand by composite Simpson with `steps`
    /// and `2·steps` panels, Richardson-extrapolated.
    pub fn j_path(&self, phi: &ScalarField, steps: usize) -> Result<f64> {
        self.j_path_along(phi, steps, PathShape::Linear)
    }

    pub fn j_path_along(&self, phi: &ScalarField, steps: usize, shape: PathShape) -> Result<f64> {
        assert!(steps >= 8, "path quadrature needs at least 8 steps");
        let hess = complex_hessian(phi)?;
        let integrand = |s: f64| -> f64 {
            let (p, dp) = shape.value(s);
            let mut acc = 0.0;
            for i in 0..hess.len() {
                let x = self.chi0.realized.at(i) + hess.at(i).scale(p);
                let dens = 2.0 * x.wedge(&self.omega.realized.at(i)) - self.c * x.wedge(&x);
                acc += dp * phi.values()[i] * dens;
            }
            VOLUME_FACTOR * acc / hess.len() as f64
        };
        Ok(richardson_simpson(integrand, steps))
    }

    /// Central-difference check of the J-gradient in direction `v`.
    pub fn j_gradient_check(&self, phi: &ScalarField, v: &ScalarField, h: f64) -> Result<GradientCheck> {
        let plus = self.j_closed(&phi.axpy(h, v))?;
        let minus = self.j_closed(&phi.axpy(-h, v))?;
        let fd = (plus - minus) / (2.0 * h);
        let analytic = self.directional_derivative(phi, v)?;
        let scale = fd.abs().max(analytic.abs());
        let relative_error = if scale == 0.0 { 0.0 } else { (fd - analytic).abs() / scale };
        Ok(GradientCheck { finite_difference: fd, analytic, relative_error })
    }

    /// `∫ i∂φ∧∂̄φ∧(χ₀ + χ_φ)`.
    pub fn e_aubin_yau(&self, phi: &ScalarField) -> Result<f64> {
        let chi = self.chi(phi)?;
        let (d1, d2) = dz(phi);
        let mut acc = 0.0;
        for i in 0..chi.len() {
            let p = Hermitian2::new(d1[i].norm_sqr(), d2[i].norm_sqr(), d1[i] * d2[i].conj());
            acc += p.wedge(&(self.chi0.realized.at(i) + chi.at(i)));
        }
        Ok(VOLUME_FACTOR * acc / chi.len() as f64)
    }

    /// `−∫ φ̇² χ²`, the J-dissipation rate along the flow.
    pub fn dissipation_with(&self, phi_dot: &ScalarField, chi: &HermitianFormField) -> f64 {
        let acc: f64 = (0..chi.len())
            .map(|i| {
                let x = chi.at(i);
                phi_dot.values()[i].powi(2) * x.wedge(&x)
            })
            .sum();
        -VOLUME_FACTOR * acc / chi.len() as f64
    }
}

fn simpson(f: &impl Fn(f64) -> f64, panels: usize) -> f64 {
    let n = if panels % 2 == 0 { panels } else { panels + 1 };
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0
}

fn richardson_simpson(f: impl Fn(f64) -> f64, steps: usize) -> f64 {
    let coarse = simpson(&f, steps);
    let fine = simpson(&f, 2 * steps);
    (16.0 * fine - coarse) / 15.0
}

/// `J` by the closed formula, with `c = c_constant([χ₀], [ω₀])`.
pub fn j_closed(phi: &ScalarField, chi0: &ClosedForm, omega0: &ClosedForm, c0: f64) -> Result<f64> {
    Functionals::with_c(chi0, omega0, c0).j_closed(phi)
}

pub fn j_path(phi: &ScalarField, chi0: &ClosedForm, omega0: &ClosedForm, c0: f64, steps: usize) -> Result<f64> {
    Functionals::with_c(chi0, omega0, c0).j_path(phi, steps)
}

pub fn i_functional(phi: &ScalarField, chi0: &ClosedForm) -> Result<f64> {
    Functionals::with_c(chi0, chi0, 2.0).i_functional(phi)
}

pub fn e_aubin_yau(phi: &ScalarField, chi0: &ClosedForm) -> Result<f64> {
    Functionals::with_c(chi0, chi0, 2.0).e_aubin_yau(phi)
}

/// Ricci form `−dd^c log(D(χ,χ)/2)`.
pub fn ricci_form(chi: &HermitianFormField) -> Result<HermitianFormField> {
    let mut logdet = Vec::with_capacity(chi.len());
    for i in 0..chi.len() {
        let x = chi.at(i);
        if !x.is_positive() {
            return Err(not_positive(chi, i));
        }
        logdet.push(x.det().ln());
    }
    let f = ScalarField::new(*chi.grid(), logdet)?;
    Ok(hessian_unchecked(&f).scale(-1.0))
}

/// Scalar curvature `R = tr_χ Ric(χ)`.
pub fn scalar_curvature(chi: &HermitianFormField) -> Result<ScalarField> {
    trace_with(chi, &ricci_form(chi)?)
}

/// `R̄ = ∫ R χ² / ∫ χ²`.
pub fn average_scalar_curvature(chi: &HermitianFormField) -> Result<f64> {
    let r = scalar_curvature(chi)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..chi.len() {
        let v = chi.at(i).wedge(&chi.at(i));
        num += r.values()[i] * v;
        den += v;
    }
    Ok(num / den)
}

/// `∫ R χ²`.
pub fn total_scalar_curvature(chi: &HermitianFormField) -> Result<f64> {
    let r = scalar_curvature(chi)?;
    let acc: f64 = (0..chi.len())
        .map(|i| r.values()[i] * chi.at(i).wedge(&chi.at(i)))
        .sum();
    Ok(VOLUME_FACTOR * acc / chi.len() as f64)
}

/// Mabuchi energy `−∫₀¹∫ φ̇_s (R_s − R̄) χ_s² ds` along `φ_s = sφ`.
pub fn mabuchi_path(phi: &ScalarField, chi0: &ClosedForm, steps: usize) -> Result<f64> {
    assert!(steps >= 8, "path quadrature needs at least 8 steps");
    let hess = complex_hessian(phi)?;
    let rbar = average_scalar_curvature(&chi0.realized)?;
    let integrand = |s: f64| -> Result<f64> {
        let chi = chi0.realized.add(&hess.scale(s));
        let r = scalar_curvature(&chi)?;
        let acc: f64 = (0..chi.len())
            .map(|i| phi.values()[i] * (r.values()[i] - rbar) * chi.at(i).wedge(&chi.at(i)))
            .sum();
        Ok(-VOLUME_FACTOR * acc / chi.len() as f64)
    };
    // Evaluate nodes eagerly so positivity failures surface as errors.
    let nodes = 2 * steps;
    let values: Vec<f64> = (0..=nodes)
        .map(|k| integrand(k as f64 / nodes as f64))
        .collect::<Result<_>>()?;
    let lookup = |s: f64| values[(s * nodes as f64).round() as usize];
    Ok(richardson_simpson(lookup, steps))
}

/// Values of all functionals at one potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub j: f64,
    pub i: f64,
    pub e: f64,
    pub m: Option<f64>,
    pub f: Option<f64>,
    pub path_resolution: usize,
    pub notes: Vec<String>,
}

/// Evaluate `J, I, E`, and `M, F = M − J` when the whole linear path stays positive.
pub fn functional_report(
    phi: &ScalarField,
    chi0: &ClosedForm,
    omega: &ClosedForm,
    c: f64,
    steps: usize,
) -> Result<FunctionalReport> {
    let fun = Functionals::with_c(chi0, omega, c);
    let j = fun.j_path(phi, steps)?;
    let i = fun.i_functional(phi)?;
    let e = fun.e_aubin_yau(phi)?;
    let mut notes = vec!["J by path quadrature (linear path, Richardson-extrapolated Simpson)".to_string()];
    let (m, f) = match mabuchi_path(phi, chi0, steps) {
        Ok(m) => (Some(m), Some(m - j)),
        Err(e) => {
            notes.push(format!("Mabuchi energy skipped: {e}"));
            (None, None)
        }
    };
    Ok(FunctionalReport { j, i, e, m, f, path_resolution: steps, notes })
}
