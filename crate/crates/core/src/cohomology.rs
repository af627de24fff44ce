//! Cohomology classes on the torus, their intersection pairing, the flow
//! constants `c₀`/`c_ε`, the cone condition and closed (1,1)-forms built as
//! `class + dd^c(potential)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    complex_hessian, Grid, Hermitian2, HermitianFormField, ScalarField, VOLUME_FACTOR,
};
use crate::error::{Error, GridPoint, Result};

/// Harmonic representative of a (1,1)-class: a constant Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohomologyClass(pub Hermitian2);

impl CohomologyClass {
    pub fn identity() -> Self {
        Self(Hermitian2::IDENTITY)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self(Hermitian2::diag(a, b))
    }

    pub fn matrix(&self) -> Hermitian2 {
        self.0
    }

    pub fn is_kahler(&self) -> bool {
        self.0.is_positive()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

impl std::ops::Add for CohomologyClass {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self(self.0 + o.0)
    }
}

impl std::ops::Sub for CohomologyClass {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self(self.0 - o.0)
    }
}

/// `[A]·[B] = ∫ A ∧ B = 4 D(A, B)` for constant representatives.
pub fn class_pairing(a: &CohomologyClass, b: &CohomologyClass) -> f64 {
    VOLUME_FACTOR * a.0.wedge(&b.0)
}

/// `c = 2 [X]·[W] / [X]²`.
pub fn c_constant(x: &CohomologyClass, w: &CohomologyClass) -> Result<f64> {
    if !x.is_kahler() {
        return Err(Error::ClassNotPositive {
            min_eigenvalue: x.0.eigenvalues().0,
        });
    }
    Ok(2.0 * class_pairing(x, w) / class_pairing(x, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub c: f64,
    /// Smallest eigenvalue of `c·X − W`.
    pub margin: f64,
}

impl ConeVerdict {
    pub fn holds(&self) -> bool {
        self.margin > 0.0
    }
}

/// The cone condition `c[X] − [W] > 0`.
pub fn cone_condition(x: &CohomologyClass, w: &CohomologyClass) -> Result<ConeVerdict> {
    let c = c_constant(x, w)?;
    let margin = (x.0.scale(c) - w.0).eigenvalues().0;
    Ok(ConeVerdict { c, margin })
}

/// One Fourier term `amp · cos(2π k·x)` or `amp · sin(2π k·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amp: f64,
    /// Integer wavevector over `(x1, y1, x2, y2)`.
    pub k: [i32; 4],
    #[serde(default)]
    pub kind: ModeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    #[default]
    Cos,
    Sin,
}

impl Mode {
    pub fn cos(amp: f64, k: [i32; 4]) -> Self {
        Self { amp, k, kind: ModeKind::Cos }
    }

    pub fn sin(amp: f64, k: [i32; 4]) -> Self {
        Self { amp, k, kind: ModeKind::Sin }
    }

    fn eval(&self, x: [f64; 4]) -> f64 {
        let arg = 2.0 * PI * (0..4).map(|d| self.k[d] as f64 * x[d]).sum::<f64>();
        match self.kind {
            ModeKind::Cos => self.amp * arg.cos(),
            ModeKind::Sin => self.amp * arg.sin(),
        }
    }
}

/// A potential given as a finite Fourier sum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default)]
    pub modes: Vec<Mode>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_modes(modes: Vec<Mode>) -> Self {
        Self { modes }
    }

    pub fn depends_on_z2(&self) -> bool {
        self.modes.iter().any(|m| m.amp != 0.0 && (m.k[2] != 0 || m.k[3] != 0))
    }

    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        if grid.is_split() && self.depends_on_z2() {
            return Err(Error::Config(
                "potential depends on z2 and cannot live on a split grid".into(),
            ));
        }
        let nyq = grid.n() as i32 / 2;
        if self.modes.iter().any(|m| m.k.iter().any(|k| k.abs() >= nyq)) {
            return Err(Error::Config(format!(
                "potential mode not resolved on N = {}",
                grid.n()
            )));
        }
        Ok(ScalarField::from_fn(grid, |x| {
            self.modes.iter().map(|m| m.eval(x)).sum()
        }))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            modes: self.modes.iter().map(|m| Mode { amp: m.amp * s, ..*m }).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().copied());
        Self { modes }
    }
}

/// Closed (1,1)-form `cls + dd^c potential`, closed by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub cls: CohomologyClass,
    pub potential: ScalarField,
    pub realized: HermitianFormField,
}

impl ClosedForm {
    pub fn new(cls: CohomologyClass, potential: ScalarField) -> Result<Self> {
        let realized = complex_hessian(&potential)?.add_constant(cls.0);
        Ok(Self { cls, potential, realized })
    }

    pub fn constant(grid: Grid, cls: CohomologyClass) -> Self {
        Self {
            cls,
            potential: ScalarField::zeros(grid),
            realized: HermitianFormField::constant(grid, cls.0),
        }
    }

    pub fn from_spec(grid: Grid, cls: CohomologyClass, spec: &PotentialSpec) -> Result<Self> {
        Self::new(cls, spec.sample(grid)?)
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    /// `a·self + b·other`, componentwise in class, potential and field.
    pub fn combine(&self, a: f64, other: &ClosedForm, b: f64) -> Self {
        Self {
            cls: self.cls.scale(a) + other.cls.scale(b),
            potential: self.potential.scale(a).axpy(b, &other.potential),
            realized: self.realized.scale(a).add(&other.realized.scale(b)),
        }
    }

    /// `self + dd^c φ`, sharing the class.
    pub fn deform(&self, phi: &ScalarField) -> Result<Self> {
        let potential = self.potential.axpy(1.0, phi);
        Self::new(self.cls, potential)
    }

    pub fn lift_to(&self, full: Grid) -> Result<Self> {
        Self::new(self.cls, self.potential.lift_to(full)?)
    }
}

/// `ω_ε = ω₀ + ε ω̂`.
pub fn epsilon_form(omega0: &ClosedForm, eps: f64, omega_hat: &ClosedForm) -> ClosedForm {
    omega0.combine(1.0, omega_hat, eps)
}

/// Model of the degeneracy divisor `D = {z1 = 0}` with the `|s|²_H` proxy
/// `sin²(πx1) + sin²(πy1)` and a representative of `c₁([D]) = diag(1, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivisorModel {
    pub s2_proxy: ScalarField,
    pub beta: f64,
    pub rho: f64,
    pub r_h: ClosedForm,
}

/// Threshold defining the off-divisor region `{s2_proxy ≥ 0.1}`.
pub const OFF_DIVISOR_THRESHOLD: f64 = 0.1;

impl DivisorModel {
    pub fn s2_proxy(grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| (PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2))
    }

    pub fn new(grid: Grid, beta: f64, rho: f64, r_h: ClosedForm) -> Self {
        Self { s2_proxy: Self::s2_proxy(grid), beta, rho, r_h }
    }

    /// Grid points strictly off the locus.
    pub fn off_locus(&self) -> Vec<bool> {
        self.s2_proxy.values().iter().map(|&s| s > 1e-12).collect()
    }

    pub fn off_divisor_region(&self, threshold: f64) -> Vec<bool> {
        self.s2_proxy.values().iter().map(|&s| s >= threshold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Omega0Verdict {
    Certificate { c0: f64, beta: f64, rho: f64 },
    Failure { at: GridPoint, inequality: String, margin: f64 },
}

/// Find the smallest `C₀` with `ω₀ ≥ s^{2β} ω̂ / C₀` and `ω₀ − ρ R_H ≥ ω̂ / C₀`
/// at every grid point.
pub fn verify_omega0_conditions(
    omega0: &ClosedForm,
    div: &DivisorModel,
    omega_hat: &ClosedForm,
) -> Omega0Verdict {
    let grid = *omega0.grid();
    let mut inv_c0 = f64::INFINITY;
    for i in 0..grid.len() {
        let w0 = omega0.realized.at(i);
        let hat = omega_hat.realized.at(i);
        // λ_min(ω₀ relative to ω̂) bounds 1/C₀ · s^{2β}.
        let (lam, _) = hat.generalized_eigenvalues(&w0);
        let s = div.s2_proxy.values()[i].powf(div.beta);
        if s > 0.0 {
            inv_c0 = inv_c0.min(lam / s);
        }
        if lam < -1e-12 {
            return Omega0Verdict::Failure {
                at: grid.point(i),
                inequality: "omega0 >= |s|^(2 beta) omega_hat / C0".into(),
                margin: lam,
            };
        }
        let shifted = w0 - div.r_h.realized.at(i).scale(div.rho);
        let (lam2, _) = hat.generalized_eigenvalues(&shifted);
        if lam2 <= 0.0 {
            return Omega0Verdict::Failure {
                at: grid.point(i),
                inequality: "omega0 - rho R_H >= omega_hat / C0".into(),
                margin: lam2,
            };
        }
        inv_c0 = inv_c0.min(lam2);
    }
    Omega0Verdict::Certificate { c0: 1.0 / inv_c0, beta: div.beta, rho: div.rho }
}

/// Unit imaginary, handy for building off-diagonal entries.
pub const I: Complex64 = Complex64::new(0.0, 1.0);
