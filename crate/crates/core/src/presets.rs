//! Built-in scenarios and the serializable description they are built from.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{Grid, Hermitian2};
use crate::cohomology::{ClosedForm, CohomologyClass, DivisorModel, Mode, PotentialSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `χ₀ = ω₀ = ω̂ = Id`.
    Identity,
    /// `χ₀ = Id`, `ω₀ = diag(1 + ½ sin 2πx1, 1)`.
    SmoothSplit,
    /// `χ₀ = Id`, `ω₀ = diag(sin²πx1 + sin²πy1, 1)`, degenerate along `z1 = 0`.
    DegenerateSplit,
    /// `DegenerateSplit` with `χ₀` perturbed by `dd^c(0.05 cos 2π(x1 + x2))`.
    NonsplitPerturbed,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Identity,
        Preset::SmoothSplit,
        Preset::DegenerateSplit,
        Preset::NonsplitPerturbed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Identity => "identity",
            Preset::SmoothSplit => "smooth_split",
            Preset::DegenerateSplit => "degenerate_split",
            Preset::NonsplitPerturbed => "nonsplit_perturbed",
        }
    }

    pub fn spec(&self) -> ScenarioSpec {
        let id = FormSpec::constant(Hermitian2::IDENTITY);
        match self {
            Preset::Identity => ScenarioSpec {
                chi0: id.clone(),
                omega0: id.clone(),
                omega_hat: id,
                divisor: None,
            },
            Preset::SmoothSplit => ScenarioSpec {
                chi0: id.clone(),
                omega0: FormSpec {
                    class: Hermitian2::IDENTITY.into(),
                    potential: PotentialSpec::from_modes(vec![Mode::sin(
                        -1.0 / (2.0 * PI * PI),
                        [1, 0, 0, 0],
                    )]),
                },
                omega_hat: id,
                divisor: None,
            },
            Preset::DegenerateSplit => degenerate_spec(PotentialSpec::zero()),
            Preset::NonsplitPerturbed => degenerate_spec(PotentialSpec::from_modes(vec![
                Mode::cos(0.05, [1, 0, 1, 0]),
            ])),
        }
    }

    /// Whether the preset lives on the `z1` factor alone.
    pub fn is_split(&self) -> bool {
        !matches!(self, Preset::NonsplitPerturbed)
    }

    pub fn default_eps(&self) -> Vec<f64> {
        match self {
            Preset::Identity | Preset::SmoothSplit => vec![0.0],
            Preset::DegenerateSplit => vec![0.2, 0.1, 0.05],
            Preset::NonsplitPerturbed => vec![0.2],
        }
    }

    pub fn build(&self, grid: Grid) -> Result<Scenario> {
        self.spec().build(grid)
    }
}

/// `u = (cos 2πx1 + cos 2πy1)/(2π²)` satisfies `dd^c u = diag(f − 1, 0)`.
fn degenerate_potential() -> PotentialSpec {
    let a = 1.0 / (2.0 * PI * PI);
    PotentialSpec::from_modes(vec![Mode::cos(a, [1, 0, 0, 0]), Mode::cos(a, [0, 1, 0, 0])])
}

fn degenerate_spec(chi0_potential: PotentialSpec) -> ScenarioSpec {
    let rho = 0.5;
    let u = degenerate_potential();
    ScenarioSpec {
        chi0: FormSpec { class: Hermitian2::IDENTITY.into(), potential: chi0_potential },
        omega0: FormSpec { class: Hermitian2::IDENTITY.into(), potential: u.clone() },
        omega_hat: FormSpec::constant(Hermitian2::IDENTITY),
        // R_H = (ω₀ − diag(1 − ρ, 1))/ρ: class diag(1, 0), potential u/ρ.
        divisor: Some(DivisorSpec {
            beta: 1.0,
            rho,
            r_h: FormSpec { class: Hermitian2::diag(1.0, 0.0).into(), potential: u.scaled(1.0 / rho) },
        }),
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// `count` random Fourier modes with `|k_d| ≤ kmax`, amplitudes in
/// `[−amp, amp]`, and no `z2` dependence when `split`.
pub fn random_potential(rng: &mut impl rand::Rng, split: bool, count: usize, amp: f64, kmax: i32) -> PotentialSpec {
    let modes = (0..count)
        .map(|_| {
            let mut k = [0i32; 4];
            while k == [0; 4] {
                for (d, kd) in k.iter_mut().enumerate() {
                    *kd = if split && d >= 2 { 0 } else { rng.gen_range(-kmax..=kmax) };
                }
            }
            let a = rng.gen_range(-amp..=amp);
            if rng.gen_bool(0.5) {
                Mode::cos(a, k)
            } else {
                Mode::sin(a, k)
            }
        })
        .collect();
    PotentialSpec::from_modes(modes)
}

/// Class entries `[h11, h22, Re h12, Im h12]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec(pub [f64; 4]);

impl From<Hermitian2> for ClassSpec {
    fn from(m: Hermitian2) -> Self {
        Self([m.a11, m.a22, m.a12.re, m.a12.im])
    }
}

impl From<ClassSpec> for CohomologyClass {
    fn from(c: ClassSpec) -> Self {
        let [a, b, re, im] = c.0;
        CohomologyClass(Hermitian2::new(a, b, Complex64::new(re, im)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSpec {
    pub class: ClassSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
}

impl FormSpec {
    pub fn constant(m: Hermitian2) -> Self {
        Self { class: m.into(), potential: PotentialSpec::zero() }
    }

    pub fn build(&self, grid: Grid) -> Result<ClosedForm> {
        ClosedForm::from_spec(grid, self.class.into(), &self.potential)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorSpec {
    pub beta: f64,
    pub rho: f64,
    pub r_h: FormSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub chi0: FormSpec,
    pub omega0: FormSpec,
    pub omega_hat: FormSpec,
    #[serde(default)]
    pub divisor: Option<DivisorSpec>,
}

impl ScenarioSpec {
    pub fn is_split(&self) -> bool {
        ![&self.chi0, &self.omega0, &self.omega_hat]
            .iter()
            .any(|f| f.potential.depends_on_z2() || f.class.0[2] != 0.0 || f.class.0[3] != 0.0)
    }

    pub fn build(&self, grid: Grid) -> Result<Scenario> {
        let divisor = match &self.divisor {
            Some(d) => Some(DivisorModel::new(grid, d.beta, d.rho, d.r_h.build(grid)?)),
            None => None,
        };
        Ok(Scenario {
            grid,
            chi0: self.chi0.build(grid)?,
            omega0: self.omega0.build(grid)?,
            omega_hat: self.omega_hat.build(grid)?,
            divisor,
        })
    }
}

/// Concrete forms of a scenario realized on a grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub chi0: ClosedForm,
    pub omega0: ClosedForm,
    pub omega_hat: ClosedForm,
    pub divisor: Option<DivisorModel>,
}
