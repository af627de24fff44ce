use num_complex::Complex64;

use super::grid::Grid;
use super::hermitian::Hermitian2;
use crate::error::{Error, Result};

/// Real function sampled on a [`Grid`], row-major in `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Sample `f(x1, y1, x2, y2)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 4]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(self.grid.point(i))),
            None => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn shift(&self, s: f64) -> Self {
        self.map(|v| v + s)
    }

    /// Copy with mean zero.
    pub fn mean_normalized(&self) -> Self {
        self.shift(-self.mean())
    }

    /// Copy with `sup = 0`.
    pub fn sup_normalized(&self) -> Self {
        self.shift(-self.max())
    }

    /// Replicate a split-grid field (constant in `z2`) onto a full grid.
    pub fn lift_to(&self, full: Grid) -> Result<Self> {
        if self.grid == full {
            return Ok(self.clone());
        }
        if !self.grid.is_split() || full.is_split() || self.grid.n() != full.n() {
            return Err(Error::GridMismatch("lift requires split → full of equal N".into()));
        }
        let n2 = full.n() * full.n();
        let values = (0..full.len()).map(|i| self.values[i / n2]).collect();
        Self::new(full, values)
    }
}

/// Pointwise 2×2 Hermitian matrix field representing a real (1,1)-form.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianFormField {
    grid: Grid,
    pub h11: Vec<f64>,
    pub h22: Vec<f64>,
    pub h12: Vec<Complex64>,
}

impl HermitianFormField {
    pub fn from_parts(
        grid: Grid,
        h11: Vec<f64>,
        h22: Vec<f64>,
        h12: Vec<Complex64>,
    ) -> Result<Self> {
        let n = grid.len();
        if h11.len() != n || h22.len() != n || h12.len() != n {
            return Err(Error::GridMismatch("component length mismatch".into()));
        }
        Ok(Self { grid, h11, h22, h12 })
    }

    pub fn constant(grid: Grid, m: Hermitian2) -> Self {
        let n = grid.len();
        Self {
            grid,
            h11: vec![m.a11; n],
            h22: vec![m.a22; n],
            h12: vec![m.a12; n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 4]) -> Hermitian2) -> Self {
        let n = grid.len();
        let mut out = Self::constant(grid, Hermitian2::ZERO);
        for i in 0..n {
            out.set(i, f(grid.coords(i)));
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.h11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h11.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize) -> Hermitian2 {
        Hermitian2::new(self.h11[i], self.h22[i], self.h12[i])
    }

    #[inline]
    pub fn set(&mut self, i: usize, m: Hermitian2) {
        self.h11[i] = m.a11;
        self.h22[i] = m.a22;
        self.h12[i] = m.a12;
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Hermitian2, Hermitian2) -> Hermitian2) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.set(i, f(self.at(i), other.at(i)));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.set(i, self.at(i).scale(s));
        }
        out
    }

    pub fn add_constant(&self, m: Hermitian2) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.set(i, self.at(i) + m);
        }
        out
    }

    /// Pointwise mean over the grid (the harmonic part for exact + constant forms).
    pub fn mean(&self) -> Hermitian2 {
        let n = self.len() as f64;
        Hermitian2::new(
            self.h11.iter().sum::<f64>() / n,
            self.h22.iter().sum::<f64>() / n,
            self.h12.iter().sum::<Complex64>() / n,
        )
    }

    pub fn sup_abs_diff(&self, other: &Self) -> f64 {
        (0..self.len())
            .map(|i| {
                let d = self.at(i) - other.at(i);
                d.a11.abs().max(d.a22.abs()).max(d.a12.norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match (0..self.len()).find(|&i| !self.at(i).is_finite()) {
            Some(i) => Err(Error::NonFinite(self.grid.point(i))),
            None => Ok(()),
        }
    }
}
