use serde::{Deserialize, Serialize};

use crate::error::{Error, GridPoint, Result};

/// Uniform periodic lattice on the unit box `[0,1)^4` with real coordinates
/// ordered `(x1, y1, x2, y2)`, where `z_j = x_j + i y_j`.
///
/// A *full* grid resolves all four directions with `N` points each. A
/// *split* grid resolves only the `z1` factor and stores a single point in the
/// `z2` directions; it represents fields that are constant in `z2`, which is
/// exactly the class of fields produced by the product presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    shape: [usize; 4],
    offsets: [f64; 4],
}

impl Grid {
    pub fn full(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Self {
            n,
            shape: [n; 4],
            offsets: [0.0; 4],
        })
    }

    pub fn split(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Ok(Self {
            n,
            shape: [n, n, 1, 1],
            offsets: [0.0; 4],
        })
    }

    fn check_n(n: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("N must be at least 4 (got {n})")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N must be even (got {n})")));
        }
        Ok(())
    }

    /// Shift lattice points by per-direction offsets in `[0, 1/N)`.
    pub fn with_offsets(mut self, offsets: [f64; 4]) -> Result<Self> {
        let h = self.spacing();
        for (d, &o) in offsets.iter().enumerate() {
            if !(0.0..h).contains(&o) {
                return Err(Error::InvalidGrid(format!(
                    "offset {o} in direction {d} outside [0, {h})"
                )));
            }
            if self.shape[d] == 1 && o != 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "offset in collapsed direction {d} must be 0"
                )));
            }
        }
        self.offsets = offsets;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn offsets(&self) -> [f64; 4] {
        self.offsets
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn is_split(&self) -> bool {
        self.shape[2] == 1
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest resolved angular wavenumber, `πN`.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI * self.n as f64
    }

    pub fn unravel(&self, mut index: usize) -> [usize; 4] {
        let mut out = [0; 4];
        for d in (0..4).rev() {
            out[d] = index % self.shape[d];
            index /= self.shape[d];
        }
        out
    }

    pub fn coords(&self, index: usize) -> [f64; 4] {
        let ijk = self.unravel(index);
        let h = self.spacing();
        let mut x = [0.0; 4];
        for d in 0..4 {
            x[d] = if self.shape[d] == 1 {
                self.offsets[d]
            } else {
                ijk[d] as f64 * h + self.offsets[d]
            };
        }
        x
    }

    pub fn point(&self, index: usize) -> GridPoint {
        GridPoint {
            index,
            coords: self.coords(index),
        }
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.shape != other.shape || self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}
