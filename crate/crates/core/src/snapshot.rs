//! JFLW field snapshots: magic `JFLW`, version `u16`, `N` as `u32`, component
//! count `u16`, then little-endian `f64` values, one component after another,
//! each row-major. A split field carries `N²` values per component, a full one `N⁴`.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::calculus::{Grid, HermitianFormField, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"JFLW";
pub const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 4 + 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_scalar(f: &ScalarField) -> Self {
        Self { grid: *f.grid(), components: vec![f.values().to_vec()] }
    }

    /// Components `h11, h22, Re h12, Im h12`.
    pub fn from_form(h: &HermitianFormField) -> Self {
        Self {
            grid: *h.grid(),
            components: vec![
                h.h11.clone(),
                h.h22.clone(),
                h.h12.iter().map(|c| c.re).collect(),
                h.h12.iter().map(|c| c.im).collect(),
            ],
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match <[Vec<f64>; 1]>::try_from(self.components) {
            Ok([v]) => ScalarField::new(self.grid, v),
            Err(c) => Err(Error::Format(format!("expected 1 component, found {}", c.len()))),
        }
    }

    pub fn into_form(self) -> Result<HermitianFormField> {
        match <[Vec<f64>; 4]>::try_from(self.components) {
            Ok([h11, h22, re, im]) => {
                let h12 = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
                HermitianFormField::from_parts(self.grid, h11, h22, h12)
            }
            Err(c) => Err(Error::Format(format!("expected 4 components, found {}", c.len()))),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let len = self.grid.len();
        let mut out = Vec::with_capacity(HEADER + 8 * len * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.n() as u32).to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u16).to_le_bytes());
        for c in &self.components {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Grid offsets are not stored; decoded grids have zero offsets.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let comps = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
        let payload = &bytes[HEADER..];
        if comps == 0 || payload.len() % (8 * comps) != 0 {
            return Err(Error::Format(format!(
                "payload of {} bytes does not hold {comps} components",
                payload.len()
            )));
        }
        let per = payload.len() / (8 * comps);
        let grid = if per == n * n {
            Grid::split(n)?
        } else if per == n.pow(4) {
            Grid::full(n)?
        } else {
            return Err(Error::Format(format!("{per} values per component fit neither N² nor N⁴ for N = {n}")));
        };
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let components = values.chunks_exact(per).map(<[f64]>::to_vec).collect();
        Ok(Self { grid, components })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
