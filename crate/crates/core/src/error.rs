use thiserror::Error;

/// Location of a pointwise failure on the grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub coords: [f64; 4],
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [x1, y1, x2, y2] = self.coords;
        write!(
            f,
            "#{} (x1={x1:.4}, y1={y1:.4}, x2={x2:.4}, y2={y2:.4})",
            self.index
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at {0}")]
    NonFinite(GridPoint),

    #[error("form not positive definite at {at}: margin {margin:e}")]
    NotPositive { at: GridPoint, margin: f64 },

    #[error("class not Kähler (minimum eigenvalue {min_eigenvalue:e})")]
    ClassNotPositive { min_eigenvalue: f64 },

    #[error("cone condition fails: margin {margin:e} (c = {c})")]
    ConeCondition { c: f64, margin: f64 },

    #[error("source has nonzero mean {0:e}")]
    NonZeroMean(f64),

    #[error("profile has non-positive mean {0:e}")]
    DegenerateProfile(f64),

    #[error("step rejected {rejections} times in a row at t = {t}; last dt = {dt:e}")]
    Stiffness { t: f64, dt: f64, rejections: usize },

    #[error("Newton did not converge in {iterations} iterations; residuals {residuals:?}")]
    NewtonDiverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("line search could not keep the form positive (residual {residual:e})")]
    PositivityLost { residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Diagnostic(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
