//! Run configuration: TOML parsing with every schema error reported by key path.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::calculus::Grid;
use crate::cohomology::PotentialSpec;
use crate::diagnostics::{QMonitorConfig, UniformityBudget};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::ma::MaSolverConfig;
use crate::presets::{Preset, Scenario, ScenarioSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Split,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub backend: Backend,
    pub offsets: [f64; 4],
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        let g = match self.backend {
            Backend::Split => Grid::split(self.n)?,
            Backend::Full => Grid::full(self.n)?,
        };
        g.with_offsets(self.offsets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Preset(Preset),
    Explicit(ScenarioSpec),
}

impl ScenarioSource {
    pub fn spec(&self) -> ScenarioSpec {
        match self {
            ScenarioSource::Preset(p) => p.spec(),
            ScenarioSource::Explicit(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub grid: GridConfig,
    pub scenario: ScenarioSource,
    /// Keep the divisor model of the scenario, if it has one.
    pub divisor: bool,
    pub flow: FlowConfig,
    pub ma: MaSolverConfig,
    pub q_monitor: QMonitorConfig,
    pub budget: UniformityBudget,
    pub eps: Vec<f64>,
    /// Initial potential `φ₀`.
    pub init: PotentialSpec,
    /// Field evaluated by the `functionals` command instead of `φ₀`.
    pub snapshot: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
}

fn default_q(beta: Option<f64>) -> QMonitorConfig {
    let q = QMonitorConfig::default();
    match beta {
        Some(b) if q.validate(b).is_err() => QMonitorConfig { a: 2.0, delta: b.max(0.5), ..q },
        _ => q,
    }
}

impl RunConfig {
    /// Defaults for a built-in scenario.
    pub fn for_preset(preset: Preset) -> Self {
        let spec = preset.spec();
        let (n, backend) = if preset.is_split() { (32, Backend::Split) } else { (12, Backend::Full) };
        let degenerate = spec.divisor.is_some();
        Self {
            version: SCHEMA_VERSION,
            grid: GridConfig { n, backend, offsets: [0.0; 4] },
            scenario: ScenarioSource::Preset(preset),
            divisor: true,
            flow: FlowConfig::default(),
            ma: MaSolverConfig::default(),
            q_monitor: default_q(spec.divisor.as_ref().map(|d| d.beta)),
            budget: if degenerate {
                UniformityBudget::new(1.0 / (PI * PI) + 0.01, 1.05)
            } else {
                UniformityBudget::new(1.0, 1e6)
            },
            eps: preset.default_eps(),
            init: PotentialSpec::zero(),
            snapshot: None,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }

    pub fn build_grid(&self) -> Result<Grid> {
        self.grid.build()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = self.scenario.spec().build(self.build_grid()?)?;
        if !self.divisor {
            s.divisor = None;
        }
        Ok(s)
    }

    /// ε for single runs: the first entry of the list, else `flow.eps`.
    pub fn run_eps(&self) -> f64 {
        self.eps.first().copied().unwrap_or(self.flow.eps)
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig { eps: self.run_eps(), ..self.flow }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Cross-field invariants; every failure is collected.
    pub fn validate(&self) -> std::result::Result<(), ConfigErrors> {
        let mut errs = ConfigErrors::default();
        if self.version != SCHEMA_VERSION {
            errs.push("version", format!("expected {SCHEMA_VERSION}, found {}", self.version));
        }
        if let Err(e) = self.build_grid() {
            errs.push("grid", strip(e));
        }
        if self.grid.backend == Backend::Split && !self.scenario.spec().is_split() {
            errs.push("grid.backend", "scenario depends on z2; use the full backend");
        }
        for (i, e) in self.eps.iter().enumerate() {
            if !(*e >= 0.0 && e.is_finite()) {
                errs.push(&format!("eps[{i}]"), format!("must be finite and >= 0, got {e}"));
            }
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            errs.push("eps", "must be strictly descending");
        }
        if let Err(e) = self.flow.validate() {
            errs.push("flow", strip(e));
        }
        if let Err(e) = self.ma.validate() {
            errs.push("ma", strip(e));
        }
        if let Some(d) = self.scenario.spec().divisor.as_ref().filter(|_| self.divisor) {
            if let Err(e) = self.q_monitor.validate(d.beta) {
                errs.push("q_monitor", strip(e));
            }
        }
        if !(self.budget.sup_phi > 0.0 && self.budget.sup_phidot > 0.0 && self.budget.max_growth >= 1.0) {
            errs.push("budget", "bounds must be positive and max_growth >= 1");
        }
        if let Ok(g) = self.build_grid() {
            if let Err(e) = self.scenario.spec().build(g) {
                errs.push("scenario", strip(e));
            }
            if let Err(e) = self.init.sample(g) {
                errs.push("init", strip(e));
            }
        }
        errs.into_result()
    }

    /// Applies command-line overrides and revalidates.
    pub fn apply_overrides(&mut self, o: &Overrides) -> std::result::Result<(), ConfigErrors> {
        if let Some(p) = o.preset {
            let spec = p.spec();
            self.scenario = ScenarioSource::Preset(p);
            self.grid.backend = if spec.is_split() { Backend::Split } else { Backend::Full };
            self.q_monitor = default_q(spec.divisor.as_ref().map(|d| d.beta));
            if o.eps.is_none() {
                self.eps = p.default_eps();
            }
        }
        if let Some(e) = &o.eps {
            self.eps = e.clone();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub eps: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidGrid(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue { path: path.to_string(), message: message.into() });
    }

    fn into_result(self) -> std::result::Result<(), ConfigErrors> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }

    pub fn paths(&self) -> Vec<&str> {
        self.0.iter().map(|i| i.path.as_str()).collect()
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", i.path, i.message)?;
        }
        Ok(())
    }
}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

const TOP_KEYS: &[&str] = &[
    "version", "preset", "N", "seed", "eps", "out", "divisor", "grid", "scenario", "flow", "ma",
    "q_monitor", "budget", "init", "snapshot",
];
const GRID_KEYS: &[&str] = &["n", "backend", "offsets"];
const FLOW_KEYS: &[&str] = &[
    "eps", "dt_safety", "stop_tolerance", "max_time", "snapshot_stride", "degenerate_mode", "fixed_dt",
];
const MA_KEYS: &[&str] = &["newton_tol", "max_newton", "linear_tol", "damping", "krylov_restart", "max_krylov"];
const Q_KEYS: &[&str] = &["a", "delta", "c0_shift"];
const BUDGET_KEYS: &[&str] = &["sup_phi", "sup_phidot", "max_growth"];

fn unknown_keys(errs: &mut ConfigErrors, prefix: &str, t: &Table, known: &[&str]) {
    for k in t.keys() {
        if !known.contains(&k.as_str()) {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            errs.push(&path, "unknown key");
        }
    }
}

fn float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Merge `section` onto the serialized default and deserialize the result.
fn section<T>(errs: &mut ConfigErrors, root: &Table, key: &str, known: &[&str], default: &T) -> T
where
    T: Serialize + for<'de> Deserialize<'de> + Clone,
{
    let Some(v) = root.get(key) else { return default.clone() };
    let Some(t) = v.as_table() else {
        errs.push(key, "expected a table");
        return default.clone();
    };
    unknown_keys(errs, key, t, known);
    let mut base = match Value::try_from(default) {
        Ok(Value::Table(b)) => b,
        _ => Table::new(),
    };
    for (k, v) in t {
        if known.contains(&k.as_str()) {
            base.insert(k.clone(), v.clone());
        }
    }
    match Value::Table(base).try_into::<T>() {
        Ok(x) => x,
        Err(e) => {
            errs.push(key, e.message().trim().to_string());
            default.clone()
        }
    }
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, ConfigErrors> {
    let mut errs = ConfigErrors::default();
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            errs.push("<document>", e.to_string().trim().to_string());
            return Err(errs);
        }
    };
    unknown_keys(&mut errs, "", &root, TOP_KEYS);

    let version = match root.get("version") {
        None => SCHEMA_VERSION,
        Some(Value::Integer(v)) if *v >= 0 => *v as u32,
        Some(_) => {
            errs.push("version", "expected a non-negative integer");
            SCHEMA_VERSION
        }
    };
    if version != SCHEMA_VERSION {
        errs.push("version", format!("expected {SCHEMA_VERSION}, found {version}"));
    }

    let scenario = match (root.get("preset"), root.get("scenario")) {
        (Some(_), Some(_)) => {
            errs.push("scenario", "give either preset or [scenario], not both");
            None
        }
        (Some(Value::String(s)), None) => match s.parse::<Preset>() {
            Ok(p) => Some(ScenarioSource::Preset(p)),
            Err(e) => {
                errs.push("preset", strip(e));
                None
            }
        },
        (Some(_), None) => {
            errs.push("preset", "expected a string");
            None
        }
        (None, Some(v)) => match v.clone().try_into::<ScenarioSpec>() {
            Ok(s) => Some(ScenarioSource::Explicit(s)),
            Err(e) => {
                errs.push("scenario", e.message().trim().to_string());
                None
            }
        },
        (None, None) => {
            errs.push("preset", "missing; name a preset or give a [scenario] table");
            None
        }
    };
    // Keep going on identity defaults so later keys are still checked.
    let scenario = scenario.unwrap_or(ScenarioSource::Preset(Preset::Identity));
    let mut cfg = match &scenario {
        ScenarioSource::Preset(p) => RunConfig::for_preset(*p),
        ScenarioSource::Explicit(s) => {
            let mut c = RunConfig::for_preset(Preset::Identity);
            c.grid.backend = if s.is_split() { Backend::Split } else { Backend::Full };
            c.q_monitor = default_q(s.divisor.as_ref().map(|d| d.beta));
            c.eps = vec![];
            c
        }
    };
    cfg.scenario = scenario;
    cfg.version = version;

    if let Some(v) = root.get("N") {
        match v.as_integer() {
            Some(n) if n > 0 => cfg.grid.n = n as usize,
            _ => errs.push("N", "expected a positive integer"),
        }
    }
    if let Some(v) = root.get("grid") {
        match v.as_table() {
            Some(t) => {
                unknown_keys(&mut errs, "grid", t, GRID_KEYS);
                if let Some(n) = t.get("n") {
                    match n.as_integer() {
                        Some(n) if n > 0 => cfg.grid.n = n as usize,
                        _ => errs.push("grid.n", "expected a positive integer"),
                    }
                }
                if let Some(b) = t.get("backend") {
                    match b.as_str() {
                        Some("split") => cfg.grid.backend = Backend::Split,
                        Some("full") => cfg.grid.backend = Backend::Full,
                        _ => errs.push("grid.backend", "expected \"split\" or \"full\""),
                    }
                }
                if let Some(o) = t.get("offsets") {
                    match o.as_array().map(|a| a.iter().map(float).collect::<Option<Vec<f64>>>()) {
                        Some(Some(v)) if v.len() == 4 => cfg.grid.offsets = [v[0], v[1], v[2], v[3]],
                        _ => errs.push("grid.offsets", "expected 4 numbers"),
                    }
                }
            }
            None => errs.push("grid", "expected a table"),
        }
    }
    if cfg.grid.n % 2 != 0 {
        errs.push("grid.n", format!("N must be even (got {})", cfg.grid.n));
    }

    if let Some(v) = root.get("eps") {
        match v.as_array() {
            Some(a) => {
                let mut list = Vec::new();
                for (i, x) in a.iter().enumerate() {
                    match float(x) {
                        Some(e) if e >= 0.0 && e.is_finite() => list.push(e),
                        Some(e) => errs.push(&format!("eps[{i}]"), format!("must be >= 0, got {e}")),
                        None => errs.push(&format!("eps[{i}]"), "expected a number"),
                    }
                }
                cfg.eps = list;
            }
            None => errs.push("eps", "expected an array of numbers"),
        }
    }
    match root.get("divisor") {
        None => {}
        Some(Value::Boolean(b)) => cfg.divisor = *b,
        Some(_) => errs.push("divisor", "expected true or false"),
    }
    match root.get("seed") {
        None => {}
        Some(Value::Integer(s)) if *s >= 0 => cfg.seed = *s as u64,
        Some(_) => errs.push("seed", "expected a non-negative integer"),
    }
    match root.get("out") {
        None => {}
        Some(Value::String(s)) => cfg.out = PathBuf::from(s),
        Some(_) => errs.push("out", "expected a path string"),
    }
    match root.get("snapshot") {
        None => {}
        Some(Value::String(s)) => cfg.snapshot = Some(PathBuf::from(s)),
        Some(_) => errs.push("snapshot", "expected a path string"),
    }
    if let Some(v) = root.get("init") {
        match v.clone().try_into::<PotentialSpec>() {
            Ok(p) => cfg.init = p,
            Err(e) => errs.push("init", e.message().trim().to_string()),
        }
    }
    cfg.flow = section(&mut errs, &root, "flow", FLOW_KEYS, &cfg.flow);
    cfg.ma = section(&mut errs, &root, "ma", MA_KEYS, &cfg.ma);
    cfg.q_monitor = section(&mut errs, &root, "q_monitor", Q_KEYS, &cfg.q_monitor);
    cfg.budget = section(&mut errs, &root, "budget", BUDGET_KEYS, &cfg.budget);

    if let Err(more) = cfg.validate() {
        errs.0.extend(more.0);
    }
    errs.into_result().map(|_| cfg)
}
