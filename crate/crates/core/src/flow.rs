//! Method-of-lines integrator for the J-flow `∂φ/∂t = c_ε − tr_{χ_φ} ω_ε`,
//! the ε-family driver and maximum-principle monitors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{hessian_unchecked, not_positive, Grid, HermitianFormField, ScalarField};
use crate::diagnostics::{q_monitor as q_monitor_fn, QMonitorConfig};
use crate::cohomology::{cone_condition, epsilon_form, ClosedForm, DivisorModel, OFF_DIVISOR_THRESHOLD};
use crate::error::{Error, Result};
use crate::functionals::Functionals;
use crate::ma::critical_residual_with;

const MAX_REJECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub eps: f64,
    pub dt_safety: f64,
    /// Stop once `sup |φ̇| < stop_tolerance`.
    pub stop_tolerance: f64,
    pub max_time: f64,
    /// Steps between history rows.
    pub snapshot_stride: usize,
    /// Acknowledges a run whose `ω_ε` is only semi-positive.
    pub degenerate_mode: bool,
    /// Overrides the adaptive rule.
    pub fixed_dt: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            eps: 0.0,
            dt_safety: 0.2,
            stop_tolerance: 1e-9,
            max_time: 10.0,
            snapshot_stride: 50,
            degenerate_mode: false,
            fixed_dt: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            bad.push(format!("eps must be finite and >= 0, got {}", self.eps));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety < 1.0) {
            bad.push(format!("dt_safety must lie in (0,1), got {}", self.dt_safety));
        }
        if !(self.stop_tolerance > 0.0) {
            bad.push(format!("stop_tolerance must be positive, got {}", self.stop_tolerance));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            bad.push(format!("max_time must be positive, got {}", self.max_time));
        }
        if self.snapshot_stride == 0 {
            bad.push("snapshot_stride must be at least 1".into());
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                bad.push(format!("fixed_dt must be positive, got {dt}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Pointwise data of the flow at one potential.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub chi: HermitianFormField,
    pub phi_dot: ScalarField,
    /// Smallest eigenvalue of `χ_φ` over the monitored points.
    pub margin: f64,
}

/// `χ₀`, `ω_ε` and `c_ε` together with the points where positivity is enforced.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub chi0: ClosedForm,
    pub omega: ClosedForm,
    pub c: f64,
    pub eps: f64,
    monitored: Option<Vec<bool>>,
}

impl FlowProblem {
    /// Builds `ω_ε = ω₀ + ε ω̂` and checks the cone condition. A semi-positive
    /// `ω_ε` needs `degenerate_mode`; positivity of `χ_φ` is then only
    /// enforced off the divisor locus.
    pub fn new(
        cfg: &FlowConfig,
        chi0: &ClosedForm,
        omega0: &ClosedForm,
        omega_hat: &ClosedForm,
        divisor: Option<&DivisorModel>,
    ) -> Result<Self> {
        cfg.validate()?;
        chi0.grid().ensure_same(omega0.grid())?;
        chi0.grid().ensure_same(omega_hat.grid())?;
        let omega = epsilon_form(omega0, cfg.eps, omega_hat);
        let verdict = cone_condition(&chi0.cls, &omega.cls)?;
        if !verdict.holds() {
            return Err(Error::ConeCondition { c: verdict.c, margin: verdict.margin });
        }
        let omega_margin = crate::calculus::positivity_margin(&omega.realized);
        if omega_margin < 0.0 {
            return Err(Error::NotPositive {
                at: omega.grid().point(crate::calculus::positivity_scan(&omega.realized).1),
                margin: omega_margin,
            });
        }
        let degenerate = omega_margin <= 1e-12;
        if degenerate && !cfg.degenerate_mode {
            return Err(Error::Config(format!(
                "ω_ε has margin {omega_margin:e}; set degenerate_mode to run it"
            )));
        }
        let monitored = if degenerate { divisor.map(|d| d.off_locus()) } else { None };
        Ok(Self { chi0: chi0.clone(), omega, c: verdict.c, eps: cfg.eps, monitored })
    }

    pub fn grid(&self) -> &Grid {
        self.chi0.grid()
    }

    pub fn functionals(&self) -> Functionals<'_> {
        Functionals::with_c(&self.chi0, &self.omega, self.c)
    }

    pub fn chi(&self, phi: &ScalarField) -> HermitianFormField {
        self.chi0.realized.add(&hessian_unchecked(phi))
    }

    pub fn rhs(&self, phi: &ScalarField) -> Result<ScalarField> {
        Ok(self.evaluate(phi)?.phi_dot)
    }

    pub fn evaluate(&self, phi: &ScalarField) -> Result<Evaluation> {
        phi.ensure_finite()?;
        self.grid().ensure_same(phi.grid())?;
        let chi = self.chi(phi);
        let mut margin = f64::INFINITY;
        let mut values = Vec::with_capacity(chi.len());
        for i in 0..chi.len() {
            let x = chi.at(i);
            let lo = x.eigenvalues().0;
            let watched = self.monitored.as_ref().map_or(true, |m| m[i]);
            if watched {
                margin = margin.min(lo);
            }
            if !(lo > 0.0) {
                return Err(not_positive(&chi, i));
            }
            values.push(self.c - x.wedge(&self.omega.realized.at(i)) / x.det());
        }
        Ok(Evaluation { phi_dot: ScalarField::new(*phi.grid(), values)?, chi, margin })
    }

    /// `max` over the grid of the top eigenvalue of `χ⁻¹ ω_ε χ⁻¹`.
    pub fn lambda_max(&self, chi: &HermitianFormField) -> f64 {
        (0..chi.len())
            .map(|i| chi.at(i).inverse().sandwich(&self.omega.realized.at(i)).eigenvalues().1)
            .fold(0.0, f64::max)
    }

    /// `dt = dt_safety / (λ_max · (πN)²)`.
    pub fn adaptive_dt(&self, cfg: &FlowConfig, chi: &HermitianFormField) -> f64 {
        if let Some(dt) = cfg.fixed_dt {
            return dt;
        }
        let k = self.grid().k_max();
        cfg.dt_safety / (self.lambda_max(chi).max(1e-300) * k * k)
    }
}

/// `c_ε − tr_{χ_φ} ω_ε`.
pub fn flow_rhs(phi: &ScalarField, chi0: &ClosedForm, omega: &ClosedForm, c: f64) -> Result<ScalarField> {
    phi.ensure_finite()?;
    chi0.grid().ensure_same(phi.grid())?;
    let chi = chi0.realized.add(&hessian_unchecked(phi));
    let tr = crate::calculus::trace_with(&chi, &omega.realized)?;
    Ok(tr.map(|v| c - v))
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub phi: ScalarField,
    pub t: f64,
    pub eval: Evaluation,
}

impl FlowState {
    pub fn new(problem: &FlowProblem, phi: ScalarField) -> Result<Self> {
        let eval = problem.evaluate(&phi)?;
        if eval.margin <= 0.0 {
            return Err(Error::NotPositive {
                at: phi.grid().point(crate::calculus::positivity_scan(&eval.chi).1),
                margin: eval.margin,
            });
        }
        Ok(Self { phi, t: 0.0, eval })
    }

    pub fn phi_dot(&self) -> &ScalarField {
        &self.eval.phi_dot
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub rejections: usize,
}

fn rk4(problem: &FlowProblem, s: &FlowState, dt: f64) -> Result<(ScalarField, Evaluation)> {
    let k1 = &s.eval.phi_dot;
    let k2 = problem.rhs(&s.phi.axpy(0.5 * dt, k1))?;
    let k3 = problem.rhs(&s.phi.axpy(0.5 * dt, &k2))?;
    let k4 = problem.rhs(&s.phi.axpy(dt, &k3))?;
    let values = (0..k1.values().len())
        .map(|i| {
            let incr = k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i];
            s.phi.values()[i] + dt / 6.0 * incr
        })
        .collect();
    let phi = ScalarField::new(*s.phi.grid(), values)?;
    let eval = problem.evaluate(&phi)?;
    Ok((phi, eval))
}

/// One RK4 step. A step that loses positivity off the locus is retried with
/// half the step, at most 20 times.
pub fn step(problem: &FlowProblem, state: &FlowState, dt: f64) -> Result<(FlowState, StepInfo)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let mut dt = dt;
    for rejections in 0..=MAX_REJECTIONS {
        match rk4(problem, state, dt) {
            Ok((phi, eval)) if eval.margin > 0.0 => {
                let next = FlowState { phi, t: state.t + dt, eval };
                return Ok((next, StepInfo { dt, rejections }));
            }
            Ok(_) | Err(Error::NotPositive { .. }) => dt *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Stiffness { t: state.t, dt: dt * 2.0, rejections: MAX_REJECTIONS + 1 })
}

/// One history row, written at every snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub sup_phi: f64,
    /// `sup |φ − mean φ|`.
    pub sup_phi_centered: f64,
    pub sup_phidot: f64,
    pub max_phidot: f64,
    pub min_phidot: f64,
    pub j: f64,
    pub i: f64,
    pub margin: f64,
    pub residual: f64,
    /// `sup tr_{χ_φ} ω_ε` and where it is attained.
    pub max_trace: f64,
    pub max_trace_at: usize,
    /// `−∫ φ̇² χ_φ²`, the instantaneous `dJ/dt`.
    pub dissipation: f64,
}

impl HistoryRow {
    fn record(problem: &FlowProblem, s: &FlowState) -> Self {
        let pd = &s.eval.phi_dot;
        let f = problem.functionals();
        let (mut max_trace, mut max_trace_at) = (f64::NEG_INFINITY, 0);
        for (i, v) in pd.values().iter().enumerate() {
            let tr = problem.c - v;
            if tr > max_trace {
                max_trace = tr;
                max_trace_at = i;
            }
        }
        Self {
            t: s.t,
            sup_phi: s.phi.sup_abs(),
            sup_phi_centered: s.phi.mean_normalized().sup_abs(),
            sup_phidot: pd.sup_abs(),
            max_phidot: pd.max(),
            min_phidot: pd.min(),
            j: f.j_closed_with(&s.phi, &s.eval.chi),
            i: f.i_with(&s.phi, &s.eval.chi),
            margin: s.eval.margin,
            residual: critical_residual_with(&s.eval.chi, &problem.omega.realized, problem.c),
            max_trace,
            max_trace_at,
            dissipation: f.dissipation_with(pd, &s.eval.chi),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub eps: f64,
    pub c: f64,
    pub initial: ScalarField,
    pub final_state: FlowState,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
    pub steps: usize,
    pub rejections: usize,
}

impl Trajectory {
    pub fn limit(&self) -> &ScalarField {
        &self.final_state.phi
    }

    pub fn sup_phidot0(&self) -> f64 {
        self.history[0].sup_phidot
    }

    /// `t, sup_phi, sup_phidot, J, I, margin, residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup_phi,sup_phidot,J,I,margin,residual\n");
        for r in &self.history {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.t, r.sup_phi, r.sup_phidot, r.j, r.i, r.margin, r.residual
            ));
        }
        out
    }
}

/// Integrate from `φ₀` until `sup |φ̇| < stop_tolerance` or `t > max_time`.
pub fn evolve(problem: &FlowProblem, cfg: &FlowConfig, phi0: &ScalarField) -> Result<Trajectory> {
    evolve_observed(problem, cfg, phi0, |_, _| Ok(()))
}

/// [`evolve`] with a callback at every snapshot.
pub fn evolve_observed(
    problem: &FlowProblem,
    cfg: &FlowConfig,
    phi0: &ScalarField,
    mut observe: impl FnMut(&FlowState, &HistoryRow) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = FlowState::new(problem, phi0.clone())?;
    let first = HistoryRow::record(problem, &state);
    observe(&state, &first)?;
    let mut history = vec![first];
    let (mut steps, mut rejections) = (0usize, 0usize);
    let mut converged = state.eval.phi_dot.sup_abs() < cfg.stop_tolerance;
    while !converged && state.t <= cfg.max_time {
        let dt = problem.adaptive_dt(cfg, &state.eval.chi);
        let (next, info) = step(problem, &state, dt)?;
        state = next;
        steps += 1;
        rejections += info.rejections;
        converged = state.eval.phi_dot.sup_abs() < cfg.stop_tolerance;
        if converged || steps % cfg.snapshot_stride == 0 || state.t > cfg.max_time {
            let row = HistoryRow::record(problem, &state);
            observe(&state, &row)?;
            history.push(row);
        }
    }
    Ok(Trajectory {
        eps: problem.eps,
        c: problem.c,
        initial: phi0.clone(),
        final_state: state,
        history,
        converged,
        steps,
        rejections,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberReport {
    pub eps: f64,
    pub c: f64,
    pub converged: bool,
    pub final_time: f64,
    pub steps: usize,
    /// `max_t sup |φ_ε(t)|`.
    pub sup_phi: f64,
    /// `max_t sup |φ_ε − mean φ_ε|`.
    #[serde(default)]
    pub sup_phi_centered: f64,
    pub sup_phidot0: f64,
    pub sup_phidot: f64,
    pub final_residual: f64,
    /// `(t, q_max)` at every snapshot when the Q-monitor is active.
    #[serde(default)]
    pub q_max_series: Vec<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub members: Vec<MemberReport>,
    pub max_sup_phi: f64,
    pub max_sup_phidot: f64,
    /// `sup |φ_{ε_k} − φ_{ε_{k+1}}|` of mean-normalized limits.
    pub consecutive_diff: Vec<f64>,
    pub consecutive_diff_off_divisor: Vec<f64>,
    pub off_divisor_threshold: f64,
    #[serde(skip)]
    pub trajectories: Vec<Option<Trajectory>>,
}

impl FamilyReport {
    pub fn all_converged(&self) -> bool {
        self.members.iter().all(|m| m.converged && m.error.is_none())
    }
}

fn masked_sup_diff(a: &ScalarField, b: &ScalarField, mask: Option<&[bool]>) -> f64 {
    let (a, b) = (a.mean_normalized(), b.mean_normalized());
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .filter(|(i, _)| mask.map_or(true, |m| m[*i]))
        .map(|(_, (x, y))| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Independent runs for each `ε` (descending, positive), in parallel.
pub fn epsilon_family(
    template: &FlowConfig,
    eps: &[f64],
    chi0: &ClosedForm,
    omega0: &ClosedForm,
    omega_hat: &ClosedForm,
    divisor: Option<&DivisorModel>,
    phi0: &ScalarField,
) -> Result<FamilyReport> {
    epsilon_family_with(template, eps, chi0, omega0, omega_hat, divisor, phi0, None)
}

/// [`epsilon_family`] recording `q_max` at every snapshot of every run. The
/// shift `C₀` is calibrated on `φ₀` with unit slack.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_family_with(
    template: &FlowConfig,
    eps: &[f64],
    chi0: &ClosedForm,
    omega0: &ClosedForm,
    omega_hat: &ClosedForm,
    divisor: Option<&DivisorModel>,
    phi0: &ScalarField,
    q_monitor: Option<QMonitorConfig>,
) -> Result<FamilyReport> {
    let q_cfg = match (q_monitor, divisor) {
        (Some(q), Some(d)) => {
            q.validate(d.beta)?;
            Some(q.calibrated(phi0, d, 1.0)?)
        }
        (Some(_), None) => return Err(Error::Config("Q-monitor needs a divisor model".into())),
        (None, _) => None,
    };
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("ε list must be positive and strictly descending, got {eps:?}")));
    }
    let runs: Vec<(f64, Result<(Trajectory, Vec<(f64, f64)>)>)> = eps
        .par_iter()
        .map(|&e| {
            let cfg = FlowConfig { eps: e, ..*template };
            let mut q_series = Vec::new();
            let run = FlowProblem::new(&cfg, chi0, omega0, omega_hat, divisor).and_then(|p| {
                evolve_observed(&p, &cfg, phi0, |s, _| {
                    if let (Some(q), Some(d)) = (&q_cfg, divisor) {
                        q_series.push((s.t, q_monitor_fn(&s.phi, &s.eval.chi, d, q)?.q_max));
                    }
                    Ok(())
                })
            });
            (e, run.map(|t| (t, q_series)))
        })
        .collect();
    let mut members = Vec::new();
    let mut trajectories = Vec::new();
    for (e, run) in runs {
        match run {
            Ok((tr, q_max_series)) => {
                let last = tr.history.last().expect("history is never empty");
                members.push(MemberReport {
                    eps: e,
                    c: tr.c,
                    converged: tr.converged,
                    final_time: tr.final_state.t,
                    steps: tr.steps,
                    sup_phi: tr.history.iter().map(|r| r.sup_phi).fold(0.0, f64::max),
                    sup_phi_centered: tr.history.iter().map(|r| r.sup_phi_centered).fold(0.0, f64::max),
                    sup_phidot0: tr.sup_phidot0(),
                    sup_phidot: tr.history.iter().map(|r| r.sup_phidot).fold(0.0, f64::max),
                    final_residual: last.residual,
                    q_max_series,
                    error: None,
                });
                trajectories.push(Some(tr));
            }
            Err(err) => {
                members.push(MemberReport {
                    eps: e,
                    c: f64::NAN,
                    converged: false,
                    final_time: f64::NAN,
                    steps: 0,
                    sup_phi: f64::NAN,
                    sup_phi_centered: f64::NAN,
                    sup_phidot0: f64::NAN,
                    sup_phidot: f64::NAN,
                    final_residual: f64::NAN,
                    q_max_series: Vec::new(),
                    error: Some(err.to_string()),
                });
                trajectories.push(None);
            }
        }
    }
    let mask: Option<Vec<bool>> = divisor.map(|d| d.off_divisor_region(OFF_DIVISOR_THRESHOLD));
    let mut consecutive_diff = Vec::new();
    let mut consecutive_diff_off_divisor = Vec::new();
    for w in trajectories.windows(2) {
        let (d, d_off) = match (&w[0], &w[1]) {
            (Some(a), Some(b)) => (
                masked_sup_diff(a.limit(), b.limit(), None),
                masked_sup_diff(a.limit(), b.limit(), mask.as_deref()),
            ),
            _ => (f64::NAN, f64::NAN),
        };
        consecutive_diff.push(d);
        consecutive_diff_off_divisor.push(d_off);
    }
    let ok = members.iter().filter(|m| m.error.is_none());
    let max_sup_phi = ok.clone().map(|m| m.sup_phi).fold(0.0, f64::max);
    let max_sup_phidot = ok.map(|m| m.sup_phidot).fold(0.0, f64::max);
    Ok(FamilyReport {
        members,
        max_sup_phi,
        max_sup_phidot,
        consecutive_diff,
        consecutive_diff_off_divisor,
        off_divisor_threshold: OFF_DIVISOR_THRESHOLD,
        trajectories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorCheck {
    SupPhidotIncreased,
    InfPhidotDecreased,
    TraceBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorFailure {
    pub check: MonitorCheck,
    pub t: f64,
    pub location: Option<crate::error::GridPoint>,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub snapshots: usize,
    /// `c_ε + sup |φ̇(0)|`.
    pub trace_bound: f64,
    pub max_trace: f64,
    pub failures: Vec<MonitorFailure>,
}

impl MonitorVerdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const MONITOR_TOLERANCE: f64 = 1e-8;

/// `sup φ̇` nonincreasing, `inf φ̇` nondecreasing and
/// `tr_{χ_φ} ω_ε ≤ c_ε + sup|φ̇(0)|` at every snapshot.
pub fn max_principle_monitor(traj: &Trajectory) -> Result<MonitorVerdict> {
    let h = &traj.history;
    if h.len() < 3 {
        return Err(Error::Diagnostic(format!(
            "monitor needs at least 3 snapshots, trajectory has {}",
            h.len()
        )));
    }
    let grid = traj.initial.grid();
    let tol = MONITOR_TOLERANCE;
    let mut failures = Vec::new();
    for w in h.windows(2) {
        if w[1].max_phidot > w[0].max_phidot + tol {
            failures.push(MonitorFailure {
                check: MonitorCheck::SupPhidotIncreased,
                t: w[1].t,
                location: None,
                excess: w[1].max_phidot - w[0].max_phidot,
            });
        }
        if w[1].min_phidot < w[0].min_phidot - tol {
            failures.push(MonitorFailure {
                check: MonitorCheck::InfPhidotDecreased,
                t: w[1].t,
                location: None,
                excess: w[0].min_phidot - w[1].min_phidot,
            });
        }
    }
    let bound = traj.c + h[0].sup_phidot;
    for r in h {
        if r.max_trace > bound + tol {
            failures.push(MonitorFailure {
                check: MonitorCheck::TraceBound,
                t: r.t,
                location: Some(grid.point(r.max_trace_at)),
                excess: r.max_trace - bound,
            });
        }
    }
    Ok(MonitorVerdict {
        snapshots: h.len(),
        trace_bound: bound,
        max_trace: h.iter().map(|r| r.max_trace).fold(f64::NEG_INFINITY, f64::max),
        failures,
    })
}
