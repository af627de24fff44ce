//! A priori estimate monitors: uniform-in-ε bounds, the trace bound, the
//! singular-profile exponent fit, the Q-barrier and comparison up to constants.

use serde::{Deserialize, Serialize};

use crate::calculus::{HermitianFormField, ScalarField};
use crate::cohomology::DivisorModel;
use crate::error::{Error, GridPoint, Result};
use crate::flow::{Evaluation, FamilyReport, MONITOR_TOLERANCE};

/// Bounds a family must respect uniformly in ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityBudget {
    pub sup_phi: f64,
    pub sup_phidot: f64,
    /// Largest allowed ratio between successive sups as ε decreases,
    /// applied to `sup |φ − mean φ|` and `sup |φ̇|`.
    pub max_growth: f64,
}

impl UniformityBudget {
    pub fn new(sup_phi: f64, sup_phidot: f64) -> Self {
        Self { sup_phi, sup_phidot, max_growth: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub sup_phi_by_eps: Vec<(f64, f64)>,
    pub sup_phidot_by_eps: Vec<(f64, f64)>,
    pub sup_phidot0_by_eps: Vec<(f64, f64)>,
    pub trace_bound_ok: bool,
    pub gamma_fit: Option<f64>,
    pub q_max_series: Vec<(f64, f64)>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the family against `budget` and for non-divergence as ε decreases.
pub fn uniformity_report(family: &FamilyReport, budget: &UniformityBudget) -> EstimateReport {
    let mut failures = Vec::new();
    let mut members: Vec<_> = family.members.iter().collect();
    members.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    for m in &members {
        if let Some(e) = &m.error {
            failures.push(format!("ε = {}: run failed: {e}", m.eps));
        }
    }
    let ok: Vec<_> = members.iter().filter(|m| m.error.is_none()).collect();
    let sup_phi_by_eps: Vec<_> = ok.iter().map(|m| (m.eps, m.sup_phi)).collect();
    let sup_phidot_by_eps: Vec<_> = ok.iter().map(|m| (m.eps, m.sup_phidot)).collect();
    for (name, series, limit) in [
        ("sup|φ|", &sup_phi_by_eps, budget.sup_phi),
        ("sup|φ̇|", &sup_phidot_by_eps, budget.sup_phidot),
    ] {
        for &(e, v) in series.iter() {
            if !(v <= limit) {
                failures.push(format!("ε = {e}: {name} = {v} exceeds budget {limit}"));
            }
        }
    }
    // The trend ignores the additive constant the flow picks up.
    let centered: Vec<_> = ok.iter().map(|m| (m.eps, m.sup_phi_centered)).collect();
    for (name, series) in [("sup|φ − mean φ|", &centered), ("sup|φ̇|", &sup_phidot_by_eps)] {
        for w in series.windows(2) {
            if w[0].1 > 0.0 && w[1].1 / w[0].1 > budget.max_growth {
                failures.push(format!(
                    "ε = {}: {name} grew by factor {} from ε = {}",
                    w[1].0,
                    w[1].1 / w[0].1,
                    w[0].0
                ));
            }
        }
    }
    let trace_bound_ok = family.trajectories.iter().flatten().all(|t| {
        let bound = t.c + t.sup_phidot0();
        t.history.iter().all(|r| r.max_trace <= bound + MONITOR_TOLERANCE)
    });
    if !trace_bound_ok {
        failures.push("trace bound violated on some snapshot".into());
    }
    let q_max_series = family.members.iter().flat_map(|m| m.q_max_series.iter().copied()).collect();
    EstimateReport {
        sup_phi_by_eps,
        sup_phidot_by_eps,
        sup_phidot0_by_eps: ok.iter().map(|m| (m.eps, m.sup_phidot0)).collect(),
        trace_bound_ok,
        gamma_fit: None,
        q_max_series,
        failures,
        notes: vec!["divisor-distance quantities use the s2 proxy, so fitted constants are proxy-relative".into()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub max_trace: f64,
    pub bound: f64,
    pub at: GridPoint,
}

impl TraceVerdict {
    pub fn holds(&self) -> bool {
        self.max_trace <= self.bound + MONITOR_TOLERANCE
    }
}

/// `sup tr_{χ_φ} ω_ε ≤ c_ε + sup|φ̇(0)|`, read off the flow identity
/// `tr_{χ_φ} ω_ε = c_ε − φ̇`.
pub fn trace_bound_check(eval: &Evaluation, c: f64, sup_phidot0: f64) -> Result<TraceVerdict> {
    let (mut max_trace, mut at) = (f64::NEG_INFINITY, 0);
    for (i, v) in eval.phi_dot.values().iter().enumerate() {
        if c - v > max_trace {
            max_trace = c - v;
            at = i;
        }
    }
    let verdict = TraceVerdict { max_trace, bound: c + sup_phidot0, at: eval.phi_dot.grid().point(at) };
    if verdict.holds() {
        Ok(verdict)
    } else {
        Err(Error::Diagnostic(format!(
            "trace bound fails at {}: {} > {}",
            verdict.at, verdict.max_trace, verdict.bound
        )))
    }
}

/// Band of `s2_proxy` used by the exponent fit.
pub const FIT_BAND: (f64, f64) = (1e-3, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    /// `max(slope, 0)`.
    pub gamma: f64,
    pub slope: f64,
    /// Fitted prefactor in `u ≈ C s2^{−γ}`.
    pub c: f64,
    pub points: usize,
}

/// Least-squares slope of `log u` against `−log s2` over points with `s2` in `band`.
pub fn fit_power_law(u: &ScalarField, s2: &ScalarField, band: (f64, f64)) -> Result<ProfileFit> {
    u.grid().ensure_same(s2.grid())?;
    let pts: Vec<(f64, f64)> = s2
        .values()
        .iter()
        .zip(u.values())
        .filter(|(s, v)| **s >= band.0 && **s <= band.1 && **v > 0.0)
        .map(|(s, v)| (-s.ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 3 || !(sxx > 1e-12) {
        return Err(Error::Diagnostic(format!(
            "{} points with spread {sxx:e} in the fit band [{}, {}]",
            pts.len(),
            band.0,
            band.1
        )));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(ProfileFit { gamma: slope.max(0.0), slope, c: (my - slope * mx).exp(), points: pts.len() })
}

/// Exponent fit of `u = tr_Id χ` against the divisor proxy.
pub fn singular_profile_fit(chi: &HermitianFormField, div: &DivisorModel) -> Result<ProfileFit> {
    let u = ScalarField::new(*chi.grid(), (0..chi.len()).map(|i| chi.at(i).trace()).collect())?;
    fit_power_law(&u, &div.s2_proxy, FIT_BAND)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QMonitorConfig {
    pub a: f64,
    pub delta: f64,
    pub c0_shift: f64,
}

impl Default for QMonitorConfig {
    fn default() -> Self {
        Self { a: 10.0, delta: 0.1, c0_shift: 1.0 }
    }
}

impl QMonitorConfig {
    /// `A > 1`, `δ > 0` and `A δ ≥ 2β`.
    pub fn validate(&self, beta: f64) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.a > 1.0) {
            bad.push(format!("A must exceed 1, got {}", self.a));
        }
        if !(self.delta > 0.0) {
            bad.push(format!("δ must be positive, got {}", self.delta));
        }
        if !(self.a * self.delta >= 2.0 * beta) {
            bad.push(format!("A·δ = {} is below 2β = {}", self.a * self.delta, 2.0 * beta));
        }
        if !self.c0_shift.is_finite() {
            bad.push("C₀ shift must be finite".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// Picks `C₀_shift` so that `φ̃ + C₀_shift ≥ 1 + slack` at `φ`.
    pub fn calibrated(self, phi: &ScalarField, div: &DivisorModel, slack: f64) -> Result<Self> {
        let tilde = phi_tilde(phi, div, self.delta)?;
        let min = tilde.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { c0_shift: 1.0 + slack - min, ..self })
    }
}

/// Largest fraction of the grid the locus mask may cover.
pub const MAX_MASK_FRACTION: f64 = 0.01;

const LOCUS: f64 = 1e-12;

/// `φ − δ log s2`, `None` on the masked locus.
fn phi_tilde(phi: &ScalarField, div: &DivisorModel, delta: f64) -> Result<Vec<Option<f64>>> {
    phi.grid().ensure_same(div.s2_proxy.grid())?;
    let out: Vec<_> = phi
        .values()
        .iter()
        .zip(div.s2_proxy.values())
        .map(|(p, s)| (*s >= LOCUS).then(|| p - delta * s.ln()))
        .collect();
    let masked = out.iter().filter(|v| v.is_none()).count();
    if masked as f64 > MAX_MASK_FRACTION * out.len() as f64 {
        return Err(Error::Config(format!(
            "divisor mask covers {masked} of {} grid points; refine the grid",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSample {
    pub q_max: f64,
    pub at: usize,
}

/// `sup` off the locus of `Q = log u − A φ̃ + 1/(φ̃ + C₀_shift)`, `u = tr_Id χ_φ`.
pub fn q_monitor(
    phi: &ScalarField,
    chi: &HermitianFormField,
    div: &DivisorModel,
    cfg: &QMonitorConfig,
) -> Result<QSample> {
    cfg.validate(div.beta)?;
    let tilde = phi_tilde(phi, div, cfg.delta)?;
    let mut best = QSample { q_max: f64::NEG_INFINITY, at: 0 };
    for (i, t) in tilde.iter().enumerate() {
        let Some(t) = *t else { continue };
        let shifted = t + cfg.c0_shift;
        if shifted < 1.0 - 1e-12 {
            return Err(Error::Diagnostic(format!(
                "φ̃ + C₀ = {shifted} < 1 at {}; recalibrate the shift",
                phi.grid().point(i)
            )));
        }
        let u = chi.at(i).trace();
        let q = u.ln() - cfg.a * t + 1.0 / shifted;
        if q > best.q_max {
            best = QSample { q_max: q, at: i };
        }
    }
    Ok(best)
}

/// `q_max(t) ≤ q_max(0) + 1` along a series.
pub fn q_bounded(series: &[(f64, f64)]) -> bool {
    match series.first() {
        Some(&(_, q0)) => series.iter().all(|&(_, q)| q <= q0 + 1.0),
        None => true,
    }
}

/// `sup_mask |a − b − mean_mask(a − b)|`.
pub fn compare_up_to_constant(a: &ScalarField, b: &ScalarField, mask: Option<&[bool]>) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    let diffs: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .enumerate()
        .filter(|(i, _)| mask.map_or(true, |m| m[*i]))
        .map(|(_, (x, y))| x - y)
        .collect();
    if diffs.is_empty() {
        return Err(Error::Diagnostic("comparison mask is empty".into()));
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok(diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Grid, Hermitian2};
    use crate::flow::{FlowConfig, FlowProblem, FlowState};
    use crate::presets::Preset;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn s2(x: [f64; 4]) -> f64 {
        (PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2)
    }

    fn divisor(g: Grid) -> DivisorModel {
        Preset::DegenerateSplit.build(g).unwrap().divisor.unwrap()
    }

    #[test]
    fn synthetic_power_law_recovered() {
        let g = Grid::split(64).unwrap();
        let div = divisor(g);
        for gamma in [0.0, 0.3, 0.7] {
            let u = ScalarField::from_fn(g, |x| 2.5 * s2(x).powf(-gamma));
            let fit = fit_power_law(&u, &div.s2_proxy, FIT_BAND).unwrap();
            assert!((fit.gamma - gamma).abs() < 0.02, "{gamma} {fit:?}");
            assert!((fit.c - 2.5).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_critical_profile_is_bounded() {
        let g = Grid::split(32).unwrap();
        let div = divisor(g);
        let chi = HermitianFormField::from_fn(g, |x| Hermitian2::diag(s2(x), 1.0));
        let fit = singular_profile_fit(&chi, &div).unwrap();
        // u = f + 1 is bounded: the fitted slope is negative and clamps to 0.
        assert!(fit.gamma <= 0.05, "{fit:?}");
        let smooth = HermitianFormField::constant(g, Hermitian2::diag(1.0, 2.0));
        assert!(singular_profile_fit(&smooth, &div).unwrap().gamma.abs() < 1e-12);
    }

    #[test]
    fn fit_needs_points() {
        let g = Grid::split(4).unwrap();
        let div = divisor(g);
        let u = ScalarField::constant(g, 1.0);
        assert!(fit_power_law(&u, &div.s2_proxy, (1e-6, 1e-5)).is_err());
    }

    #[test]
    fn trace_bound_examples() {
        let g = Grid::split(16).unwrap();
        let s = Preset::Identity.build(g).unwrap();
        let cfg = FlowConfig::default();
        let p = FlowProblem::new(&cfg, &s.chi0, &s.omega0, &s.omega_hat, None).unwrap();
        let st = FlowState::new(&p, ScalarField::zeros(g)).unwrap();
        let v = trace_bound_check(&st.eval, p.c, 0.0).unwrap();
        assert!((v.max_trace - 2.0).abs() < 1e-14);

        let s = Preset::DegenerateSplit.build(g).unwrap();
        let cfg = FlowConfig { eps: 0.1, ..Default::default() };
        let p = FlowProblem::new(&cfg, &s.chi0, &s.omega0, &s.omega_hat, s.divisor.as_ref()).unwrap();
        let st = FlowState::new(&p, ScalarField::zeros(g)).unwrap();
        let sup0 = st.eval.phi_dot.sup_abs();
        assert!((sup0 - 1.0).abs() < 1e-12);
        let v = trace_bound_check(&st.eval, p.c, sup0).unwrap();
        assert!(v.max_trace <= 2.2 + 1.0 + 1e-12);
        assert!(trace_bound_check(&st.eval, p.c - 2.0, 0.0).is_err());
    }

    #[test]
    fn q_config_invariant() {
        assert!(QMonitorConfig::default().validate(0.0).is_ok());
        assert!(QMonitorConfig::default().validate(1.0).is_err());
        assert!(QMonitorConfig { a: 2.0, delta: 1.0, c0_shift: 1.0 }.validate(1.0).is_ok());
        assert!(QMonitorConfig { a: 0.5, delta: 5.0, c0_shift: 1.0 }.validate(0.0).is_err());
    }

    #[test]
    fn phi_tilde_grows_near_divisor() {
        let g = Grid::split(16).unwrap();
        let div = divisor(g);
        let t = phi_tilde(&ScalarField::zeros(g), &div, 0.1).unwrap();
        let mut vals: Vec<f64> = t.iter().flatten().copied().collect();
        vals.sort_by(f64::total_cmp);
        let median = vals[vals.len() / 2];
        let near = t
            .iter()
            .zip(div.s2_proxy.values())
            .filter(|(_, s)| **s > 1e-12 && **s < 0.05)
            .map(|(v, _)| v.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(near > median, "{near} vs {median}");
    }

    #[test]
    fn mask_too_large_is_rejected() {
        let g = Grid::split(8).unwrap();
        let div = divisor(g);
        let chi = HermitianFormField::constant(g, Hermitian2::IDENTITY);
        let cfg = QMonitorConfig { a: 2.0, delta: 1.0, c0_shift: 10.0 };
        assert!(matches!(q_monitor(&ScalarField::zeros(g), &chi, &div, &cfg), Err(Error::Config(_))));
        let g = Grid::split(16).unwrap();
        let div = divisor(g);
        let chi = HermitianFormField::constant(g, Hermitian2::IDENTITY);
        let cfg = cfg.calibrated(&ScalarField::zeros(g), &div, 0.5).unwrap();
        let q = q_monitor(&ScalarField::zeros(g), &chi, &div, &cfg).unwrap();
        assert!(q.q_max.is_finite());
    }

    #[test]
    fn compare_examples() {
        let g = Grid::split(8).unwrap();
        let a = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(compare_up_to_constant(&a, &a.shift(17.0), None).unwrap() < 1e-13);
        assert!(compare_up_to_constant(&a, &a, Some(&vec![false; g.len()])).is_err());
    }

    fn field(g: Grid, c: [f64; 3]) -> ScalarField {
        ScalarField::from_fn(g, move |x| {
            c[0] * (2.0 * PI * x[0]).cos() + c[1] * (2.0 * PI * x[1]).sin() + c[2] * (2.0 * PI * (x[0] + x[1])).cos()
        })
    }

    proptest! {
        #[test]
        fn compare_is_pseudometric(
            a in prop::array::uniform3(-1.0f64..1.0),
            b in prop::array::uniform3(-1.0f64..1.0),
            c in prop::array::uniform3(-1.0f64..1.0),
            k in -5.0f64..5.0,
        ) {
            let g = Grid::split(8).unwrap();
            let (fa, fb, fc) = (field(g, a), field(g, b), field(g, c));
            let d = |x: &ScalarField, y: &ScalarField| compare_up_to_constant(x, y, None).unwrap();
            prop_assert!((d(&fa, &fb) - d(&fb, &fa)).abs() < 1e-12);
            prop_assert!(d(&fa, &fc) <= d(&fa, &fb) + d(&fb, &fc) + 1e-12);
            prop_assert!(d(&fa, &fa.shift(k)) < 1e-12);
        }
    }
}
