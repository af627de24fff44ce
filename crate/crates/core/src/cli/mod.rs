//! Command-line driver: configuration, orchestration, persistence and reports.

mod config;
mod record;

pub use config::{
    parse_config, Backend, ConfigErrors, ConfigIssue, GridConfig, Overrides, RunConfig, ScenarioSource,
    SCHEMA_VERSION,
};
pub use record::{check_record, read_record, write_record, Command, RecordWarning, RunRecord, Verdict};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::calculus::ScalarField;
use crate::cohomology::{c_constant, cone_condition, epsilon_form, verify_omega0_conditions, Omega0Verdict};
use crate::diagnostics::{q_bounded, uniformity_report};
use crate::error::{Error, Result};
use crate::flow::{epsilon_family_with, evolve, max_principle_monitor, FlowProblem, Trajectory};
use crate::functionals::{functional_report, Functionals};
use crate::ma::{critical_residual, epsilon_continuation, solve_critical};
use crate::presets::{random_potential, Scenario};
use crate::snapshot::{write_atomic, Snapshot};

pub const RECORD_FILE: &str = "run.json";
pub const REPORT_FILE: &str = "report.json";
pub const SERIES_FILE: &str = "series.csv";

/// Relative drift of `I` used by the conservation verdict.
pub const I_DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Default)]
struct Outcome {
    rows: Vec<crate::flow::HistoryRow>,
    verdicts: Vec<Verdict>,
    artifacts: Vec<String>,
    report: Value,
}

impl Outcome {
    fn artifact(&mut self, out: &Path, rel: String, bytes: &[u8]) -> Result<()> {
        write_atomic(&out.join(&rel), bytes)?;
        self.artifacts.push(rel);
        Ok(())
    }

    fn field(&mut self, out: &Path, name: &str, f: &ScalarField) -> Result<()> {
        self.artifact(out, format!("fields/{name}.jflw"), &Snapshot::from_scalar(f).encode())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn eps_tag(e: f64) -> String {
    format!("{e}").replace('.', "p")
}

/// Runs `command` and records the outcome in `run.json` under the output
/// directory. Module errors end up in the record, not in the return value;
/// `report` only writes `report.json`.
pub fn execute(config: &RunConfig, command: Command) -> Result<RunRecord> {
    let started = now();
    let out = config.out.clone();
    std::fs::create_dir_all(&out)?;
    let result = match command {
        Command::CheckClasses => check_classes(config, &out),
        Command::Run => run(config, &out),
        Command::Family => family(config, &out),
        Command::SolveMa => solve_ma_cmd(config, &out),
        Command::Functionals => functionals(config, &out),
        Command::Report => report(config, &out),
    };
    let (mut o, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e.to_string())),
    };
    let mut record = RunRecord {
        schema_version: SCHEMA_VERSION,
        command,
        config_hash: config.hash(),
        config: config.clone(),
        started,
        finished: String::new(),
        rows: std::mem::take(&mut o.rows),
        verdicts: o.verdicts,
        artifacts: o.artifacts,
        error,
    };
    if command != Command::Report {
        let report = json!({
            "command": command.name(),
            "passed": record.passed(),
            "error": record.error,
            "verdicts": record.verdicts,
            "details": o.report,
        });
        write_atomic(&out.join(REPORT_FILE), &serde_json::to_vec_pretty(&report)?)?;
        record.artifacts.push(REPORT_FILE.to_string());
        record.finished = now();
        write_record(&out.join(RECORD_FILE), &record)?;
    } else {
        record.finished = now();
    }
    Ok(record)
}

fn check_classes(config: &RunConfig, _out: &Path) -> Result<Outcome> {
    let s = config.scenario()?;
    let mut o = Outcome::default();
    let eps = if config.eps.is_empty() { vec![config.flow.eps] } else { config.eps.clone() };
    let mut rows = Vec::new();
    for e in eps {
        let w = epsilon_form(&s.omega0, e, &s.omega_hat);
        let v = cone_condition(&s.chi0.cls, &w.cls)?;
        o.verdicts.push(Verdict::new(
            &format!("cone_condition(eps={e})"),
            v.holds(),
            format!("c = {}, margin = {}", v.c, v.margin),
        ));
        rows.push(json!({"eps": e, "c": v.c, "margin": v.margin}));
    }
    let mut details = json!({"classes": rows});
    if let Some(div) = &s.divisor {
        let v = verify_omega0_conditions(&s.omega0, div, &s.omega_hat);
        let ok = matches!(v, Omega0Verdict::Certificate { .. });
        o.verdicts.push(Verdict::new("omega0_conditions", ok, format!("{v:?}")));
        details["omega0"] = serde_json::to_value(&v)?;
    }
    o.report = details;
    Ok(o)
}

fn phi0(config: &RunConfig, s: &Scenario) -> Result<ScalarField> {
    config.init.sample(s.grid)
}

/// Verdicts shared by single runs and family members.
fn trajectory_verdicts(tag: &str, tr: &Trajectory, chi0_sq: f64) -> Vec<Verdict> {
    let mut v = vec![Verdict::new(
        &format!("converged{tag}"),
        tr.converged,
        format!("t = {}, sup|φ̇| = {:e}", tr.final_state.t, tr.final_state.eval.phi_dot.sup_abs()),
    )];
    let h = &tr.history;
    let j_ok = h.windows(2).all(|w| w[1].j <= w[0].j + 1e-12 * w[0].j.abs().max(1.0));
    v.push(Verdict::new(&format!("j_monotone{tag}"), j_ok, format!("J: {} -> {}", h[0].j, h[h.len() - 1].j)));
    let scale = h[0].i.abs().max(chi0_sq * h.iter().map(|r| r.sup_phi).fold(0.0, f64::max)).max(1e-300);
    let drift = h.iter().map(|r| (r.i - h[0].i).abs()).fold(0.0, f64::max) / scale;
    v.push(Verdict::new(&format!("i_conserved{tag}"), drift <= I_DRIFT_TOLERANCE, format!("relative drift {drift:e}")));
    match max_principle_monitor(tr) {
        Ok(m) => v.push(Verdict::new(
            &format!("max_principle{tag}"),
            m.passed(),
            format!("{} snapshots, max trace {} vs bound {}, {} failures", m.snapshots, m.max_trace, m.trace_bound, m.failures.len()),
        )),
        Err(e) => v.push(Verdict::new(&format!("max_principle{tag}"), true, format!("skipped: {e}"))),
    }
    v
}

fn summary(tr: &Trajectory) -> Value {
    let last = tr.history.last().expect("history is never empty");
    json!({
        "eps": tr.eps,
        "c": tr.c,
        "converged": tr.converged,
        "steps": tr.steps,
        "rejections": tr.rejections,
        "final": last,
    })
}

fn run(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = config.scenario()?;
    let cfg = config.flow_config();
    let problem = FlowProblem::new(&cfg, &s.chi0, &s.omega0, &s.omega_hat, s.divisor.as_ref())?;
    let p0 = phi0(config, &s)?;
    let tr = evolve(&problem, &cfg, &p0)?;
    let mut o = Outcome::default();
    o.artifact(out, SERIES_FILE.into(), tr.to_csv().as_bytes())?;
    o.field(out, "phi_initial", &tr.initial)?;
    o.field(out, "phi_final", tr.limit())?;
    o.field(out, "phi_dot_final", &tr.final_state.eval.phi_dot)?;
    o.artifact(out, "fields/chi_final.jflw".into(), &Snapshot::from_form(&tr.final_state.eval.chi).encode())?;
    let chi0_sq = crate::cohomology::class_pairing(&s.chi0.cls, &s.chi0.cls);
    o.verdicts = trajectory_verdicts("", &tr, chi0_sq);
    o.report = json!({ "trajectory": summary(&tr), "monitor": max_principle_monitor(&tr).ok() });
    o.rows = tr.history;
    Ok(o)
}

fn family(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = config.scenario()?;
    let p0 = phi0(config, &s)?;
    let q = s.divisor.as_ref().map(|_| config.q_monitor);
    let fam = epsilon_family_with(&config.flow, &config.eps, &s.chi0, &s.omega0, &s.omega_hat, s.divisor.as_ref(), &p0, q)?;
    let est = uniformity_report(&fam, &config.budget);
    let mut o = Outcome::default();
    let chi0_sq = crate::cohomology::class_pairing(&s.chi0.cls, &s.chi0.cls);
    o.verdicts.push(Verdict::new("all_converged", fam.all_converged(), format!("{} members", fam.members.len())));
    o.verdicts.push(Verdict::new("uniformity", est.passed(), est.failures.join("; ")));
    for (m, tr) in fam.members.iter().zip(&fam.trajectories) {
        let tag = format!("(eps={})", m.eps);
        if let Some(tr) = tr {
            o.verdicts.extend(trajectory_verdicts(&tag, tr, chi0_sq));
            o.artifact(out, format!("series_eps_{}.csv", eps_tag(m.eps)), tr.to_csv().as_bytes())?;
            o.field(out, &format!("phi_eps_{}", eps_tag(m.eps)), tr.limit())?;
        }
        if !m.q_max_series.is_empty() {
            o.verdicts.push(Verdict::new(
                &format!("q_bounded{tag}"),
                q_bounded(&m.q_max_series),
                format!("q_max(0) = {}", m.q_max_series[0].1),
            ));
        }
    }
    if let Some(tr) = fam.trajectories.iter().rev().flatten().next() {
        o.artifact(out, SERIES_FILE.into(), tr.to_csv().as_bytes())?;
        o.rows = tr.history.clone();
    }
    o.report = json!({ "family": fam, "estimates": est });
    Ok(o)
}

fn solve_ma_cmd(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = config.scenario()?;
    let eps = if config.eps.is_empty() { vec![config.flow.eps] } else { config.eps.clone() };
    let stages = if eps.len() == 1 {
        let w = epsilon_form(&s.omega0, eps[0], &s.omega_hat);
        let (c, solution) = solve_critical(&s.chi0, &w, &config.ma, None)?;
        vec![crate::ma::ContinuationStage { eps: eps[0], c, solution }]
    } else {
        epsilon_continuation(&s.chi0, &s.omega0, &s.omega_hat, &eps, &config.ma)?
    };
    let mut o = Outcome::default();
    let mut csv = String::from("eps,iteration,residual,krylov_iterations\n");
    let mut rows = Vec::new();
    for st in &stages {
        let sol = &st.solution;
        for (k, r) in sol.residuals.iter().enumerate() {
            let kry = if k == 0 { 0 } else { sol.krylov_iterations[k - 1] };
            csv.push_str(&format!("{},{k},{r:e},{kry}\n", st.eps));
        }
        let w = epsilon_form(&s.omega0, st.eps, &s.omega_hat);
        let crit = critical_residual(&sol.psi, &s.chi0, &w, st.c)?;
        let tag = format!("(eps={})", st.eps);
        o.verdicts.push(Verdict::new(
            &format!("newton{tag}"),
            sol.residual() <= config.ma.newton_tol,
            format!("{} iterations, residual {:e}", sol.newton_iterations(), sol.residual()),
        ));
        o.verdicts.push(Verdict::new(
            &format!("critical_equation{tag}"),
            crit <= 1e-8,
            format!("critical residual {crit:e}"),
        ));
        o.field(out, &format!("psi_eps_{}", eps_tag(st.eps)), &sol.sup_gauge())?;
        rows.push(json!({"eps": st.eps, "c": st.c, "residuals": sol.residuals, "krylov": sol.krylov_iterations, "critical_residual": crit}));
    }
    o.artifact(out, "ma_residuals.csv".into(), csv.as_bytes())?;
    o.report = json!({ "stages": rows });
    Ok(o)
}

fn functionals(config: &RunConfig, _out: &Path) -> Result<Outcome> {
    let s = config.scenario()?;
    let phi = match &config.snapshot {
        Some(p) => {
            let f = Snapshot::read(p)?.into_scalar()?;
            s.grid.ensure_same(f.grid())?;
            f
        }
        None => phi0(config, &s)?,
    };
    let w = epsilon_form(&s.omega0, config.run_eps(), &s.omega_hat);
    let c = c_constant(&s.chi0.cls, &w.cls)?;
    let rep = functional_report(&phi, &s.chi0, &w, c, 32)?;
    let fun = Functionals::with_c(&s.chi0, &w, c);
    let j_closed = fun.j_closed(&phi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v = random_potential(&mut rng, s.grid.is_split(), 3, 0.01, 2).sample(s.grid)?;
    let gc = fun.j_gradient_check(&phi, &v, 1e-4)?;
    let mut o = Outcome::default();
    let finite = [rep.j, rep.i, rep.e].iter().all(|x| x.is_finite());
    o.verdicts.push(Verdict::new("finite", finite, format!("J = {}, I = {}, E = {}", rep.j, rep.i, rep.e)));
    let jd = (rep.j - j_closed).abs();
    o.verdicts.push(Verdict::new("j_path_vs_closed", jd <= 1e-8, format!("|ΔJ| = {jd:e}")));
    o.verdicts.push(Verdict::new(
        "gradient_check",
        gc.relative_error <= 1e-6 || (gc.analytic.abs() < 1e-12 && gc.finite_difference.abs() < 1e-10),
        format!("relative error {:e}", gc.relative_error),
    ));
    o.report = json!({ "functionals": rep, "j_closed": j_closed, "gradient_check": gc });
    Ok(o)
}

fn report(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let path = out.join(RECORD_FILE);
    let rec = read_record(&path)?;
    let warnings = check_record(&rec, out, Some(config));
    let mut o = Outcome::default();
    o.verdicts.push(Verdict::new(
        "record_passed",
        rec.passed(),
        format!("{} recorded verdicts, error: {:?}", rec.verdicts.len(), rec.error),
    ));
    o.verdicts.push(Verdict::new(
        "integrity",
        warnings.is_empty(),
        warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("; "),
    ));
    let rendered = json!({
        "command": rec.command.name(),
        "config_hash": rec.config_hash,
        "started": rec.started,
        "finished": rec.finished,
        "passed": rec.passed(),
        "verdicts": rec.verdicts,
        "warnings": warnings,
        "snapshots": rec.rows.len(),
    });
    write_atomic(&out.join(REPORT_FILE), &serde_json::to_vec_pretty(&rendered)?)?;
    o.rows = rec.rows;
    o.report = rendered;
    Ok(o)
}

/// Parse a comma-separated ε list.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad ε entry '{}': {e}", t.trim())))
        })
        .collect()
}

/// Loads `--config` if given, else preset defaults, then applies overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => parse_config(&std::fs::read_to_string(p)?)?,
        None => {
            let preset = overrides
                .preset
                .ok_or_else(|| Error::Config("give --config or --preset".into()))?;
            RunConfig::for_preset(preset)
        }
    };
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    fn cfg(preset: Preset, dir: &Path) -> RunConfig {
        let mut c = RunConfig::for_preset(preset);
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn check_classes_identity() {
        let dir = tempfile::tempdir().unwrap();
        let rec = execute(&cfg(Preset::Identity, dir.path()), Command::CheckClasses).unwrap();
        assert!(rec.passed(), "{rec:?}");
        assert!(rec.verdicts[0].detail.contains("c = 2, margin = 1"), "{:?}", rec.verdicts);
        assert!(dir.path().join(RECORD_FILE).is_file());
    }

    #[test]
    fn cone_failure_exits_nonzero() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
            N = 8
            [scenario.chi0]
            class = [1.0, 1.0, 0.0, 0.0]
            [scenario.omega0]
            class = [1.0, 0.0, 0.0, 0.0]
            [scenario.omega_hat]
            class = [1.0, 1.0, 0.0, 0.0]
            [flow]
            degenerate_mode = true
        "#;
        let mut c = parse_config(text).unwrap();
        c.out = dir.path().to_path_buf();
        let rec = execute(&c, Command::Run).unwrap();
        assert!(!rec.passed());
        assert!(rec.error.as_deref().unwrap().contains("cone condition"), "{:?}", rec.error);
        let rec = execute(&c, Command::CheckClasses).unwrap();
        assert!(!rec.passed());
    }

    #[test]
    fn run_writes_artifacts_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Preset::SmoothSplit, dir.path());
        c.grid.n = 8;
        c.flow.dt_safety = 0.8;
        let rec = execute(&c, Command::Run).unwrap();
        assert!(rec.passed(), "{rec:?}");
        let csv = std::fs::read_to_string(dir.path().join(SERIES_FILE)).unwrap();
        assert!(csv.starts_with("t,sup_phi,sup_phidot,J,I,margin,residual\n"));
        let back = read_record(&dir.path().join(RECORD_FILE)).unwrap();
        assert_eq!(back, rec);
        assert!(check_record(&back, dir.path(), Some(&c)).is_empty());

        std::fs::remove_file(dir.path().join("fields/phi_final.jflw")).unwrap();
        let w = check_record(&back, dir.path(), None);
        assert_eq!(w, vec![RecordWarning::MissingArtifact("fields/phi_final.jflw".into())]);

        let mut edited = c.clone();
        edited.flow.dt_safety = 0.5;
        let w = check_record(&back, dir.path(), Some(&edited));
        assert!(w.iter().any(|w| matches!(w, RecordWarning::StaleConfig { .. })));

        let rep = execute(&edited, Command::Report).unwrap();
        assert!(!rep.passed());
        assert_eq!(read_record(&dir.path().join(RECORD_FILE)).unwrap(), back);
    }

    #[test]
    fn solve_ma_and_functionals() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Preset::DegenerateSplit, dir.path());
        c.grid.n = 16;
        let rec = execute(&c, Command::SolveMa).unwrap();
        assert!(rec.passed(), "{rec:?}");
        assert!(dir.path().join("fields/psi_eps_0p05.jflw").is_file());

        c.snapshot = Some(dir.path().join("fields/psi_eps_0p05.jflw"));
        c.eps = vec![0.05];
        let rec = execute(&c, Command::Functionals).unwrap();
        assert!(rec.passed(), "{rec:?}");
    }

    #[test]
    fn corrupt_record_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(RECORD_FILE), b"{ not json").unwrap();
        assert!(matches!(read_record(&dir.path().join(RECORD_FILE)), Err(Error::Format(_))));
        let rec = execute(&cfg(Preset::Identity, dir.path()), Command::Report).unwrap();
        assert!(rec.error.is_some());
    }

    #[test]
    fn eps_list_parsing() {
        assert_eq!(parse_eps_list("0.2, 0.1,0.05").unwrap(), vec![0.2, 0.1, 0.05]);
        assert!(parse_eps_list("0.2,x").is_err());
    }

    #[test]
    fn command_names() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
    }
}
