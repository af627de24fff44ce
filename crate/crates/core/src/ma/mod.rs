//! Elliptic side of the flow: the complex Monge–Ampère reformulation of the
//! critical equation, a Newton–Krylov solver for it, spectral Poisson solves
//! and the closed-form product-ansatz solution.

mod krylov;

pub use krylov::{gmres, KrylovStats};

use serde::{Deserialize, Serialize};

use crate::calculus::{
    hessian_unchecked, not_positive, positivity_margin, solve_constant_operator, Grid, Hermitian2, HermitianFormField,
    ScalarField,
};
use crate::cohomology::{class_pairing, c_constant, ClosedForm, CohomologyClass};
use crate::error::{Error, Result};

/// Mean-zero `u` with `tr_Id dd^c u = src`.
pub fn poisson_solve(src: &ScalarField) -> Result<ScalarField> {
    src.ensure_finite()?;
    let m = src.mean();
    if m.abs() > 1e-12 {
        return Err(Error::NonZeroMean(m));
    }
    Ok(solve_constant_operator(src, Hermitian2::IDENTITY, 1.0))
}

/// Product-ansatz critical point `φ = φ1(z1) + φ2(z2)` for `ω = diag(f, g)`.
#[derive(Debug, Clone)]
pub struct SplitCritical {
    pub c1: f64,
    pub c2: f64,
    pub phi1: ScalarField,
    pub phi2: ScalarField,
}

impl SplitCritical {
    pub fn assemble(&self) -> ScalarField {
        self.phi1.axpy(1.0, &self.phi2)
    }

    pub fn c(&self) -> f64 {
        self.c1 + self.c2
    }
}

/// Closed-form critical potential for diagonal product data. `f` must depend on
/// `z1` only and `g` on `z2` only; `χ = diag(f/c1, g/c2)` is then critical.
pub fn split_critical(f: &ScalarField, g: &ScalarField, x: &CohomologyClass) -> Result<SplitCritical> {
    f.grid().ensure_same(g.grid())?;
    let xm = x.matrix();
    if xm.a12.norm() != 0.0 {
        return Err(Error::Config("split ansatz needs a diagonal class".into()));
    }
    if !x.is_kahler() {
        return Err(Error::ClassNotPositive { min_eigenvalue: xm.eigenvalues().0 });
    }
    for p in [f, g] {
        p.ensure_finite()?;
        if p.mean() <= 0.0 {
            return Err(Error::DegenerateProfile(p.mean()));
        }
    }
    let c1 = f.mean() / xm.a11;
    let c2 = g.mean() / xm.a22;
    // diag(0,1) picks out ∂1∂̄1 and diag(1,0) picks out ∂2∂̄2.
    let src1 = f.map(|v| v / c1 - xm.a11).mean_normalized();
    let src2 = g.map(|v| v / c2 - xm.a22).mean_normalized();
    Ok(SplitCritical {
        c1,
        c2,
        phi1: solve_constant_operator(&src1, Hermitian2::diag(0.0, 1.0), 1.0),
        phi2: solve_constant_operator(&src2, Hermitian2::diag(1.0, 0.0), 1.0),
    })
}

/// `sup |2 D(χ_φ, ω) − c D(χ_φ, χ_φ)|`.
pub fn critical_residual(phi: &ScalarField, chi0: &ClosedForm, omega: &ClosedForm, c: f64) -> Result<f64> {
    phi.ensure_finite()?;
    chi0.grid().ensure_same(phi.grid())?;
    let chi = chi0.realized.add(&hessian_unchecked(phi));
    Ok(critical_residual_with(&chi, &omega.realized, c))
}

pub(crate) fn critical_residual_with(chi: &HermitianFormField, omega: &HermitianFormField, c: f64) -> f64 {
    (0..chi.len())
        .map(|i| {
            let x = chi.at(i);
            (2.0 * x.wedge(&omega.at(i)) - c * x.wedge(&x)).abs()
        })
        .fold(0.0, f64::max)
}

/// `α = c χ₀ − ω`, refused unless `c[χ₀] − [ω]` is Kähler.
pub fn build_alpha(chi0: &ClosedForm, omega: &ClosedForm, c: f64) -> Result<ClosedForm> {
    chi0.grid().ensure_same(omega.grid())?;
    let cls = chi0.cls.scale(c) - omega.cls;
    let margin = cls.0.eigenvalues().0;
    if margin <= 0.0 {
        return Err(Error::ConeCondition { c, margin });
    }
    let alpha = chi0.combine(c, omega, -1.0);
    let (aa, ww) = (class_pairing(&alpha.cls, &alpha.cls), class_pairing(&omega.cls, &omega.cls));
    if (aa - ww).abs() > 1e-10 * ww.abs().max(1.0) {
        return Err(Error::Diagnostic(format!(
            "class identity fails: [α]² = {aa}, [ω]² = {ww}"
        )));
    }
    Ok(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaSolverConfig {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub linear_tol: f64,
    pub damping: f64,
    pub krylov_restart: usize,
    pub max_krylov: usize,
}

impl Default for MaSolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 50,
            linear_tol: 1e-12,
            damping: 0.5,
            krylov_restart: 40,
            max_krylov: 600,
        }
    }
}

impl MaSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.linear_tol > 0.0
            && self.max_newton > 0
            && self.damping > 0.0
            && self.damping < 1.0
            && self.krylov_restart > 0
            && self.max_krylov > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Monge–Ampère solver settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaSolution {
    /// Mean-zero solution.
    pub psi: ScalarField,
    /// `sup |G|` before each Newton step and at the end.
    pub residuals: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
}

impl MaSolution {
    pub fn newton_iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }

    /// `ψ` shifted so that `sup ψ = 0`.
    pub fn sup_gauge(&self) -> ScalarField {
        self.psi.sup_normalized()
    }
}

struct Newton<'a> {
    alpha: &'a HermitianFormField,
    c: f64,
    log_target: Vec<f64>,
}

impl Newton<'_> {
    fn form(&self, psi: &ScalarField) -> HermitianFormField {
        self.alpha.add(&hessian_unchecked(psi).scale(self.c))
    }

    /// `G` and `sup |G|`, or the first non-positive point.
    fn residual(&self, a: &HermitianFormField) -> std::result::Result<(Vec<f64>, f64), usize> {
        let mut g = Vec::with_capacity(a.len());
        let mut sup = 0.0f64;
        for i in 0..a.len() {
            let m = a.at(i);
            if !m.is_positive() {
                return Err(i);
            }
            let v = m.wedge(&m).ln() - self.log_target[i];
            sup = sup.max(v.abs());
            g.push(v);
        }
        Ok((g, sup))
    }
}

/// Solve `(α + c dd^c ψ)² = T²` by damped Newton on `log D(A,A) − log D(T,T)`.
/// Each linearized step `c tr_A dd^c δ = −G` is solved by GMRES, left
/// preconditioned with the constant-coefficient operator at `mean(A)`.
pub fn solve_ma(
    alpha: &ClosedForm,
    c: f64,
    target: &ClosedForm,
    cfg: &MaSolverConfig,
    init: Option<&ScalarField>,
) -> Result<MaSolution> {
    cfg.validate()?;
    let grid: Grid = *alpha.grid();
    grid.ensure_same(target.grid())?;
    if !(c > 0.0) {
        return Err(Error::Config(format!("scale c must be positive, got {c}")));
    }
    let t = &target.realized;
    let mut log_target = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let m = t.at(i);
        let d = m.wedge(&m);
        if !(d > 0.0) {
            return Err(not_positive(t, i));
        }
        log_target.push(d.ln());
    }
    let newton = Newton { alpha: &alpha.realized, c, log_target };

    let mut psi = match init {
        Some(p) => {
            grid.ensure_same(p.grid())?;
            p.ensure_finite()?;
            p.mean_normalized()
        }
        // Cancel the potential of α when α itself is not positive.
        None if positivity_margin(&alpha.realized) > 0.0 => ScalarField::zeros(grid),
        None => {
            if !alpha.cls.is_kahler() {
                return Err(Error::ConeCondition { c, margin: alpha.cls.0.eigenvalues().0 });
            }
            alpha.potential.scale(-1.0 / c).mean_normalized()
        }
    };
    let mut a = newton.form(&psi);
    let (mut g, mut sup) = newton.residual(&a).map_err(|i| not_positive(&a, i))?;
    let mut residuals = vec![sup];
    let mut krylov_iterations = Vec::new();

    while sup > cfg.newton_tol {
        if residuals.len() > cfg.max_newton {
            return Err(Error::NewtonDiverged { iterations: cfg.max_newton, residuals });
        }
        let a_bar = a.mean();
        let pscale = c / a_bar.det();
        let precond = |v: Vec<f64>| -> Vec<f64> {
            let f = ScalarField::new(grid, v).expect("grid length");
            solve_constant_operator(&f, a_bar, pscale).into_values()
        };
        let rhs = precond(g.iter().map(|v| -v).collect());
        let apply = |v: &[f64]| -> Vec<f64> {
            let f = ScalarField::new(grid, v.to_vec()).expect("grid length");
            let h = hessian_unchecked(&f);
            let lv = (0..grid.len())
                .map(|i| {
                    let m = a.at(i);
                    c * m.wedge(&h.at(i)) / m.det()
                })
                .collect();
            precond(lv)
        };
        let (delta, stats) = gmres(apply, &rhs, cfg.linear_tol, cfg.krylov_restart, cfg.max_krylov);
        krylov_iterations.push(stats.iterations);
        let delta = ScalarField::new(grid, delta)?;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = psi.axpy(step, &delta);
            let at = newton.form(&trial);
            if let Ok((gt, st)) = newton.residual(&at) {
                if st < sup {
                    accepted = Some((trial, at, gt, st));
                    break;
                }
            }
            step *= cfg.damping;
        }
        match accepted {
            Some((p, at, gt, st)) => {
                psi = p;
                a = at;
                g = gt;
                sup = st;
                residuals.push(sup);
            }
            None => return Err(Error::PositivityLost { residual: sup }),
        }
    }
    Ok(MaSolution { psi: psi.mean_normalized(), residuals, krylov_iterations })
}

/// Mean-zero critical potential for `(χ₀, ω)`, via `α = c χ₀ − ω` and the
/// Monge–Ampère equation `(α + c dd^c ψ)² = ω²`.
pub fn solve_critical(
    chi0: &ClosedForm,
    omega: &ClosedForm,
    cfg: &MaSolverConfig,
    init: Option<&ScalarField>,
) -> Result<(f64, MaSolution)> {
    let c = c_constant(&chi0.cls, &omega.cls)?;
    let alpha = build_alpha(chi0, omega, c)?;
    Ok((c, solve_ma(&alpha, c, omega, cfg, init)?))
}

#[derive(Debug, Clone)]
pub struct ContinuationStage {
    pub eps: f64,
    pub c: f64,
    pub solution: MaSolution,
}

/// Critical potentials along a descending `ε` list, each stage warm-started
/// from the previous one.
pub fn epsilon_continuation(
    chi0: &ClosedForm,
    omega0: &ClosedForm,
    omega_hat: &ClosedForm,
    eps: &[f64],
    cfg: &MaSolverConfig,
) -> Result<Vec<ContinuationStage>> {
    let mut stages: Vec<ContinuationStage> = Vec::with_capacity(eps.len());
    for &e in eps {
        if let Some(prev) = stages.last() {
            if e >= prev.eps {
                return Err(Error::Config("ε list must be strictly descending".into()));
            }
        }
        let omega = crate::cohomology::epsilon_form(omega0, e, omega_hat);
        let warm = stages.last().map(|s| s.solution.psi.clone());
        let (c, solution) = solve_critical(chi0, &omega, cfg, warm.as_ref())?;
        stages.push(ContinuationStage { eps: e, c, solution });
    }
    Ok(stages)
}
