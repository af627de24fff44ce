//! Module outputs against independent closed forms.

use std::f64::consts::PI;

use jflow::calculus::{complex_hessian, integrate, trace_with, wedge_density, Grid, Hermitian2, HermitianFormField, ScalarField};
use jflow::cohomology::{c_constant, class_pairing, cone_condition, CohomologyClass};
use jflow::diagnostics::{compare_up_to_constant, fit_power_law};
use jflow::ma::poisson_solve;
use jflow::snapshot::Snapshot;
use num_complex::Complex64;
use proptest::prelude::*;

/// `dd^c` of `cos(2π k·x + θ)`: `−π² w_j conj(w_k) cos(..)` with `w_j = k_{x_j} − i k_{y_j}`.
fn hessian_of_wave(k: [i32; 4], theta: f64, x: [f64; 4]) -> Hermitian2 {
    let w1 = Complex64::new(k[0] as f64, -k[1] as f64);
    let w2 = Complex64::new(k[2] as f64, -k[3] as f64);
    let phase = 2.0 * PI * (0..4).map(|d| k[d] as f64 * x[d]).sum::<f64>() + theta;
    let s = -PI * PI * phase.cos();
    Hermitian2::new(s * w1.norm_sqr(), s * w2.norm_sqr(), w1 * w2.conj() * s)
}

fn class_strategy() -> impl Strategy<Value = CohomologyClass> {
    (0.2f64..3.0, 0.2f64..3.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map("positive", |(a, b, re, im)| {
        let m = Hermitian2::new(a, b, Complex64::new(re, im));
        m.is_positive().then_some(CohomologyClass(m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hessian_matches_plane_wave(k in prop::array::uniform4(-3i32..=3), theta in 0.0f64..6.3, amp in -1.0f64..1.0) {
        let g = Grid::full(8).unwrap();
        let phi = ScalarField::from_fn(g, |x| amp * (2.0 * PI * (0..4).map(|d| k[d] as f64 * x[d]).sum::<f64>() + theta).cos());
        let h = complex_hessian(&phi).unwrap();
        for i in (0..g.len()).step_by(37) {
            let want = hessian_of_wave(k, theta, g.coords(i)).scale(amp);
            let got = h.at(i);
            let err = (got.a11 - want.a11).abs().max((got.a22 - want.a22).abs()).max((got.a12 - want.a12).norm());
            prop_assert!(err < 1e-9, "k = {k:?}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn wedge_of_self_is_twice_det(a in 0.1f64..4.0, b in 0.1f64..4.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let m = Hermitian2::new(a, b, Complex64::new(re, im));
        prop_assert!((m.wedge(&m) - 2.0 * (a * b - re * re - im * im)).abs() < 1e-12);
        if m.is_positive() {
            prop_assert!((m.trace_of(&m) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_condition_is_an_eigenvalue_test(x in class_strategy(), w in class_strategy()) {
        // Independent: c = 2 X·W / X² with X·W = 4 D(X,W), X² = 4 D(X,X).
        let (xm, wm) = (x.matrix(), w.matrix());
        let c = 2.0 * xm.wedge(&wm) / xm.wedge(&xm);
        prop_assert!((c_constant(&x, &w).unwrap() - c).abs() < 1e-12 * c);
        let r = Hermitian2::new(c * xm.a11 - wm.a11, c * xm.a22 - wm.a22, xm.a12 * c - wm.a12);
        let v = cone_condition(&x, &w).unwrap();
        prop_assert_eq!(v.holds(), r.eigenvalues().0 > 0.0);
        prop_assert!((class_pairing(&x, &w) - 4.0 * xm.wedge(&wm)).abs() < 1e-12 * class_pairing(&x, &w).abs().max(1.0));
    }

    #[test]
    fn snapshot_round_trip(vals in prop::collection::vec(-1e3f64..1e3, 64)) {
        let g = Grid::split(8).unwrap();
        let f = ScalarField::new(g, vals).unwrap();
        let back = Snapshot::decode(&Snapshot::from_scalar(&f).encode()).unwrap().into_scalar().unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn power_law_exponent_recovered(gamma in 0.0f64..2.0, c in 0.1f64..10.0) {
        let g = Grid::split(32).unwrap();
        let s2 = ScalarField::from_fn(g, |x| (PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2));
        let u = s2.map(|s| c * s.max(1e-300).powf(-gamma));
        let fit = fit_power_law(&u, &s2, (1e-3, 0.5)).unwrap();
        prop_assert!((fit.gamma - gamma).abs() < 1e-9);
        prop_assert!((fit.c - c).abs() < 1e-8 * c);
    }
}

#[test]
fn integral_of_identity_wedge_is_eight() {
    let g = Grid::full(4).unwrap();
    let id = HermitianFormField::constant(g, Hermitian2::IDENTITY);
    // D(Id, Id) = 2 and ∫ = 4·mean.
    assert!((integrate(&wedge_density(&id, &id)) - 8.0).abs() < 1e-14);
    let tr = trace_with(&id, &HermitianFormField::constant(g, Hermitian2::diag(2.0, 3.0))).unwrap();
    assert!((tr.max() - 5.0).abs() < 1e-14 && (tr.min() - 5.0).abs() < 1e-14);
}

#[test]
fn poisson_inverts_the_laplacian_mode() {
    // Δ sin(2πx1) cos(4πy2) = −20π² sin cos, and tr_Id dd^c = Δ/4.
    let g = Grid::full(8).unwrap();
    let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[3]).cos());
    let src = u.scale(-5.0 * PI * PI);
    let sol = poisson_solve(&src).unwrap();
    assert!(compare_up_to_constant(&sol, &u, None).unwrap() < 1e-12);
    assert!(poisson_solve(&ScalarField::constant(g, 1.0)).is_err());
}
