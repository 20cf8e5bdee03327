use std::sync::Arc;

use lp_dolbeault::fiber::solve::{
    family, solve_compact_support, AmbientForm, RadialSingular, SmoothFamily, SolveOptions, SolverCase, ZeroForm,
};
use lp_dolbeault::fiber::FiberError;
use lp_dolbeault::Exponent;
use num_complex::Complex64;

fn small(d: usize, n: usize) -> SolveOptions {
    let mut options = SolveOptions::for_dim(d, n);
    options.base_rings = 2;
    options.base_angles = if d == 2 { 6 } else { 3 };
    options
}

fn p(text: &str) -> Exponent {
    text.parse().unwrap()
}

#[test]
fn zero_data_gives_zero_solution() {
    for (d, q) in [(2, 1), (2, 2), (3, 2)] {
        let sol = solve_compact_support(Arc::new(ZeroForm { d, q }), p("2"), &small(d, 16)).unwrap();
        assert!(sol.report.annuli.iter().all(|a| a.residual_l1 == 0.0 && a.eta_lp == 0.0));
    }
}

#[test]
fn radial_family_residual_shrinks_with_the_grid() {
    let form = family("radial_singular", 2, 1).unwrap();
    let coarse = solve_compact_support(form.clone(), p("2"), &small(2, 32)).unwrap().report;
    let fine = solve_compact_support(form, p("2"), &small(2, 64)).unwrap().report;
    assert_eq!(fine.a, -1);
    for (c, f) in coarse.annuli.iter().zip(&fine.annuli).skip(1) {
        assert!(f.relative_residual < 0.5 * c.relative_residual, "{c:?} vs {f:?}");
    }
}

#[test]
fn solution_recovers_the_potential() {
    // Both families are ∂̄ of a potential that is unique up to holomorphic terms; the
    // fiber transform returns the potential itself away from the cut-off region.
    let z = [Complex64::new(0.3, 0.1), Complex64::new(-0.1, 0.2)];
    let radial = RadialSingular { d: 2 };
    let sol = solve_compact_support(Arc::new(radial), p("2"), &small(2, 64)).unwrap();
    let eta = sol.eta_at(&z).unwrap();
    assert!((eta[0] - radial.potential(&z)).norm() < 2e-3 * radial.potential(&z).norm());

    let smooth = SmoothFamily { d: 2 };
    for exponent in ["2", "inf"] {
        let sol = solve_compact_support(Arc::new(smooth), p(exponent), &small(2, 64)).unwrap();
        let eta = sol.eta_at(&z).unwrap();
        assert!((eta[0] - smooth.potential(&z)).norm() < 2e-3 * smooth.potential(&z).norm());
    }
}

#[test]
fn three_dimensional_model_runs() {
    let form = family("radial_singular", 3, 1).unwrap();
    let sol = solve_compact_support(form, p("4"), &small(3, 32)).unwrap();
    assert_eq!(sol.report.a, 0);
    assert_eq!(sol.report.base_points, 36);
    assert!(sol.report.max_relative_residual < 0.5);
}

#[test]
fn singular_data_at_infinity_hits_the_weight_check() {
    // a(∞, 1, 2) = 1 makes |t|^{-1} times a 1/|t| coefficient non-integrable at 0.
    let form = family("radial_singular", 2, 1).unwrap();
    let err = solve_compact_support(form, Exponent::Infinite, &small(2, 32)).unwrap_err();
    assert!(matches!(err, FiberError::WeightViolation { .. }));
}

struct Uncut;

impl AmbientForm for Uncut {
    fn dim(&self) -> usize {
        2
    }
    fn degree(&self) -> usize {
        1
    }
    fn eval(&self, _z: &[Complex64], out: &mut [Complex64]) {
        out[0] = Complex64::new(1.0, 0.0);
        out[1] = Complex64::new(0.0, 0.0);
    }
}

#[test]
fn support_and_family_errors() {
    assert!(matches!(
        solve_compact_support(Arc::new(Uncut), p("2"), &small(2, 16)),
        Err(FiberError::SupportViolation { .. })
    ));
    assert!(matches!(family("radial", 2, 1), Err(FiberError::UnknownFamily(_))));
    assert!(matches!(family("smooth", 2, 2), Err(FiberError::UnknownFamily(_))));
}

#[test]
fn case_files_round_trip() {
    let text = r#"{
        "family": "smooth",
        "p": "4/3",
        "grid": {"levels": [32, 64]},
        "annuli": [{"inner": 0.2, "outer": 0.4}, {"inner": 0.4, "outer": 0.8}],
        "tolerance": 0.2,
        "base_rings": 1,
        "base_angles": 4
    }"#;
    let case: SolverCase = serde_json::from_str(text).unwrap();
    assert_eq!((case.d, case.q, case.grid.extent), (2, 1, 1.0));
    let report = case.run().unwrap();
    assert_eq!(report.levels.len(), 2);
    assert_eq!(report.levels[0].a, -2);
    assert!(report.passed, "{:?}", report.levels[1].annuli);
    assert!(report.levels[1].max_relative_residual < 0.5 * report.levels[0].max_relative_residual);
    assert!(serde_json::from_str::<SolverCase>(r#"{"family": "smooth", "p": "2", "grid": {"levels": [16]}, "bogus": 1}"#).is_err());
}
