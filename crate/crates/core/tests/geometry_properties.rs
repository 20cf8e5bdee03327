use lp_dolbeault::blowup::{
    chart_map, chart_point, chart_transition, determinant, form_weight_exponent, jacobian_ratios, lp_membership_monomial,
    preferred_chart, pullback_matrix, pushdown_matrix, ring_mass_check, transform_form, ChartPoint, Direction,
    MonteCarloOptions, Verdict,
};
use lp_dolbeault::index::{pullback_exponent, Rational};
use lp_dolbeault::{Exponent, GeometryError};
use num_complex::{Complex, Complex64};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        (1i64..40, 1i64..12).prop_filter_map("p ≥ 1", |(n, m)| Exponent::ratio(n, m).ok()),
        Just(Exponent::Infinite),
    ]
}

fn disc_point(max: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, phi)| Complex64::from_polar(r, phi))
}

fn chart_sample() -> impl Strategy<Value = ChartPoint<f64>> {
    (2usize..=4).prop_flat_map(|d| {
        (1..=d, disc_point(1.0).prop_filter("t ≠ 0", |t| t.norm() > 1e-3), prop::collection::vec(disc_point(1.0), d - 1))
            .prop_map(|(chart, fiber, base)| ChartPoint { chart, fiber, base })
    })
}

fn subset_count(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #[test]
    fn monomial_membership_matches_the_radial_integral(num in -40i64..20, den in 1i64..8, p in exponent(), d in 2u32..=5) {
        // ∫_0 r^{αp} r^{2d−1} dr < ∞ iff αp + 2d > 0; bounded iff α ≥ 0.
        let alpha = Rational::new(num, den);
        let expected = match p {
            Exponent::Infinite => num >= 0,
            Exponent::Finite(v) => alpha * v + Rational::from_integer(2 * d as i64) > Rational::from_integer(0),
        };
        prop_assert_eq!(lp_membership_monomial(alpha, p, d).unwrap(), expected);
    }

    #[test]
    fn exact_charts_round_trip(coords in prop::collection::vec((-9i64..=9, 1i64..5, -9i64..=9, 1i64..5), 2..=4)) {
        let z: Vec<Complex<Rational>> = coords
            .iter()
            .map(|&(a, b, c, e)| Complex::new(Rational::new(a, b), Rational::new(c, e)))
            .collect();
        for chart in 1..=z.len() {
            match chart_point(&z, chart).unwrap() {
                Some(pt) => prop_assert_eq!(chart_map(&pt).unwrap(), z.clone()),
                None => prop_assert_eq!(z[chart - 1], Complex::new(Rational::from_integer(0), Rational::from_integer(0))),
            }
        }
    }

    #[test]
    fn preferred_chart_has_base_in_the_polydisc(z in prop::collection::vec(disc_point(2.0), 2..=5)) {
        prop_assume!(z.iter().any(|c| c.norm() > 1e-6));
        let pt = chart_point(&z, preferred_chart(&z)).unwrap().unwrap();
        prop_assert!(pt.base.iter().all(|w| w.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn transitions_agree_with_the_ambient_point(pt in chart_sample(), to in 1usize..=4) {
        prop_assume!(to <= pt.dim());
        let z = chart_map(&pt).unwrap();
        if let Some(other) = chart_transition(&pt, to).unwrap() {
            let back = chart_map(&other).unwrap();
            for (a, b) in z.iter().zip(&back) {
                prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn pullback_and_pushdown_are_inverse(pt in chart_sample()) {
        let (p, q) = (pullback_matrix(&pt), pushdown_matrix(&pt));
        let d = pt.dim();
        for i in 0..d {
            for j in 0..d {
                let entry: Complex64 = (0..d).map(|m| p[i][m] * q[m][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((entry - want).norm() < 1e-9 * (1.0 / pt.fiber.norm()));
            }
        }
        // det P = t̄^{d−1}, so |det|² matches the volume weight |t|^{2d−2}.
        let det = determinant(p.clone());
        prop_assert!((det.norm() - pt.fiber.norm().powi(d as i32 - 1)).abs() < 1e-12);
    }

    #[test]
    fn forms_survive_pullback_then_pushdown(pt in chart_sample(), seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)) {
        let d = pt.dim();
        let (p, q) = (pullback_matrix(&pt), pushdown_matrix(&pt));
        for degree in 1..=d {
            let coeffs: Vec<Complex64> = (0..subset_count(d, degree))
                .map(|k| { let (a, b) = seed[k % seed.len()]; Complex64::new(a + k as f64, b) })
                .collect();
            let back = transform_form(&transform_form(&coeffs, degree, &p), degree, &q);
            for (a, b) in coeffs.iter().zip(&back) {
                prop_assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()) / pt.fiber.norm().powi(degree as i32));
            }
        }
    }

    #[test]
    fn weight_exponents_are_consistent(p in exponent(), d in 2u32..=6, q in 1u32..=6) {
        prop_assume!(q <= d);
        let up = form_weight_exponent(p, q, d, Direction::Pullback).unwrap();
        let down = form_weight_exponent(p, q, d, Direction::Pushdown).unwrap();
        prop_assert_eq!(up - down, Rational::from_integer(1));
        prop_assert_eq!(up, -pullback_exponent(p, q, d).unwrap());
    }
}

#[test]
fn jacobian_carries_the_volume_weight() {
    for d in 2..=4 {
        let samples = jacobian_ratios(d, &[0.5, 0.1, 0.01], 20, 9).unwrap();
        assert_eq!(samples.len(), 60);
        assert!(samples.iter().all(|s| (s.ratio - 1.0).abs() < 1e-4), "d = {d}: {samples:?}");
    }
    assert!(jacobian_ratios(1, &[0.5], 1, 0).is_err());
}

#[test]
fn ring_masses_follow_the_predicted_ratio() {
    let options = MonteCarloOptions { samples_per_ring: 2000, ..MonteCarloOptions::default() };
    let cases = [("0", "inf", 1, 2), ("-1", "2", 1, 2), ("-3", "2", 1, 2), ("-1/2", "4", 2, 3), ("-7/2", "1", 1, 3)];
    for (alpha, p, q, d) in cases {
        let alpha: Rational = alpha.parse().unwrap();
        let p: Exponent = p.parse().unwrap();
        let report = ring_mass_check(alpha, p, q, d, &options).unwrap();
        assert!(report.verdicts_agree, "{report:?}");
        assert!(report.max_ratio_deviation < 0.25, "{report:?}");
        let member = lp_membership_monomial(alpha, p, d).unwrap();
        assert_eq!(report.analytic_member, member);
        if report.ambient_verdict != Verdict::Inconclusive {
            assert_eq!(report.ambient_verdict == Verdict::Member, member, "{report:?}");
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let pt = ChartPoint { chart: 3, fiber: Complex64::new(1.0, 0.0), base: vec![Complex64::new(0.0, 0.0)] };
    assert!(matches!(chart_map(&pt), Err(GeometryError::InvalidChart { chart: 3, d: 2 })));
    let empty = MonteCarloOptions { rings: 1, ..MonteCarloOptions::default() };
    assert!(matches!(
        ring_mass_check(Rational::from_integer(0), Exponent::Infinite, 1, 2, &empty),
        Err(GeometryError::EmptySampling)
    ));
}
