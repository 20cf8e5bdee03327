//! Self-check suites behind `lpdolbeault verify`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::blowup::{
    self, chart_map, chart_point, form_weight_exponent, ring_mass_check, membership_criteria,
    ChartPoint, Direction, MonteCarloOptions,
};
use crate::fiber::forms::{closed_test_form, homotopy_residual, smooth_test_form, BaseQuadrature, FormField};
use crate::fiber::solve::{family, solve_compact_support, SolveOptions};
use crate::fiber::{cauchy_transform, weighted_transform, CauchyPlan, FiberFunction, Grid};
use crate::index::{
    a_index, breakpoints, c_index, dbar_weight, pullback_exponent, Exponent, Rational,
};
use crate::report::{band, cp1_criterion, cpk_vanishing_check, ProjectiveVanishing};
use crate::riemann_roch::{h0, h1, obstruction_sum, vanishing_threshold, CurveData, DimensionData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Indices,
    Rr,
    Solver,
    Geometry,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "indices" => Ok(Suite::Indices),
            "rr" => Ok(Suite::Rr),
            "solver" => Ok(Suite::Solver),
            "geometry" => Ok(Suite::Geometry),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite {other:?} (expected indices, rr, solver, geometry or all)")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Indices => "indices",
            Suite::Rr => "rr",
            Suite::Solver => "solver",
            Suite::Geometry => "geometry",
            Suite::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Solver checks on `n = 64` with tolerances scaled by `256/n`.
    pub fast: bool,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { fast: false, seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub suite: String,
    pub fast: bool,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder { suite, checks: Vec::new() }
    }

    fn record(&mut self, name: &str, outcome: Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        self.checks.push(Check {
            suite: self.suite.to_string(),
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

pub fn run(suite: Suite, options: VerifyOptions) -> Summary {
    let checks = match suite {
        Suite::Indices => indices_suite(),
        Suite::Rr => rr_suite(),
        Suite::Solver => solver_suite(options),
        Suite::Geometry => geometry_suite(options),
        Suite::All => [indices_suite(), rr_suite(), geometry_suite(options), solver_suite(options)].concat(),
    };
    Summary {
        suite: suite.to_string(),
        fast: options.fast,
        seed: options.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// 200 finite exponents in `[1, 64]` including every breakpoint `2d/m` with
/// `d ≤ 5`, ascending.
pub fn exponent_grid() -> Vec<Rational> {
    let mut points: Vec<Rational> = (2..=5i64)
        .flat_map(|d| (1..=2 * d).map(move |m| Rational::new(2 * d, m)))
        .chain([16, 24, 32, 48, 64].map(Rational::from_integer))
        .collect();
    points.sort();
    points.dedup();
    let mut j = 0;
    while points.len() < 200 {
        let candidate = Rational::one() + Rational::new(j, 13);
        if !points.contains(&candidate) {
            points.push(candidate);
        }
        j += 1;
    }
    points.sort();
    points
}

fn grid_with_infinity() -> Vec<Exponent> {
    exponent_grid()
        .into_iter()
        .map(Exponent::Finite)
        .chain(std::iter::once(Exponent::Infinite))
        .collect()
}

/// `max{m : (s − m)·p/(p − 1) > −2}` (`m ≤ s` at `p = 1`) by integer scan.
pub fn holder_scan(p: Exponent, s: Rational) -> i64 {
    let admissible = |m: i64| {
        let gap = s - Rational::from_integer(m);
        match p {
            Exponent::Infinite => gap > Rational::from_integer(-2),
            Exponent::Finite(v) if v.is_one() => gap >= Rational::zero(),
            Exponent::Finite(v) => gap * v / (v - Rational::one()) > Rational::from_integer(-2),
        }
    };
    let mut m = s.floor().to_integer() - 4;
    debug_assert!(admissible(m));
    while admissible(m + 1) {
        m += 1;
    }
    m
}

fn exhaustive<I, F>(items: I, mut check: F) -> Result<String, String>
where
    I: IntoIterator,
    F: FnMut(I::Item) -> Result<(), String>,
{
    let mut count = 0usize;
    for item in items {
        check(item)?;
        count += 1;
    }
    Ok(format!("{count} cases"))
}

fn triples() -> Vec<(Exponent, u32, u32)> {
    let grid = grid_with_infinity();
    let mut out = Vec::new();
    for d in 2..=5u32 {
        for q in 1..=d {
            out.extend(grid.iter().map(|&p| (p, q, d)));
        }
    }
    out
}

fn indices_suite() -> Vec<Check> {
    let mut r = Recorder::new("indices");
    let cases = triples();
    r.record(
        "a_le_c_le_a_plus_1",
        exhaustive(cases.iter(), |&(p, q, d)| {
            let (a, c) = (a_index(p, q, d).map_err(|e| e.to_string())?, c_index(p, q, d).map_err(|e| e.to_string())?);
            let integral = p.divide(2 * d as i64).is_integer();
            let expect_equal = p.is_one() || !integral;
            if a <= c && c <= a + 1 && (a == c) == expect_equal {
                Ok(())
            } else {
                Err(format!("p = {p}, q = {q}, d = {d}: a = {a}, c = {c}"))
            }
        }),
    );
    r.record(
        "degree_shift",
        exhaustive(cases.iter().filter(|(_, q, d)| q < d), |&(p, q, d)| {
            let shift = |f: fn(Exponent, u32, u32) -> Result<i64, crate::index::IndexError>| -> Result<bool, String> {
                Ok(f(p, q + 1, d).map_err(|e| e.to_string())? == f(p, q, d).map_err(|e| e.to_string())? + 1)
            };
            let s = pullback_exponent(p, q, d).map_err(|e| e.to_string())?;
            if shift(a_index)? && shift(c_index)? && dbar_weight(p, s + Rational::one()) == dbar_weight(p, s) + 1 {
                Ok(())
            } else {
                Err(format!("p = {p}, q = {q}, d = {d}"))
            }
        }),
    );
    r.record(
        "monotone_in_p",
        exhaustive(cases.windows(2).filter(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2), |w| {
            let ((p0, q, d), (p1, _, _)) = (w[0], w[1]);
            let ok = a_index(p0, q, d).unwrap() <= a_index(p1, q, d).unwrap()
                && c_index(p0, q, d).unwrap() <= c_index(p1, q, d).unwrap();
            ok.then_some(()).ok_or(format!("q = {q}, d = {d}: between p = {p0} and {p1}"))
        }),
    );
    r.record(
        "dbar_weight_of_pullback_equals_a",
        exhaustive(cases.iter(), |&(p, q, d)| {
            let s = pullback_exponent(p, q, d).map_err(|e| e.to_string())?;
            let a = a_index(p, q, d).map_err(|e| e.to_string())?;
            (dbar_weight(p, s) == a)
                .then_some(())
                .ok_or(format!("p = {p}, q = {q}, d = {d}: k = {}, a = {a}", dbar_weight(p, s)))
        }),
    );
    r.record(
        "dbar_weight_matches_holder_scan",
        exhaustive(cases.iter(), |&(p, q, d)| {
            let s = pullback_exponent(p, q, d).map_err(|e| e.to_string())?;
            for shift in [Rational::zero(), Rational::new(1, 3), Rational::new(-5, 7)] {
                let t = s + shift;
                if dbar_weight(p, t) != holder_scan(p, t) {
                    return Err(format!("p = {p}, s = {t}"));
                }
            }
            Ok(())
        }),
    );
    r.record("constant_between_breakpoints", breakpoint_constancy());
    r.checks
}

fn breakpoint_constancy() -> Result<String, String> {
    let mut count = 0;
    for d in 2..=5u32 {
        for q in 1..=d {
            let mut cuts = breakpoints(q, d).map_err(|e| e.to_string())?;
            cuts.push(Rational::from_integer(4 * d as i64));
            for pair in cuts.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let samples: Vec<Exponent> = [1, 2, 3]
                    .iter()
                    .map(|&k| Exponent::Finite(lo + (hi - lo) * Rational::new(k, 4)))
                    .collect();
                let values: Vec<(i64, i64)> = samples
                    .iter()
                    .map(|&p| (a_index(p, q, d).unwrap(), c_index(p, q, d).unwrap()))
                    .collect();
                if values.windows(2).any(|w| w[0] != w[1]) {
                    return Err(format!("q = {q}, d = {d}: not constant on ({lo}, {hi})"));
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} intervals"))
}

/// `h^0` of a degree-`m` bundle, written out independently of the library rule.
fn h0_by_degree(genus: u32, degree: i64) -> i64 {
    match (genus, degree) {
        (_, m) if m < 0 => 0,
        (0, m) => m + 1,
        (_, 0) => 1,
        (_, m) => m,
    }
}

fn rr_suite() -> Vec<Check> {
    let mut r = Recorder::new("rr");
    let curves: Vec<CurveData> = (0..=1)
        .flat_map(|g| (1..=4).map(move |e| CurveData { genus: g, bundle_degree: e }))
        .collect();
    let cases: Vec<(CurveData, i64)> = curves.iter().flat_map(|&c| (-10..=10).map(move |mu| (c, mu))).collect();
    r.record(
        "riemann_roch_identity",
        exhaustive(cases.iter(), |&(c, mu)| {
            let (a, b) = (h0(c, mu).unwrap() as i64, h1(c, mu).unwrap() as i64);
            (a - b == c.degree(mu) + 1 - c.genus as i64)
                .then_some(())
                .ok_or(format!("{c:?}, μ = {mu}: h0 = {a}, h1 = {b}"))
        }),
    );
    r.record(
        "serre_duality",
        exhaustive(cases.iter(), |&(c, mu)| {
            let dual = h0_by_degree(c.genus, 2 * c.genus as i64 - 2 - c.degree(mu));
            (h1(c, mu).unwrap() as i64 == dual)
                .then_some(())
                .ok_or(format!("{c:?}, μ = {mu}"))
        }),
    );
    r.record(
        "vanishing_ranges",
        exhaustive(cases.iter(), |&(c, mu)| {
            let deg = c.degree(mu);
            let ok = (deg <= 2 * c.genus as i64 - 2 || h1(c, mu).unwrap() == 0) && (deg >= 0 || h0(c, mu).unwrap() == 0);
            ok.then_some(()).ok_or(format!("{c:?}, μ = {mu}"))
        }),
    );
    r.record(
        "obstruction_sum_telescopes",
        exhaustive(cases.iter(), |&(c, mu)| {
            let step = obstruction_sum(c, mu).unwrap() as i64 - obstruction_sum(c, mu + 1).unwrap() as i64;
            let expected = if mu < vanishing_threshold(c).unwrap() { h1(c, mu).unwrap() as i64 } else { 0 };
            (step == expected).then_some(()).ok_or(format!("{c:?}, μ = {mu}"))
        }),
    );
    r.record(
        "projective_line_extension",
        match cpk_vanishing_check(1, 1) {
            Ok(ProjectiveVanishing::Verified { from_mu, .. }) if from_mu == -1 => {
                exhaustive(-1..=10, |mu| {
                    (h1(CurveData::rational(1), mu).unwrap() == 0)
                        .then_some(())
                        .ok_or(format!("μ = {mu}"))
                })
            }
            other => Err(format!("unexpected {other:?}")),
        },
    );
    r.record("band_invariants", band_invariants());
    r.record(
        "projective_line_criterion",
        (0..=1u32)
            .map(|g| {
                let dims = DimensionData::Curve(CurveData { genus: g, bundle_degree: 1 });
                let verdict = cp1_criterion(&dims).map_err(|e| e.to_string())?;
                let lower = band(&dims, 2, 1, Exponent::integer(2).unwrap()).map_err(|e| e.to_string())?.lower;
                if verdict == (g == 0) && lower == g as u64 {
                    Ok(())
                } else {
                    Err(format!("g = {g}: criterion {verdict}, lower bound {lower}"))
                }
            })
            .collect::<Result<Vec<()>, String>>()
            .map(|v| format!("{} genera", v.len())),
    );
    r.checks
}

fn band_invariants() -> Result<String, String> {
    let grid = grid_with_infinity();
    let mut count = 0;
    for g in 0..=1u32 {
        for e in 1..=4u32 {
            let dims = DimensionData::Curve(CurveData { genus: g, bundle_degree: e });
            let mut previous: Option<(u64, u64)> = None;
            for &p in &grid {
                let b = band(&dims, 2, 1, p).map_err(|err| err.to_string())?;
                let integral = p.divide(4).is_integer();
                if b.lower > b.upper || ((!integral || p.is_one()) && b.lower != b.upper) {
                    return Err(format!("g = {g}, e = {e}, p = {p}: ({}, {})", b.lower, b.upper));
                }
                if let Some((lo, up)) = previous {
                    if b.lower > lo || b.upper > up {
                        return Err(format!("g = {g}, e = {e}: band grows at p = {p}"));
                    }
                }
                previous = Some((b.lower, b.upper));
                count += 1;
            }
        }
    }
    Ok(format!("{count} bands"))
}

fn geometry_suite(options: VerifyOptions) -> Vec<Check> {
    let mut r = Recorder::new("geometry");
    let exponents: Vec<Exponent> = ["1", "4/3", "2", "4", "inf"].iter().map(|s| s.parse().unwrap()).collect();
    let alphas: Vec<Rational> = (-16..=4).map(|k| Rational::new(k, 4)).collect();
    r.record(
        "membership_criteria_agree",
        exhaustive(
            alphas.iter().flat_map(|&a| exponents.iter().flat_map(move |&p| [2u32, 3].map(|d| (a, p, d)))),
            |(a, p, d)| {
                let (ambient, chart) = membership_criteria(a, p, d).map_err(|e| e.to_string())?;
                (ambient == chart).then_some(()).ok_or(format!("α = {a}, p = {p}, d = {d}"))
            },
        ),
    );
    r.record(
        "weight_exponents",
        exhaustive(triples(), |(p, q, d)| {
            let up = form_weight_exponent(p, q, d, Direction::Pullback).map_err(|e| e.to_string())?;
            let down = form_weight_exponent(p, q, d, Direction::Pushdown).map_err(|e| e.to_string())?;
            let s = pullback_exponent(p, q, d).map_err(|e| e.to_string())?;
            (up - down == Rational::one() && s == -up)
                .then_some(())
                .ok_or(format!("p = {p}, q = {q}, d = {d}"))
        }),
    );
    r.record("chart_round_trip", chart_round_trip());
    r.record(
        "jacobian_weight",
        blowup::jacobian_ratios(3, &[0.5, 0.1, 0.01], 20, options.seed)
            .map_err(|e| e.to_string())
            .and_then(|samples| {
                let worst = samples.iter().map(|s| (s.ratio - 1.0).abs()).fold(0.0, f64::max);
                if worst < 1e-4 {
                    Ok(format!("max deviation {worst:.2e}"))
                } else {
                    Err(format!("max deviation {worst:.2e}"))
                }
            }),
    );
    let mc = MonteCarloOptions {
        seed: options.seed,
        ..MonteCarloOptions::default()
    };
    for (alpha, p, q, d) in [
        (Rational::from_integer(-1), "2", 1, 2),
        (Rational::from_integer(-3), "2", 1, 2),
        (Rational::new(1, 2), "4/3", 2, 3),
        (Rational::zero(), "inf", 1, 2),
    ] {
        let p: Exponent = p.parse().unwrap();
        let name = format!("ring_masses_alpha_{alpha}_p_{p}_q{q}_d{d}").replace('/', "_");
        r.record(
            &name,
            ring_mass_check(alpha, p, q, d, &mc)
                .map_err(|e| e.to_string())
                .and_then(|report| {
                    let detail = format!(
                        "deviation {:.3}, verdicts {:?}/{:?}",
                        report.max_ratio_deviation, report.ambient_verdict, report.chart_verdict
                    );
                    if report.max_ratio_deviation <= 0.25 && report.verdicts_agree {
                        Ok(detail)
                    } else {
                        Err(detail)
                    }
                }),
        );
    }
    r.checks
}

fn chart_round_trip() -> Result<String, String> {
    type Q = num_complex::Complex<Rational>;
    let q = |a: i64, b: i64, c: i64, e: i64| Q::new(Rational::new(a, b), Rational::new(c, e));
    let points = [
        vec![q(1, 2, -1, 3), q(2, 7, 0, 1)],
        vec![q(-3, 5, 1, 4), q(1, 1, 1, 9), q(0, 1, 5, 6)],
        vec![q(0, 1, 0, 1), q(4, 9, -2, 3), q(1, 8, 0, 1)],
    ];
    let mut count = 0;
    for z in &points {
        for chart in 1..=z.len() {
            let Some(pt) = chart_point(z, chart).map_err(|e| e.to_string())? else {
                continue;
            };
            let back: Vec<Q> = chart_map::<Rational>(&pt).map_err(|e| e.to_string())?;
            if &back != z {
                return Err(format!("chart {chart}: {z:?}"));
            }
            let _: &ChartPoint<Rational> = &pt;
            count += 1;
        }
    }
    Ok(format!("{count} exact round trips"))
}

struct SolverScale {
    n: usize,
    factor: f64,
}

fn solver_scale(options: VerifyOptions) -> SolverScale {
    let n = if options.fast { 64 } else { 256 };
    SolverScale {
        n,
        factor: 256.0 / n as f64,
    }
}

fn pass_if(value: f64, bound: f64, label: &str) -> Result<String, String> {
    let detail = format!("{label} {value:.3e} (bound {bound:.3e})");
    if value <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Probe points for the disc oracle: 10 inside and 10 outside the disc `|t| < 1/2`.
pub fn disc_probes() -> Vec<Complex64> {
    (0..20)
        .map(|k| {
            let r = if k < 10 { 0.1 + 0.035 * k as f64 } else { 0.56 + 0.04 * (k - 10) as f64 };
            Complex64::from_polar(r, 0.7 + 2.39996 * k as f64)
        })
        .collect()
}

/// Largest relative error of the disc-indicator transform over [`disc_probes`].
pub fn disc_error(n: usize) -> Result<f64, String> {
    let grid = Grid::new(1.0, n).map_err(|e| e.to_string())?;
    let f = FiberFunction::from_fn(&grid, |z| Complex64::new(if z.norm() < 0.5 { 1.0 } else { 0.0 }, 0.0));
    let mut worst: f64 = 0.0;
    for t in disc_probes() {
        let v = cauchy_transform(&grid, &f, t).map_err(|e| e.to_string())?.value;
        let exact = if t.norm() < 0.5 { t.conj() } else { 0.25 / t };
        worst = worst.max((v - exact).norm() / exact.norm());
    }
    Ok(worst)
}

fn solver_suite(options: VerifyOptions) -> Vec<Check> {
    let mut r = Recorder::new("solver");
    let scale = solver_scale(options);

    r.record(
        "disc_oracle",
        disc_error(scale.n).and_then(|e| pass_if(e, 0.02 * scale.factor, &format!("n = {} max relative error", scale.n))),
    );
    r.record(
        "disc_oracle_refines",
        disc_error(scale.n)
            .and_then(|coarse| disc_error(2 * scale.n).map(|fine| (coarse, fine)))
            .and_then(|(coarse, fine)| pass_if(1.5 * fine, coarse, "1.5 × fine error vs coarse")),
    );
    r.record("weighted_transform_identity", weighted_identity());

    let levels: Vec<usize> = if options.fast { vec![32, 64] } else { vec![64, 128, 256] };
    r.record("homotopy_residual", homotopy_study(&levels, 0.05 * scale.factor));

    r.record(
        "radial_family_residual",
        solve_residual("radial_singular", "2", scale.n, options.fast, 0.05 * scale.factor),
    );
    r.record("smooth_family_cross_check", cross_check(scale.n, options.fast, 0.05 * scale.factor));
    r.checks
}

fn weighted_identity() -> Result<String, String> {
    let grid = Grid::new(1.0, 32).map_err(|e| e.to_string())?;
    let f = FiberFunction::from_fn(&grid, |z| {
        Complex64::new(crate::fiber::forms::bump(z.norm() / 0.7), 0.0) * (z + 0.3)
    });
    let t = Complex64::new(0.21, -0.13);
    let mut worst: f64 = 0.0;
    for a in [-2, -1, 0] {
        let lhs = weighted_transform(&grid, &f, a, t).map_err(|e| e.to_string())?.value;
        let rhs = t.powi(a) * cauchy_transform(&grid, &f.weighted(&grid, a), t).map_err(|e| e.to_string())?.value;
        worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1e-300));
    }
    pass_if(worst, 1e-12, "relative mismatch")
}

fn homotopy_study(levels: &[usize], bound: f64) -> Result<String, String> {
    let base = BaseQuadrature::polydisc(1, 0.5, 2, 4);
    let mut residuals = Vec::new();
    for &n in levels {
        let grid = Grid::new(1.0, n).map_err(|e| e.to_string())?;
        let plan = CauchyPlan::new(&grid);
        let field: Arc<dyn FormField> = Arc::new(smooth_test_form(0.8));
        let res = homotopy_residual(field, &plan, &base, 1e-3).map_err(|e| e.to_string())?;
        residuals.push(res.relative().0.l1);
    }
    let closed: Arc<dyn FormField> = Arc::new(closed_test_form(0.8).map_err(|e| e.to_string())?);
    let grid = Grid::new(1.0, *levels.last().unwrap_or(&64)).map_err(|e| e.to_string())?;
    let closed_res = homotopy_residual(closed, &CauchyPlan::new(&grid), &base, 1e-3)
        .map_err(|e| e.to_string())?
        .relative()
        .1
        .l1;
    let levels_text: Vec<String> = residuals.iter().map(|r| format!("{r:.3e}")).collect();
    let detail = format!("relative L1 residuals [{}], closed-form ω − ∂̄Sω {closed_res:.3e}", levels_text.join(", "));
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);
    let last = *residuals.last().unwrap_or(&f64::INFINITY);
    if monotone && last <= bound && closed_res <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solve_options(n: usize, fast: bool) -> SolveOptions {
    let options = SolveOptions::for_dim(2, n);
    if fast {
        options.resolved_annuli()
    } else {
        options
    }
}

fn solve_residual(name: &str, p: &str, n: usize, fast: bool, bound: f64) -> Result<String, String> {
    let form = family(name, 2, 1).map_err(|e| e.to_string())?;
    let p: Exponent = p.parse().map_err(|e: crate::index::IndexError| e.to_string())?;
    let sol = solve_compact_support(form, p, &solve_options(n, fast)).map_err(|e| e.to_string())?;
    pass_if(sol.report.max_relative_residual, bound, "worst annulus residual")
}

fn cross_check(n: usize, fast: bool, bound: f64) -> Result<String, String> {
    let form = family("smooth", 2, 1).map_err(|e| e.to_string())?;
    let probe = [Complex64::new(0.3, 0.1), Complex64::new(-0.1, 0.2)];
    let mut etas = Vec::new();
    let mut residuals = Vec::new();
    for p in [Exponent::integer(2).unwrap(), Exponent::Infinite] {
        let sol = solve_compact_support(form.clone(), p, &solve_options(n, fast)).map_err(|e| e.to_string())?;
        residuals.push(sol.report.max_relative_residual);
        etas.push(sol.eta_at(&probe).map_err(|e| e.to_string())?[0]);
    }
    let mismatch = (etas[0] - etas[1]).norm() / etas[0].norm();
    let detail = format!("residuals p=2 {:.3e}, p=inf {:.3e}; η mismatch {mismatch:.3e}", residuals[0], residuals[1]);
    if residuals.iter().all(|&r| r <= bound) && mismatch <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}
