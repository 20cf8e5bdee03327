//! Charts of the blow-up of `C^d` at the origin, the `|t|` weights relating
//! forms on both sides, and their numerical validation.

use num_complex::{Complex, Complex64};
use num_traits::{Num, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fiber::forms::subsets;
use crate::index::{self, Exponent, IndexError, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("chart index {chart} is outside 1..={d}")]
    InvalidChart { chart: usize, d: usize },
    #[error("point has {got} base coordinates, expected {expected}")]
    BaseLength { got: usize, expected: usize },
    #[error("frame {0:?} must be a strictly ascending list of indices in 1..=d")]
    InvalidFrame(Vec<usize>),
    #[error("ambient and chart criteria disagree for alpha = {alpha}, p = {p}, d = {d}")]
    CriteriaDisagree { alpha: String, p: String, d: u32 },
    #[error("at least two rings and one sample per ring are required")]
    EmptySampling,
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// A point in chart `j` (1-based): fiber `t = z_j`, base `w_k = z_k / z_j` for `k ≠ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint<T> {
    pub chart: usize,
    pub fiber: Complex<T>,
    pub base: Vec<Complex<T>>,
}

impl<T> ChartPoint<T> {
    pub fn dim(&self) -> usize {
        self.base.len() + 1
    }

    fn check(&self) -> Result<(), GeometryError> {
        let d = self.dim();
        if self.chart == 0 || self.chart > d {
            return Err(GeometryError::InvalidChart { chart: self.chart, d });
        }
        Ok(())
    }
}

/// `Π(t, w) = (t w_1, ..., t, ..., t w_d)` with `t` in slot `chart`.
pub fn chart_map<T: Clone + Num>(pt: &ChartPoint<T>) -> Result<Vec<Complex<T>>, GeometryError> {
    pt.check()?;
    let j = pt.chart - 1;
    let mut base = pt.base.iter();
    Ok((0..pt.dim())
        .map(|k| {
            if k == j {
                pt.fiber.clone()
            } else {
                pt.fiber.clone() * base.next().cloned().unwrap_or_else(Complex::zero)
            }
        })
        .collect())
}

/// Inverse of [`chart_map`] on the dense part of the chart, `None` when `z_j = 0`.
pub fn chart_point<T: Clone + Num>(
    z: &[Complex<T>],
    chart: usize,
) -> Result<Option<ChartPoint<T>>, GeometryError> {
    if chart == 0 || chart > z.len() {
        return Err(GeometryError::InvalidChart { chart, d: z.len() });
    }
    let j = chart - 1;
    let t = z[j].clone();
    if t.is_zero() {
        return Ok(None);
    }
    let base = z
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, zk)| zk.clone() / t.clone())
        .collect();
    Ok(Some(ChartPoint {
        chart,
        fiber: t,
        base,
    }))
}

/// The chart in which `z` has all base coordinates in the closed unit polydisc.
pub fn preferred_chart<T: Clone + Num + PartialOrd + Signed>(z: &[Complex<T>]) -> usize {
    let mut best = 0;
    for k in 1..z.len() {
        if z[k].norm_sqr() > z[best].norm_sqr() {
            best = k;
        }
    }
    best + 1
}

pub fn chart_transition<T: Clone + Num>(
    pt: &ChartPoint<T>,
    to_chart: usize,
) -> Result<Option<ChartPoint<T>>, GeometryError> {
    chart_point(&chart_map(pt)?, to_chart)
}

/// Exponent `2d − 2` of `|t|` in the pulled-back volume form.
pub fn volume_weight(d: u32) -> Result<u32, GeometryError> {
    if d < 2 {
        return Err(IndexError::InvalidDimension(d).into());
    }
    Ok(2 * d - 2)
}

/// Chart variable order used by the matrices below: index 0 is `t`, index
/// `m ≥ 1` is the `m`-th base coordinate.
fn ambient_slot(chart: usize, m: usize) -> usize {
    let j = chart - 1;
    if m - 1 < j {
        m - 1
    } else {
        m
    }
}

/// Rows `dz̄_k` written in the chart coframe `(dt̄, dw̄_1, ...)`.
pub fn pullback_matrix(pt: &ChartPoint<f64>) -> Vec<Vec<Complex64>> {
    let d = pt.dim();
    let j = pt.chart - 1;
    let mut p = vec![vec![Complex64::zero(); d]; d];
    p[j][0] = Complex64::new(1.0, 0.0);
    for m in 1..d {
        let k = ambient_slot(pt.chart, m);
        p[k][0] = pt.base[m - 1].conj();
        p[k][m] = pt.fiber.conj();
    }
    p
}

/// Rows `dt̄, dw̄_1, ...` written in the ambient coframe `dz̄_k`.
pub fn pushdown_matrix(pt: &ChartPoint<f64>) -> Vec<Vec<Complex64>> {
    let d = pt.dim();
    let j = pt.chart - 1;
    let mut q = vec![vec![Complex64::zero(); d]; d];
    q[0][j] = Complex64::new(1.0, 0.0);
    let inv = pt.fiber.conj().inv();
    for m in 1..d {
        let k = ambient_slot(pt.chart, m);
        q[m][k] = inv;
        q[m][j] = -pt.base[m - 1].conj() * inv;
    }
    q
}

pub fn determinant(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let n = a.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
            .unwrap_or(col);
        if a[pivot][col].norm() == 0.0 {
            return Complex64::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
        }
    }
    det
}

/// Re-expresses a `q`-form with coefficients on ascending `q`-subsets of the
/// source coframe, given each source 1-form as a row in the target coframe.
pub fn transform_form(coeffs: &[Complex64], degree: usize, matrix: &[Vec<Complex64>]) -> Vec<Complex64> {
    let rows = subsets(matrix.len(), degree);
    let cols = subsets(matrix.first().map_or(0, Vec::len), degree);
    cols.iter()
        .map(|target| {
            rows.iter()
                .zip(coeffs)
                .filter(|(_, c)| !c.is_zero())
                .map(|(source, c)| {
                    let minor = source
                        .iter()
                        .map(|&r| target.iter().map(|&t| matrix[r][t]).collect())
                        .collect();
                    c * determinant(minor)
                })
                .sum()
        })
        .collect()
}

/// Real Jacobian determinant of `Π` at a chart point by centered differences.
pub fn numeric_jacobian(pt: &ChartPoint<f64>, step: f64) -> Result<f64, GeometryError> {
    let d = pt.dim();
    let coords = |p: &ChartPoint<f64>| -> Result<Vec<f64>, GeometryError> {
        Ok(chart_map(p)?.iter().flat_map(|z| [z.re, z.im]).collect())
    };
    let mut columns = Vec::with_capacity(2 * d);
    for var in 0..d {
        for unit in [Complex64::new(step, 0.0), Complex64::new(0.0, step)] {
            let shift = |sign: f64| {
                let mut q = pt.clone();
                if var == 0 {
                    q.fiber += unit * sign;
                } else {
                    q.base[var - 1] += unit * sign;
                }
                q
            };
            let plus = coords(&shift(1.0))?;
            let minus = coords(&shift(-1.0))?;
            columns.push(
                plus.iter()
                    .zip(&minus)
                    .map(|(a, b)| (a - b) / (2.0 * step))
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let matrix = (0..2 * d)
        .map(|r| (0..2 * d).map(|c| Complex64::new(columns[c][r], 0.0)).collect())
        .collect();
    Ok(determinant(matrix).re.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianSample {
    pub fiber_modulus: f64,
    pub ratio: f64,
}

/// Ratios `Π^* dV / (|t|^{2d−2} dV_chart)` at random chart-1 points with the given `|t|`.
pub fn jacobian_ratios(
    d: u32,
    fiber_moduli: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<JacobianSample>, GeometryError> {
    let weight = volume_weight(d)? as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &r in fiber_moduli {
        for _ in 0..samples {
            let pt = ChartPoint {
                chart: 1,
                fiber: Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)),
                base: (1..d).map(|_| uniform_disc(&mut rng, 1.0)).collect(),
            };
            let jac = numeric_jacobian(&pt, 1e-6 * r)?;
            out.push(JacobianSample {
                fiber_modulus: r,
                ratio: jac / r.powi(weight),
            });
        }
    }
    Ok(out)
}

fn uniform_disc(rng: &mut impl Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// `(ambient, chart)` criteria for `|z|^α ∈ L^p` near `0` in `C^d`.
pub fn membership_criteria(alpha: Rational, p: Exponent, d: u32) -> Result<(bool, bool), GeometryError> {
    volume_weight(d)?;
    let zero = Rational::zero();
    Ok(match p {
        Exponent::Infinite => (alpha >= zero, alpha >= zero),
        Exponent::Finite(pv) => {
            let two = Rational::from_integer(2);
            let ambient = alpha * pv > -Rational::from_integer(2 * d as i64);
            let chart_weight = Rational::from_integer(2 * d as i64 - 2) / pv + alpha;
            let chart = pv * chart_weight > -two;
            (ambient, chart)
        }
    })
}

pub fn lp_membership_monomial(alpha: Rational, p: Exponent, d: u32) -> Result<bool, GeometryError> {
    let (ambient, chart) = membership_criteria(alpha, p, d)?;
    if ambient != chart {
        return Err(GeometryError::CriteriaDisagree {
            alpha: alpha.to_string(),
            p: p.to_string(),
            d,
        });
    }
    Ok(ambient)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Pullback,
    Pushdown,
}

/// Power of `|t|` that makes a chart form `L^p` exactly when its ambient
/// counterpart is.
pub fn form_weight_exponent(
    p: Exponent,
    q: u32,
    d: u32,
    direction: Direction,
) -> Result<Rational, GeometryError> {
    index::check_degree(q, d)?;
    let base = p.divide(2 * d as i64 - 2);
    let shift = match direction {
        Direction::Pullback => q as i64 - 1,
        Direction::Pushdown => q as i64,
    };
    Ok(base - Rational::from_integer(shift))
}

/// `|z|^α` times a wedge of frame forms `α_1 = dz̄_1`, `α_j = dz̄_j − (z̄_j / z̄_1) dz̄_1`
/// (the push-downs of `dt̄` and `t̄ dw̄_j` from chart 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightedMonomial {
    #[serde(serialize_with = "rational_string")]
    pub alpha: Rational,
    pub d: u32,
    /// Ascending frame indices in `1..=d`.
    pub frame: Vec<usize>,
}

impl WeightedMonomial {
    pub fn new(alpha: Rational, d: u32, frame: Vec<usize>) -> Result<Self, GeometryError> {
        volume_weight(d)?;
        let ascending = frame.windows(2).all(|w| w[0] < w[1]);
        if frame.is_empty() || !ascending || frame[0] == 0 || *frame.last().unwrap_or(&0) > d as usize {
            return Err(GeometryError::InvalidFrame(frame));
        }
        Ok(WeightedMonomial { alpha, d, frame })
    }

    /// Frame `α_1 ∧ ... ∧ α_q`.
    pub fn leading(alpha: Rational, q: u32, d: u32) -> Result<Self, GeometryError> {
        index::check_degree(q, d)?;
        Self::new(alpha, d, (1..=q as usize).collect())
    }

    pub fn degree(&self) -> usize {
        self.frame.len()
    }

    fn alpha_f64(&self) -> f64 {
        *self.alpha.numer() as f64 / *self.alpha.denom() as f64
    }

    /// Coefficients on ascending `dz̄_K`.
    pub fn ambient_coefficients(&self, z: &[Complex64]) -> Vec<Complex64> {
        let d = self.d as usize;
        let radius = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = Complex64::new(radius.powf(self.alpha_f64()), 0.0);
        let rows: Vec<Vec<Complex64>> = self
            .frame
            .iter()
            .map(|&j| {
                let mut row = vec![Complex64::zero(); d];
                if j == 1 {
                    row[0] = Complex64::new(1.0, 0.0);
                } else {
                    row[j - 1] = Complex64::new(1.0, 0.0);
                    row[0] = -z[j - 1].conj() / z[0].conj();
                }
                row
            })
            .collect();
        // The frame itself is a q-form with a single coefficient on α_J.
        transform_form(&[scale], self.degree(), &rows)
    }

    pub fn ambient_norm(&self, z: &[Complex64]) -> f64 {
        norm(&self.ambient_coefficients(z))
    }

    /// Norm of the pull-back in the chart-1 coframe `(dt̄, dw̄)`.
    pub fn chart_norm(&self, pt: &ChartPoint<f64>) -> Result<f64, GeometryError> {
        let z = chart_map(pt)?;
        let coeffs = self.ambient_coefficients(&z);
        Ok(norm(&transform_form(&coeffs, self.degree(), &pullback_matrix(pt))))
    }
}

fn rational_string<S: serde::Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&value.to_string())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingMass {
    pub outer_radius: f64,
    pub ambient: f64,
    pub chart: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingMassReport {
    pub alpha: String,
    pub p: String,
    pub q: u32,
    pub d: u32,
    pub seed: u64,
    pub samples_per_ring: usize,
    pub chart_weight: String,
    pub rings: Vec<RingMass>,
    /// Predicted mass ratio between consecutive rings (`sup` ratio for `p = ∞`).
    pub predicted_ratio: f64,
    pub ambient_ratios: Vec<f64>,
    pub chart_ratios: Vec<f64>,
    pub max_ratio_deviation: f64,
    pub ambient_exponent: f64,
    pub chart_exponent: f64,
    pub ambient_verdict: Verdict,
    pub chart_verdict: Verdict,
    pub analytic_member: bool,
    pub verdicts_agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOptions {
    pub seed: u64,
    pub samples_per_ring: usize,
    pub rings: usize,
    pub outer_radius: f64,
    pub strata: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            seed: 2024,
            samples_per_ring: 8000,
            rings: 6,
            outer_radius: 0.5,
            strata: 16,
        }
    }
}

/// Decay exponent above which ring masses are summable, and below which they
/// are treated as diverging.
const VERDICT_MARGIN: f64 = 0.25;

fn verdict(exponent: f64, infinite: bool) -> Verdict {
    if infinite && exponent >= -1e-9 {
        Verdict::Member
    } else if !infinite && exponent > VERDICT_MARGIN {
        Verdict::Member
    } else if exponent < -VERDICT_MARGIN {
        Verdict::NonMember
    } else {
        Verdict::Inconclusive
    }
}

fn unit_sphere_point(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..d)
            .map(|_| {
                let (a, b): (f64, f64) = (gaussian(rng), gaussian(rng));
                Complex64::new(a, b)
            })
            .collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Ring masses of `|z|^α α_J` on both sides of the blow-up.
///
/// Ambient: `∫ |ω|^p` over the shells `r/2 ≤ |z| ≤ r` inside the chart-1 cone.
/// Chart: `∫ |t|^{2d−2−(q−1)p} |π^*ω|^p` over `r/2 ≤ |t| ≤ r`, `w` in the unit
/// polydisc. For `p = ∞` the sups of `|ω|` and `|t|^{−(q−1)} |π^*ω|` are used.
pub fn ring_mass_check(
    alpha: Rational,
    p: Exponent,
    q: u32,
    d: u32,
    options: &MonteCarloOptions,
) -> Result<RingMassReport, GeometryError> {
    if options.rings < 2 || options.samples_per_ring == 0 || options.strata == 0 {
        return Err(GeometryError::EmptySampling);
    }
    let monomial = WeightedMonomial::leading(alpha, q, d)?;
    let analytic_member = lp_membership_monomial(alpha, p, d)?;
    let chart_weight = form_weight_exponent(p, q, d, Direction::Pullback)?;
    let du = d as usize;
    let pf = p.to_f64();
    let infinite = p.is_infinite();
    let alpha_f = monomial.alpha_f64();
    let chart_power = if infinite {
        -(q as f64 - 1.0)
    } else {
        (2 * d - 2) as f64 - (q as f64 - 1.0) * pf
    };
    let ball_const = std::f64::consts::PI.powi(du as i32) / factorial(du) as f64;
    let polydisc = std::f64::consts::PI.powi(du as i32 - 1);

    let rings: Vec<RingMass> = (0..options.rings)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(k as u64 + 1);
            let outer = options.outer_radius * 0.5f64.powi(k as i32);
            let inner = 0.5 * outer;
            let per_stratum = options.samples_per_ring.div_ceil(options.strata);
            let (mut ambient, mut chart) = (0.0, 0.0);
            for s in 0..options.strata {
                // Stratum by radius, sampled with the volume density inside it.
                let a = inner + (outer - inner) * s as f64 / options.strata as f64;
                let b = inner + (outer - inner) * (s + 1) as f64 / options.strata as f64;
                let shell = ball_const * (b.powi(2 * du as i32) - a.powi(2 * du as i32));
                let annulus = std::f64::consts::PI * (b * b - a * a);
                let (mut amb_sum, mut chart_sum) = (0.0, 0.0);
                for _ in 0..per_stratum {
                    let u: f64 = rng.gen();
                    let r = (a.powi(2 * du as i32) + u * (b.powi(2 * du as i32) - a.powi(2 * du as i32)))
                        .powf(1.0 / (2 * du) as f64);
                    let z: Vec<Complex64> = unit_sphere_point(&mut rng, du).into_iter().map(|c| c * r).collect();
                    let in_cone = preferred_chart(&z) == 1;
                    let amb = if in_cone { monomial.ambient_norm(&z) } else { 0.0 };

                    let v: f64 = rng.gen();
                    let tr = (a * a + v * (b * b - a * a)).sqrt();
                    let pt = ChartPoint {
                        chart: 1,
                        fiber: Complex64::from_polar(tr, rng.gen_range(0.0..std::f64::consts::TAU)),
                        base: (1..du).map(|_| uniform_disc(&mut rng, 1.0)).collect(),
                    };
                    let ch = monomial.chart_norm(&pt).unwrap_or(0.0);
                    if infinite {
                        amb_sum = f64::max(amb_sum, amb);
                        chart_sum = f64::max(chart_sum, tr.powf(chart_power) * ch);
                    } else {
                        amb_sum += amb.powf(pf);
                        chart_sum += tr.powf(chart_power) * ch.powf(pf);
                    }
                }
                if infinite {
                    ambient = f64::max(ambient, amb_sum);
                    chart = f64::max(chart, chart_sum);
                } else {
                    ambient += shell * amb_sum / per_stratum as f64;
                    chart += annulus * polydisc * chart_sum / per_stratum as f64;
                }
            }
            RingMass {
                outer_radius: outer,
                ambient,
                chart,
            }
        })
        .collect();

    // Homogeneity gives mass ∝ r^{αp + 2d}, or sup ∝ r^α for p = ∞.
    let gamma = if infinite { alpha_f } else { alpha_f * pf + 2.0 * d as f64 };
    let predicted_ratio = 0.5f64.powf(gamma);
    let ratios = |f: &dyn Fn(&RingMass) -> f64| -> Vec<f64> {
        rings.windows(2).map(|w| f(&w[1]) / f(&w[0])).collect()
    };
    let ambient_ratios = ratios(&|r| r.ambient);
    let chart_ratios = ratios(&|r| r.chart);
    let max_ratio_deviation = ambient_ratios
        .iter()
        .chain(&chart_ratios)
        .map(|r| (r / predicted_ratio - 1.0).abs())
        .fold(0.0, f64::max);
    let fitted = |masses: &dyn Fn(&RingMass) -> f64| -> f64 {
        let first = masses(&rings[0]);
        let last = masses(&rings[rings.len() - 1]);
        (first / last).log2() / (rings.len() - 1) as f64
    };
    let ambient_exponent = fitted(&|r| r.ambient);
    let chart_exponent = fitted(&|r| r.chart);
    let ambient_verdict = verdict(ambient_exponent, infinite);
    let chart_verdict = verdict(chart_exponent, infinite);
    let agrees = |v: Verdict| match v {
        Verdict::Member => analytic_member,
        Verdict::NonMember => !analytic_member,
        Verdict::Inconclusive => true,
    };
    Ok(RingMassReport {
        alpha: alpha.to_string(),
        p: p.to_string(),
        q,
        d,
        seed: options.seed,
        samples_per_ring: options.samples_per_ring,
        chart_weight: chart_weight.to_string(),
        rings,
        predicted_ratio,
        ambient_ratios,
        chart_ratios,
        max_ratio_deviation,
        ambient_exponent,
        chart_exponent,
        ambient_verdict,
        chart_verdict,
        analytic_member,
        verdicts_agree: agrees(ambient_verdict) && agrees(chart_verdict) && ambient_verdict == chart_verdict,
    })
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}
