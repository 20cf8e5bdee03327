use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cauchy::{cauchy_transform, cauchy_transform_refined, CauchyPlan};
use super::forms::{
    dbar_sampled, insertion_sign, subsets, BaseQuadrature, BaseStencil, FormField, FormLayout,
    SampledForm,
};
use super::grid::Grid;
use super::norms::Ring;
use super::FiberError;
use crate::blowup::{chart_map, chart_point, preferred_chart, pullback_matrix, pushdown_matrix, ChartPoint};
use crate::index::{self, Exponent};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A `(0, q)`-form on a neighbourhood of `0` in `C^d`, coefficients on ascending `dz̄_K`.
pub trait AmbientForm: Send + Sync {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn eval(&self, z: &[Complex64], out: &mut [Complex64]);

    fn components(&self) -> usize {
        subsets(self.dim(), self.degree()).len()
    }
}

/// Smooth cut-off: 1 on `r ≤ 0.5`, 0 on `r ≥ 0.85`.
pub fn cutoff(r: f64) -> f64 {
    1.0 - smoothstep((r - CUTOFF_INNER) / CUTOFF_WIDTH)
}

pub fn cutoff_derivative(r: f64) -> f64 {
    -smoothstep_derivative((r - CUTOFF_INNER) / CUTOFF_WIDTH) / CUTOFF_WIDTH
}

const CUTOFF_INNER: f64 = 0.5;
const CUTOFF_WIDTH: f64 = 0.35;

fn flat(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn flat_derivative(x: f64) -> f64 {
    if x > 0.0 {
        flat(x) / (x * x)
    } else {
        0.0
    }
}

fn smoothstep(x: f64) -> f64 {
    let (a, b) = (flat(x), flat(1.0 - x));
    a / (a + b)
}

fn smoothstep_derivative(x: f64) -> f64 {
    let (a, b) = (flat(x), flat(1.0 - x));
    let (da, db) = (flat_derivative(x), -flat_derivative(1.0 - x));
    (da * b - a * db) / ((a + b) * (a + b))
}

fn radius(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `∂̄(χ(|z|) z̄_1 / |z|)`: `L^p` near `0` exactly for `p < 2d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadialSingular {
    pub d: usize,
}

impl RadialSingular {
    pub fn potential(&self, z: &[Complex64]) -> Complex64 {
        let r = radius(z);
        z[0].conj() * (cutoff(r) / r)
    }
}

impl AmbientForm for RadialSingular {
    fn dim(&self) -> usize {
        self.d
    }

    fn degree(&self) -> usize {
        1
    }

    fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
        let r = radius(z);
        let (chi, dchi) = (cutoff(r), cutoff_derivative(r));
        let z1bar = z[0].conj();
        for k in 0..self.d {
            // ∂_k̄ r = z_k / (2r)
            let mut v = z[k] * z1bar * (dchi / (2.0 * r * r)) - z1bar * z[k] * (chi / (2.0 * r * r * r));
            if k == 0 {
                v += chi / r;
            }
            out[k] = v;
        }
    }
}

/// `∂̄(χ(|z|) z̄_1 (1 + z_2))`, smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothFamily {
    pub d: usize,
}

impl SmoothFamily {
    pub fn potential(&self, z: &[Complex64]) -> Complex64 {
        z[0].conj() * (Complex64::new(1.0, 0.0) + z[1]) * cutoff(radius(z))
    }
}

impl AmbientForm for SmoothFamily {
    fn dim(&self) -> usize {
        self.d
    }

    fn degree(&self) -> usize {
        1
    }

    fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
        let r = radius(z);
        let (chi, dchi) = (cutoff(r), cutoff_derivative(r));
        let holo = Complex64::new(1.0, 0.0) + z[1];
        for k in 0..self.d {
            let radial = if r > 0.0 { dchi / (2.0 * r) } else { 0.0 };
            let mut v = z[k] * z[0].conj() * holo * radial;
            if k == 0 {
                v += holo * chi;
            }
            out[k] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroForm {
    pub d: usize,
    pub q: usize,
}

impl AmbientForm for ZeroForm {
    fn dim(&self) -> usize {
        self.d
    }

    fn degree(&self) -> usize {
        self.q
    }

    fn eval(&self, _z: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
    }
}

pub fn family(name: &str, d: usize, q: usize) -> Result<Arc<dyn AmbientForm>, FiberError> {
    match name {
        "radial_singular" if q == 1 && d >= 2 => Ok(Arc::new(RadialSingular { d })),
        "smooth" if q == 1 && d >= 2 => Ok(Arc::new(SmoothFamily { d })),
        "zero" if d >= 2 && (1..=d).contains(&q) => Ok(Arc::new(ZeroForm { d, q })),
        _ => Err(FiberError::UnknownFamily(format!("{name} (d = {d}, q = {q})"))),
    }
}

/// Determinant of the minor of `matrix` on the given rows and columns.
fn minor(matrix: &[Vec<Complex64>], rows: &[usize], cols: &[usize]) -> Complex64 {
    match rows.len() {
        0 => Complex64::new(1.0, 0.0),
        1 => matrix[rows[0]][cols[0]],
        2 => {
            matrix[rows[0]][cols[0]] * matrix[rows[1]][cols[1]]
                - matrix[rows[0]][cols[1]] * matrix[rows[1]][cols[0]]
        }
        _ => crate::blowup::determinant(
            rows.iter()
                .map(|&r| cols.iter().map(|&c| matrix[r][c]).collect())
                .collect(),
        ),
    }
}

/// Change of coframe for `q`-forms with the subsets precomputed.
#[derive(Debug, Clone)]
struct CoframeChange {
    subsets: Vec<Vec<usize>>,
}

impl CoframeChange {
    fn new(d: usize, q: usize) -> Self {
        CoframeChange {
            subsets: subsets(d, q),
        }
    }

    fn apply(&self, coeffs: &[Complex64], matrix: &[Vec<Complex64>], out: &mut [Complex64]) {
        for (slot, target) in self.subsets.iter().enumerate() {
            let mut acc = ZERO;
            for (source, c) in self.subsets.iter().zip(coeffs) {
                if *c != ZERO {
                    acc += c * minor(matrix, source, target);
                }
            }
            out[slot] = acc;
        }
    }
}

/// Pull-back of an ambient form to chart `chart` in the fiber/base layout.
pub struct PullbackField {
    form: Arc<dyn AmbientForm>,
    chart: usize,
    layout: FormLayout,
    change: CoframeChange,
    /// Chart-coframe subset index for each layout slot.
    slots: Vec<usize>,
}

impl PullbackField {
    pub fn new(form: Arc<dyn AmbientForm>, chart: usize) -> Result<Self, FiberError> {
        let (d, q) = (form.dim(), form.degree());
        index::check_degree(q as u32, d as u32)?;
        if chart == 0 || chart > d {
            return Err(FiberError::LayoutMismatch(format!("chart {chart} out of range 1..={d}")));
        }
        let layout = FormLayout::new(d - 1, q)?;
        let chart_subsets = subsets(d, q);
        let slots = layout_to_chart_slots(&layout, &chart_subsets);
        Ok(PullbackField {
            form,
            chart,
            layout,
            change: CoframeChange::new(d, q),
            slots,
        })
    }
}

/// Layout slot `i` holds chart coefficient `slots[i]`, where chart variable 0 is
/// `t` and chart variable `k + 1` is base variable `k`.
fn layout_to_chart_slots(layout: &FormLayout, chart_subsets: &[Vec<usize>]) -> Vec<usize> {
    let mut slots = Vec::with_capacity(layout.len());
    for j in layout.fiber_indices() {
        let target: Vec<usize> = std::iter::once(0).chain(j.iter().map(|k| k + 1)).collect();
        slots.push(chart_subsets.iter().position(|s| *s == target).unwrap_or(0));
    }
    for k in layout.base_indices() {
        let target: Vec<usize> = k.iter().map(|k| k + 1).collect();
        slots.push(chart_subsets.iter().position(|s| *s == target).unwrap_or(0));
    }
    slots
}

impl FormField for PullbackField {
    fn layout(&self) -> FormLayout {
        self.layout.clone()
    }

    fn eval(&self, base: &[Complex64], fiber: Complex64, out: &mut [Complex64]) {
        let pt = ChartPoint {
            chart: self.chart,
            fiber,
            base: base.to_vec(),
        };
        let z = chart_map(&pt).expect("chart index validated at construction");
        let mut ambient = vec![ZERO; self.change.subsets.len()];
        self.form.eval(&z, &mut ambient);
        let mut chart = vec![ZERO; ambient.len()];
        self.change.apply(&ambient, &pullback_matrix(&pt), &mut chart);
        for (o, &s) in out.iter_mut().zip(&self.slots) {
            *o = chart[s];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub n: usize,
    pub extent: f64,
    pub annuli: Vec<Ring>,
    /// Polar rule per base factor: rings × angles on the unit disc.
    pub base_rings: usize,
    pub base_angles: usize,
    pub stencil_delta: f64,
    pub closure_points: usize,
    pub seed: u64,
    pub keep_samples: bool,
}

impl SolveOptions {
    pub fn for_dim(d: usize, n: usize) -> Self {
        let (base_rings, base_angles) = if d <= 2 { (4, 12) } else { (2, 6) };
        SolveOptions {
            n,
            extent: 1.0,
            annuli: [(0.05, 0.1), (0.1, 0.2), (0.2, 0.4), (0.4, 0.8)]
                .map(|(inner, outer)| Ring { inner, outer })
                .to_vec(),
            base_rings,
            base_angles,
            stencil_delta: 1e-3,
            closure_points: 200,
            seed: 17,
            keep_samples: false,
        }
    }

    /// Drops annuli narrower than two grid cells.
    pub fn resolved_annuli(mut self) -> Self {
        let h = 2.0 * self.extent / self.n as f64;
        self.annuli.retain(|ring| ring.outer - ring.inner >= 2.0 * h);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusReport {
    pub inner: f64,
    pub outer: f64,
    /// `‖∂̄η − ω‖_{L¹}` over the annulus.
    pub residual_l1: f64,
    pub omega_l1: f64,
    pub relative_residual: f64,
    /// `‖η‖_{L^p}` over the annulus (`sup` for `p = ∞`).
    pub eta_lp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub max_dbar: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Exponent used for the `η` norms.
    pub p: String,
    pub q: usize,
    pub d: usize,
    pub a: i64,
    pub n: usize,
    pub base_points: usize,
    pub closure: ClosureReport,
    pub annuli: Vec<AnnulusReport>,
    pub max_relative_residual: f64,
}

/// `τ` samples for one chart: `tau[b][c]` is component `c` at base point `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSamples {
    pub chart: usize,
    pub base_points: Vec<Vec<Complex64>>,
    pub tau: Vec<Vec<Vec<Complex64>>>,
}

pub struct Solution {
    pub report: SolveReport,
    pub samples: Vec<ChartSamples>,
    form: Arc<dyn AmbientForm>,
    grid: Grid,
    a: i32,
}

impl std::fmt::Debug for Solution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solution").field("report", &self.report).finish()
    }
}

impl Solution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weight(&self) -> i32 {
        self.a
    }

    /// `η(z)` as coefficients on ascending `dz̄_K`, `|K| = q − 1`, evaluated
    /// pointwise in the chart where `z` has its largest coordinate.
    pub fn eta_at(&self, z: &[Complex64]) -> Result<Vec<Complex64>, FiberError> {
        let d = self.form.dim();
        if z.len() != d {
            return Err(FiberError::LayoutMismatch(format!("point has {} coordinates, expected {d}", z.len())));
        }
        let chart = preferred_chart(z);
        let pt = chart_point(z, chart)
            .map_err(|e| FiberError::LayoutMismatch(e.to_string()))?
            .ok_or_else(|| FiberError::LayoutMismatch("η is not defined at the origin".into()))?;
        let field: Arc<dyn FormField> = Arc::new(PullbackField::new(self.form.clone(), chart)?);
        let layout = field.layout();
        let lowered = layout.lowered()?;
        let sampled = SampledForm::sample(field, &self.grid, vec![pt.base.clone()]);
        let mut tau = vec![ZERO; lowered.len()];
        for (c, j) in layout.fiber_indices().iter().enumerate() {
            let g = sampled.fiber_function(0, c).weighted(&self.grid, self.a);
            let value = if self.a >= 0 {
                cauchy_transform_refined(&self.grid, &g, pt.fiber)?
            } else {
                cauchy_transform(&self.grid, &g, pt.fiber)?
            };
            if let Some(slot) = lowered.base_position(j) {
                tau[slot] = value.value * pt.fiber.powi(self.a);
            }
        }
        Ok(push_down_lowered(&lowered, &tau, &pt))
    }
}

/// Push-down of a chart `(q−1)`-form that has base components only.
fn push_down_lowered(lowered: &FormLayout, tau: &[Complex64], pt: &ChartPoint<f64>) -> Vec<Complex64> {
    let d = pt.dim();
    let degree = lowered.degree();
    let chart_subsets = subsets(d, degree);
    let slots = layout_to_chart_slots(lowered, &chart_subsets);
    let mut chart = vec![ZERO; chart_subsets.len()];
    for (value, &s) in tau.iter().zip(&slots) {
        chart[s] += value;
    }
    let mut out = vec![ZERO; chart.len()];
    CoframeChange::new(d, degree).apply(&chart, &pushdown_matrix(pt), &mut out);
    out
}

fn ambient_dbar(form: &dyn AmbientForm, z: &[Complex64], step: f64) -> Vec<Complex64> {
    let (d, q) = (form.dim(), form.degree());
    let sources = subsets(d, q);
    let targets = subsets(d, q + 1);
    let m = sources.len();
    let mut partials = vec![ZERO; d * m];
    let mut plus = vec![ZERO; m];
    let mut minus = vec![ZERO; m];
    let mut shifted = z.to_vec();
    for k in 0..d {
        for (unit, factor) in [
            (Complex64::new(step, 0.0), Complex64::new(0.25 / step, 0.0)),
            (Complex64::new(0.0, step), Complex64::new(0.0, 0.25 / step)),
        ] {
            shifted[k] = z[k] + unit;
            form.eval(&shifted, &mut plus);
            shifted[k] = z[k] - unit;
            form.eval(&shifted, &mut minus);
            shifted[k] = z[k];
            for c in 0..m {
                partials[k * m + c] += (plus[c] - minus[c]) * factor;
            }
        }
    }
    targets
        .iter()
        .map(|l| {
            let mut acc = ZERO;
            for (pos, &k) in l.iter().enumerate() {
                let mut rest = l.clone();
                rest.remove(pos);
                if let Some(c) = sources.iter().position(|s| *s == rest) {
                    acc += partials[k * m + c] * insertion_sign(k, &rest);
                }
            }
            acc
        })
        .collect()
}

fn random_ball_point(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n = radius(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|c| c * (r / n)).collect();
        }
    }
}

/// Finite-difference `∂̄`-closure check at points with `0.1 ≤ |z| ≤ 0.9`, and a
/// support check on the sphere `|z| = 0.98`.
pub fn check_closed(
    form: &dyn AmbientForm,
    grid: &Grid,
    points: usize,
    seed: u64,
) -> Result<ClosureReport, FiberError> {
    let (d, q) = (form.dim(), form.degree());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![ZERO; form.components()];
    let mut scale: f64 = 0.0;
    let mut max_dbar: f64 = 0.0;
    for _ in 0..points {
        let r = rng.gen_range(0.1..0.9);
        let z = random_ball_point(&mut rng, d, r);
        form.eval(&z, &mut values);
        scale = scale.max(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        if q < d {
            let dbar = ambient_dbar(form, &z, 1e-5);
            max_dbar = max_dbar.max(dbar.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    for _ in 0..points {
        let z = random_ball_point(&mut rng, d, 0.98);
        form.eval(&z, &mut values);
        let value = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if value > 1e-12 * scale.max(1.0) {
            return Err(FiberError::SupportViolation { radius: 0.98, value });
        }
    }
    let tolerance = 10.0 * grid.h() * grid.h() * scale;
    if max_dbar > tolerance {
        return Err(FiberError::NotClosed { max_dbar, tolerance });
    }
    Ok(ClosureReport { max_dbar, tolerance })
}

#[derive(Debug, Clone, Default)]
struct AnnulusSums {
    residual: f64,
    omega: f64,
    eta: f64,
}

/// Solves `∂̄η = ω` on the punctured ball: pull back to each chart of the
/// blow-up, apply `t^a I(t^{-a} ·)` along the fibers with `a = a(p, q, d)`, and
/// measure the residual `t^a ∂̄G − π^*ω` pushed down to the ambient norm.
pub fn solve_compact_support(
    form: Arc<dyn AmbientForm>,
    p: Exponent,
    options: &SolveOptions,
) -> Result<Solution, FiberError> {
    let a = index::a_index(p, form.degree() as u32, form.dim() as u32)?;
    solve_with_weight(form, a, p, options)
}

/// Same pipeline with an explicit fiber weight `a`; `p` only sets the `η` norms.
pub fn solve_with_weight(
    form: Arc<dyn AmbientForm>,
    a: i64,
    p: Exponent,
    options: &SolveOptions,
) -> Result<Solution, FiberError> {
    let (d, q) = (form.dim(), form.degree());
    index::check_degree(q as u32, d as u32)?;
    let grid = Grid::new(options.extent, options.n)?;
    let closure = check_closed(form.as_ref(), &grid, options.closure_points, options.seed)?;
    let plan = CauchyPlan::new(&grid);
    let base = BaseQuadrature::polydisc(d - 1, 1.0, options.base_rings, options.base_angles);
    let a32 = a as i32;
    let pf = p.to_f64();

    let mut sums = vec![AnnulusSums::default(); options.annuli.len()];
    let mut samples = Vec::new();
    for chart in 1..=d {
        let field: Arc<dyn FormField> = Arc::new(PullbackField::new(form.clone(), chart)?);
        let layout = field.layout();
        let lowered = layout.lowered()?;
        let mut chart_tau = Vec::new();
        for (w, bw) in base.points.iter().zip(&base.weights) {
            let stencil = BaseStencil {
                centers: vec![w.clone()],
                delta: options.stencil_delta,
            };
            let omega = SampledForm::sample(field.clone(), &grid, stencil.points());
            omega.check_support()?;
            // G = I(t^{-a} f_J) at every stencil point, as a (q−1)-form.
            let mut g = SampledForm::zero(lowered.clone(), &grid, stencil.points());
            for b in 0..omega.base_points.len() {
                for (c, j) in layout.fiber_indices().iter().enumerate() {
                    let f = omega.fiber_function(b, c).weighted(&grid, a32);
                    let slot = lowered.base_position(j).unwrap_or(0);
                    g.components[b][slot] = if a32 >= 0 {
                        plan.transform_refined(&f)?
                    } else {
                        plan.transform(&f)?
                    };
                }
            }
            let dbar_g = dbar_sampled(&g, &stencil)?;
            let weight_power: Vec<Complex64> = grid.nodes().map(|t| t.powi(a32)).collect();
            let tau: Vec<Vec<Complex64>> = g.components[0]
                .iter()
                .map(|comp| comp.iter().zip(&weight_power).map(|(v, w)| v * w).collect())
                .collect();

            accumulate_chart(
                &AccumulateInput {
                    form: form.as_ref(),
                    grid: &grid,
                    chart,
                    w,
                    base_weight: *bw,
                    layout: &layout,
                    lowered: &lowered,
                    omega: &omega.components[0],
                    dbar_g: &dbar_g.components[0],
                    tau: &tau,
                    weight_power: &weight_power,
                    annuli: &options.annuli,
                    p: pf,
                },
                &mut sums,
            );
            if options.keep_samples {
                chart_tau.push(tau);
            }
        }
        if options.keep_samples {
            samples.push(ChartSamples {
                chart,
                base_points: base.points.clone(),
                tau: chart_tau,
            });
        }
    }

    let annuli: Vec<AnnulusReport> = options
        .annuli
        .iter()
        .zip(&sums)
        .map(|(ring, s)| AnnulusReport {
            inner: ring.inner,
            outer: ring.outer,
            residual_l1: s.residual,
            omega_l1: s.omega,
            relative_residual: if s.omega > 0.0 { s.residual / s.omega } else { s.residual },
            eta_lp: if p.is_infinite() { s.eta } else { s.eta.powf(1.0 / pf) },
        })
        .collect();
    let max_relative_residual = annuli.iter().map(|a| a.relative_residual).fold(0.0, f64::max);
    Ok(Solution {
        report: SolveReport {
            p: p.to_string(),
            q,
            d,
            a,
            n: options.n,
            base_points: base.points.len(),
            closure,
            annuli,
            max_relative_residual,
        },
        samples,
        form,
        grid,
        a: a32,
    })
}

fn default_dim() -> usize {
    2
}

fn default_degree() -> usize {
    1
}

fn default_extent() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    0.05
}

/// Grid levels of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub levels: Vec<usize>,
    #[serde(default = "default_extent")]
    pub extent: f64,
}

/// Solver case file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCase {
    pub family: String,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_degree")]
    pub q: usize,
    /// Exponent; fixes the weight unless `weight` is given.
    pub p: Exponent,
    #[serde(default)]
    pub weight: Option<i64>,
    pub grid: GridSpec,
    #[serde(default)]
    pub annuli: Option<Vec<Ring>>,
    /// Bound on the relative residual per annulus at the finest level.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub base_rings: Option<usize>,
    #[serde(default)]
    pub base_angles: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub family: String,
    pub tolerance: f64,
    pub levels: Vec<SolveReport>,
    pub passed: bool,
}

impl SolverCase {
    pub fn options(&self, n: usize) -> SolveOptions {
        let mut options = SolveOptions::for_dim(self.d, n);
        options.extent = self.grid.extent;
        if let Some(annuli) = &self.annuli {
            options.annuli = annuli.clone();
        }
        if let Some(rings) = self.base_rings {
            options.base_rings = rings;
        }
        if let Some(angles) = self.base_angles {
            options.base_angles = angles;
        }
        if let Some(seed) = self.seed {
            options.seed = seed;
        }
        options
    }

    pub fn run(&self) -> Result<CaseReport, FiberError> {
        self.run_with(false)
    }

    /// Like [`SolverCase::run`], skipping annuli narrower than two grid cells.
    pub fn run_resolved(&self) -> Result<CaseReport, FiberError> {
        self.run_with(true)
    }

    fn run_with(&self, resolved_only: bool) -> Result<CaseReport, FiberError> {
        if self.grid.levels.is_empty() {
            return Err(FiberError::InvalidGrid("case lists no grid levels".into()));
        }
        let form = family(&self.family, self.d, self.q)?;
        let a = match self.weight {
            Some(a) => a,
            None => index::a_index(self.p, self.q as u32, self.d as u32)?,
        };
        let levels = self
            .grid
            .levels
            .iter()
            .map(|&n| {
                let options = if resolved_only {
                    self.options(n).resolved_annuli()
                } else {
                    self.options(n)
                };
                solve_with_weight(form.clone(), a, self.p, &options).map(|s| s.report)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let passed = levels
            .last()
            .is_some_and(|r| r.max_relative_residual <= self.tolerance);
        Ok(CaseReport {
            family: self.family.clone(),
            tolerance: self.tolerance,
            levels,
            passed,
        })
    }
}

struct AccumulateInput<'a> {
    form: &'a dyn AmbientForm,
    grid: &'a Grid,
    chart: usize,
    w: &'a [Complex64],
    base_weight: f64,
    layout: &'a FormLayout,
    lowered: &'a FormLayout,
    omega: &'a [Vec<Complex64>],
    dbar_g: &'a [Vec<Complex64>],
    tau: &'a [Vec<Complex64>],
    weight_power: &'a [Complex64],
    annuli: &'a [Ring],
    p: f64,
}

fn accumulate_chart(input: &AccumulateInput<'_>, sums: &mut [AnnulusSums]) {
    let grid = input.grid;
    let d = input.form.dim();
    let q = input.layout.degree();
    let volume_power = (2 * d - 2) as i32;
    let chart_subsets = subsets(d, q);
    let slots = layout_to_chart_slots(input.layout, &chart_subsets);
    let change = CoframeChange::new(d, q);
    let mut chart_residual = vec![ZERO; chart_subsets.len()];
    let mut ambient_residual = vec![ZERO; chart_subsets.len()];
    let mut omega_ambient = vec![ZERO; chart_subsets.len()];
    let rho = (1.0 + input.w.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
    let outermost = input.annuli.iter().map(|a| a.outer).fold(0.0, f64::max);
    for node in 0..grid.len() {
        let t = grid.node_at(node);
        let r = t.norm() * rho;
        if r > outermost {
            continue;
        }
        let Some(ring) = input.annuli.iter().position(|ring| ring.contains(r)) else {
            continue;
        };
        let pt = ChartPoint {
            chart: input.chart,
            fiber: t,
            base: input.w.to_vec(),
        };
        chart_residual.fill(ZERO);
        for (c, &s) in slots.iter().enumerate() {
            chart_residual[s] = input.dbar_g[c][node] * input.weight_power[node] - input.omega[c][node];
        }
        change.apply(&chart_residual, &pushdown_matrix(&pt), &mut ambient_residual);
        let z = chart_map(&pt).expect("valid chart");
        input.form.eval(&z, &mut omega_ambient);
        let eta = push_down_lowered(
            input.lowered,
            &input.tau.iter().map(|c| c[node]).collect::<Vec<_>>(),
            &pt,
        );
        let weight = grid.cell_area() * input.base_weight * t.norm().powi(volume_power);
        let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let s = &mut sums[ring];
        s.residual += norm(&ambient_residual) * weight;
        s.omega += norm(&omega_ambient) * weight;
        let eta_norm = norm(&eta);
        if input.p.is_infinite() {
            s.eta = s.eta.max(eta_norm);
        } else {
            s.eta += eta_norm.powf(input.p) * weight;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_flat_at_the_ends() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(0.9), 0.0);
        assert!((cutoff(0.675) - 0.5).abs() < 1e-12);
        let h = 1e-6;
        for r in [0.55, 0.6, 0.7, 0.8] {
            let fd = (cutoff(r + h) - cutoff(r - h)) / (2.0 * h);
            assert!((fd - cutoff_derivative(r)).abs() < 1e-6);
        }
    }

    fn check_potential(form: &dyn AmbientForm, potential: impl Fn(&[Complex64]) -> Complex64) {
        let z = [Complex64::new(0.3, 0.2), Complex64::new(-0.25, 0.4)];
        let h = 1e-6;
        let mut out = [ZERO; 2];
        form.eval(&z, &mut out);
        for k in 0..2 {
            let shifted = |u: Complex64| {
                let mut p = z;
                p[k] += u;
                potential(&p)
            };
            let dx = (shifted(Complex64::new(h, 0.0)) - shifted(Complex64::new(-h, 0.0))) / (2.0 * h);
            let dy = (shifted(Complex64::new(0.0, h)) - shifted(Complex64::new(0.0, -h))) / (2.0 * h);
            let dbar = (dx + Complex64::i() * dy) * 0.5;
            assert!((dbar - out[k]).norm() < 1e-6, "{k}: {dbar} vs {}", out[k]);
        }
    }

    #[test]
    fn families_are_dbar_of_their_potentials() {
        let radial = RadialSingular { d: 2 };
        check_potential(&radial, |z| radial.potential(z));
        let smooth = SmoothFamily { d: 2 };
        check_potential(&smooth, |z| smooth.potential(z));
    }

    #[test]
    fn pullback_of_radial_fiber_component() {
        // In chart 1 the dt̄ coefficient near t = 0 behaves like 1/(2|t|ρ).
        let field = PullbackField::new(Arc::new(RadialSingular { d: 2 }), 1).unwrap();
        let mut out = [ZERO; 2];
        let w = [Complex64::new(0.5, 0.0)];
        let t = Complex64::new(0.01, 0.0);
        field.eval(&w, t, &mut out);
        let rho = (1.25f64).sqrt();
        assert!((out[0].norm() - 1.0 / (2.0 * 0.01 * rho)).abs() < 1e-6 / 0.01);
    }

    #[test]
    fn non_closed_forms_are_rejected() {
        struct Bad;
        impl AmbientForm for Bad {
            fn dim(&self) -> usize {
                2
            }
            fn degree(&self) -> usize {
                1
            }
            fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
                let chi = cutoff(radius(z));
                out[0] = z[1].conj() * chi;
                out[1] = ZERO;
            }
        }
        let grid = Grid::new(1.0, 64).unwrap();
        assert!(matches!(check_closed(&Bad, &grid, 50, 1), Err(FiberError::NotClosed { .. })));
        assert!(check_closed(&SmoothFamily { d: 2 }, &grid, 50, 1).is_ok());
    }

    #[test]
    fn zero_form_gives_zero() {
        let mut opts = SolveOptions::for_dim(2, 16);
        opts.base_rings = 1;
        opts.base_angles = 3;
        let sol = solve_compact_support(Arc::new(ZeroForm { d: 2, q: 1 }), "2".parse().unwrap(), &opts).unwrap();
        assert!(sol.report.annuli.iter().all(|a| a.residual_l1 == 0.0 && a.eta_lp == 0.0));
        let eta = sol.eta_at(&[Complex64::new(0.2, 0.1), Complex64::new(0.05, 0.0)]).unwrap();
        assert_eq!(eta, vec![ZERO]);
    }
}
