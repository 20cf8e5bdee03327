use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::cauchy::{dbar_on_grid, CauchyPlan, FiberFunction, SourceFn};
use super::grid::Grid;
use super::FiberError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Ascending `k`-element subsets of `0..m`, in lexicographic order.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn walk(start: usize, m: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            walk(i + 1, m, k, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    if k <= m {
        walk(0, m, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// `(-1)^{#{j ∈ rest : j < k}}`, the sign of moving `dz̄_k` into ascending position.
pub fn insertion_sign(k: usize, rest: &[usize]) -> f64 {
    if rest.iter().filter(|&&j| j < k).count() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Components of a `(0, q)`-form in one fiber variable `ζ` and `base_dims`
/// base variables. Fiber components (coefficients of `dζ̄ ∧ dz̄_J`, `|J| = q − 1`)
/// come first, then base components (`dz̄_K`, `|K| = q`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormLayout {
    base_dims: usize,
    degree: usize,
    fiber: Vec<Vec<usize>>,
    base: Vec<Vec<usize>>,
}

impl FormLayout {
    pub fn new(base_dims: usize, degree: usize) -> Result<Self, FiberError> {
        if degree > base_dims + 1 {
            return Err(FiberError::LayoutMismatch(format!(
                "degree {degree} exceeds the dimension {}",
                base_dims + 1
            )));
        }
        let fiber = if degree == 0 {
            Vec::new()
        } else {
            subsets(base_dims, degree - 1)
        };
        Ok(FormLayout {
            base_dims,
            degree,
            fiber,
            base: subsets(base_dims, degree),
        })
    }

    pub fn base_dims(&self) -> usize {
        self.base_dims
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn fiber_indices(&self) -> &[Vec<usize>] {
        &self.fiber
    }

    pub fn base_indices(&self) -> &[Vec<usize>] {
        &self.base
    }

    pub fn fiber_count(&self) -> usize {
        self.fiber.len()
    }

    pub fn len(&self) -> usize {
        self.fiber.len() + self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fiber_position(&self, index: &[usize]) -> Option<usize> {
        self.fiber.iter().position(|j| j == index)
    }

    pub fn base_position(&self, index: &[usize]) -> Option<usize> {
        self.base
            .iter()
            .position(|k| k == index)
            .map(|k| k + self.fiber.len())
    }

    /// Layout of `∂̄` applied to forms of this layout.
    pub fn raised(&self) -> Result<Self, FiberError> {
        Self::new(self.base_dims, self.degree + 1)
    }

    pub fn lowered(&self) -> Result<Self, FiberError> {
        if self.degree == 0 {
            return Err(FiberError::ZeroDegree);
        }
        Self::new(self.base_dims, self.degree - 1)
    }
}

/// A `(0, q)`-form given by a closure of `(base, fiber)`.
pub trait FormField: Send + Sync {
    fn layout(&self) -> FormLayout;
    fn eval(&self, base: &[Complex64], fiber: Complex64, out: &mut [Complex64]);
}

type FormFn = dyn Fn(&[Complex64], Complex64, &mut [Complex64]) + Send + Sync;

pub struct FnForm {
    layout: FormLayout,
    f: Box<FormFn>,
}

impl FnForm {
    pub fn new<F>(layout: FormLayout, f: F) -> Self
    where
        F: Fn(&[Complex64], Complex64, &mut [Complex64]) + Send + Sync + 'static,
    {
        FnForm {
            layout,
            f: Box::new(f),
        }
    }
}

impl FormField for FnForm {
    fn layout(&self) -> FormLayout {
        self.layout.clone()
    }

    fn eval(&self, base: &[Complex64], fiber: Complex64, out: &mut [Complex64]) {
        (self.f)(base, fiber, out)
    }
}

/// Combines partial derivatives `∂/∂v̄` of a `q`-form into its `∂̄`.
/// `partial(v, c)` is the derivative of component `c` in variable `v`, where
/// `v = 0` is the fiber and `v = k + 1` is base variable `k`.
fn assemble_dbar(
    layout: &FormLayout,
    raised: &FormLayout,
    mut partial: impl FnMut(usize, usize) -> Complex64,
    out: &mut [Complex64],
) {
    for (slot, j) in raised.fiber_indices().iter().enumerate() {
        // ∂_ζ̄ g_J − Σ_{k∈J} sign(k, J∖k) ∂_k̄ f_{J∖k}
        let mut acc = match layout.base_position(j) {
            Some(c) => partial(0, c),
            None => ZERO,
        };
        for (pos, &k) in j.iter().enumerate() {
            let mut rest = j.clone();
            rest.remove(pos);
            if let Some(c) = layout.fiber_position(&rest) {
                acc -= partial(k + 1, c) * insertion_sign(k, &rest);
            }
        }
        out[slot] = acc;
    }
    let offset = raised.fiber_count();
    for (slot, l) in raised.base_indices().iter().enumerate() {
        let mut acc = ZERO;
        for (pos, &k) in l.iter().enumerate() {
            let mut rest = l.clone();
            rest.remove(pos);
            if let Some(c) = layout.base_position(&rest) {
                acc += partial(k + 1, c) * insertion_sign(k, &rest);
            }
        }
        out[offset + slot] = acc;
    }
}

/// `∂̄` of a form field by centered differences of the closure.
pub struct DbarField {
    inner: Arc<dyn FormField>,
    step: f64,
    layout: FormLayout,
    raised: FormLayout,
}

impl DbarField {
    pub fn new(inner: Arc<dyn FormField>, step: f64) -> Result<Self, FiberError> {
        let layout = inner.layout();
        let raised = layout.raised()?;
        Ok(DbarField {
            inner,
            step,
            layout,
            raised,
        })
    }
}

impl FormField for DbarField {
    fn layout(&self) -> FormLayout {
        self.raised.clone()
    }

    fn eval(&self, base: &[Complex64], fiber: Complex64, out: &mut [Complex64]) {
        let m = self.layout.len();
        let vars = self.layout.base_dims() + 1;
        let h = self.step;
        // partials[v * m + c] = ∂_{v̄} component c
        let mut partials = vec![ZERO; vars * m];
        let mut plus = vec![ZERO; m];
        let mut minus = vec![ZERO; m];
        let mut shifted = base.to_vec();
        for v in 0..vars {
            for (axis, unit) in [(0, Complex64::new(h, 0.0)), (1, Complex64::new(0.0, h))] {
                if v == 0 {
                    self.inner.eval(base, fiber + unit, &mut plus);
                    self.inner.eval(base, fiber - unit, &mut minus);
                } else {
                    shifted[v - 1] = base[v - 1] + unit;
                    self.inner.eval(&shifted, fiber, &mut plus);
                    shifted[v - 1] = base[v - 1] - unit;
                    self.inner.eval(&shifted, fiber, &mut minus);
                    shifted[v - 1] = base[v - 1];
                }
                let factor = if axis == 0 {
                    Complex64::new(0.25 / h, 0.0)
                } else {
                    Complex64::new(0.0, 0.25 / h)
                };
                for c in 0..m {
                    partials[v * m + c] += (plus[c] - minus[c]) * factor;
                }
            }
        }
        assemble_dbar(&self.layout, &self.raised, |v, c| partials[v * m + c], out);
    }
}

/// Base points `c`, `c ± δ e_k`, `c ± iδ e_k` used for base-direction differences.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseStencil {
    pub centers: Vec<Vec<Complex64>>,
    pub delta: f64,
}

impl BaseStencil {
    pub fn points_for(center: &[Complex64], delta: f64) -> Vec<Vec<Complex64>> {
        let mut points = vec![center.to_vec()];
        for k in 0..center.len() {
            for unit in [
                Complex64::new(delta, 0.0),
                Complex64::new(-delta, 0.0),
                Complex64::new(0.0, delta),
                Complex64::new(0.0, -delta),
            ] {
                let mut p = center.to_vec();
                p[k] += unit;
                points.push(p);
            }
        }
        points
    }

    pub fn points(&self) -> Vec<Vec<Complex64>> {
        self.centers
            .iter()
            .flat_map(|c| Self::points_for(c, self.delta))
            .collect()
    }

    pub fn stride(&self) -> usize {
        1 + 4 * self.centers.first().map_or(0, Vec::len)
    }
}

/// `∂/∂w̄_k` at the stencil centre from the four shifted samples.
fn stencil_partial(samples: &[&[Complex64]], k: usize, node: usize, delta: f64) -> Complex64 {
    let at = |s: usize| samples[1 + 4 * k + s][node];
    let dx = (at(0) - at(1)) / (2.0 * delta);
    let dy = (at(2) - at(3)) / (2.0 * delta);
    (dx + Complex64::i() * dy) * 0.5
}

/// Grid samples of a form at a list of base points.
#[derive(Clone)]
pub struct SampledForm {
    pub layout: FormLayout,
    pub grid: Grid,
    pub base_points: Vec<Vec<Complex64>>,
    /// `components[b][c]` holds component `c` at base point `b` on every node.
    pub components: Vec<Vec<Vec<Complex64>>>,
    pub source: Option<Arc<dyn FormField>>,
}

impl std::fmt::Debug for SampledForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledForm")
            .field("layout", &self.layout)
            .field("base_points", &self.base_points.len())
            .field("has_source", &self.source.is_some())
            .finish()
    }
}

impl SampledForm {
    pub fn sample(field: Arc<dyn FormField>, grid: &Grid, base_points: Vec<Vec<Complex64>>) -> Self {
        let layout = field.layout();
        let components = base_points
            .iter()
            .map(|b| sample_components(field.as_ref(), grid, b))
            .collect();
        SampledForm {
            layout,
            grid: grid.clone(),
            base_points,
            components,
            source: Some(field),
        }
    }

    pub fn zero(layout: FormLayout, grid: &Grid, base_points: Vec<Vec<Complex64>>) -> Self {
        let components = base_points
            .iter()
            .map(|_| vec![vec![ZERO; grid.len()]; layout.len()])
            .collect();
        SampledForm {
            layout,
            grid: grid.clone(),
            base_points,
            components,
            source: None,
        }
    }

    /// Component `c` at base point `b`, carrying the source closure when known.
    pub fn fiber_function(&self, b: usize, c: usize) -> FiberFunction {
        let source = self.source.clone().map(|field| {
            let base = self.base_points[b].clone();
            let len = self.layout.len();
            let f: SourceFn = Arc::new(move |z: Complex64| {
                let mut out = vec![ZERO; len];
                field.eval(&base, z, &mut out);
                out[c]
            });
            f
        });
        FiberFunction {
            values: self.components[b][c].clone(),
            source,
        }
    }

    pub fn check_support(&self) -> Result<(), FiberError> {
        for comps in &self.components {
            for values in comps {
                self.grid.check_support(values)?;
            }
        }
        Ok(())
    }

    pub fn scaled_sum(&self, alpha: Complex64, other: &SampledForm, beta: Complex64) -> Result<Self, FiberError> {
        if self.layout != other.layout || self.base_points != other.base_points {
            return Err(FiberError::LayoutMismatch("forms live on different samplings".into()));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * alpha + v * beta).collect())
                    .collect()
            })
            .collect();
        Ok(SampledForm {
            layout: self.layout.clone(),
            grid: self.grid.clone(),
            base_points: self.base_points.clone(),
            components,
            source: None,
        })
    }
}

pub fn sample_components(field: &dyn FormField, grid: &Grid, base: &[Complex64]) -> Vec<Vec<Complex64>> {
    let m = field.layout().len();
    let rows: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut out = vec![ZERO; m];
            field.eval(base, grid.node_at(k), &mut out);
            out
        })
        .collect();
    (0..m)
        .map(|c| rows.iter().map(|r| r[c]).collect())
        .collect()
}

/// `S_q ω = Σ_J I(f_J) dz̄_J`; components without `dζ̄` are dropped.
pub fn s_operator(form: &SampledForm, plan: &CauchyPlan) -> Result<SampledForm, FiberError> {
    fiberwise(form, plan, |f| plan.transform(f))
}

/// `Σ_J t^a I(ζ^{-a} f_J) dz̄_J`.
pub fn weighted_s_operator(
    form: &SampledForm,
    plan: &CauchyPlan,
    a: i32,
) -> Result<SampledForm, FiberError> {
    fiberwise(form, plan, |f| plan.weighted_transform(f, a))
}

fn fiberwise<T>(form: &SampledForm, plan: &CauchyPlan, transform: T) -> Result<SampledForm, FiberError>
where
    T: Fn(&FiberFunction) -> Result<Vec<Complex64>, FiberError>,
{
    let lowered = form.layout.lowered()?;
    if plan.grid() != &form.grid {
        return Err(FiberError::LayoutMismatch("plan and form use different grids".into()));
    }
    let mut out = SampledForm::zero(lowered.clone(), &form.grid, form.base_points.clone());
    let offset = lowered.fiber_count();
    for b in 0..form.base_points.len() {
        for (c, j) in form.layout.fiber_indices().iter().enumerate() {
            let f = form.fiber_function(b, c);
            let slot = lowered
                .base_position(j)
                .expect("fiber multi-indices of degree q are base multi-indices of degree q - 1");
            debug_assert!(slot >= offset);
            out.components[b][slot] = transform(&f)?;
        }
    }
    Ok(out)
}

/// `∂̄` of a form sampled on a [`BaseStencil`]: grid differences in the fiber,
/// stencil differences in the base. The result lives on the stencil centres.
pub fn dbar_sampled(form: &SampledForm, stencil: &BaseStencil) -> Result<SampledForm, FiberError> {
    let stride = stencil.stride();
    if form.base_points != stencil.points() {
        return Err(FiberError::LayoutMismatch("form is not sampled on the stencil".into()));
    }
    let raised = form.layout.raised()?;
    let mut out = SampledForm::zero(raised.clone(), &form.grid, stencil.centers.clone());
    for (ci, block) in form.components.chunks(stride).enumerate() {
        out.components[ci] = dbar_block(&form.layout, &raised, &form.grid, block, stencil.delta);
    }
    Ok(out)
}

fn dbar_block(
    layout: &FormLayout,
    raised: &FormLayout,
    grid: &Grid,
    block: &[Vec<Vec<Complex64>>],
    delta: f64,
) -> Vec<Vec<Complex64>> {
    // partials[v][c]: ∂/∂v̄ of component c on every node.
    let mut partials: Vec<Vec<Vec<Complex64>>> =
        vec![block[0].iter().map(|v| dbar_on_grid(grid, v)).collect()];
    for k in 0..layout.base_dims() {
        partials.push(
            (0..layout.len())
                .map(|c| {
                    let samples: Vec<&[Complex64]> = block.iter().map(|s| s[c].as_slice()).collect();
                    (0..grid.len())
                        .map(|node| stencil_partial(&samples, k, node, delta))
                        .collect()
                })
                .collect(),
        );
    }
    let mut out = vec![vec![ZERO; grid.len()]; raised.len()];
    let mut scratch = vec![ZERO; raised.len()];
    for node in 0..grid.len() {
        assemble_dbar(layout, raised, |v, c| partials[v][c][node], &mut scratch);
        for (c, v) in scratch.iter().enumerate() {
            out[c][node] = *v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub linf: f64,
}

impl Norms {
    fn accumulate(&mut self, value: f64, weight: f64) {
        self.l1 += value * weight;
        self.linf = self.linf.max(value);
    }

    pub fn relative_to(&self, reference: &Norms) -> Norms {
        Norms {
            l1: self.l1 / reference.l1,
            linf: self.linf / reference.linf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyResidual {
    pub n: usize,
    /// `ω − ∂̄S_q ω − S_{q+1} ∂̄ω`.
    pub res1: Norms,
    /// `ω − ∂̄S_q ω`, small only for `∂̄`-closed input.
    pub res2: Norms,
    pub omega: Norms,
}

impl HomotopyResidual {
    pub fn relative(&self) -> (Norms, Norms) {
        (self.res1.relative_to(&self.omega), self.res2.relative_to(&self.omega))
    }
}

/// Base points with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseQuadrature {
    pub points: Vec<Vec<Complex64>>,
    pub weights: Vec<f64>,
}

impl BaseQuadrature {
    /// Equal-area polar rule on the disc of the given radius, tensored over `dims` factors.
    pub fn polydisc(dims: usize, radius: f64, rings: usize, angles: usize) -> Self {
        let mut disc = Vec::new();
        for r in 0..rings {
            let rho = radius * ((r as f64 + 0.5) / rings as f64).sqrt();
            for k in 0..angles {
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5 * (r % 2) as f64) / angles as f64;
                disc.push(Complex64::from_polar(rho, theta));
            }
        }
        let w = std::f64::consts::PI * radius * radius / disc.len() as f64;
        let mut points: Vec<Vec<Complex64>> = vec![Vec::new()];
        let mut weights = vec![1.0];
        for _ in 0..dims {
            let mut next_points = Vec::new();
            let mut next_weights = Vec::new();
            for (p, pw) in points.iter().zip(&weights) {
                for z in &disc {
                    let mut q = p.clone();
                    q.push(*z);
                    next_points.push(q);
                    next_weights.push(pw * w);
                }
            }
            points = next_points;
            weights = next_weights;
        }
        BaseQuadrature { points, weights }
    }
}

/// Residuals of the homotopy identity on the fiber grid, integrated over the base
/// quadrature. `∂̄ω` is taken by closure differences, `∂̄Sω` from the samples.
pub fn homotopy_residual(
    field: Arc<dyn FormField>,
    plan: &CauchyPlan,
    base: &BaseQuadrature,
    delta: f64,
) -> Result<HomotopyResidual, FiberError> {
    let layout = field.layout();
    if layout.degree() == 0 {
        return Err(FiberError::ZeroDegree);
    }
    let grid = plan.grid().clone();
    let raised = layout.raised().ok();
    let dbar_omega: Option<Arc<dyn FormField>> = match raised {
        Some(_) => Some(Arc::new(DbarField::new(field.clone(), 1e-4)?)),
        None => None,
    };

    let per_point: Vec<(Norms, Norms, Norms)> = base
        .points
        .iter()
        .zip(&base.weights)
        .map(|(center, &bw)| -> Result<_, FiberError> {
            let stencil = BaseStencil {
                centers: vec![center.clone()],
                delta,
            };
            let omega = SampledForm::sample(field.clone(), &grid, stencil.points());
            omega.check_support()?;
            let s_omega = s_operator(&omega, plan)?;
            let dbar_s = dbar_sampled(&s_omega, &stencil)?;

            let mut correction = vec![vec![ZERO; grid.len()]; layout.len()];
            if let Some(dw) = &dbar_omega {
                let dw_sampled = SampledForm::sample(dw.clone(), &grid, vec![center.clone()]);
                let s_dw = s_operator(&dw_sampled, plan)?;
                // S_{q+1}∂̄ω has the layout of ω; its fiber components vanish.
                correction = s_dw.components.into_iter().next().unwrap_or_default();
            }

            let n = grid.n();
            let mut r1 = Norms { l1: 0.0, linf: 0.0 };
            let mut r2 = r1;
            let mut om = r1;
            let area = grid.cell_area() * bw;
            for node in 0..grid.len() {
                let (i, j) = (node % n, node / n);
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    continue;
                }
                let (mut s1, mut s2, mut so) = (0.0, 0.0, 0.0);
                for c in 0..layout.len() {
                    let w = omega.components[0][c][node];
                    let e2 = w - dbar_s.components[0][c][node];
                    let e1 = e2 - correction[c][node];
                    s1 += e1.norm_sqr();
                    s2 += e2.norm_sqr();
                    so += w.norm_sqr();
                }
                r1.accumulate(s1.sqrt(), area);
                r2.accumulate(s2.sqrt(), area);
                om.accumulate(so.sqrt(), area);
            }
            Ok((r1, r2, om))
        })
        .collect::<Result<_, _>>()?;

    let mut total = (
        Norms { l1: 0.0, linf: 0.0 },
        Norms { l1: 0.0, linf: 0.0 },
        Norms { l1: 0.0, linf: 0.0 },
    );
    for (r1, r2, om) in per_point {
        total.0.l1 += r1.l1;
        total.0.linf = total.0.linf.max(r1.linf);
        total.1.l1 += r2.l1;
        total.1.linf = total.1.linf.max(r2.linf);
        total.2.l1 += om.l1;
        total.2.linf = total.2.linf.max(om.linf);
    }
    Ok(HomotopyResidual {
        n: grid.n(),
        res1: total.0,
        res2: total.1,
        omega: total.2,
    })
}

/// Smooth bump `exp(1 − 1/(1 − x²))` for `|x| < 1`, zero outside; equals 1 at 0.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// A non-closed smooth `(0,1)`-form in one base variable, supported in
/// `|ζ| < fiber_radius`.
pub fn smooth_test_form(fiber_radius: f64) -> FnForm {
    let layout = FormLayout::new(1, 1).expect("valid layout");
    FnForm::new(layout, move |base, zeta, out| {
        let z1 = base[0];
        let profile = bump(zeta.norm() / fiber_radius) * (-z1.norm_sqr()).exp();
        out[0] = (Complex64::new(1.0, 0.0) + z1 * 0.5 + zeta.conj() * Complex64::new(0.0, 0.3)) * profile;
        out[1] = (zeta * 0.5 + z1.conj() + Complex64::new(0.2, 0.0)) * profile;
    })
}

/// `∂̄` of a smooth compactly supported function of `(z_1, ζ)`, a closed `(0,1)`-form.
pub fn closed_test_form(fiber_radius: f64) -> Result<DbarField, FiberError> {
    let layout = FormLayout::new(1, 0)?;
    let potential = FnForm::new(layout, move |base, zeta, out| {
        let z1 = base[0];
        out[0] = bump(zeta.norm() / fiber_radius)
            * (-z1.norm_sqr()).exp()
            * (Complex64::new(1.0, 0.0) + zeta * z1.conj() * 0.5);
    });
    DbarField::new(Arc::new(potential), 1e-5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::cauchy::cauchy_transform;

    #[test]
    fn subsets_are_ascending_and_counted() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
        assert!(subsets(1, 2).is_empty());
    }

    #[test]
    fn layout_counts() {
        let l = FormLayout::new(2, 2).unwrap();
        assert_eq!(l.fiber_indices(), &[vec![0], vec![1]]);
        assert_eq!(l.base_indices(), &[vec![0, 1]]);
        assert_eq!(l.base_position(&[0, 1]), Some(2));
        assert!(FormLayout::new(1, 3).is_err());
        assert_eq!(FormLayout::new(1, 0).unwrap().lowered(), Err(FiberError::ZeroDegree));
    }

    #[test]
    fn dbar_of_dbar_vanishes() {
        let potential: Arc<dyn FormField> = Arc::new(FnForm::new(FormLayout::new(2, 0).unwrap(), |b, z, out| {
            out[0] = (b[0] * z.conj() + b[1].conj() * b[0].conj() * z).exp();
        }));
        let first: Arc<dyn FormField> = Arc::new(DbarField::new(potential, 1e-3).unwrap());
        let second = DbarField::new(first, 1e-3).unwrap();
        let mut out = vec![ZERO; second.layout().len()];
        let base = [Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.4)];
        second.eval(&base, Complex64::new(0.2, 0.1), &mut out);
        assert!(out.iter().all(|v| v.norm() < 1e-4), "{out:?}");
    }

    #[test]
    fn dbar_of_conjugate_coordinates() {
        // u = ζ̄ + 2 z̄_1 gives dζ̄ + 2 dz̄_1.
        let potential: Arc<dyn FormField> = Arc::new(FnForm::new(FormLayout::new(1, 0).unwrap(), |b, z, out| {
            out[0] = z.conj() + b[0].conj() * 2.0;
        }));
        let d = DbarField::new(potential, 1e-3).unwrap();
        let mut out = vec![ZERO; 2];
        d.eval(&[Complex64::new(0.5, 0.5)], Complex64::new(-0.1, 0.2), &mut out);
        assert!((out[0] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((out[1] - Complex64::new(2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn s_drops_pure_base_components() {
        let grid = Grid::new(1.0, 16).unwrap();
        let plan = CauchyPlan::new(&grid);
        let field: Arc<dyn FormField> = Arc::new(FnForm::new(FormLayout::new(1, 1).unwrap(), |_, z, out| {
            out[0] = ZERO;
            out[1] = Complex64::new(bump(z.norm() / 0.8), 0.0);
        }));
        let form = SampledForm::sample(field, &grid, vec![vec![ZERO]]);
        let s = s_operator(&form, &plan).unwrap();
        assert!(s.components[0][0].iter().all(|v| *v == ZERO));
    }

    #[test]
    fn s_of_a_function_form_matches_the_transform() {
        let grid = Grid::new(1.0, 32).unwrap();
        let plan = CauchyPlan::new(&grid);
        let field: Arc<dyn FormField> = Arc::new(FnForm::new(FormLayout::new(0, 1).unwrap(), |_, z, out| {
            out[0] = Complex64::new(bump(z.norm() / 0.7), z.re);
        }));
        let form = SampledForm::sample(field, &grid, vec![vec![]]);
        let s = s_operator(&form, &plan).unwrap();
        let f = form.fiber_function(0, 0);
        for k in [5, 300, 777] {
            let direct = cauchy_transform(&grid, &f, grid.node_at(k)).unwrap().value;
            assert!((s.components[0][0][k] - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn s_rejects_functions() {
        let grid = Grid::new(1.0, 16).unwrap();
        let plan = CauchyPlan::new(&grid);
        let form = SampledForm::zero(FormLayout::new(1, 0).unwrap(), &grid, vec![vec![ZERO]]);
        assert_eq!(s_operator(&form, &plan).unwrap_err(), FiberError::ZeroDegree);
    }

    #[test]
    fn homotopy_of_zero_is_zero() {
        let grid = Grid::new(1.0, 16).unwrap();
        let plan = CauchyPlan::new(&grid);
        let field: Arc<dyn FormField> = Arc::new(FnForm::new(FormLayout::new(1, 1).unwrap(), |_, _, out| {
            out.fill(ZERO);
        }));
        let base = BaseQuadrature::polydisc(1, 0.5, 1, 3);
        let r = homotopy_residual(field, &plan, &base, 1e-3).unwrap();
        assert_eq!((r.res1.l1, r.res2.l1), (0.0, 0.0));
    }

    #[test]
    fn polydisc_weights_sum_to_volume() {
        let q = BaseQuadrature::polydisc(2, 1.0, 2, 6);
        assert_eq!(q.points.len(), 144);
        let total: f64 = q.weights.iter().sum();
        assert!((total - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }
}
