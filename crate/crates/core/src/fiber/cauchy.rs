use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;
use super::FiberError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Ring-mass ratio above which the weighted integrand is treated as non-integrable.
pub const WEIGHT_VIOLATION_RATIO: f64 = 0.9;

const MULTIPOLE_TERMS: usize = 24;

pub type SourceFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Fiber samples on a grid, optionally backed by the function they came from.
/// The source is used for off-grid values (the pole subtraction at an
/// arbitrary target and the polar subgrid).
#[derive(Clone)]
pub struct FiberFunction {
    pub values: Vec<Complex64>,
    pub source: Option<SourceFn>,
}

impl std::fmt::Debug for FiberFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberFunction")
            .field("len", &self.values.len())
            .field("has_source", &self.source.is_some())
            .finish()
    }
}

impl FiberFunction {
    pub fn from_samples(values: Vec<Complex64>) -> Self {
        FiberFunction {
            values,
            source: None,
        }
    }

    pub fn from_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        let source: SourceFn = Arc::new(f);
        let values = grid.sample(|z| source(z));
        FiberFunction {
            values,
            source: Some(source),
        }
    }

    pub fn value_at(&self, grid: &Grid, t: Complex64) -> Complex64 {
        match &self.source {
            Some(f) => f(t),
            None => grid.interpolate(&self.values, t),
        }
    }

    /// `ζ^{-a} f`.
    pub fn weighted(&self, grid: &Grid, a: i32) -> FiberFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * grid.node_at(k).powi(-a))
            .collect();
        let source = self.source.clone().map(|f| {
            let weighted: SourceFn = Arc::new(move |z: Complex64| f(z) * z.powi(-a));
            weighted
        });
        FiberFunction { values, source }
    }

    fn check_len(&self, grid: &Grid) -> Result<(), FiberError> {
        if self.values.len() != grid.len() {
            return Err(FiberError::LayoutMismatch(format!(
                "{} samples on a grid of {} nodes",
                self.values.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformValue {
    pub value: Complex64,
    /// The target lay outside the grid; the kernel was smooth there and no
    /// pole subtraction was applied.
    pub far_field: bool,
}

/// Quadrature nodes covering the refinement block: four triangles from the
/// centre to each side, geometric rings in the radius, two Gauss points per ring.
#[derive(Debug, Clone)]
pub struct PolarRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub ring: Vec<usize>,
    pub rings: usize,
}

impl PolarRule {
    pub fn for_grid(grid: &Grid) -> Self {
        let refine = grid.refinement();
        let half = grid.block_half_width();
        let per_side = refine.angles / 4;
        // Angles are spaced evenly along each side (u = tan φ), which makes the
        // rule integrate constants over the block exactly.
        let du = 2.0 / per_side as f64;
        let gauss = 0.5 / 3f64.sqrt();
        let mut rule = PolarRule {
            nodes: Vec::new(),
            weights: Vec::new(),
            ring: Vec::new(),
            rings: refine.rings,
        };
        for side in 0..4 {
            let normal = side as f64 * FRAC_PI_2;
            for k in 0..per_side {
                let u = -1.0 + (k as f64 + 0.5) * du;
                let dphi = du / (1.0 + u * u);
                let direction = Complex64::from_polar(1.0, normal + u.atan());
                let radii = refine.ring_radii(half * (1.0 + u * u).sqrt());
                for (ring, pair) in radii.windows(2).enumerate() {
                    let (outer, inner) = (pair[0], pair[1]);
                    let mid = 0.5 * (outer + inner);
                    let width = outer - inner;
                    for r in [mid - gauss * width, mid + gauss * width] {
                        rule.nodes.push(direction * r);
                        rule.weights.push(0.5 * width * r * dphi);
                        rule.ring.push(ring);
                    }
                }
            }
        }
        rule
    }

    pub fn sample(&self, grid: &Grid, f: &FiberFunction) -> Vec<Complex64> {
        self.nodes.iter().map(|&z| f.value_at(grid, z)).collect()
    }

    /// `∫ |g|` over each ring, outermost first.
    pub fn ring_masses(&self, values: &[Complex64]) -> Vec<f64> {
        let mut masses = vec![0.0; self.rings];
        for ((v, w), ring) in values.iter().zip(&self.weights).zip(&self.ring) {
            masses[*ring] += v.norm() * w;
        }
        masses
    }
}

/// Fails when the innermost ring masses stop decaying, which for `|g| ~ |ζ|^γ`
/// happens as `γ` approaches the integrability limit `-2`.
pub fn check_weight(masses: &[f64]) -> Result<(), FiberError> {
    let tail = &masses[masses.len().saturating_sub(3)..];
    let peak = masses.iter().cloned().fold(0.0, f64::max);
    for pair in tail.windows(2) {
        if pair[0] > 1e-12 * peak && pair[0] > 0.0 {
            let ratio = pair[1] / pair[0];
            if ratio > WEIGHT_VIOLATION_RATIO {
                return Err(FiberError::WeightViolation { ratio });
            }
        }
    }
    Ok(())
}

fn direct_sum(
    grid: &Grid,
    f: &FiberFunction,
    t: Complex64,
    skip_block: bool,
    subtract: Complex64,
) -> Complex64 {
    let area = grid.cell_area();
    let mut sum = ZERO;
    for (k, &v) in f.values.iter().enumerate() {
        if skip_block && grid.in_block(k) {
            continue;
        }
        let zeta = grid.node_at(k);
        if zeta == t {
            continue;
        }
        sum += (v - subtract) * area / (t - zeta);
    }
    sum
}

fn polar_sum(rule: &PolarRule, values: &[Complex64], t: Complex64, subtract: Complex64) -> Complex64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .zip(values)
        .filter(|((z, _), _)| **z != t)
        .map(|((z, w), v)| (v - subtract) * *w / (t - z))
        .sum()
}

/// `(1/π) ∫ f(ζ)/(t − ζ) dA(ζ)` at one target: midpoint rule with the pole
/// subtracted over the whole box and the kernel integrated exactly there.
pub fn cauchy_transform(
    grid: &Grid,
    f: &FiberFunction,
    t: Complex64,
) -> Result<TransformValue, FiberError> {
    f.check_len(grid)?;
    if !grid.contains(t) {
        let value = direct_sum(grid, f, t, false, ZERO) / PI;
        return Ok(TransformValue {
            value,
            far_field: true,
        });
    }
    let ft = f.value_at(grid, t);
    let value = (direct_sum(grid, f, t, false, ft) + ft * grid.box_kernel_integral(t)) / PI;
    Ok(TransformValue {
        value,
        far_field: false,
    })
}

/// As [`cauchy_transform`], with the block around `0` integrated on the polar
/// subgrid instead of the midpoint grid.
pub fn cauchy_transform_refined(
    grid: &Grid,
    f: &FiberFunction,
    t: Complex64,
) -> Result<TransformValue, FiberError> {
    f.check_len(grid)?;
    let rule = PolarRule::for_grid(grid);
    let polar = rule.sample(grid, f);
    check_weight(&rule.ring_masses(&polar))?;
    if !grid.contains(t) {
        let value = (direct_sum(grid, f, t, true, ZERO) + polar_sum(&rule, &polar, t, ZERO)) / PI;
        return Ok(TransformValue {
            value,
            far_field: true,
        });
    }
    let ft = f.value_at(grid, t);
    let value = (direct_sum(grid, f, t, true, ft)
        + ft * grid.box_kernel_integral(t)
        + polar_sum(&rule, &polar, t, ft))
        / PI;
    Ok(TransformValue {
        value,
        far_field: false,
    })
}

/// `t^a · I(ζ^{-a} f)(t)`; the polar subgrid is used when `a >= 0`, where `f`
/// itself may carry the integrable singularity at `0`.
pub fn weighted_transform(
    grid: &Grid,
    f: &FiberFunction,
    a: i32,
    t: Complex64,
) -> Result<TransformValue, FiberError> {
    let g = f.weighted(grid, a);
    let inner = if a >= 0 {
        cauchy_transform_refined(grid, &g, t)?
    } else {
        cauchy_transform(grid, &g, t)?
    };
    Ok(TransformValue {
        value: inner.value * t.powi(a),
        far_field: inner.far_field,
    })
}

/// Whole-grid evaluation by FFT convolution.
pub struct CauchyPlan {
    grid: Grid,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    correction: Vec<Complex64>,
    block_correction: Vec<Complex64>,
    rule: PolarRule,
}

impl std::fmt::Debug for CauchyPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyPlan").field("grid", &self.grid).finish()
    }
}

impl CauchyPlan {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let size = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let h = grid.h();
        let offset = |m: usize| if m < n { m as f64 } else { m as f64 - size as f64 };
        let mut kernel = vec![ZERO; size * size];
        for my in 0..size {
            for mx in 0..size {
                if mx == 0 && my == 0 {
                    continue;
                }
                kernel[my * size + mx] = Complex64::new(h / PI, 0.0)
                    / Complex64::new(offset(mx), offset(my));
            }
        }
        let mut plan = CauchyPlan {
            grid: grid.clone(),
            size,
            forward,
            inverse,
            kernel_hat: Vec::new(),
            correction: Vec::new(),
            block_correction: Vec::new(),
            rule: PolarRule::for_grid(grid),
        };
        plan.fft2(&mut kernel, false);
        plan.kernel_hat = kernel;

        let ones = vec![Complex64::new(1.0, 0.0); grid.len()];
        let outside: Vec<Complex64> = (0..grid.len())
            .map(|k| if grid.in_block(k) { ZERO } else { ones[k] })
            .collect();
        let conv_all = plan.convolve(&ones);
        let conv_outside = plan.convolve(&outside);
        plan.correction = (0..grid.len())
            .map(|k| grid.box_kernel_integral(grid.node_at(k)) / PI - conv_all[k])
            .collect();
        plan.block_correction = (0..grid.len())
            .map(|k| {
                let t = grid.node_at(k);
                (grid.box_kernel_integral(t) - grid.block_kernel_integral(t)) / PI
                    - conv_outside[k]
            })
            .collect();
        plan
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let s = self.size;
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(data);
        let mut transposed = vec![ZERO; s * s];
        transpose(data, &mut transposed, s);
        fft.process(&mut transposed);
        transpose(&transposed, data, s);
    }

    /// `Σ_{j ≠ i} h² v_j / (π (t_i − ζ_j))` at every node.
    pub fn convolve(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        let s = self.size;
        let mut buf = vec![ZERO; s * s];
        for j in 0..n {
            buf[j * s..j * s + n].copy_from_slice(&values[j * n..(j + 1) * n]);
        }
        self.fft2(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft2(&mut buf, true);
        let scale = 1.0 / (s * s) as f64;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            out.extend(buf[j * s..j * s + n].iter().map(|v| v * scale));
        }
        out
    }

    /// Cauchy transform at every node.
    pub fn transform(&self, f: &FiberFunction) -> Result<Vec<Complex64>, FiberError> {
        f.check_len(&self.grid)?;
        let mut out = self.convolve(&f.values);
        for ((o, v), c) in out.iter_mut().zip(&f.values).zip(&self.correction) {
            *o += v * c;
        }
        Ok(out)
    }

    /// Cauchy transform at every node with the polar subgrid around `0`.
    pub fn transform_refined(&self, f: &FiberFunction) -> Result<Vec<Complex64>, FiberError> {
        let grid = &self.grid;
        f.check_len(grid)?;
        let polar = self.rule.sample(grid, f);
        check_weight(&self.rule.ring_masses(&polar))?;

        let outside: Vec<Complex64> = f
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| if grid.in_block(k) { ZERO } else { *v })
            .collect();
        let mut out = self.convolve(&outside);

        let near_radius = 4.0 * grid.block_half_width();
        let moments: Vec<Complex64> = (0..MULTIPOLE_TERMS)
            .map(|m| {
                self.rule
                    .nodes
                    .iter()
                    .zip(&self.rule.weights)
                    .zip(&polar)
                    .map(|((z, w), v)| v * z.powi(m as i32) * *w)
                    .sum()
            })
            .collect();
        let block_part: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let t = grid.node_at(k);
                let ft = f.values[k];
                if t.re.abs().max(t.im.abs()) < near_radius {
                    polar_sum(&self.rule, &polar, t, ft) + ft * grid.block_kernel_integral(t)
                } else {
                    let inv = t.inv();
                    let mut power = inv;
                    let mut acc = ZERO;
                    for m in &moments {
                        acc += m * power;
                        power *= inv;
                    }
                    acc
                }
            })
            .collect();
        for k in 0..grid.len() {
            out[k] += f.values[k] * self.block_correction[k] + block_part[k] / PI;
        }
        Ok(out)
    }

    /// `t^a · I(ζ^{-a} f)` at every node.
    pub fn weighted_transform(
        &self,
        f: &FiberFunction,
        a: i32,
    ) -> Result<Vec<Complex64>, FiberError> {
        let g = f.weighted(&self.grid, a);
        let inner = if a >= 0 {
            self.transform_refined(&g)?
        } else {
            self.transform(&g)?
        };
        Ok(inner
            .into_iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.node_at(k).powi(a))
            .collect())
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], s: usize) {
    const TILE: usize = 32;
    for jb in (0..s).step_by(TILE) {
        for ib in (0..s).step_by(TILE) {
            for j in jb..(jb + TILE).min(s) {
                for i in ib..(ib + TILE).min(s) {
                    dst[i * s + j] = src[j * s + i];
                }
            }
        }
    }
}

/// Centered differences for `∂/∂ζ̄ = (∂_x + i ∂_y)/2` at every node; one-sided
/// on the outermost ring.
pub fn dbar_on_grid(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let h = grid.h();
    let at = |i: usize, j: usize| values[j * n + i];
    let diff = |lo: Complex64, hi: Complex64, span: f64| (hi - lo) / (span * h);
    let mut out = vec![ZERO; n * n];
    for j in 0..n {
        for i in 0..n {
            let dx = match i {
                0 => diff(at(0, j), at(1, j), 1.0),
                _ if i == n - 1 => diff(at(n - 2, j), at(n - 1, j), 1.0),
                _ => diff(at(i - 1, j), at(i + 1, j), 2.0),
            };
            let dy = match j {
                0 => diff(at(i, 0), at(i, 1), 1.0),
                _ if j == n - 1 => diff(at(i, n - 2), at(i, n - 1), 1.0),
                _ => diff(at(i, j - 1), at(i, j + 1), 2.0),
            };
            out[j * n + i] = (dx + Complex64::i() * dy) * 0.5;
        }
    }
    out
}
