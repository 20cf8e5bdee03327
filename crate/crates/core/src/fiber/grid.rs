use num_complex::Complex64;
use rayon::prelude::*;

use super::FiberError;

/// Polar subgrid used around `ζ = 0` when the weight has a pole there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRefinement {
    pub rings: usize,
    /// Total angular nodes, split evenly over the four sides of the block.
    pub angles: usize,
    pub ratio: f64,
    /// Half-width of the refined block in cells.
    pub block_cells: usize,
}

impl Default for PolarRefinement {
    fn default() -> Self {
        PolarRefinement {
            rings: 8,
            angles: 32,
            ratio: 0.5,
            block_cells: 2,
        }
    }
}

impl PolarRefinement {
    pub fn validate(&self) -> Result<(), FiberError> {
        if self.rings == 0 || self.angles < 4 || self.angles % 4 != 0 {
            return Err(FiberError::InvalidGrid(format!(
                "refinement needs rings >= 1 and a positive multiple of 4 angles, got {} and {}",
                self.rings, self.angles
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) || self.block_cells == 0 {
            return Err(FiberError::InvalidGrid(format!(
                "ring ratio {} must lie in (0, 1) and the block must be non-empty",
                self.ratio
            )));
        }
        Ok(())
    }

    /// Ring boundaries `outer, outer·ratio, ...`, strictly decreasing.
    pub fn ring_radii(&self, outer: f64) -> Vec<f64> {
        (0..=self.rings)
            .map(|k| outer * self.ratio.powi(k as i32))
            .collect()
    }
}

/// Uniform midpoint grid on `[-L, L]²` with `n` cells per axis. Node `(i, j)`
/// sits at the centre of its cell, so `0` is a cell corner and never a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    extent: f64,
    n: usize,
    refinement: PolarRefinement,
}

impl Grid {
    pub fn new(extent: f64, n: usize) -> Result<Self, FiberError> {
        Self::with_refinement(extent, n, PolarRefinement::default())
    }

    pub fn with_refinement(
        extent: f64,
        n: usize,
        refinement: PolarRefinement,
    ) -> Result<Self, FiberError> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(FiberError::InvalidGrid(format!("extent {extent} must be positive")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(FiberError::InvalidGrid(format!("resolution {n} must be even and >= 8")));
        }
        refinement.validate()?;
        if 2 * refinement.block_cells >= n {
            return Err(FiberError::InvalidGrid(
                "refinement block does not fit in the grid".into(),
            ));
        }
        Ok(Grid {
            extent,
            n,
            refinement,
        })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn refinement(&self) -> &PolarRefinement {
        &self.refinement
    }

    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.h()
    }

    /// Node with column `i` (real axis) and row `j` (imaginary axis).
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coordinate(i), self.coordinate(j))
    }

    pub fn node_at(&self, index: usize) -> Complex64 {
        self.node(index % self.n, index / self.n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |k| self.node_at(k))
    }

    pub fn contains(&self, t: Complex64) -> bool {
        t.re.abs() < self.extent && t.im.abs() < self.extent
    }

    pub fn sample<F>(&self, f: F) -> Vec<Complex64>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|k| f(self.node_at(k)))
            .collect()
    }

    /// Bilinear interpolation between nodes; the samples are extended by zero
    /// beyond the outermost ring of nodes.
    pub fn interpolate(&self, values: &[Complex64], t: Complex64) -> Complex64 {
        let h = self.h();
        let x = (t.re + self.extent) / h - 0.5;
        let y = (t.im + self.extent) / h - 0.5;
        let (i0, j0) = (x.floor(), y.floor());
        let (fx, fy) = (x - i0, y - j0);
        let n = self.n as i64;
        let at = |i: i64, j: i64| -> Complex64 {
            if (0..n).contains(&i) && (0..n).contains(&j) {
                values[(j * n + i) as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let (i0, j0) = (i0 as i64, j0 as i64);
        at(i0, j0) * ((1.0 - fx) * (1.0 - fy))
            + at(i0 + 1, j0) * (fx * (1.0 - fy))
            + at(i0, j0 + 1) * ((1.0 - fx) * fy)
            + at(i0 + 1, j0 + 1) * (fx * fy)
    }

    /// Largest modulus on the outermost ring of nodes, scaled by the largest
    /// modulus overall.
    pub fn boundary_ratio(&self, values: &[Complex64]) -> f64 {
        let n = self.n;
        let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = (0..n)
            .flat_map(|k| [k, (n - 1) * n + k, k * n, k * n + n - 1])
            .map(|idx| values[idx].norm())
            .fold(0.0, f64::max);
        edge / peak
    }

    pub fn check_support(&self, values: &[Complex64]) -> Result<(), FiberError> {
        let ratio = self.boundary_ratio(values);
        if ratio > 1e-9 {
            return Err(FiberError::SupportTouchesBoundary { ratio });
        }
        Ok(())
    }

    /// Index range `[lo, hi)` of the nodes inside the refinement block, per axis.
    pub fn block_range(&self) -> (usize, usize) {
        let m = self.refinement.block_cells;
        (self.n / 2 - m, self.n / 2 + m)
    }

    pub fn in_block(&self, index: usize) -> bool {
        let (lo, hi) = self.block_range();
        let (i, j) = (index % self.n, index / self.n);
        (lo..hi).contains(&i) && (lo..hi).contains(&j)
    }

    /// Half-width of the refinement block.
    pub fn block_half_width(&self) -> f64 {
        self.refinement.block_cells as f64 * self.h()
    }
}

fn corner_x(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let log_term = if r2 > 0.0 { 0.5 * y * r2.ln() } else { 0.0 };
    let atan_term = if x != 0.0 { x * (y / x).atan() } else { 0.0 };
    log_term + atan_term
}

/// `∫ 1/(t − ζ) dA(ζ)` over the rectangle `[x0, x1] × [y0, y1]`, in closed form.
pub fn rectangle_kernel_integral(t: Complex64, x0: f64, x1: f64, y0: f64, y1: f64) -> Complex64 {
    // With u = ζ − t: 1/(t − ζ) = −(x − iy)/(x² + y²).
    let (a0, a1) = (x0 - t.re, x1 - t.re);
    let (b0, b1) = (y0 - t.im, y1 - t.im);
    let corners = |f: &dyn Fn(f64, f64) -> f64| f(a1, b1) - f(a0, b1) - f(a1, b0) + f(a0, b0);
    let ix = corners(&corner_x);
    let iy = corners(&|x, y| corner_x(y, x));
    -Complex64::new(ix, -iy)
}

impl Grid {
    pub fn box_kernel_integral(&self, t: Complex64) -> Complex64 {
        let l = self.extent;
        rectangle_kernel_integral(t, -l, l, -l, l)
    }

    pub fn block_kernel_integral(&self, t: Complex64) -> Complex64 {
        let b = self.block_half_width();
        rectangle_kernel_integral(t, -b, b, -b, b)
    }
}
