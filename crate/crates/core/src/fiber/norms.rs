use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::FiberError;
use crate::index::{Exponent, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub inner: f64,
    pub outer: f64,
}

impl Ring {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.inner && r < self.outer
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.outer * self.outer - self.inner * self.inner)
    }
}

/// Dyadic rings `[r/2^{k+1}, r/2^k)` for `k = 0..count`.
pub fn dyadic_rings(outer: f64, count: usize) -> Vec<Ring> {
    (0..count)
        .map(|k| {
            let hi = outer / f64::powi(2.0, k as i32);
            Ring { inner: hi / 2.0, outer: hi }
        })
        .collect()
}

/// Discrete `‖|t|^{-s} f‖_{L^p(ring)}` per ring, midpoint rule on grid nodes.
pub fn weighted_lp_norm(
    grid: &Grid,
    values: &[Complex64],
    s: Rational,
    p: Exponent,
    rings: &[Ring],
) -> Result<Vec<f64>, FiberError> {
    if values.len() != grid.len() {
        return Err(FiberError::LayoutMismatch(format!(
            "{} samples for a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    if let Some(ring) = rings.iter().find(|r| r.outer > grid.extent() || r.inner >= r.outer) {
        return Err(FiberError::InvalidGrid(format!(
            "ring [{}, {}) does not fit in the box of half-width {}",
            ring.inner,
            ring.outer,
            grid.extent()
        )));
    }
    let s = *s.numer() as f64 / *s.denom() as f64;
    let pf = p.to_f64();
    let mut acc = vec![0.0; rings.len()];
    for (k, v) in values.iter().enumerate() {
        let r = grid.node_at(k).norm();
        for (slot, ring) in acc.iter_mut().zip(rings) {
            if ring.contains(r) {
                let x = v.norm() * r.powf(-s);
                if p.is_infinite() {
                    *slot = f64::max(*slot, x);
                } else {
                    *slot += x.powf(pf) * grid.cell_area();
                }
            }
        }
    }
    if !p.is_infinite() {
        acc.iter_mut().for_each(|v| *v = v.powf(1.0 / pf));
    }
    Ok(acc)
}

/// Same norm for a function given in closed form, on a polar rule with
/// `radial × angular` midpoint nodes per ring. Independent of any grid.
pub fn weighted_lp_norm_polar<F>(f: F, s: f64, p: Exponent, rings: &[Ring], radial: usize, angular: usize) -> Vec<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let pf = p.to_f64();
    rings
        .iter()
        .map(|ring| {
            let dr = (ring.outer - ring.inner) / radial as f64;
            let dphi = std::f64::consts::TAU / angular as f64;
            let mut acc: f64 = 0.0;
            for i in 0..radial {
                let r = ring.inner + (i as f64 + 0.5) * dr;
                for j in 0..angular {
                    let t = Complex64::from_polar(r, (j as f64 + 0.5) * dphi);
                    let x = f(t).norm() * r.powf(-s);
                    if p.is_infinite() {
                        acc = acc.max(x);
                    } else {
                        acc += x.powf(pf) * r * dr * dphi;
                    }
                }
            }
            if p.is_infinite() {
                acc
            } else {
                acc.powf(1.0 / pf)
            }
        })
        .collect()
}
