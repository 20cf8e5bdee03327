//! Cauchy-transform solver for `∂̄` along the fibers of the blow-up, and the
//! pipeline that solves `∂̄η = ω` on a punctured ball.

pub mod cauchy;
pub mod forms;
pub mod grid;
pub mod norms;
pub mod solve;

use thiserror::Error;

use crate::index::IndexError;

pub use cauchy::{
    cauchy_transform, cauchy_transform_refined, weighted_transform, CauchyPlan, FiberFunction,
    TransformValue,
};
pub use grid::{Grid, PolarRefinement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiberError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("samples do not vanish on the grid boundary (relative size {ratio:.3e})")]
    SupportTouchesBoundary { ratio: f64 },
    #[error("weighted integrand is not integrable at 0 (ring mass ratio {ratio:.3})")]
    WeightViolation { ratio: f64 },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("the S operator needs a form of degree >= 1")]
    ZeroDegree,
    #[error("form is not dbar-closed: max |dbar ω| = {max_dbar:.3e} exceeds {tolerance:.3e}")]
    NotClosed { max_dbar: f64, tolerance: f64 },
    #[error("form is not compactly supported in the ball: |ω| = {value:.3e} at radius {radius}")]
    SupportViolation { radius: f64, value: f64 },
    #[error("unknown test family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}
