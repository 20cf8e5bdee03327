//! Weighted `L^p` Dolbeault cohomology of punctured discs in negative line bundles.

pub mod blowup;
pub mod fiber;
pub mod index;
pub mod report;
pub mod riemann_roch;
pub mod verify;

use thiserror::Error;

pub use blowup::GeometryError;
pub use fiber::FiberError;
pub use index::{Exponent, IndexBundle, IndexError};
pub use report::{BandRow, BandStatus, CohomologyBand, ReportError};
pub use riemann_roch::{CurveData, DimTable, DimensionData, RiemannRochError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    RiemannRoch(#[from] RiemannRochError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Fiber(#[from] FiberError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
