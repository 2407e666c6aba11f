pub mod endo;
pub mod error;
pub mod fd;
pub mod inverse;
pub mod linalg;
pub mod poly;
pub mod scheme;
pub mod suite;
pub mod surfaces;
pub mod symplectic;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use surfaces::{Chart, SurfaceKind, SurfacePoint};
pub use scheme::{AhPoint, CoeffChartPoint, RootsChartPoint, SampleMode, SchemePoint};
