//! Constructors of Cartan charts from concrete inputs.

pub mod builtin;
pub mod expr;
pub mod klein;
pub mod metric;
pub mod riemannian;

pub use builtin::{builtin_metric, Geometry, GeometryError};
pub use expr::{Expr, ParseError};
pub use klein::KleinChart;
pub use metric::{MetricError, MetricSpec};
pub use riemannian::RiemannianChart;
