//! Local homogeneity of Cartan geometries.

pub mod bch;
pub mod bundle;
pub mod curvature;
pub mod frobenius;
pub mod frontends;
pub mod jet;
pub mod killing;
pub mod liealg;
pub mod linalg;
pub mod ode;
pub mod scalar;

pub use bundle::{BoxDomain, BundleError, CartanChart, FlowResult};
pub use frontends::{Geometry, MetricSpec};
pub use jet::Jet;
pub use liealg::{ExactLieAlgebra, HomTensor, LieAlgebra, LieAlgebraSpec, LieError, PRep};
pub use linalg::Mat;
pub use scalar::{Real, Scalar};
