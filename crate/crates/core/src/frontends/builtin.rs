//! Library of named test geometries.

use super::klein::KleinChart;
use super::metric::{MetricError, MetricSpec};
use super::riemannian::RiemannianChart;
use crate::bundle::{BoxDomain, CartanChart};
use crate::liealg::{LieAlgebra, LieError};
use crate::linalg::Mat;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown geometry '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Default bump magnitude.
pub const BUMP_EPS: f64 = 0.1;
/// Centre and radius of the bump support.
pub const BUMP_CENTER: [f64; 2] = [0.05, -0.04];
pub const BUMP_RADIUS: f64 = 0.6;

pub const REVOLUTION_PROFILE: &str = "1 + x1^2/4";

const SPHERE: &str = "[[4/(1 + x1^2 + x2^2)^2, 0], [0, 4/(1 + x1^2 + x2^2)^2]]";
const HYPERBOLIC: &str = "[[4/(1 - x1^2 - x2^2)^2, 0], [0, 4/(1 - x1^2 - x2^2)^2]]";

fn square(h: f64) -> BoxDomain {
    BoxDomain::new(vec![(-h, h), (-h, h)]).expect("valid box")
}

/// Metric text of the bump geometry: flat plus `ε·ψ(|x − c|²/ρ²)·P(x)` with a
/// fixed polynomial matrix `P` that has no symmetries.
pub fn bump_literal(eps: f64) -> String {
    let s = format!(
        "((x1 - {})^2 + (x2 - ({}))^2)/{}",
        BUMP_CENTER[0],
        BUMP_CENTER[1],
        BUMP_RADIUS * BUMP_RADIUS
    );
    let w = format!("({eps})*bump({s})");
    let p11 = "x1 + x2^2 + x1*x2";
    let p12 = "x1*x2 + x2/2 - x1^3";
    let p22 = "x2 - x1^2 + 2*x1*x2^2";
    format!("[[1 + {w}*({p11}), {w}*({p12})], [{w}*({p12}), 1 + {w}*({p22})]]")
}

/// Named metrics: `flat2`, `sphere2`, `hyperbolic2`, `revolution`,
/// `revolution(f)`, `bump`, `bump(eps)`.
pub fn builtin_metric(name: &str) -> Result<MetricSpec, GeometryError> {
    let name = name.trim();
    let spec = match name {
        "flat2" => MetricSpec::parse_literal(name, "[[1, 0], [0, 1]]", square(1.5))?,
        "sphere2" => MetricSpec::parse_literal(name, SPHERE, square(1.5))?,
        "hyperbolic2" => MetricSpec::parse_literal(name, HYPERBOLIC, square(0.65))?,
        "revolution" => revolution(REVOLUTION_PROFILE)?,
        "bump" => MetricSpec::parse_literal("bump", &bump_literal(BUMP_EPS), square(2.0))?,
        _ => {
            if let Some(arg) = call_argument(name, "revolution") {
                revolution(arg)?
            } else if let Some(arg) = call_argument(name, "bump") {
                let eps: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| GeometryError::Unknown(name.to_string()))?;
                MetricSpec::parse_literal(name, &bump_literal(eps), square(2.0))?
            } else {
                return Err(GeometryError::Unknown(name.to_string()));
            }
        }
    };
    Ok(spec)
}

fn call_argument<'a>(name: &'a str, head: &str) -> Option<&'a str> {
    name.strip_prefix(head)?
        .trim()
        .strip_prefix('(')?
        .strip_suffix(')')
}

/// Surface of revolution `dx1² + f(x1)² dx2²`.
fn revolution(profile: &str) -> Result<MetricSpec, GeometryError> {
    let text = format!("[[1, 0], [0, ({profile})^2]]");
    let domain = BoxDomain::new(vec![(-1.9, 1.9), (-1.5, 1.5)]).expect("valid box");
    Ok(MetricSpec::parse_literal(
        &format!("revolution({profile})"),
        &text,
        domain,
    )?)
}

/// A chart produced by one of the frontends.
#[derive(Clone, Debug)]
pub enum Geometry {
    Riemannian(RiemannianChart),
    Klein(KleinChart),
}

impl Geometry {
    /// Resolves a geometry name: metric built-ins or `klein:<algebra>`.
    pub fn builtin(name: &str) -> Result<Self, GeometryError> {
        if let Some(alg) = name.strip_prefix("klein:") {
            return Ok(Geometry::Klein(KleinChart::builtin(alg)?));
        }
        Ok(Geometry::Riemannian(RiemannianChart::new(builtin_metric(
            name,
        )?)))
    }

    pub fn from_metric(metric: MetricSpec) -> Self {
        Geometry::Riemannian(RiemannianChart::new(metric))
    }

    pub fn names() -> &'static [&'static str] {
        &[
            "flat2",
            "sphere2",
            "hyperbolic2",
            "revolution(f)",
            "bump(eps)",
            "klein:so3",
            "klein:se2",
            "klein:heisenberg",
            "klein:sl2",
            "klein:abelianN",
        ]
    }
}

impl CartanChart for Geometry {
    fn algebra(&self) -> &LieAlgebra {
        match self {
            Geometry::Riemannian(c) => c.algebra(),
            Geometry::Klein(c) => c.algebra(),
        }
    }

    fn domain(&self) -> &BoxDomain {
        match self {
            Geometry::Riemannian(c) => c.domain(),
            Geometry::Klein(c) => c.domain(),
        }
    }

    fn omega<T: Real>(&self, b: &[T]) -> Mat<T> {
        match self {
            Geometry::Riemannian(c) => c.omega(b),
            Geometry::Klein(c) => c.omega(b),
        }
    }

    fn label(&self) -> String {
        match self {
            Geometry::Riemannian(c) => c.label(),
            Geometry::Klein(c) => c.label(),
        }
    }

    fn base_metric(&self) -> Option<&MetricSpec> {
        match self {
            Geometry::Riemannian(c) => c.base_metric(),
            Geometry::Klein(_) => None,
        }
    }
}
