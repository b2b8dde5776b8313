//! Flat model geometries: a Lie group in exponential coordinates with its
//! left-invariant Maurer–Cartan form.

use crate::bundle::{BoxDomain, CartanChart};
use crate::liealg::{builtin_matrix_basis, LieAlgebra, LieError};
use crate::linalg::Mat;
use crate::scalar::Real;

const SERIES_TERMS: usize = 40;

/// Terms until `r^m/m!` drops below rounding, plus two for the derivative tail.
fn series_terms(r: f64) -> usize {
    let mut term = 1.0;
    for m in 1..SERIES_TERMS {
        term *= r / m as f64;
        if term < 1e-18 {
            return (m + 2).min(SERIES_TERMS);
        }
    }
    SERIES_TERMS
}

/// Chart `θ ↦ exp(θ)` of a group `G` with `ω = g⁻¹dg`, so that
/// `W(θ) = Σ_m (−1)^m/(m+1)! ad_θ^m` and the ω-constant flows are
/// right multiplications `exp(θ)·exp(tX)`.
#[derive(Clone, Debug)]
pub struct KleinChart {
    algebra: LieAlgebra,
    domain: BoxDomain,
    matrix_basis: Option<Vec<Mat<f64>>>,
}

impl KleinChart {
    pub fn new(algebra: LieAlgebra, half_width: f64) -> Self {
        let domain = BoxDomain::new(vec![(-half_width, half_width); algebra.dim()])
            .expect("positive half width");
        KleinChart {
            algebra,
            domain,
            matrix_basis: None,
        }
    }

    /// `so3`, `se2`, `heisenberg`, `sl2`, `abelianN`, `euc3`.
    pub fn builtin(name: &str) -> Result<Self, LieError> {
        let algebra = LieAlgebra::builtin(name)?;
        let (basis, _) = builtin_matrix_basis(name)?;
        let half_width = match name {
            "so3" => 1.5,
            "sl2" => 1.0,
            _ => 2.0,
        };
        let mut chart = KleinChart::new(algebra, half_width);
        chart.matrix_basis = Some(basis);
        Ok(chart)
    }

    /// Matrix realization of the basis, when known.
    pub fn matrix_basis(&self) -> Option<&[Mat<f64>]> {
        self.matrix_basis.as_deref()
    }

    /// Matrix of the algebra element with coordinates `x`.
    pub fn to_matrix(&self, x: &[f64]) -> Option<Mat<f64>> {
        let basis = self.matrix_basis.as_ref()?;
        let (r, c) = (basis[0].rows(), basis[0].cols());
        let mut m = Mat::zeros(r, c);
        for (xi, e) in x.iter().zip(basis) {
            m = m.add(&e.scale(xi));
        }
        Some(m)
    }
}

impl CartanChart for KleinChart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn omega<T: Real>(&self, b: &[T]) -> Mat<T> {
        let n = self.algebra.dim();
        let minus_ad = self.algebra.ad_matrix_of(b).scale(&-T::one());
        // Horner evaluation of Σ_m A^m/(m+1)!, A = −ad_θ
        let coeff = |m: usize| T::from_f64_lossy(1.0 / crate::scalar::factorial(m + 1));
        let terms = series_terms((0..n)
            .map(|i| (0..n).map(|j| minus_ad[(i, j)].re().abs()).sum::<f64>())
            .fold(0.0, f64::max));
        let mut acc = Mat::identity(n).scale(&coeff(terms));
        for m in (0..terms).rev() {
            acc = minus_ad.matmul(&acc).add(&Mat::identity(n).scale(&coeff(m)));
        }
        acc
    }

    fn label(&self) -> String {
        format!("klein:{}", self.algebra.name())
    }
}
