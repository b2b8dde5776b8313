//! Orthonormal frame bundle of a Riemannian metric as a Cartan geometry
//! modelled on `Euc(n)/SO(n)`.
//!
//! Chart coordinates are `b = (x, θ)`: the frame at `b` is `E₀(x)·exp(θ̂)`,
//! where `E₀` is the Gram–Schmidt frame of the coordinate basis and `θ̂` is
//! the rotation with coordinates `θ` in the basis `r_ab`. The connection form
//! is the solder form plus the Levi-Civita connection form.

use super::metric::{christoffel_from, MetricSpec};
use crate::bundle::{BoxDomain, CartanChart};
use crate::liealg::{rotation_pairs, LieAlgebra};
use crate::linalg::Mat;
use crate::scalar::Real;

const SERIES_TERMS: usize = 40;
/// Series terms below this magnitude end the summation.
const SERIES_EPS: f64 = 1e-18;

#[derive(Clone, Debug)]
pub struct RiemannianChart {
    metric: MetricSpec,
    algebra: LieAlgebra,
    domain: BoxDomain,
    pairs: Vec<(usize, usize)>,
}

impl RiemannianChart {
    pub fn new(metric: MetricSpec) -> Self {
        let n = metric.dim();
        let algebra = LieAlgebra::from_matrix_basis(
            &format!("euc{n}"),
            &crate::liealg::euclidean_basis(n),
            n,
        )
        .expect("euclidean algebra");
        let pairs = rotation_pairs(n);
        // keeps ‖θ‖ below π/2 on the whole box
        let half = 0.999 * std::f64::consts::FRAC_PI_2 / (pairs.len().max(1) as f64).sqrt();
        let domain = metric
            .domain()
            .extend(&vec![(-half, half); pairs.len()]);
        RiemannianChart {
            metric,
            algebra,
            domain,
            pairs,
        }
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    fn rotation_generator<T: Real>(&self, n: usize, j: usize) -> Mat<T> {
        let (a, b) = self.pairs[j];
        let mut m = Mat::zeros(n, n);
        m[(b, a)] = T::one();
        m[(a, b)] = -T::one();
        m
    }

    fn theta_hat<T: Real>(&self, n: usize, theta: &[T]) -> Mat<T> {
        let mut m = Mat::<T>::zeros(n, n);
        for (j, &(a, b)) in self.pairs.iter().enumerate() {
            m[(b, a)] = m[(b, a)].clone() + theta[j].clone();
            m[(a, b)] = m[(a, b)].clone() - theta[j].clone();
        }
        m
    }

    /// Coordinates of an `so(n)` matrix in the `r_ab` basis.
    fn so_coords<T: Real>(&self, m: &Mat<T>) -> Vec<T> {
        self.pairs.iter().map(|&(a, b)| m[(b, a)].clone()).collect()
    }

    /// Frame `E(x, θ)` (columns are the frame vectors in coordinates).
    pub fn frame(&self, b: &[f64]) -> Option<Mat<f64>> {
        let n = self.metric.dim();
        let l = self.metric.metric(&b[..n]).cholesky()?;
        let e0 = l.lower_inverse().transpose();
        let r = exp_series(&self.theta_hat(n, &b[n..]));
        Some(e0.matmul(&r))
    }
}

fn exp_series<T: Real>(a: &Mat<T>) -> Mat<T> {
    let n = a.rows();
    let mut term = Mat::identity(n);
    let mut acc = Mat::identity(n);
    for m in 1..=SERIES_TERMS {
        term = term.matmul(a).scale(&T::from_f64_lossy(1.0 / m as f64));
        if term.magnitude() < SERIES_EPS {
            break;
        }
        acc = acc.add(&term);
    }
    acc
}

impl CartanChart for RiemannianChart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn omega<T: Real>(&self, b: &[T]) -> Mat<T> {
        let n = self.metric.dim();
        let dim = self.algebra.dim();
        let (x, theta) = b.split_at(n);
        let nan = || Mat::from_fn(dim, dim, |_, _| T::from_f64_lossy(f64::NAN));
        let g = self.metric.metric(x);
        let Some(l) = g.cholesky() else {
            return nan();
        };
        let dg = self.metric.metric_derivatives(x);
        let linv = l.lower_inverse();
        let e0 = linv.transpose();
        let gamma = christoffel_from(&e0.matmul(&linv), &dg);
        let lt = l.transpose();
        let half = T::from_f64_lossy(0.5);
        let th = self.theta_hat(n, theta);
        let r = exp_series(&th);
        let rt = r.transpose();
        let rt_lt = rt.matmul(&lt);

        let mut w = Mat::zeros(dim, dim);
        for k in 0..n {
            // dL = L·Φ(L⁻¹ ∂g L⁻ᵀ), Φ = strict lower part + half diagonal
            let inner = linv.matmul(&dg[k]).matmul(&e0);
            let phi = Mat::from_fn(n, n, |i, j| {
                if i > j {
                    inner[(i, j)].clone()
                } else if i == j {
                    inner[(i, j)].clone() * half.clone()
                } else {
                    T::zero()
                }
            });
            let dl = l.matmul(&phi);
            let de0 = e0.matmul(&dl.transpose()).matmul(&e0).scale(&-T::one());
            let gamma_k = Mat::from_fn(n, n, |i, j| gamma[i][(k, j)].clone());
            let a_k = lt.matmul(&de0.add(&gamma_k.matmul(&e0)));
            let rot = rt.matmul(&a_k).matmul(&r);
            for i in 0..n {
                w[(i, k)] = rt_lt[(i, k)].clone();
            }
            for (j, c) in self.so_coords(&rot).into_iter().enumerate() {
                w[(n + j, k)] = c;
            }
        }
        // left-trivialized derivative of exp on SO(n)
        for j in 0..self.pairs.len() {
            let mut term = self.rotation_generator::<T>(n, j);
            let mut acc = term.clone();
            for m in 1..=SERIES_TERMS {
                term = th
                    .commutator(&term)
                    .scale(&T::from_f64_lossy(-1.0 / (m as f64 + 1.0)));
                if term.magnitude() < SERIES_EPS {
                    break;
                }
                acc = acc.add(&term);
            }
            for (i, c) in self.so_coords(&acc).into_iter().enumerate() {
                w[(n + i, n + j)] = c;
            }
        }
        w
    }

    fn label(&self) -> String {
        self.metric.name().to_string()
    }

    fn base_metric(&self) -> Option<&MetricSpec> {
        Some(&self.metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{omega_constant_field, vertical_flow};
    use crate::frontends::builtin::builtin_metric;

    #[test]
    fn flat_chart_at_zero_section() {
        let chart = RiemannianChart::new(builtin_metric("flat2").unwrap());
        let w: Mat<f64> = chart.omega(&[0.3, -0.2, 0.0]);
        assert!(w.sub(&Mat::identity(3)).norm_inf() < 1e-15);
    }

    #[test]
    fn frames_are_orthonormal() {
        let chart = RiemannianChart::new(builtin_metric("sphere2").unwrap());
        let b = [0.4, -0.3, 0.7];
        let e = chart.frame(&b).unwrap();
        let g: Mat<f64> = chart.metric().metric(&b[..2]);
        let gram = e.transpose().matmul(&g).matmul(&e);
        assert!(gram.sub(&Mat::identity(2)).norm_inf() < 1e-13);
    }

    #[test]
    fn solder_part_reads_frame_components() {
        let chart = RiemannianChart::new(builtin_metric("sphere2").unwrap());
        let b = [0.4, -0.3, 0.7];
        let w: Mat<f64> = chart.omega(&b);
        let e = chart.frame(&b).unwrap();
        // translation rows of W applied to E's columns give unit vectors
        for a in 0..2 {
            let v = [e[(0, a)], e[(1, a)], 0.0];
            let out = w.mul_vec(&v);
            for i in 0..2 {
                let expect = if i == a { 1.0 } else { 0.0 };
                assert!((out[i] - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn vertical_fields_reproduce_p() {
        let chart = RiemannianChart::new(builtin_metric("sphere2").unwrap());
        let b = [0.2, 0.5, -0.4];
        let v = omega_constant_field(&chart, &[0.0, 0.0, 1.0], &b).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
        let end = vertical_flow(&chart, &b, &[0.0, 0.0, 1.0], 0.3, 1e-11).unwrap();
        assert!((end[0] - b[0]).abs() < 1e-9 && (end[1] - b[1]).abs() < 1e-9);
        assert!((end[2] - (b[2] + 0.3)).abs() < 1e-9);
    }
}
