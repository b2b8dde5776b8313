//! The curvature function `K`, its iterated ω-derivatives `D^rK`,
//! contractions and the P-equivariance identities.
//!
//! Derivatives are exact: the connection matrix is evaluated on truncated
//! Taylor jets, so the frame fields `ẽ_a = W⁻¹e_a` and every Lie derivative
//! along them are polynomial manipulations.

use crate::bundle::{dim, omega_checked, vertical_flow, BundleError, CartanChart};
use crate::jet::Jet;
use crate::liealg::{HomTensor, LieAlgebra};
use crate::linalg::Mat;
use serde_json::{json, Value};
use thiserror::Error;

/// Default highest derivative order.
pub const M_MAX: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("connection matrix jet is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("non-finite curvature at {0:?}")]
    NotFinite(Vec<f64>),
}

/// `(K(b), D¹K(b), …, D^mK(b))` with `J_r ∈ Hom(⊗^r g, V)`.
#[derive(Clone, Debug)]
pub struct CurvatureJet {
    pub basepoint: Vec<f64>,
    pub order: usize,
    pub j: Vec<HomTensor>,
    /// Largest `|K(u, v)|` with a `p` direction in a slot, before quotienting.
    pub vertical_residual: f64,
}

impl CurvatureJet {
    pub fn k(&self) -> &HomTensor {
        &self.j[0]
    }

    /// `D^rK(b) ⌞ A`.
    pub fn contract(&self, r: usize, a: &[f64]) -> HomTensor {
        assert!(r >= 1 && r <= self.order, "contraction order out of range");
        self.j[r].contract(a)
    }

    /// Largest entry over all orders.
    pub fn norm(&self) -> f64 {
        self.j.iter().map(HomTensor::max_abs).fold(0.0, f64::max)
    }

    /// Nested-array dump `J_r[a_1]..[a_r][u][v][c]` with basis labels.
    pub fn to_json(&self, labels: &[String]) -> Value {
        fn nest(t: &HomTensor, depth: usize, offset: usize) -> Value {
            let (n, dg) = (t.quotient_dim(), t.dim_g());
            if depth == t.order() {
                let mut rows = Vec::new();
                for u in 0..n {
                    let mut cols = Vec::new();
                    for v in 0..n {
                        let vals: Vec<f64> = (0..dg).map(|c| t.get(offset, u, v, c)).collect();
                        cols.push(json!(vals));
                    }
                    rows.push(Value::Array(cols));
                }
                return Value::Array(rows);
            }
            Value::Array((0..dg).map(|a| nest(t, depth + 1, offset * dg + a)).collect())
        }
        json!({
            "basis": labels,
            "quotient_basis": &labels[..self.j[0].quotient_dim()],
            "basepoint": self.basepoint,
            "orders": self.j.iter().map(|t| nest(t, 0, 0)).collect::<Vec<_>>(),
        })
    }
}

/// `L_X f = Σ_k X^k ∂_k f` for a jet-valued field `X`.
pub(crate) fn lie_derivative(field: &[Jet], f: &Jet) -> Jet {
    let mut acc = Jet::constant(0.0);
    for (k, xk) in field.iter().enumerate() {
        acc = acc + xk.clone() * f.d(k);
    }
    acc
}

/// Frame-field jets `ẽ_a` (as columns) and `W` about `b`, valid to `degree`.
fn frame(
    chart: &impl CartanChart,
    b: &[f64],
    degree: usize,
) -> Result<(Mat<Jet>, Vec<Vec<Jet>>), CurvatureError> {
    omega_checked(chart, b)?;
    let vars = Jet::variables(b, degree);
    let w = chart.omega(&vars);
    let winv = w
        .inverse()
        .ok_or_else(|| CurvatureError::Singular(b.to_vec()))?;
    let n = dim(chart);
    let fields = (0..n).map(|a| winv.column(a)).collect();
    Ok((w, fields))
}

/// Vector-field bracket `[X, Y]^i = X(Y^i) − Y(X^i)`.
pub(crate) fn field_bracket(x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    (0..x.len())
        .map(|i| lie_derivative(x, &y[i]) - lie_derivative(y, &x[i]))
        .collect()
}

/// Full `K(e_u, e_v)` jets over all of `g` (valid to `degree`), indexed
/// `[u][v][c]`.
fn curvature_jets_full(
    chart: &impl CartanChart,
    b: &[f64],
    degree: usize,
) -> Result<(Vec<Vec<Vec<Jet>>>, Vec<Vec<Jet>>), CurvatureError> {
    let alg = chart.algebra();
    let n = alg.dim();
    let (w, fields) = frame(chart, b, degree + 1)?;
    let zero = vec![Jet::constant(0.0); n];
    let mut k = vec![vec![zero; n]; n];
    for u in 0..n {
        for v in (u + 1)..n {
            let br = field_bracket(&fields[u], &fields[v]);
            let wb = w.mul_vec(&br);
            let kuv: Vec<Jet> = (0..n)
                .map(|c| Jet::constant(*alg.structure(u, v, c)) - wb[c].clone())
                .collect();
            k[v][u] = kuv.iter().map(|x| -x.clone()).collect();
            k[u][v] = kuv;
        }
    }
    Ok((k, fields))
}

/// `K(b) ∈ V`.
pub fn curvature_at(chart: &impl CartanChart, b: &[f64]) -> Result<HomTensor, CurvatureError> {
    Ok(omega_jet(chart, b, 0)?.j.swap_remove(0))
}

/// The curvature jet `(J_0, …, J_m)` at `b`.
pub fn omega_jet(
    chart: &impl CartanChart,
    b: &[f64],
    m: usize,
) -> Result<CurvatureJet, CurvatureError> {
    let alg = chart.algebra();
    let (big, n) = (alg.dim(), alg.p_start());
    let (kfull, fields) = curvature_jets_full(chart, b, m)?;

    let mut vertical_residual = 0.0_f64;
    for u in 0..big {
        for v in 0..big {
            if u >= n || v >= n {
                for c in 0..big {
                    vertical_residual = vertical_residual.max(kfull[u][v][c].value().abs());
                }
            }
        }
    }

    // level[r][tuple * n*n*N + (i*n + j)*N + c]
    let mut level: Vec<Jet> = Vec::with_capacity(n * n * big);
    for i in 0..n {
        for j in 0..n {
            for c in 0..big {
                level.push(kfull[i][j][c].clone());
            }
        }
    }
    let block = n * n * big;
    let mut out = Vec::with_capacity(m + 1);
    let to_tensor = |r: usize, level: &[Jet]| {
        let mut t = HomTensor::zeros(r, big, n);
        for (dst, src) in t.data_mut().iter_mut().zip(level) {
            *dst = src.value();
        }
        t
    };
    out.push(to_tensor(0, &level));
    for r in 1..=m {
        let mut next = Vec::with_capacity(level.len() * big);
        for field in &fields {
            for tuple in level.chunks(block) {
                for (idx, f) in tuple.iter().enumerate() {
                    let (i, j) = ((idx / big) / n, (idx / big) % n);
                    if i == j {
                        next.push(Jet::constant(0.0));
                    } else {
                        next.push(lie_derivative(field, f));
                    }
                }
            }
        }
        level = next;
        out.push(to_tensor(r, &level));
    }
    if out.iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
        return Err(CurvatureError::NotFinite(b.to_vec()));
    }
    Ok(CurvatureJet {
        basepoint: b.to_vec(),
        order: m,
        j: out,
        vertical_residual,
    })
}

/// `X.φ` for `X ∈ p`, the infinitesimal P-action on `Hom(⊗^r g, V)`.
pub fn infinitesimal_action(alg: &LieAlgebra, x: &[f64], phi: &HomTensor) -> HomTensor {
    alg.infinitesimal_action(x, phi)
}

/// Residual of `J_r ⌞ X = −X.J_{r−1}` relative to `max_{s ≤ r} ‖J_s‖`.
pub fn vertical_identity_residual(
    alg: &LieAlgebra,
    jet: &CurvatureJet,
    r: usize,
    x: &[f64],
) -> f64 {
    let lhs = jet.contract(r, x);
    let mut rhs = infinitesimal_action(alg, x, &jet.j[r - 1]);
    rhs.data_mut().iter_mut().for_each(|v| *v = -*v);
    let scale = jet.j[..=r].iter().map(HomTensor::norm).fold(1e-300, f64::max);
    lhs.sub(&rhs).norm() / scale
}

#[derive(Clone, Debug)]
pub struct EquivarianceReport {
    pub moved: Vec<f64>,
    /// `‖J_r(b·exp(tX)) − p.J_r(b)‖ / max_{s ≤ r} ‖J_s‖` per order, `p = exp(−tX)`.
    pub residuals: Vec<f64>,
    pub absolute: Vec<f64>,
}

/// Compares the jet at `b·exp(tX) = b·p⁻¹` with the transported jet at `b`.
pub fn equivariance_check(
    chart: &impl CartanChart,
    b: &[f64],
    x: &[f64],
    t: f64,
    m: usize,
    tol: f64,
) -> Result<EquivarianceReport, CurvatureError> {
    let alg = chart.algebra();
    let moved = vertical_flow(chart, b, x, t, tol)?;
    let here = omega_jet(chart, b, m)?;
    let there = omega_jet(chart, &moved, m)?;
    let minus: Vec<f64> = x.iter().map(|v| -t * v).collect();
    let ad_p = alg
        .adjoint_of_group_element(&minus)
        .map_err(|_| BundleError::NotVertical)?;
    let mut residuals = Vec::new();
    let mut absolute = Vec::new();
    for r in 0..=m {
        let rep = alg
            .rep_on_hom(r, &ad_p)
            .map_err(|_| BundleError::NotVertical)?;
        let moved_jet = rep.apply(&here.j[r]);
        let diff = there.j[r].sub(&moved_jet).norm();
        absolute.push(diff);
        let scale = here.j[..=r]
            .iter()
            .chain(&there.j[..=r])
            .map(HomTensor::norm)
            .fold(1e-300, f64::max);
        residuals.push(diff / scale);
    }
    Ok(EquivarianceReport {
        moved,
        residuals,
        absolute,
    })
}

/// Sectional curvature of the plane of `t_a, t_b` for Riemannian charts,
/// read from the rotation part of `K(t_a, t_b)`.
pub fn sectional_curvature(k: &HomTensor, a: usize, b: usize) -> f64 {
    let n = k.quotient_dim();
    let pairs = crate::liealg::rotation_pairs(n);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let idx = pairs
        .iter()
        .position(|&p| p == (lo, hi))
        .expect("distinct base directions");
    -k.get(0, lo, hi, n + idx)
}
