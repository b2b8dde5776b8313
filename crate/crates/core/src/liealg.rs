//! Finite-dimensional Lie algebras `g` with a distinguished subalgebra `p`.
//!
//! Bases are adapted to `p`: vectors `e_0..e_{n-1}` span the section of
//! `g/p` and `e_n..e_{dim-1}` span `p`. Structure constants satisfy
//! `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
//!
//! Arithmetic is generic over [`Scalar`]; the representations of `P` on the
//! curvature spaces and everything needing a decomposition live on
//! `LieAlgebraSpec<f64>`.

use crate::linalg::{null_space, orthonormal_basis, Mat};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Deserialize;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure constants not antisymmetric at ({i}, {j}, {k})")]
    NotAntisymmetric { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails with residual {0:e}")]
    Jacobi(f64),
    #[error("p is not a subalgebra: [e_{i}, e_{j}] leaves p")]
    NotSubalgebra { i: usize, j: usize },
    #[error("p_start {p_start} exceeds dimension {dim}")]
    BadSplit { p_start: usize, dim: usize },
    #[error("bracket index out of range: {0:?}")]
    IndexOutOfRange([usize; 3]),
    #[error("vector is not in p")]
    NotInP,
    #[error("unknown algebra '{0}'")]
    Unknown(String),
    #[error("invalid algebra file: {0}")]
    File(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraSpec<T> {
    name: String,
    dim: usize,
    c: Vec<T>,
    p_start: usize,
}

impl<T: Scalar> LieAlgebraSpec<T> {
    /// Builds from sparse entries `(i, j, k, c_ijk)`; missing antisymmetric
    /// partners are filled in, contradicting ones are rejected.
    pub fn from_entries(
        name: &str,
        dim: usize,
        entries: &[(usize, usize, usize, T)],
        p_start: usize,
    ) -> Result<Self, LieError> {
        if p_start > dim {
            return Err(LieError::BadSplit { p_start, dim });
        }
        let mut c = vec![T::zero(); dim * dim * dim];
        let mut set = vec![false; dim * dim * dim];
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        for (i, j, k, v) in entries {
            let (i, j, k) = (*i, *j, *k);
            if i >= dim || j >= dim || k >= dim {
                return Err(LieError::IndexOutOfRange([i, j, k]));
            }
            if set[idx(i, j, k)] && (c[idx(i, j, k)].clone() - v.clone()).re() != 0.0 {
                return Err(LieError::NotAntisymmetric { i, j, k });
            }
            c[idx(i, j, k)] = v.clone();
            set[idx(i, j, k)] = true;
        }
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    match (set[idx(i, j, k)], set[idx(j, i, k)]) {
                        (true, false) => {
                            c[idx(j, i, k)] = -c[idx(i, j, k)].clone();
                            set[idx(j, i, k)] = true;
                        }
                        (true, true) => {
                            let s = c[idx(i, j, k)].clone() + c[idx(j, i, k)].clone();
                            if !s.is_zero() {
                                return Err(LieError::NotAntisymmetric { i, j, k });
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        let spec = LieAlgebraSpec {
            name: name.to_string(),
            dim,
            c,
            p_start,
        };
        spec.check_axioms()?;
        Ok(spec)
    }

    fn check_axioms(&self) -> Result<(), LieError> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = self.structure(i, j, k).clone() + self.structure(j, i, k).clone();
                    if !s.is_zero() {
                        return Err(LieError::NotAntisymmetric { i, j, k });
                    }
                }
            }
        }
        let jac = self.jacobi_residual();
        if jac > 1e-12 {
            return Err(LieError::Jacobi(jac));
        }
        for i in self.p_start..n {
            for j in self.p_start..n {
                for k in 0..self.p_start {
                    if self.structure(i, j, k).re().abs() > 1e-14 {
                        return Err(LieError::NotSubalgebra { i, j });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of the first `p` basis vector, equal to `dim g/p`.
    pub fn p_start(&self) -> usize {
        self.p_start
    }

    pub fn quotient_dim(&self) -> usize {
        self.p_start
    }

    pub fn structure(&self, i: usize, j: usize, k: usize) -> &T {
        &self.c[(i * self.dim + j) * self.dim + k]
    }

    /// `[X, Y]` in basis coordinates.
    pub fn bracket(&self, x: &[T], y: &[T]) -> Result<Vec<T>, LieError> {
        for v in [x, y] {
            if v.len() != self.dim {
                return Err(LieError::DimensionMismatch {
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        Ok(self.bracket_exact(x, y))
    }

    /// `[X, Y]` for coefficients in another scalar type.
    pub fn bracket_of<S>(&self, x: &[S], y: &[S]) -> Vec<S>
    where
        S: Scalar,
    {
        let n = self.dim;
        let mut out = vec![S::zero(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let xy = x[i].clone() * y[j].clone();
                for (k, o) in out.iter_mut().enumerate() {
                    let c = self.structure(i, j, k);
                    if c.is_zero() {
                        continue;
                    }
                    *o = o.clone() + xy.clone() * S::from_f64_lossy(c.re());
                }
            }
        }
        out
    }

    /// `ad X` for coefficients in another scalar type (e.g. jets).
    pub fn ad_matrix_of<S: Scalar>(&self, x: &[S]) -> Mat<S> {
        let n = self.dim;
        Mat::from_fn(n, n, |k, j| {
            let mut acc = S::zero();
            for (i, xi) in x.iter().enumerate() {
                let c = self.structure(i, j, k).re();
                if c != 0.0 {
                    acc = acc + xi.clone() * S::from_f64_lossy(c);
                }
            }
            acc
        })
    }

    /// Matrix of `ad X`, so that `ad(X)·Y = [X, Y]`.
    pub fn ad_matrix(&self, x: &[T]) -> Mat<T> {
        let n = self.dim;
        Mat::from_fn(n, n, |k, j| {
            let mut acc = T::zero();
            for (i, xi) in x.iter().enumerate() {
                acc = acc + xi.clone() * self.structure(i, j, k).clone();
            }
            acc
        })
    }

    /// Largest violation of the Jacobi identity over basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let basis = |i: usize| {
            let mut v = vec![T::zero(); n];
            v[i] = T::one();
            v
        };
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let (ea, eb, ec) = (basis(a), basis(b), basis(c));
                    let t1 = self.bracket_exact(&ea, &self.bracket_exact(&eb, &ec));
                    let t2 = self.bracket_exact(&eb, &self.bracket_exact(&ec, &ea));
                    let t3 = self.bracket_exact(&ec, &self.bracket_exact(&ea, &eb));
                    for k in 0..n {
                        let s = t1[k].clone() + t2[k].clone() + t3[k].clone();
                        worst = worst.max(s.re().abs());
                    }
                }
            }
        }
        worst
    }

    fn bracket_exact(&self, x: &[T], y: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                if x[i].is_zero() || y[j].is_zero() {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o = o.clone() + x[i].clone() * y[j].clone() * self.structure(i, j, k).clone();
                }
            }
        }
        out
    }

    /// Converts the structure constants to another scalar type.
    pub fn convert<S: Scalar>(&self) -> LieAlgebraSpec<S> {
        LieAlgebraSpec {
            name: self.name.clone(),
            dim: self.dim,
            c: self.c.iter().map(|x| S::from_f64_lossy(x.re())).collect(),
            p_start: self.p_start,
        }
    }

    /// Built-in algebra by name: `euc2`, `euc3`, `se2`, `so3`, `heisenberg`,
    /// `sl2`, `abelianN`.
    pub fn builtin(name: &str) -> Result<Self, LieError> {
        let (basis, p_start) = builtin_matrix_basis(name)?;
        Self::from_matrix_basis(name, &basis, p_start)
    }

    /// Structure constants of the span of the given matrices (which must be
    /// closed under commutators with integral coefficients in that basis).
    pub fn from_matrix_basis(name: &str, basis: &[Mat<f64>], p_start: usize) -> Result<Self, LieError> {
        let n = basis.len();
        let rows = basis[0].rows() * basis[0].cols();
        let flat = DMatrix::from_fn(rows, n, |r, c| basis[c].as_slice()[r]);
        let svd = flat.clone().svd(true, true);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let comm = basis[i].commutator(&basis[j]);
                let rhs = DMatrix::from_column_slice(rows, 1, comm.as_slice());
                let coef = svd.solve(&rhs, 1e-12).map_err(|e| LieError::File(e.to_string()))?;
                if (&flat * &coef - &rhs).norm() > 1e-10 {
                    return Err(LieError::File(format!("{name}: basis not closed under brackets")));
                }
                for k in 0..n {
                    let v = coef[(k, 0)];
                    let r = v.round();
                    if (v - r).abs() > 1e-10 {
                        return Err(LieError::File(format!("{name}: non-integral constant {v}")));
                    }
                    if r != 0.0 {
                        entries.push((i, j, k, T::from_f64_lossy(r)));
                    }
                }
            }
        }
        Self::from_entries(name, n, &entries, p_start)
    }
}

/// Matrix basis and `p_start` of the built-in algebras.
pub fn builtin_matrix_basis(name: &str) -> Result<(Vec<Mat<f64>>, usize), LieError> {
    let unit = |n: usize, r: usize, c: usize| {
        let mut m = Mat::<f64>::zeros(n, n);
        m[(r, c)] = 1.0;
        m
    };
    match name {
        "euc2" | "se2" => Ok((euclidean_basis(2), 2)),
        "euc3" | "se3" => Ok((euclidean_basis(3), 3)),
        "so3" => {
            let l1 = unit(3, 2, 1).sub(&unit(3, 1, 2));
            let l2 = unit(3, 0, 2).sub(&unit(3, 2, 0));
            let l3 = unit(3, 1, 0).sub(&unit(3, 0, 1));
            Ok((vec![l1, l2, l3], 2))
        }
        "heisenberg" => Ok((vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)], 3)),
        "sl2" => {
            let h = unit(2, 0, 0).sub(&unit(2, 1, 1));
            Ok((vec![unit(2, 0, 1), unit(2, 1, 0), h], 2))
        }
        other => {
            if let Some(rest) = other.strip_prefix("abelian") {
                let n: usize = rest
                    .parse()
                    .map_err(|_| LieError::Unknown(other.to_string()))?;
                if n == 0 {
                    return Err(LieError::Unknown(other.to_string()));
                }
                let basis = (0..n).map(|i| unit(n, i, i)).collect();
                return Ok((basis, n));
            }
            Err(LieError::Unknown(other.to_string()))
        }
    }
}

/// `euc(n)` as affine matrices: translations `t_a`, then rotations `r_ab`
/// (`a < b`) acting by `r_ab e_a = e_b`.
pub fn euclidean_basis(n: usize) -> Vec<Mat<f64>> {
    let mut basis = Vec::new();
    for a in 0..n {
        let mut t = Mat::zeros(n + 1, n + 1);
        t[(a, n)] = 1.0;
        basis.push(t);
    }
    for (a, b) in rotation_pairs(n) {
        let mut r = Mat::zeros(n + 1, n + 1);
        r[(b, a)] = 1.0;
        r[(a, b)] = -1.0;
        basis.push(r);
    }
    basis
}

/// Ordered index pairs `(a, b)`, `a < b`, labelling the `so(n)` basis.
pub fn rotation_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            out.push((a, b));
        }
    }
    out
}

#[derive(Deserialize)]
struct AlgebraFile {
    name: String,
    dim: usize,
    brackets: Vec<(usize, usize, usize, serde_json::Value)>,
    p_start: usize,
}

impl LieAlgebraSpec<BigRational> {
    /// Parses the JSON algebra definition format with exact coefficients.
    /// Values may be JSON numbers or strings `"p/q"`.
    pub fn from_json(text: &str) -> Result<Self, LieError> {
        let file: AlgebraFile =
            serde_json::from_str(text).map_err(|e| LieError::File(e.to_string()))?;
        let mut entries = Vec::new();
        for (i, j, k, v) in file.brackets {
            let value = match &v {
                serde_json::Value::Number(num) => {
                    let f = num
                        .as_f64()
                        .ok_or_else(|| LieError::File(format!("bad number {num}")))?;
                    BigRational::from_float(f)
                        .ok_or_else(|| LieError::File(format!("bad number {num}")))?
                }
                serde_json::Value::String(s) => parse_rational(s)?,
                other => return Err(LieError::File(format!("bad coefficient {other}"))),
            };
            entries.push((i, j, k, value));
        }
        Self::from_entries(&file.name, file.dim, &entries, file.p_start)
    }
}

fn parse_rational(s: &str) -> Result<BigRational, LieError> {
    let bad = || LieError::File(format!("bad rational '{s}'"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(
            BigInt::from_str(s).map_err(|_| bad())?,
        )),
    }
}

/// Element of `Hom(⊗^r g, V)` with `V = Λ²(g/p)* ⊗ g`.
///
/// Layout: derivative slots `a_1..a_r` over `g`, then the two antisymmetric
/// `V` slots `i, j` over the `g/p` section, then the value index `c` over `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomTensor {
    order: usize,
    dim_g: usize,
    n: usize,
    data: Vec<f64>,
}

impl HomTensor {
    pub fn zeros(order: usize, dim_g: usize, n: usize) -> Self {
        HomTensor {
            order,
            dim_g,
            n,
            data: vec![0.0; dim_g.pow(order as u32) * n * n * dim_g],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn quotient_dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.dim_g; self.order];
        s.extend([self.n, self.n, self.dim_g]);
        s
    }

    pub fn tuple_count(&self) -> usize {
        self.dim_g.pow(self.order as u32)
    }

    pub fn index(&self, tuple: usize, i: usize, j: usize, c: usize) -> usize {
        ((tuple * self.n + i) * self.n + j) * self.dim_g + c
    }

    pub fn get(&self, tuple: usize, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.index(tuple, i, j, c)]
    }

    pub fn set(&mut self, tuple: usize, i: usize, j: usize, c: usize, v: f64) {
        let k = self.index(tuple, i, j, c);
        self.data[k] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &HomTensor) -> HomTensor {
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &HomTensor, s: f64) {
        for (o, b) in self.data.iter_mut().zip(&other.data) {
            *o += s * b;
        }
    }

    /// First-slot contraction `φ ⌞ A`.
    pub fn contract(&self, a: &[f64]) -> HomTensor {
        assert!(self.order >= 1, "contraction needs order ≥ 1");
        let mut out = HomTensor::zeros(self.order - 1, self.dim_g, self.n);
        let block = out.data.len();
        for (s, &as_) in a.iter().enumerate() {
            if as_ == 0.0 {
                continue;
            }
            for (o, x) in out.data.iter_mut().zip(&self.data[s * block..(s + 1) * block]) {
                *o += as_ * x;
            }
        }
        out
    }

    /// Applies `m` along `axis`: `new[.., a, ..] = Σ_b m[(a, b)] old[.., b, ..]`.
    fn mode_apply(&self, axis: usize, m: &Mat<f64>) -> HomTensor {
        let shape = self.shape();
        let dim = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = self.clone();
        for o in 0..outer {
            for r in 0..inner {
                for a in 0..dim {
                    let mut acc = 0.0;
                    for b in 0..dim {
                        let w = m[(a, b)];
                        if w != 0.0 {
                            acc += w * self.data[(o * dim + b) * inner + r];
                        }
                    }
                    out.data[(o * dim + a) * inner + r] = acc;
                }
            }
        }
        out
    }
}

/// Action of a group element `p ∈ P`, given by `Ad p`, on `Hom(⊗^m g, V)`:
/// `(p.φ)(X_1..X_m)(u, v) = Ad p ∘ φ(Ad p⁻¹ X_1, .., Ad p⁻¹ X_m)(Ād p⁻¹ u, Ād p⁻¹ v)`.
#[derive(Clone, Debug)]
pub struct PRep {
    order: usize,
    ad: Mat<f64>,
    /// `(Ad p⁻¹)ᵀ`, acting on derivative slots.
    ad_inv_t: Mat<f64>,
    /// `(Ād p⁻¹)ᵀ` on the `g/p` slots.
    bar_inv_t: Mat<f64>,
}

impl PRep {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn apply(&self, phi: &HomTensor) -> HomTensor {
        assert_eq!(phi.order, self.order, "representation order mismatch");
        let mut out = phi.clone();
        for s in 0..phi.order {
            out = out.mode_apply(s, &self.ad_inv_t);
        }
        out = out.mode_apply(phi.order, &self.bar_inv_t);
        out = out.mode_apply(phi.order + 1, &self.bar_inv_t);
        out.mode_apply(phi.order + 2, &self.ad)
    }

    /// Dense matrix of the action in the flat tensor basis.
    pub fn to_matrix(&self, dim_g: usize, n: usize) -> DMatrix<f64> {
        let size = HomTensor::zeros(self.order, dim_g, n).data.len();
        let mut m = DMatrix::zeros(size, size);
        for col in 0..size {
            let mut e = HomTensor::zeros(self.order, dim_g, n);
            e.data[col] = 1.0;
            let img = self.apply(&e);
            for (row, v) in img.data.iter().enumerate() {
                m[(row, col)] = *v;
            }
        }
        m
    }
}

impl LieAlgebraSpec<f64> {
    fn in_p(&self, x: &[f64]) -> bool {
        x[..self.p_start].iter().all(|v| v.abs() <= 1e-14 * (1.0 + norm(x)))
    }

    /// `Ad(exp X) = exp(ad X)` for `X ∈ p`.
    pub fn adjoint_of_group_element(&self, x: &[f64]) -> Result<Mat<f64>, LieError> {
        if x.len() != self.dim {
            return Err(LieError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_p(x) {
            return Err(LieError::NotInP);
        }
        Ok(self.adjoint_exp(x))
    }

    /// `exp(ad X)` for arbitrary `X`.
    pub fn adjoint_exp(&self, x: &[f64]) -> Mat<f64> {
        Mat::from_na(&self.ad_matrix(x).to_na().exp())
    }

    /// Representation of the element with adjoint matrix `ad_p` on `V`.
    pub fn rep_on_v(&self, ad_p: &Mat<f64>) -> Result<PRep, LieError> {
        self.rep_on_hom(0, ad_p)
    }

    /// Representation on `Hom(⊗^m g, V)`.
    pub fn rep_on_hom(&self, m: usize, ad_p: &Mat<f64>) -> Result<PRep, LieError> {
        if ad_p.rows() != self.dim || ad_p.cols() != self.dim {
            return Err(LieError::DimensionMismatch {
                expected: self.dim,
                got: ad_p.rows(),
            });
        }
        let inv = ad_p.inverse().ok_or(LieError::NotInP)?;
        let n = self.p_start;
        let bar_inv = Mat::from_fn(n, n, |i, j| inv[(i, j)]);
        Ok(PRep {
            order: m,
            ad: ad_p.clone(),
            ad_inv_t: inv.transpose(),
            bar_inv_t: bar_inv.transpose(),
        })
    }

    /// Infinitesimal action `X.φ` of `X ∈ p` on `Hom(⊗^m g, V)`:
    /// `ad X ∘ φ − Σ φ(.., ad X X_s, ..) − φ(ād X u, v) − φ(u, ād X v)`.
    pub fn infinitesimal_action(&self, x: &[f64], phi: &HomTensor) -> HomTensor {
        let ad = self.ad_matrix(x);
        let n = self.p_start;
        let ad_t = ad.transpose();
        let bar_t = Mat::from_fn(n, n, |i, j| ad[(j, i)]);
        let mut out = phi.mode_apply(phi.order + 2, &ad);
        for s in 0..phi.order {
            out.add_scaled(&phi.mode_apply(s, &ad_t), -1.0);
        }
        out.add_scaled(&phi.mode_apply(phi.order, &bar_t), -1.0);
        out.add_scaled(&phi.mode_apply(phi.order + 1, &bar_t), -1.0);
        out
    }

    /// The largest ideal of `g` contained in `p`, as an orthonormal basis
    /// (one column per vector). Nonzero means `P` contains a normal subgroup.
    pub fn maximal_ideal_in_p(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut s = DMatrix::zeros(n, n - self.p_start);
        for (c, k) in (self.p_start..n).enumerate() {
            s[(k, c)] = 1.0;
        }
        let ads: Vec<DMatrix<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                self.ad_matrix(&e).to_na()
            })
            .collect();
        loop {
            let k = s.ncols();
            if k == 0 {
                return s;
            }
            let proj = DMatrix::identity(n, n) - &s * s.transpose();
            let mut stacked = DMatrix::zeros(n * n, k);
            for (i, ad) in ads.iter().enumerate() {
                let block = &proj * ad * &s;
                stacked.view_mut((i * n, 0), (n, k)).copy_from(&block);
            }
            let ns = null_space(&stacked, 1e-10, 1e-14);
            if ns.basis.ncols() == k {
                return s;
            }
            s = orthonormal_basis(&(&s * &ns.basis), 1e-10);
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Standard basis vector.
pub fn unit_vector(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub type LieAlgebra = LieAlgebraSpec<f64>;
pub type ExactLieAlgebra = LieAlgebraSpec<BigRational>;

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn euc2() -> LieAlgebra {
        LieAlgebra::builtin("euc2").unwrap()
    }

    #[test]
    fn euc2_brackets() {
        let g = euc2();
        let (t1, t2, r) = (unit_vector(3, 0), unit_vector(3, 1), unit_vector(3, 2));
        assert_eq!(g.bracket(&r, &t1).unwrap(), t2);
        assert_eq!(g.bracket(&r, &t2).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert_eq!(g.bracket(&t1, &t2).unwrap(), vec![0.0; 3]);
        assert_eq!(g.p_start(), 2);
    }

    #[test]
    fn so3_brackets_cyclic() {
        let g = LieAlgebra::builtin("so3").unwrap();
        let e = |i| unit_vector(3, i);
        assert_eq!(g.bracket(&e(0), &e(1)).unwrap(), e(2));
        assert_eq!(g.bracket(&e(1), &e(2)).unwrap(), e(0));
        assert_eq!(g.bracket(&e(2), &e(0)).unwrap(), e(1));
        let ad = g.ad_matrix(&e(0));
        assert_eq!(ad.mul_vec(&e(1)), e(2));
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let g = euc2();
        assert_eq!(
            g.bracket(&[1.0, 0.0], &[0.0, 1.0, 0.0]),
            Err(LieError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn builtins_satisfy_jacobi_exactly() {
        for name in ["euc2", "euc3", "so3", "heisenberg", "sl2", "abelian3"] {
            let exact = ExactLieAlgebra::builtin(name).unwrap();
            assert_eq!(exact.jacobi_residual(), 0.0, "{name}");
            let float = LieAlgebra::builtin(name).unwrap();
            assert!(float.jacobi_residual() <= 1e-12, "{name}");
        }
    }

    #[test]
    fn rejects_non_jacobi_constants() {
        // [e0,e1]=e1, [e1,e2]=e0, [e0,e2]=0 violates Jacobi
        let bad = LieAlgebra::from_entries("bad", 3, &[(0, 1, 1, 1.0), (1, 2, 0, 1.0)], 3);
        assert!(matches!(bad, Err(LieError::Jacobi(_))));
    }

    #[test]
    fn rejects_contradictory_antisymmetry() {
        let bad = LieAlgebra::from_entries("bad", 2, &[(0, 1, 1, 1.0), (1, 0, 1, 1.0)], 2);
        assert!(matches!(bad, Err(LieError::NotAntisymmetric { .. })));
    }

    #[test]
    fn rejects_p_not_subalgebra() {
        // so3 with p = span(e1, e2): [e1, e2] = e3 leaves p
        let so3 = LieAlgebra::builtin("so3").unwrap();
        let mut entries = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let c = *so3.structure((i + 2) % 3, (j + 2) % 3, (k + 2) % 3);
                    if c != 0.0 {
                        entries.push((i, j, k, c));
                    }
                }
            }
        }
        let bad = LieAlgebra::from_entries("so3-bad", 3, &entries, 1);
        assert!(matches!(bad, Err(LieError::NotSubalgebra { .. })));
    }

    #[test]
    fn algebra_file_roundtrip() {
        let text = r#"{"name":"so3","dim":3,"brackets":[[0,1,2,1],[1,2,0,"1"],[2,0,1,"2/2"]],"p_start":2}"#;
        let g = ExactLieAlgebra::from_json(text).unwrap();
        assert!(g.structure(1, 0, 2) == &-BigRational::one());
        assert_eq!(g, ExactLieAlgebra::builtin("so3").unwrap());
    }

    #[test]
    fn adjoint_of_rotation_rotates_translations() {
        let g = euc2();
        let t = 0.7_f64;
        let ad = g.adjoint_of_group_element(&[0.0, 0.0, t]).unwrap();
        assert!((ad[(0, 0)] - t.cos()).abs() < 1e-14);
        assert!((ad[(1, 0)] - t.sin()).abs() < 1e-14);
        assert!((ad[(0, 1)] + t.sin()).abs() < 1e-14);
        assert!((ad[(2, 2)] - 1.0).abs() < 1e-14);
        let back = g.adjoint_of_group_element(&[0.0, 0.0, -t]).unwrap();
        let id = ad.matmul(&back);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-12);
            }
        }
        assert_eq!(g.adjoint_of_group_element(&[1.0, 0.0, 0.0]), Err(LieError::NotInP));
    }

    #[test]
    fn maximal_ideal_examples() {
        assert_eq!(euc2().maximal_ideal_in_p().ncols(), 0);
        assert_eq!(LieAlgebra::builtin("so3").unwrap().maximal_ideal_in_p().ncols(), 0);
        let degenerate = LieAlgebra::from_entries("so3", 3, &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)], 0)
            .unwrap();
        assert_eq!(degenerate.maximal_ideal_in_p().ncols(), 3);
        // Heisenberg with p = centre: the centre is an ideal
        let heis = LieAlgebra::builtin("heisenberg").unwrap();
        let mut entries = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let c = *heis.structure(i, j, k);
                    if c != 0.0 {
                        entries.push((i, j, k, c));
                    }
                }
            }
        }
        let centred = LieAlgebra::from_entries("heis/z", 3, &entries, 2).unwrap();
        assert_eq!(centred.maximal_ideal_in_p().ncols(), 1);
    }

    #[test]
    fn rep_identity_and_order_zero() {
        let g = euc2();
        let id = Mat::identity(3);
        let rep = g.rep_on_v(&id).unwrap();
        let mut phi = HomTensor::zeros(0, 3, 2);
        phi.set(0, 0, 1, 2, 1.5);
        phi.set(0, 1, 0, 2, -1.5);
        assert_eq!(rep.apply(&phi), phi);
        let rep1 = g.rep_on_hom(1, &id).unwrap();
        let mut psi = HomTensor::zeros(1, 3, 2);
        psi.data_mut()[7] = 2.0;
        assert_eq!(rep1.apply(&psi), psi);
    }
}
