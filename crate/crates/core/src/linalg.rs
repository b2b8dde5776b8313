//! Small dense matrices over any [`Scalar`], plus rank-revealing helpers for
//! `f64` built on nalgebra's SVD.

use crate::scalar::{Real, Scalar};
use nalgebra::DMatrix;
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(rows.len(), cols, |r, c| rows[r][c].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        Self::from_fn(self.rows, rhs.cols, |r, c| {
            let mut acc = T::zero();
            for k in 0..self.cols {
                acc = acc + self[(r, k)].clone() * rhs[(k, c)].clone();
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = T::zero();
                for (k, vk) in v.iter().enumerate() {
                    acc = acc + self[(r, k)].clone() * vk.clone();
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, rhs: &Mat<T>) -> Mat<T> {
        Self::from_fn(self.rows, self.cols, |r, c| {
            self[(r, c)].clone() + rhs[(r, c)].clone()
        })
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Mat<T> {
        Self::from_fn(self.rows, self.cols, |r, c| {
            self[(r, c)].clone() - rhs[(r, c)].clone()
        })
    }

    pub fn scale(&self, s: &T) -> Mat<T> {
        Self::from_fn(self.rows, self.cols, |r, c| self[(r, c)].clone() * s.clone())
    }

    /// Commutator `AB − BA`.
    pub fn commutator(&self, rhs: &Mat<T>) -> Mat<T> {
        self.matmul(rhs).sub(&rhs.matmul(self))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn values(&self) -> Mat<f64> {
        self.map(|x| x.re())
    }
}

impl<T: Real> Mat<T> {
    /// Largest entry magnitude.
    pub fn magnitude(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.magnitude()))
    }

    /// Solves `self · X = rhs` by Gaussian elimination with partial pivoting
    /// on the constant terms. Returns `None` when a pivot vanishes.
    pub fn solve(&self, rhs: &Mat<T>) -> Option<Mat<T>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = self.data.iter().fold(0.0_f64, |m, x| m.max(x.re().abs()));
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    a[(i, col)]
                        .re()
                        .abs()
                        .total_cmp(&a[(j, col)].re().abs())
                })
                .unwrap();
            if !(a[(piv, col)].re().abs() > scale * 1e-300) || a[(piv, col)].re() == 0.0 {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.data.swap(piv * n + k, col * n + k);
                }
                for k in 0..b.cols {
                    b.data.swap(piv * b.cols + k, col * b.cols + k);
                }
            }
            let inv = a[(col, col)].clone().recip();
            for r in (col + 1)..n {
                if a[(r, col)].re() == 0.0 && a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone() * inv.clone();
                for k in col..n {
                    let v = a[(r, k)].clone() - f.clone() * a[(col, k)].clone();
                    a[(r, k)] = v;
                }
                for k in 0..b.cols {
                    let v = b[(r, k)].clone() - f.clone() * b[(col, k)].clone();
                    b[(r, k)] = v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = a[(col, col)].clone().recip();
            for k in 0..b.cols {
                let mut acc = b[(col, k)].clone();
                for j in (col + 1)..n {
                    acc = acc - a[(col, j)].clone() * b[(j, k)].clone();
                }
                b[(col, k)] = acc * inv.clone();
            }
        }
        Some(b)
    }

    pub fn solve_vec(&self, v: &[T]) -> Option<Vec<T>> {
        let rhs = Mat::from_fn(v.len(), 1, |r, _| v[r].clone());
        self.solve(&rhs).map(|x| x.column(0))
    }

    pub fn inverse(&self) -> Option<Mat<T>> {
        self.solve(&Mat::identity(self.rows))
    }

    /// Lower-triangular `L` with `L Lᵀ = self`; `None` unless positive definite.
    pub fn cholesky(&self) -> Option<Mat<T>> {
        let n = self.rows;
        let mut l = Mat::<T>::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].clone();
            for k in 0..j {
                d = d - l[(j, k)].clone() * l[(j, k)].clone();
            }
            if !(d.re() > 0.0) {
                return None;
            }
            let djj = d.sqrt();
            let inv = djj.clone().recip();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)].clone();
                for k in 0..j {
                    s = s - l[(i, k)].clone() * l[(j, k)].clone();
                }
                l[(i, j)] = s * inv.clone();
            }
        }
        Some(l)
    }

    /// Inverse of a nonsingular lower-triangular matrix.
    pub fn lower_inverse(&self) -> Mat<T> {
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = self[(j, j)].clone().recip();
            for i in (j + 1)..n {
                let mut s = T::zero();
                for k in j..i {
                    s = s + self[(i, k)].clone() * inv[(k, j)].clone();
                }
                inv[(i, j)] = -(s * self[(i, i)].clone().recip());
            }
        }
        inv
    }
}

impl Mat<f64> {
    pub fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_na(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// 2-norm condition number.
    pub fn condition(&self) -> f64 {
        let sv = self.to_na().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Result of a rank-revealing decomposition.
#[derive(Clone, Debug)]
pub struct NullSpace {
    /// Orthonormal kernel basis, one column per kernel vector.
    pub basis: DMatrix<f64>,
    /// Singular values in decreasing order (padded with zeros to the column count).
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Ratio between the smallest kept and largest cut singular value.
    pub gap: f64,
}

/// Cap used for gap ratios when nothing is cut or nothing is kept.
pub const GAP_CAP: f64 = 1e300;

/// Kernel of `a` using `σ_i < rel_tol · σ_max`; a matrix with
/// `σ_max < abs_floor` is treated as zero.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> NullSpace {
    let n = a.ncols();
    if n == 0 {
        return NullSpace {
            basis: DMatrix::zeros(0, 0),
            singular_values: vec![],
            rank: 0,
            gap: GAP_CAP,
        };
    }
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax < abs_floor {
        0
    } else {
        sv.iter().filter(|&&s| s >= rel_tol * smax).count()
    };
    let kernel_idx = &order[rank..];
    let mut basis = DMatrix::zeros(n, kernel_idx.len());
    for (c, &i) in kernel_idx.iter().enumerate() {
        for r in 0..n {
            basis[(r, c)] = v_t[(i, r)];
        }
    }
    let kept_min = if rank == 0 { None } else { Some(sv[rank - 1]) };
    let cut_max = sv.get(rank).copied();
    let gap = match (kept_min, cut_max) {
        (_, None) => GAP_CAP,
        (None, Some(c)) => {
            let reference = abs_floor.max(smax);
            if c == 0.0 {
                GAP_CAP
            } else {
                (reference / c).min(GAP_CAP)
            }
        }
        (Some(k), Some(c)) => {
            if c == 0.0 {
                GAP_CAP
            } else {
                (k / c).min(GAP_CAP)
            }
        }
    };
    NullSpace {
        basis,
        singular_values: sv,
        rank,
        gap,
    }
}

/// Orthonormal basis of the column span (numerical rank by `rel_tol`).
pub fn orthonormal_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut q = DMatrix::zeros(a.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        q.set_column(c, &u.column(i));
    }
    q
}

/// Largest principal angle between the spans of two orthonormal bases;
/// `π/2` when the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sines of the principal angles are the singular values of (I − AAᵀ)B
    let proj = b - a * (a.transpose() * b);
    let s = proj.singular_values().max().min(1.0);
    s.asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse() {
        let a = Mat::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
        let singular = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(singular.inverse().is_none());
    }

    #[test]
    fn cholesky_factor_and_lower_inverse() {
        let g = Mat::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = g.cholesky().unwrap();
        let back = l.matmul(&l.transpose());
        assert!((back[(0, 1)] - 2.0).abs() < 1e-15 && (back[(1, 1)] - 3.0).abs() < 1e-15);
        let li = l.lower_inverse();
        let id = l.matmul(&li);
        assert!((id[(1, 0)]).abs() < 1e-15 && (id[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).cholesky().is_none());
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-7, 1e-12);
        assert_eq!(ns.rank, 1);
        assert_eq!(ns.basis.ncols(), 2);
        assert!((a * &ns.basis).norm() < 1e-14);
        assert!(ns.gap > 1e10);
    }

    #[test]
    fn zero_matrix_has_full_kernel() {
        let a = DMatrix::zeros(4, 3);
        let ns = null_space(&a, 1e-7, 1e-12);
        assert_eq!(ns.basis.ncols(), 3);
        assert_eq!(ns.gap, GAP_CAP);
    }

    #[test]
    fn principal_angle_of_rotated_line() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let t: f64 = 0.1;
        let b = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        assert!((max_principal_angle(&a, &b) - t).abs() < 1e-14);
        let plane = DMatrix::identity(2, 2);
        assert_eq!(max_principal_angle(&a, &plane), std::f64::consts::FRAC_PI_2);
    }
}
