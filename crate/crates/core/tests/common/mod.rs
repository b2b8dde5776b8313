//! Independent reference computations for the integration tests. Nothing
//! here uses jets, the curvature module or the Killing solver.
#![allow(dead_code)]

use cartan::{CartanChart, Mat, MetricSpec};
use nalgebra::{DMatrix, DVector};

pub fn metric_at(spec: &MetricSpec, x: &[f64]) -> DMatrix<f64> {
    let g: Mat<f64> = spec.metric(x);
    g.to_na()
}

/// `∂g/∂x_k` by central differences.
pub fn metric_partials(spec: &MetricSpec, x: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..x.len())
        .map(|k| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            (metric_at(spec, &xp) - metric_at(spec, &xm)) / (2.0 * h)
        })
        .collect()
}

/// Gauss curvature of a 2D metric from the Brioschi formula with
/// finite-difference derivatives of `E, F, G`.
pub fn brioschi(spec: &MetricSpec, x: &[f64]) -> f64 {
    let h = 2e-4;
    let f = |dx: f64, dy: f64| {
        let g = metric_at(spec, &[x[0] + dx, x[1] + dy]);
        (g[(0, 0)], g[(0, 1)], g[(1, 1)])
    };
    let d1 = |sel: fn((f64, f64, f64)) -> f64, u: bool| {
        let (a, b) = if u { (h, 0.0) } else { (0.0, h) };
        let c = |s: f64| sel(f(s * a, s * b));
        (-c(2.0) + 8.0 * c(1.0) - 8.0 * c(-1.0) + c(-2.0)) / (12.0 * h)
    };
    let d2 = |sel: fn((f64, f64, f64)) -> f64, i: usize, j: usize| {
        let c = |a: f64, b: f64| sel(f(a, b));
        match (i, j) {
            (0, 0) => (-c(2.0 * h, 0.0) + 16.0 * c(h, 0.0) - 30.0 * c(0.0, 0.0) + 16.0 * c(-h, 0.0) - c(-2.0 * h, 0.0)) / (12.0 * h * h),
            (1, 1) => (-c(0.0, 2.0 * h) + 16.0 * c(0.0, h) - 30.0 * c(0.0, 0.0) + 16.0 * c(0.0, -h) - c(0.0, -2.0 * h)) / (12.0 * h * h),
            _ => (c(h, h) - c(h, -h) - c(-h, h) + c(-h, -h)) / (4.0 * h * h),
        }
    };
    let e_ = |t: (f64, f64, f64)| t.0;
    let f_ = |t: (f64, f64, f64)| t.1;
    let g_ = |t: (f64, f64, f64)| t.2;
    let (e, ff, g) = f(0.0, 0.0);
    let (eu, ev) = (d1(e_, true), d1(e_, false));
    let (fu, fv) = (d1(f_, true), d1(f_, false));
    let (gu, gv) = (d1(g_, true), d1(g_, false));
    let evv = d2(e_, 1, 1);
    let fuv = d2(f_, 0, 1);
    let guu = d2(g_, 0, 0);
    let m1 = nalgebra::Matrix3::new(
        -evv / 2.0 + fuv - guu / 2.0, eu / 2.0, fu - ev / 2.0,
        fv - gu / 2.0, e, ff,
        gv / 2.0, ff, g,
    );
    let m2 = nalgebra::Matrix3::new(0.0, ev / 2.0, gu / 2.0, ev / 2.0, e, ff, gu / 2.0, ff, g);
    (m1.determinant() - m2.determinant()) / (e * g - ff * ff).powi(2)
}

/// `(L_V g)_ij` at `x` for a vector field given as a closure, using central
/// differences for both `∂g` and `∂V`.
pub fn lie_derivative_metric(
    spec: &MetricSpec,
    field: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
) -> DMatrix<f64> {
    let n = x.len();
    let h = 1e-5;
    let g = metric_at(spec, x);
    let dg = metric_partials(spec, x, h);
    let v = field(x);
    let mut dv = DMatrix::zeros(n, n); // dv[(k, i)] = ∂_i V^k
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (vp, vm) = (field(&xp), field(&xm));
        for k in 0..n {
            dv[(k, i)] = (vp[k] - vm[k]) / (2.0 * h);
        }
    }
    DMatrix::from_fn(n, n, |i, j| {
        let mut s = 0.0;
        for k in 0..n {
            s += v[k] * dg[k][(i, j)] + g[(k, j)] * dv[(k, i)] + g[(i, k)] * dv[(k, j)];
        }
        s
    })
}

/// Rotation fields of the round sphere in stereographic coordinates.
pub fn sphere_rotation_fields() -> Vec<fn(&[f64]) -> Vec<f64>> {
    vec![
        |x| vec![-x[1], x[0]],
        |x| vec![(1.0 + x[0] * x[0] - x[1] * x[1]) / 2.0, x[0] * x[1]],
        |x| vec![x[0] * x[1], (1.0 - x[0] * x[0] + x[1] * x[1]) / 2.0],
    ]
}

/// Killing-equation null space: polynomial fields of total degree `deg` in
/// `x − x0` are fitted to `L_V g = 0` on a sample grid of half-width `rho`.
/// Returns the singular values (descending) of the column-normalized system.
pub fn killing_oracle_spectrum(spec: &MetricSpec, x0: &[f64], rho: f64, deg: usize) -> Vec<f64> {
    let n = x0.len();
    assert_eq!(n, 2, "oracle is two-dimensional");
    let monos: Vec<(usize, usize)> = (0..=deg)
        .flat_map(|d| (0..=d).map(move |a| (a, d - a)))
        .collect();
    let unknowns = n * monos.len();
    let steps = 7;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let h = 1e-5;
    for i in 0..steps {
        for j in 0..steps {
            let s = |k: usize| -rho + 2.0 * rho * k as f64 / (steps - 1) as f64;
            let x = [x0[0] + s(i), x0[1] + s(j)];
            let d = [x[0] - x0[0], x[1] - x0[1]];
            let g = metric_at(spec, &x);
            let dg = metric_partials(spec, &x, h);
            // value and gradient of each monomial
            let val: Vec<f64> = monos.iter().map(|&(a, b)| d[0].powi(a as i32) * d[1].powi(b as i32)).collect();
            let grad: Vec<[f64; 2]> = monos
                .iter()
                .map(|&(a, b)| {
                    let gx = if a > 0 { a as f64 * d[0].powi(a as i32 - 1) * d[1].powi(b as i32) } else { 0.0 };
                    let gy = if b > 0 { b as f64 * d[0].powi(a as i32) * d[1].powi(b as i32 - 1) } else { 0.0 };
                    [gx, gy]
                })
                .collect();
            for (p, q) in [(0, 0), (0, 1), (1, 1)] {
                let mut row = vec![0.0; unknowns];
                for k in 0..n {
                    for (m, _) in monos.iter().enumerate() {
                        let col = k * monos.len() + m;
                        // V^k ∂_k g_pq + g_kq ∂_p V^k + g_pk ∂_q V^k
                        row[col] = val[m] * dg[k][(p, q)] + g[(k, q)] * grad[m][p] + g[(p, k)] * grad[m][q];
                    }
                }
                rows.push(row);
            }
        }
    }
    let mut a = DMatrix::from_fn(rows.len(), unknowns, |r, c| rows[r][c]);
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let mut sv: Vec<f64> = a.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|p, q| q.partial_cmp(p).unwrap());
    sv
}

/// Null-space dimension of the oracle spectrum at relative threshold `tol`.
pub fn oracle_killing_dimension(spec: &MetricSpec, x0: &[f64]) -> (usize, f64) {
    let sv = killing_oracle_spectrum(spec, x0, 0.25, 3);
    let smax = sv[0];
    let k = sv.iter().filter(|&&s| s <= 1e-7 * smax).count();
    let kept = sv[sv.len() - k - 1];
    let cut = if k > 0 { sv[sv.len() - k] } else { 0.0 };
    (k, kept / cut.max(1e-300))
}

/// Matrix exponential by scaling and squaring of the Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(s);
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Principal matrix logarithm near the identity by the Mercator series.
pub fn logm_near_identity(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let a = m - DMatrix::identity(n, n);
    assert!(a.norm() < 0.9, "logarithm series needs ‖M − I‖ < 1");
    let mut power = a.clone();
    let mut sum = DMatrix::zeros(n, n);
    for k in 1..200 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += &power * (sign / k as f64);
        power = &power * &a;
        if power.norm() < 1e-18 {
            break;
        }
    }
    sum
}

/// Coordinates of a matrix in a basis, by least squares.
pub fn coordinates(basis: &[Mat<f64>], m: &DMatrix<f64>) -> Vec<f64> {
    let cols: Vec<DVector<f64>> = basis
        .iter()
        .map(|e| DVector::from_iterator(m.len(), e.to_na().iter().copied()))
        .collect();
    let a = DMatrix::from_columns(&cols);
    let rhs = DVector::from_iterator(m.len(), m.iter().copied());
    a.svd(true, true).solve(&rhs, 1e-14).unwrap().iter().copied().collect()
}

/// Least-squares polynomial `c_1 t + … + c_deg t^deg` through `(t, v)` samples.
pub fn polyfit_no_constant(ts: &[f64], vs: &[f64], deg: usize) -> Vec<f64> {
    let scale = ts.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let a = DMatrix::from_fn(ts.len(), deg, |i, j| (ts[i] / scale).powi(j as i32 + 1));
    let rhs = DVector::from_column_slice(vs);
    let c = a.svd(true, true).solve(&rhs, 1e-15).unwrap();
    (0..deg).map(|j| c[j] / scale.powi(j as i32 + 1)).collect()
}

/// Largest principal angle between the column spaces of `a` and `b`.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).svd(false, false).singular_values;
    let smin = s.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    smin.min(1.0).acos()
}

/// `K(u, v) = [u, v] − W(b)[ẽ_u, ẽ_v]` with the frame fields `ẽ = W⁻¹e`
/// differentiated by central differences.
pub fn curvature_fd(chart: &impl CartanChart, b: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = b.len();
    let h = 1e-5;
    let field = |p: &[f64], a: &[f64]| -> DVector<f64> {
        let w: Mat<f64> = chart.omega(p);
        w.to_na().lu().solve(&DVector::from_column_slice(a)).unwrap()
    };
    let jac = |a: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut bp = b.to_vec();
            let mut bm = b.to_vec();
            bp[i] += h;
            bm[i] -= h;
            j.set_column(i, &((field(&bp, a) - field(&bm, a)) / (2.0 * h)));
        }
        j
    };
    let (fu, fv) = (field(b, u), field(b, v));
    let bracket = jac(v) * &fu - jac(u) * &fv;
    let w: Mat<f64> = chart.omega(b);
    let wb = w.to_na() * bracket;
    let alg = chart.algebra().bracket_of(u, v);
    (0..n).map(|c| alg[c] - wb[c]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, p| m.max(p.abs()))
}
