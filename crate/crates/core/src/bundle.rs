//! Charts of a Cartan bundle with the connection form as data, ω-constant
//! vector fields, their flows (the bundle exponential), inverse charts and
//! the composed-flow map ζ.

use crate::frontends::metric::MetricSpec;
use crate::jet::Jet;
use crate::liealg::LieAlgebra;
use crate::linalg::Mat;
use crate::ode::{integrate, OdeError, OdeOptions, OdeStats};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-10;
/// Charts whose connection matrix exceeds this condition number are rejected.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("point {0:?} is outside the chart domain")]
    OutsideDomain(Vec<f64>),
    #[error("connection matrix is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("connection matrix condition number {cond:e} exceeds limit at {point:?}")]
    IllConditioned { point: Vec<f64>, cond: f64 },
    #[error("flow left the chart domain at t = {t}")]
    DomainExit { t: f64 },
    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("integrator step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("shooting did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular shooting Jacobian")]
    SingularShooting,
    #[error("vector is not in p")]
    NotVertical,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid domain: {0}")]
    Domain(String),
}

impl From<OdeError> for BundleError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::Rejected { t, .. } => BundleError::DomainExit { t },
            OdeError::StepUnderflow { t } => BundleError::StepUnderflow { t },
            OdeError::TooManySteps { t } => BundleError::TooManySteps { t },
        }
    }
}

/// Axis-aligned open box.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    bounds: Vec<(f64, f64)>,
}

impl BoxDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, BundleError> {
        if bounds.is_empty() {
            return Err(BundleError::Domain("no axes".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BundleError::Domain(format!("axis {i}: [{lo}, {hi}]")));
            }
        }
        Ok(BoxDomain { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    /// Cell-centred grid with `per_axis` points along every axis.
    pub fn probe_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![]];
        for &(lo, hi) in &self.bounds {
            let mut next = Vec::with_capacity(out.len() * per_axis);
            for p in &out {
                for i in 0..per_axis {
                    let mut q = p.clone();
                    q.push(lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// Product with further axes.
    pub fn extend(&self, more: &[(f64, f64)]) -> BoxDomain {
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(more);
        BoxDomain { bounds }
    }
}

/// Coordinate chart of the Cartan bundle: an open box in `R^N`, `N = dim g`,
/// with the connection form given by an invertible matrix `W(b)` so that
/// `ω_b(v) = W(b)·v`.
///
/// Charts are p-adapted: the last `dim p` coordinates move along fibres and
/// `ω` of the corresponding coordinate field at a point of the zero section
/// is the matching `p` basis vector.
pub trait CartanChart: Send + Sync {
    fn algebra(&self) -> &LieAlgebra;

    fn domain(&self) -> &BoxDomain;

    /// `W(b)` evaluated over any [`Real`] scalar (jets give exact derivatives).
    fn omega<T: Real>(&self, b: &[T]) -> Mat<T>;

    fn label(&self) -> String;

    /// Number of base coordinates `n = dim g/p`.
    fn base_dim(&self) -> usize {
        self.algebra().p_start()
    }

    /// Base coordinates of a bundle point.
    fn project(&self, b: &[f64]) -> Vec<f64> {
        b[..self.base_dim()].to_vec()
    }

    /// Bundle point over base coordinates `x` on the chart's zero section.
    fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut b = x.to_vec();
        b.resize(self.algebra().dim(), 0.0);
        b
    }

    /// Base metric for Riemannian frontends.
    fn base_metric(&self) -> Option<&MetricSpec> {
        None
    }
}

pub fn dim<C: CartanChart + ?Sized>(chart: &C) -> usize {
    chart.algebra().dim()
}

fn check_point<C: CartanChart>(chart: &C, b: &[f64]) -> Result<(), BundleError> {
    if b.len() != dim(chart) {
        return Err(BundleError::Dimension {
            expected: dim(chart),
            got: b.len(),
        });
    }
    if !chart.domain().contains(b) {
        return Err(BundleError::OutsideDomain(b.to_vec()));
    }
    Ok(())
}

/// `W(b)` with domain and conditioning checks.
pub fn omega_checked<C: CartanChart>(chart: &C, b: &[f64]) -> Result<Mat<f64>, BundleError> {
    check_point(chart, b)?;
    let w: Mat<f64> = chart.omega(b);
    let cond = w.condition();
    if !cond.is_finite() {
        return Err(BundleError::Singular(b.to_vec()));
    }
    if cond > MAX_CONDITION {
        return Err(BundleError::IllConditioned {
            point: b.to_vec(),
            cond,
        });
    }
    Ok(w)
}

/// The ω-constant field `X̃` at `b`: the tangent vector with `W(b)·v = X`.
pub fn omega_constant_field<C: CartanChart>(
    chart: &C,
    x: &[f64],
    b: &[f64],
) -> Result<Vec<f64>, BundleError> {
    if x.len() != dim(chart) {
        return Err(BundleError::Dimension {
            expected: dim(chart),
            got: x.len(),
        });
    }
    check_point(chart, b)?;
    let w: Mat<f64> = chart.omega(b);
    w.solve_vec(x).ok_or_else(|| BundleError::Singular(b.to_vec()))
}

/// Jets of the frame fields: column `a` of `W⁻¹` is `ẽ_a`, expanded about `b`.
pub fn frame_jets<C: CartanChart>(chart: &C, b: &[f64], degree: usize) -> Option<Mat<Jet>> {
    let vars = Jet::variables(b, degree);
    chart.omega(&vars).inverse()
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    /// Differential of the flow map with respect to the initial point.
    pub pushforward: Mat<f64>,
    /// Derivative of the endpoint with respect to the generator `X`.
    pub d_generator: Mat<f64>,
    pub stats: OdeStats,
}

fn velocity<C: CartanChart>(chart: &C, x: &[f64], b: &[f64]) -> Result<Vec<f64>, String> {
    if !chart.domain().contains(b) {
        return Err("outside domain".into());
    }
    let w: Mat<f64> = chart.omega(b);
    w.solve_vec(x).ok_or_else(|| "singular connection matrix".into())
}

/// Endpoint of the flow of `X̃` for time `t`, i.e. `exp(b, tX)`.
pub fn flow_point<C: CartanChart>(
    chart: &C,
    b: &[f64],
    x: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    check_point(chart, b)?;
    let opts = OdeOptions::with_tol(tol);
    let (y, _) = integrate(|_, y| velocity(chart, x, y), 0.0, t, b, &opts)?;
    Ok(y)
}

/// Flow with the variational equations for `∂/∂b` and `∂/∂X` of the endpoint.
pub fn flow<C: CartanChart>(
    chart: &C,
    b: &[f64],
    x: &[f64],
    t: f64,
    tol: f64,
) -> Result<FlowResult, BundleError> {
    check_point(chart, b)?;
    let n = dim(chart);
    if x.len() != n {
        return Err(BundleError::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    let mut y0 = b.to_vec();
    for i in 0..n {
        for j in 0..n {
            y0.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    y0.extend(std::iter::repeat(0.0).take(n * n));
    let rhs = |_: f64, y: &[f64]| -> Result<Vec<f64>, String> {
        let p = &y[..n];
        if !chart.domain().contains(p) {
            return Err("outside domain".into());
        }
        let vars = Jet::variables(p, 1);
        let winv = chart
            .omega(&vars)
            .inverse()
            .ok_or_else(|| "singular connection matrix".to_string())?;
        let v: Vec<Jet> = winv.mul_vec(&x.iter().map(|&c| Jet::constant(c)).collect::<Vec<_>>());
        let mut unit = vec![0u8; n];
        let dv = Mat::from_fn(n, n, |i, j| {
            unit.iter_mut().for_each(|e| *e = 0);
            unit[j] = 1;
            v[i].coeff(&unit)
        });
        let mut out = Vec::with_capacity(y.len());
        out.extend(v.iter().map(|c| c.value()));
        let jb = &y[n..n + n * n];
        let jx = &y[n + n * n..];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += dv[(i, k)] * jb[k * n + j];
                }
                out.push(acc);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = winv[(i, j)].value();
                for k in 0..n {
                    acc += dv[(i, k)] * jx[k * n + j];
                }
                out.push(acc);
            }
        }
        Ok(out)
    };
    let opts = OdeOptions::with_tol(tol);
    let (y, stats) = integrate(rhs, 0.0, t, &y0, &opts)?;
    let pushforward = Mat::from_fn(n, n, |i, j| y[n + i * n + j]);
    let d_generator = Mat::from_fn(n, n, |i, j| y[n + n * n + i * n + j]);
    Ok(FlowResult {
        endpoint: y[..n].to_vec(),
        pushforward,
        d_generator,
        stats,
    })
}

/// `exp(b, X)` with its derivative in `X`.
pub fn exp_map<C: CartanChart>(
    chart: &C,
    b: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<FlowResult, BundleError> {
    flow(chart, b, x, 1.0, tol)
}

/// `log_{b0}(b1)`: the generator `X` with `exp(b0, X) = b1`, by Newton
/// shooting from `X₀ = W(b0)·(b1 − b0)`.
pub fn log<C: CartanChart>(
    chart: &C,
    b0: &[f64],
    b1: &[f64],
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    check_point(chart, b1)?;
    let w0 = omega_checked(chart, b0)?;
    let diff: Vec<f64> = b1.iter().zip(b0).map(|(a, b)| a - b).collect();
    let x0 = w0.mul_vec(&diff);
    log_from(chart, b0, b1, x0, tol)
}

/// Newton shooting for `log_{b0}(b1)` from a given initial guess.
pub fn log_from<C: CartanChart>(
    chart: &C,
    b0: &[f64],
    b1: &[f64],
    x0: Vec<f64>,
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    let flow_tol = (tol * 1e-2).max(1e-14);
    let scale = 1.0 + b1.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut x = x0;
    let mut last = f64::INFINITY;
    const MAX_ITER: usize = 40;
    for it in 0..MAX_ITER {
        let fr = match flow(chart, b0, &x, 1.0, flow_tol) {
            Ok(fr) => fr,
            Err(e) if it == 0 => return Err(e),
            Err(_) => {
                return Err(BundleError::NoConvergence {
                    iterations: it,
                    residual: last,
                })
            }
        };
        let r: Vec<f64> = fr.endpoint.iter().zip(b1).map(|(a, b)| a - b).collect();
        let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if res <= tol * scale {
            return Ok(x);
        }
        let dx = fr
            .d_generator
            .solve_vec(&r)
            .ok_or(BundleError::SingularShooting)?;
        // damped step: halve until the residual decreases
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - lambda * d).collect();
            if let Ok(end) = flow_point(chart, b0, &trial, 1.0, flow_tol) {
                let tr = end
                    .iter()
                    .zip(b1)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                if tr < res || tr <= tol * scale {
                    x = trial;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        last = res;
        if !accepted {
            return Err(BundleError::NoConvergence {
                iterations: it + 1,
                residual: res,
            });
        }
    }
    Err(BundleError::NoConvergence {
        iterations: MAX_ITER,
        residual: last,
    })
}

/// `ζ_b(X, Y) = log_b(exp(exp(b, X), Y))`.
pub fn zeta<C: CartanChart>(
    chart: &C,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    let flow_tol = (tol * 1e-2).max(1e-14);
    let b1 = flow_point(chart, b, x, 1.0, flow_tol)?;
    let b2 = flow_point(chart, &b1, y, 1.0, flow_tol)?;
    let guess: Vec<f64> = x.iter().zip(y).map(|(a, c)| a + c).collect();
    log_from(chart, b, &b2, guess, tol)
}

/// Flow along the fibre generated by `X ∈ p`; the endpoint is `b·exp(tX)`.
pub fn vertical_flow<C: CartanChart>(
    chart: &C,
    b: &[f64],
    x: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    let p0 = chart.algebra().p_start();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if x.len() != dim(chart) {
        return Err(BundleError::Dimension {
            expected: dim(chart),
            got: x.len(),
        });
    }
    if x[..p0].iter().any(|v| v.abs() > 1e-14 * scale.max(1.0)) {
        return Err(BundleError::NotVertical);
    }
    flow_point(chart, b, x, t, tol)
}

/// Empirical radius of a normal neighbourhood of `b`: the largest radius
/// (found by bisection up to `r_max`) at which `log_b ∘ exp_b` recovers random
/// generators of that length.
pub fn normal_radius<C: CartanChart>(
    chart: &C,
    b: &[f64],
    r_max: f64,
    directions: usize,
    seed: u64,
    tol: f64,
) -> Result<f64, BundleError> {
    check_point(chart, b)?;
    let n = dim(chart);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..directions)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|c| c / norm).collect()
        })
        .collect();
    let works = |r: f64| {
        dirs.par_iter().all(|d| {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            let Ok(end) = flow_point(chart, b, &x, 1.0, tol) else {
                return false;
            };
            match log(chart, b, &end, tol) {
                Ok(back) => back
                    .iter()
                    .zip(&x)
                    .all(|(a, c)| (a - c).abs() <= 1e-6 * r.max(1e-3)),
                Err(_) => false,
            }
        })
    };
    if works(r_max) {
        return Ok(r_max);
    }
    let (mut lo, mut hi) = (0.0, r_max);
    while hi - lo > 1e-2 * r_max {
        let mid = 0.5 * (lo + hi);
        if works(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
