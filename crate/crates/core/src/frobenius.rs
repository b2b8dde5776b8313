//! Local Killing fields integrated from generators, local automorphisms
//! between ∞-related points, and the bracket defects `Δ_k`.

use crate::bundle::{dim, flow, omega_checked, BundleError, CartanChart, FlowResult};
use crate::curvature::{field_bracket, lie_derivative, omega_jet, CurvatureError};
use crate::jet::Jet;
use crate::killing::{membership_residual, stabilize_jet, KillingError, RankOptions};
use crate::linalg::Mat;
use crate::ode::{integrate, OdeOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrobeniusError {
    #[error(transparent)]
    Killing(#[from] KillingError),
    #[error("sample parameter of norm {norm:.3e} exceeds radius {radius:.3e}")]
    OutsideBall { norm: f64, radius: f64 },
    #[error("chart has no base metric")]
    NoBaseMetric,
    #[error("points are not related: residual {0:.3e}")]
    NotRelated(f64),
    #[error("could not reach base point {0:?} from the exponential chart")]
    BaseUnreachable(Vec<f64>),
}

impl From<BundleError> for FrobeniusError {
    fn from(e: BundleError) -> Self {
        FrobeniusError::Killing(e.into())
    }
}

impl From<CurvatureError> for FrobeniusError {
    fn from(e: CurvatureError) -> Self {
        FrobeniusError::Killing(e.into())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(m: &Mat<f64>) -> f64 {
    m.as_slice().iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `count` points uniform in the ball of `radius` in `R^dim`.
pub fn ball_samples(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r <= 1.0 {
            out.push(v.iter().map(|x| x * radius).collect());
        }
    }
    out
}

/// A value of the field at `exp(b, X)`.
#[derive(Clone, Debug, Serialize)]
pub struct FieldSample {
    pub param: Vec<f64>,
    pub point: Vec<f64>,
    pub vector: Vec<f64>,
}

/// `Ã(exp(b, X)) = φ^1_{X̃*}(ω_b⁻¹A)` sampled over an exponential ball.
#[derive(Clone, Debug, Serialize)]
pub struct LocalKillingField {
    pub basepoint: Vec<f64>,
    pub generator: Vec<f64>,
    pub radius: f64,
    pub tol: f64,
    /// `ω_b⁻¹A`.
    pub initial: Vec<f64>,
    pub samples: Vec<FieldSample>,
}

impl LocalKillingField {
    /// Flow data and field value at `exp(b, X)`.
    pub fn evaluate(
        &self,
        chart: &impl CartanChart,
        x: &[f64],
    ) -> Result<(FlowResult, Vec<f64>), BundleError> {
        let f = flow(chart, &self.basepoint, x, 1.0, self.tol)?;
        let v = f.pushforward.mul_vec(&self.initial);
        Ok((f, v))
    }
}

/// Builds the local field of a generator `A ∈ Kill(b)` by pushing `ω_b⁻¹A`
/// forward along the ω-constant flows of the exponential chart.
pub fn integrate_killing_field(
    chart: &impl CartanChart,
    b: &[f64],
    a: &[f64],
    radius: f64,
    params: &[Vec<f64>],
    tol: f64,
) -> Result<LocalKillingField, FrobeniusError> {
    let n = dim(chart);
    if a.len() != n {
        return Err(KillingError::Dimension {
            expected: n,
            got: a.len(),
        }
        .into());
    }
    if norm(a) > 0.0 {
        let m_max = crate::curvature::M_MAX;
        let jet = omega_jet(chart, b, m_max + 1)?;
        let order = stabilize_jet(&jet, m_max, RankOptions::default())?.order;
        let res = membership_residual(&jet, order, a);
        if res > 1e-6 {
            return Err(KillingError::Infeasible(res).into());
        }
    }
    let w = omega_checked(chart, b)?;
    let initial = w
        .solve_vec(a)
        .ok_or_else(|| BundleError::Singular(b.to_vec()))?;
    let mut field = LocalKillingField {
        basepoint: b.to_vec(),
        generator: a.to_vec(),
        radius,
        tol,
        initial,
        samples: Vec::new(),
    };
    field.samples = params
        .par_iter()
        .map(|x| -> Result<FieldSample, FrobeniusError> {
            let r = norm(x);
            if r > radius * (1.0 + 1e-12) {
                return Err(FrobeniusError::OutsideBall { norm: r, radius });
            }
            let (f, vector) = field.evaluate(chart, x)?;
            Ok(FieldSample {
                param: x.clone(),
                point: f.endpoint,
                vector,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(field)
}

/// Per-sample Killing checks of a local field.
#[derive(Clone, Debug, Serialize)]
pub struct KillingReport {
    /// `max_Y ‖ω[Ã, Ỹ]‖ / ‖A‖` over samples and basis directions `Y`.
    pub bracket_residual: f64,
    /// `max ‖(φ^s_Ã)*ω − ω‖ / ‖A‖` over samples and `s`.
    pub pullback_residual: f64,
    pub per_sample: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Flow times for the pullback check.
    pub s_values: Vec<f64>,
    /// Finite-difference step in exponential parameters.
    pub h: f64,
    pub tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            s_values: vec![0.1, -0.1],
            h: 1e-4,
            tol: 1e-12,
        }
    }
}

/// `∂Ã/∂X` by central differences.
fn field_jacobian(
    chart: &impl CartanChart,
    field: &LocalKillingField,
    x: &[f64],
    h: f64,
) -> Result<Mat<f64>, BundleError> {
    let n = x.len();
    let mut jac = Mat::zeros(n, n);
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (_, vp) = field.evaluate(chart, &xp)?;
        let (_, vm) = field.evaluate(chart, &xm)?;
        for r in 0..n {
            jac[(r, i)] = (vp[r] - vm[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// The flow of `Ã` in exponential parameters: `dX/ds = (∂exp_b/∂X)⁻¹ Ã`.
fn field_flow_params(
    chart: &impl CartanChart,
    field: &LocalKillingField,
    x: &[f64],
    s: f64,
    tol: f64,
) -> Result<Vec<f64>, BundleError> {
    let rhs = |_: f64, y: &[f64]| -> Result<Vec<f64>, String> {
        let (f, v) = field.evaluate(chart, y).map_err(|e| e.to_string())?;
        f.d_generator
            .solve_vec(&v)
            .ok_or_else(|| "singular exponential chart".to_string())
    };
    let opts = OdeOptions::with_tol(tol);
    let (y, _) = integrate(rhs, 0.0, s, x, &opts)?;
    Ok(y)
}

/// Bracket-vanishing and flow-pullback checks at every sample of `field`.
pub fn verify_killing(
    chart: &impl CartanChart,
    field: &LocalKillingField,
    opts: &VerifyOptions,
) -> Result<KillingReport, FrobeniusError> {
    let n = dim(chart);
    let scale = norm(&field.generator).max(1e-300);
    let mut bracket_residual = 0.0_f64;
    let mut pullback_residual = 0.0_f64;
    if norm(&field.generator) == 0.0 {
        return Ok(KillingReport {
            bracket_residual,
            pullback_residual,
            per_sample: vec![(0.0, 0.0); field.samples.len()],
        });
    }
    let check = |sample: &FieldSample| -> Result<(f64, f64), FrobeniusError> {
        let x = &sample.param;
        let (f, a_q) = field.evaluate(chart, x)?;
        let q = f.endpoint.clone();
        let dinv = f
            .d_generator
            .inverse()
            .ok_or(BundleError::SingularShooting)?;
        let da = field_jacobian(chart, field, x, opts.h)?.matmul(&dinv);
        let vars = Jet::variables(&q, 1);
        let w_jet = chart.omega(&vars);
        let frame = w_jet
            .inverse()
            .ok_or_else(|| BundleError::Singular(q.clone()))?;
        let w_q = w_jet.values();
        let mut worst_bracket = 0.0_f64;
        for y in 0..n {
            let col = frame.column(y);
            let y_field: Vec<f64> = col.iter().map(Jet::value).collect();
            let mut unit = vec![0u8; n];
            // DỸ·Ã − DÃ·Ỹ
            let dy_a: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| {
                            unit.iter_mut().for_each(|e| *e = 0);
                            unit[k] = 1;
                            col[i].coeff(&unit) * a_q[k]
                        })
                        .sum()
                })
                .collect();
            let da_y = da.mul_vec(&y_field);
            let br: Vec<f64> = dy_a.iter().zip(&da_y).map(|(p, m)| p - m).collect();
            let wb = w_q.mul_vec(&br);
            worst_bracket = worst_bracket.max(wb.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale);
        }
        let mut worst_pull = 0.0_f64;
        for &s in &opts.s_values {
            let xs = field_flow_params(chart, field, x, s, opts.tol)?;
            let mut dphi = Mat::zeros(n, n);
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += opts.h;
                xm[i] -= opts.h;
                let yp = field_flow_params(chart, field, &xp, s, opts.tol)?;
                let ym = field_flow_params(chart, field, &xm, s, opts.tol)?;
                for r in 0..n {
                    dphi[(r, i)] = (yp[r] - ym[r]) / (2.0 * opts.h);
                }
            }
            let fs = flow(chart, &field.basepoint, &xs, 1.0, field.tol)?;
            let w_s: Mat<f64> = chart.omega(&fs.endpoint);
            // dφ^s in chart coordinates through the exponential parametrization
            let dq = fs.d_generator.matmul(&dphi).matmul(&dinv);
            let pull = w_s.matmul(&dq).sub(&w_q);
            worst_pull = worst_pull.max(max_abs(&pull) / scale);
        }
        Ok((worst_bracket, worst_pull))
    };
    let per_sample: Vec<(f64, f64)> = field
        .samples
        .par_iter()
        .map(check)
        .collect::<Result<_, _>>()?;
    for &(br, pull) in &per_sample {
        bracket_residual = bracket_residual.max(br);
        pullback_residual = pullback_residual.max(pull);
    }
    Ok(KillingReport {
        bracket_residual,
        pullback_residual,
        per_sample,
    })
}

/// Base projection of a local field with the Killing-equation residual.
#[derive(Clone, Debug, Serialize)]
pub struct BaseDescent {
    pub points: Vec<Vec<f64>>,
    pub vectors: Vec<Vec<f64>>,
    /// `max ‖L_A g‖_∞` over samples.
    pub killing_residual: f64,
}

/// Exponential parameter over base point `target`, by Newton from `guess`.
fn param_over(
    chart: &impl CartanChart,
    field: &LocalKillingField,
    target: &[f64],
    guess: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), FrobeniusError> {
    let n = target.len();
    let mut x = guess.to_vec();
    for _ in 0..20 {
        let (f, v) = field.evaluate(chart, &x)?;
        let r: Vec<f64> = (0..n).map(|i| f.endpoint[i] - target[i]).collect();
        if norm(&r) <= 1e-13 * (1.0 + norm(target)) {
            return Ok((x, v));
        }
        let jac = DMatrix::from_fn(n, x.len(), |i, j| f.d_generator[(i, j)]);
        let step = jac
            .pseudo_inverse(1e-14)
            .map_err(|_| FrobeniusError::BaseUnreachable(target.to_vec()))?
            * nalgebra::DVector::from_column_slice(&r);
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
    }
    Err(FrobeniusError::BaseUnreachable(target.to_vec()))
}

/// Projects the field to the base and evaluates `L_A g` by central
/// differences of the projected field with step `h`.
pub fn descend_to_base(
    chart: &impl CartanChart,
    field: &LocalKillingField,
    h: f64,
) -> Result<BaseDescent, FrobeniusError> {
    let metric = chart.base_metric().ok_or(FrobeniusError::NoBaseMetric)?;
    let n = chart.base_dim();
    let zero = norm(&field.generator) == 0.0;
    let per_sample = |s: &FieldSample| -> Result<f64, FrobeniusError> {
        if zero {
            return Ok(0.0);
        }
        let x = &s.point[..n];
        let a = &s.vector[..n];
        let mut grad = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let (_, vp) = param_over(chart, field, &xp, &s.param)?;
            let (_, vm) = param_over(chart, field, &xm, &s.param)?;
            for k in 0..n {
                grad[k][i] = (vp[k] - vm[k]) / (2.0 * h);
            }
        }
        let g: Mat<f64> = metric.metric(x);
        let dg: Vec<Mat<f64>> = metric.metric_derivatives(x);
        // (L_A g)_ij = A^k ∂_k g_ij + g_kj ∂_i A^k + g_ik ∂_j A^k
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut l = 0.0;
                for k in 0..n {
                    l += a[k] * dg[k][(i, j)] + g[(k, j)] * grad[k][i] + g[(i, k)] * grad[k][j];
                }
                worst = worst.max(l.abs());
            }
        }
        Ok(worst)
    };
    let residuals: Vec<f64> = field
        .samples
        .par_iter()
        .map(per_sample)
        .collect::<Result<_, _>>()?;
    let points = field.samples.iter().map(|s| s.point[..n].to_vec()).collect();
    let vectors = field.samples.iter().map(|s| s.vector[..n].to_vec()).collect();
    let residual = residuals.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(BaseDescent {
        points,
        vectors,
        killing_residual: residual,
    })
}

/// Per-order comparison of two curvature jets.
#[derive(Clone, Debug, Serialize)]
pub struct Relation {
    pub related: bool,
    /// `‖J_r(b) − J_r(b')‖ / max(‖J(b)‖, ‖J(b')‖, 1)`, `r = 0..m`.
    pub residuals: Vec<f64>,
    pub residual: f64,
}

/// Whether `b` and `b'` have equal curvature jets through order `m`
/// (including `K` itself).
pub fn m_related(
    chart: &impl CartanChart,
    b: &[f64],
    b2: &[f64],
    m: usize,
    tol: f64,
) -> Result<Relation, FrobeniusError> {
    let j1 = omega_jet(chart, b, m)?;
    let j2 = omega_jet(chart, b2, m)?;
    // jets that are pure rounding noise compare in absolute terms
    let scale = j1.norm().max(j2.norm()).max(1.0);
    let residuals: Vec<f64> = (0..=m)
        .map(|r| j1.j[r].sub(&j2.j[r]).max_abs() / scale)
        .collect();
    let worst = residuals.iter().fold(0.0, |a: f64, &v| a.max(v));
    Ok(Relation {
        related: worst <= tol,
        residuals,
        residual: worst,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AutomorphismSample {
    pub param: Vec<f64>,
    pub source: Vec<f64>,
    pub image: Vec<f64>,
    /// `‖(f*ω − ω)(source)‖_∞`.
    pub residual: f64,
}

/// `f(exp_b Y) = exp_{b'} Y` sampled over an exponential ball.
#[derive(Clone, Debug, Serialize)]
pub struct LocalAutomorphism {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub radius: f64,
    pub relation: Relation,
    pub samples: Vec<AutomorphismSample>,
    pub max_residual: f64,
}

/// Builds the local automorphism between ∞-related points and measures its
/// pullback defect through the pushforwards of both exponential charts.
pub fn local_automorphism(
    chart: &impl CartanChart,
    b: &[f64],
    b2: &[f64],
    radius: f64,
    params: &[Vec<f64>],
    tol: f64,
) -> Result<LocalAutomorphism, FrobeniusError> {
    let relation = m_related(chart, b, b2, crate::curvature::M_MAX, 1e-6)?;
    if !relation.related {
        return Err(FrobeniusError::NotRelated(relation.residual));
    }
    let samples: Vec<AutomorphismSample> = params
        .par_iter()
        .map(|y| -> Result<AutomorphismSample, FrobeniusError> {
            let r = norm(y);
            if r > radius * (1.0 + 1e-12) {
                return Err(FrobeniusError::OutsideBall { norm: r, radius });
            }
            let here = flow(chart, b, y, 1.0, tol)?;
            let there = flow(chart, b2, y, 1.0, tol)?;
            let dinv = here
                .d_generator
                .inverse()
                .ok_or(BundleError::SingularShooting)?;
            let df = there.d_generator.matmul(&dinv);
            let w_src: Mat<f64> = omega_checked(chart, &here.endpoint)?;
            let w_img: Mat<f64> = omega_checked(chart, &there.endpoint)?;
            Ok(AutomorphismSample {
                param: y.clone(),
                source: here.endpoint,
                image: there.endpoint,
                residual: max_abs(&w_img.matmul(&df).sub(&w_src)),
            })
        })
        .collect::<Result<_, _>>()?;
    let max_residual = samples.iter().fold(0.0_f64, |m, s| m.max(s.residual));
    Ok(LocalAutomorphism {
        source: b.to_vec(),
        target: b2.to_vec(),
        radius,
        relation,
        samples,
        max_residual,
    })
}

/// Which sign of the `X̃.Δ_k` term reproduces the direct `Δ_{k+1}`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum SignChoice {
    Minus,
    Plus,
    Both,
    Neither,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaRow {
    pub k: usize,
    /// `ad_X^k Y − ω_b(ad_{X̃}^k Ỹ)`.
    pub direct: Vec<f64>,
    /// Recursion from `Δ_{k−1}` with `−X̃.Δ_{k−1}` and `+X̃.Δ_{k−1}`; absent
    /// for `k = 1`.
    pub minus: Option<Vec<f64>>,
    pub plus: Option<Vec<f64>>,
    pub minus_error: Option<f64>,
    pub plus_error: Option<f64>,
    pub choice: Option<SignChoice>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
    pub tol: f64,
    /// `‖Δ_1 − K_b(X, Y)‖`.
    pub first_order_error: f64,
}

/// `Δ_k` directly from nested brackets of jet-valued ω-constant fields, with
/// both candidate recursions `Δ_{k+1} = K(X, ad_X^k Y − Δ_k) ∓ X̃.Δ_k + [X, Δ_k]`.
pub fn delta_k(
    chart: &impl CartanChart,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    k_max: usize,
    tol: f64,
) -> Result<DeltaTable, FrobeniusError> {
    let alg = chart.algebra();
    let n = alg.dim();
    omega_checked(chart, b)?;
    let vars = Jet::variables(b, k_max + 1);
    let w = chart.omega(&vars);
    let winv = w.inverse().ok_or_else(|| BundleError::Singular(b.to_vec()))?;
    let consts = |v: &[f64]| v.iter().map(|&c| Jet::constant(c)).collect::<Vec<_>>();
    let xt = winv.mul_vec(&consts(x));
    let yt = winv.mul_vec(&consts(y));
    let k_tensor = omega_jet(chart, b, 0)?.j.swap_remove(0);
    let nq = alg.quotient_dim();
    let curv = |u: &[f64], v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|c| {
                let mut acc = 0.0;
                for i in 0..nq {
                    for j in 0..nq {
                        acc += k_tensor.get(0, i, j, c) * u[i] * v[j];
                    }
                }
                acc
            })
            .collect()
    };

    // nested field brackets [X̃, …, [X̃, Ỹ]] and algebra brackets ad_X^k Y
    let mut field = yt;
    let mut alg_term = y.to_vec();
    let mut deltas: Vec<Vec<Jet>> = Vec::new();
    let mut alg_terms = vec![alg_term.clone()];
    for _ in 0..k_max {
        field = field_bracket(&xt, &field);
        alg_term = alg.bracket_of(x, &alg_term);
        let wf = w.mul_vec(&field);
        deltas.push(
            (0..n)
                .map(|c| Jet::constant(alg_term[c]) - wf[c].clone())
                .collect(),
        );
        alg_terms.push(alg_term.clone());
    }

    let value = |d: &[Jet]| d.iter().map(Jet::value).collect::<Vec<f64>>();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let direct = value(&deltas[k - 1]);
        let mut row = DeltaRow {
            k,
            direct: direct.clone(),
            minus: None,
            plus: None,
            minus_error: None,
            plus_error: None,
            choice: None,
        };
        if k >= 2 {
            let prev = value(&deltas[k - 2]);
            let diff: Vec<f64> = alg_terms[k - 1].iter().zip(&prev).map(|(a, d)| a - d).collect();
            let kpart = curv(x, &diff);
            let br = alg.bracket_of(x, &prev);
            let xd: Vec<f64> = deltas[k - 2]
                .iter()
                .map(|d| lie_derivative(&xt, d).value())
                .collect();
            let cand = |sign: f64| -> Vec<f64> {
                (0..n).map(|c| kpart[c] + sign * xd[c] + br[c]).collect()
            };
            let (minus, plus) = (cand(-1.0), cand(1.0));
            let scale = direct.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let (em, ep) = (dist(&minus, &direct), dist(&plus, &direct));
            let (okm, okp) = (em <= tol * scale, ep <= tol * scale);
            row.choice = Some(match (okm, okp) {
                (true, true) => SignChoice::Both,
                (true, false) => SignChoice::Minus,
                (false, true) => SignChoice::Plus,
                (false, false) => SignChoice::Neither,
            });
            row.minus = Some(minus);
            row.plus = Some(plus);
            row.minus_error = Some(em);
            row.plus_error = Some(ep);
        }
        rows.push(row);
    }
    let first_order_error = rows
        .first()
        .map(|r| dist(&r.direct, &curv(x, y)))
        .unwrap_or(0.0);
    Ok(DeltaTable {
        rows,
        tol,
        first_order_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::{Geometry, KleinChart};

    #[test]
    fn ball_samples_stay_inside() {
        let pts = ball_samples(3, 0.4, 50, 7);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| norm(p) <= 0.4));
        assert_eq!(pts, ball_samples(3, 0.4, 50, 7));
    }

    #[test]
    fn zero_generator_gives_zero_field() {
        let chart = Geometry::builtin("sphere2").unwrap();
        let b = chart.lift(&[0.2, 0.1]);
        let pts = ball_samples(3, 0.3, 4, 1);
        let f = integrate_killing_field(&chart, &b, &[0.0; 3], 0.3, &pts, 1e-11).unwrap();
        assert!(f.samples.iter().all(|s| s.vector.iter().all(|v| *v == 0.0)));
        let d = descend_to_base(&chart, &f, 1e-4).unwrap();
        assert_eq!(d.killing_residual, 0.0);
        let r = verify_killing(&chart, &f, &VerifyOptions::default()).unwrap();
        assert_eq!(r.pullback_residual, 0.0);
    }

    #[test]
    fn flat_translation_descends_to_constant_field() {
        let chart = Geometry::builtin("flat2").unwrap();
        let b = chart.lift(&[0.1, -0.2]);
        let pts = ball_samples(3, 0.5, 5, 3);
        let f = integrate_killing_field(&chart, &b, &[1.0, 0.0, 0.0], 0.5, &pts, 1e-12).unwrap();
        let d = descend_to_base(&chart, &f, 1e-4).unwrap();
        for v in &d.vectors {
            assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9, "{v:?}");
        }
        assert!(d.killing_residual < 1e-8);
    }

    #[test]
    fn outside_ball_rejected() {
        let chart = Geometry::builtin("flat2").unwrap();
        let b = chart.lift(&[0.0, 0.0]);
        let err = integrate_killing_field(&chart, &b, &[1.0, 0.0, 0.0], 0.1, &[vec![0.5, 0.0, 0.0]], 1e-10);
        assert!(matches!(err, Err(FrobeniusError::OutsideBall { .. })));
    }

    #[test]
    fn klein_points_are_related() {
        let chart = KleinChart::builtin("so3").unwrap();
        let r = m_related(&chart, &[0.1, 0.2, 0.3], &[-0.4, 0.0, 0.2], 3, 1e-9).unwrap();
        assert!(r.related);
        let same = m_related(&Geometry::builtin("bump").unwrap(), &[0.1, 0.1, 0.0], &[0.1, 0.1, 0.0], 2, 0.0).unwrap();
        assert!(same.related);
    }

    #[test]
    fn automorphism_onto_itself_is_exact() {
        let chart = Geometry::builtin("bump").unwrap();
        let b = [0.1, 0.1, 0.0];
        let pts = ball_samples(3, 0.2, 3, 2);
        let a = local_automorphism(&chart, &b, &b, 0.2, &pts, 1e-11).unwrap();
        assert!(a.max_residual < 1e-12);
        let far = local_automorphism(&chart, &b, &[0.3, -0.2, 0.0], 0.2, &pts, 1e-11);
        assert!(matches!(far, Err(FrobeniusError::NotRelated(_))));
    }

    #[test]
    fn flat_translation_automorphism() {
        let chart = Geometry::builtin("flat2").unwrap();
        let pts = ball_samples(3, 0.5, 10, 4);
        let a = local_automorphism(&chart, &[0.1, 0.2, 0.3], &[-0.3, 0.4, 0.3], 0.5, &pts, 1e-12).unwrap();
        assert!(a.max_residual < 1e-8, "{}", a.max_residual);
    }

    #[test]
    fn delta_vanishes_on_klein_charts() {
        let chart = KleinChart::builtin("so3").unwrap();
        let t = delta_k(&chart, &[0.2, -0.1, 0.3], &[0.3, 0.1, -0.2], &[-0.1, 0.4, 0.2], 3, 1e-8).unwrap();
        for row in &t.rows {
            assert!(row.direct.iter().all(|v| v.abs() < 1e-10), "{row:?}");
        }
    }

    #[test]
    fn first_delta_is_curvature() {
        let chart = Geometry::builtin("revolution").unwrap();
        let t = delta_k(&chart, &[0.5, 0.2, 0.1], &[0.3, -0.2, 0.4], &[0.1, 0.5, -0.3], 3, 1e-8).unwrap();
        assert!(t.first_order_error < 1e-12);
        assert!(t.rows[0].direct.iter().any(|v| v.abs() > 1e-3));
    }
}
