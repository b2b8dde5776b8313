//! Killing generators `Kill^m(b)`, their stabilization, fiber equivariance
//! and transport along ω-constant flows.

mod strata;

pub use strata::{scan_strata, Grid, SampleResult, StrataOptions, StrataReport, Stratum};

use crate::bundle::{flow, omega_checked, vertical_flow, BundleError, CartanChart};
use crate::curvature::{omega_jet, CurvatureError, CurvatureJet};
use crate::linalg::{max_principal_angle, null_space};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

/// Relative rank tolerance on the constraint spectrum.
pub const TOL_RANK: f64 = 1e-7;
/// Constraint blocks whose largest entry is below this are numerical zeros.
pub const ABS_FLOOR: f64 = 1e-9;
/// Singular-value gaps below this ratio are flagged.
pub const MIN_GAP: f64 = 10.0;
/// Largest principal angle at which two kernels count as equal.
pub const STABLE_ANGLE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KillingError {
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("Killing spaces did not stabilize up to order {0}")]
    NotStabilized(usize),
    #[error("generator is not in Kill(b): residual {0:.3e}")]
    Infeasible(f64),
    #[error("vector of length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

impl From<BundleError> for KillingError {
    fn from(e: BundleError) -> Self {
        KillingError::Curvature(CurvatureError::Bundle(e))
    }
}

/// Rank controls for the constraint map.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RankOptions {
    pub tol_rank: f64,
    pub abs_floor: f64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            tol_rank: TOL_RANK,
            abs_floor: ABS_FLOOR,
        }
    }
}

/// A basis of `Kill^m(b)` with rank diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct KillingJetSolution {
    pub basepoint: Vec<f64>,
    pub order: usize,
    pub basis: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Smallest kept over largest cut singular value.
    pub gap: f64,
    pub tol_rank: f64,
    pub ill_separated: bool,
    /// Largest `max_r ‖J_r ⌞ A‖ / ‖J‖` over the basis.
    pub feasibility: f64,
    pub stabilization_order: Option<usize>,
}

impl KillingJetSolution {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis as the columns of a matrix.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.basepoint.len();
        DMatrix::from_fn(n, self.basis.len(), |i, j| self.basis[j][i])
    }
}

/// Stacked map `A ↦ (J_r ⌞ A)_{r=1..m}`, each order scaled to unit max entry
/// so that high orders do not drown low ones.
pub fn constraint_matrix(jet: &CurvatureJet, m: usize, abs_floor: f64) -> DMatrix<f64> {
    let big = jet.k().dim_g();
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    for r in 1..=m.min(jet.order) {
        let t = &jet.j[r];
        let len = t.data().len() / big;
        let scale = t.max_abs();
        if scale < abs_floor {
            continue;
        }
        // slot a of the first factor is the outermost index
        blocks.push(DMatrix::from_fn(len, big, |i, a| t.data()[a * len + i] / scale));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, big);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), big)).copy_from(&b);
        at += b.nrows();
    }
    out
}

/// `max_{1≤r≤m} ‖J_r ⌞ A‖` relative to `‖J‖·‖A‖`.
pub fn membership_residual(jet: &CurvatureJet, m: usize, a: &[f64]) -> f64 {
    let scale = jet.norm().max(1e-300) * crate::liealg::norm(a).max(1e-300);
    (1..=m.min(jet.order))
        .map(|r| jet.contract(r, a).max_abs())
        .fold(0.0, f64::max)
        / scale
}

/// `Kill^m(b)` from a precomputed jet of order at least `m`.
pub fn killing_from_jet(jet: &CurvatureJet, m: usize, opts: RankOptions) -> KillingJetSolution {
    let c = constraint_matrix(jet, m, opts.abs_floor);
    let big = jet.k().dim_g();
    let ns = if c.nrows() == 0 {
        null_space(&DMatrix::zeros(1, big), opts.tol_rank, opts.abs_floor)
    } else {
        null_space(&c, opts.tol_rank, opts.abs_floor)
    };
    let basis: Vec<Vec<f64>> = (0..ns.basis.ncols())
        .map(|j| ns.basis.column(j).iter().copied().collect())
        .collect();
    let feasibility = basis
        .iter()
        .map(|a| membership_residual(jet, m, a))
        .fold(0.0, f64::max);
    KillingJetSolution {
        basepoint: jet.basepoint.clone(),
        order: m,
        basis,
        singular_values: ns.singular_values,
        rank: ns.rank,
        gap: ns.gap,
        tol_rank: opts.tol_rank,
        ill_separated: ns.gap < MIN_GAP,
        feasibility,
        stabilization_order: None,
    }
}

/// `Kill^m(b)`: the common kernel of the contractions `D^rK(b) ⌞ ·`, `r ≤ m`.
pub fn killing_generators(
    chart: &impl CartanChart,
    b: &[f64],
    m: usize,
    tol_rank: f64,
) -> Result<KillingJetSolution, KillingError> {
    let jet = omega_jet(chart, b, m)?;
    Ok(killing_from_jet(
        &jet,
        m,
        RankOptions {
            tol_rank,
            ..RankOptions::default()
        },
    ))
}

/// Dimensions `k_1..k_{m_max+1}` and the stabilized solution, from one jet.
#[derive(Clone, Debug, Serialize)]
pub struct Stabilization {
    pub k_m: Vec<usize>,
    pub order: usize,
    pub solution: KillingJetSolution,
}

/// First `m ≤ m_max` whose kernel agrees with the next order's, using a jet
/// of order `m_max + 1`.
pub fn stabilize_jet(
    jet: &CurvatureJet,
    m_max: usize,
    opts: RankOptions,
) -> Result<Stabilization, KillingError> {
    let sols: Vec<KillingJetSolution> = (1..=m_max + 1)
        .map(|m| killing_from_jet(jet, m, opts))
        .collect();
    let k_m = sols.iter().map(KillingJetSolution::dim).collect();
    for m in 1..=m_max {
        let (a, b) = (&sols[m - 1], &sols[m]);
        if a.dim() == b.dim()
            && max_principal_angle(&a.basis_matrix(), &b.basis_matrix()) <= STABLE_ANGLE
        {
            let mut solution = a.clone();
            solution.stabilization_order = Some(m);
            return Ok(Stabilization {
                k_m,
                order: m,
                solution,
            });
        }
    }
    Err(KillingError::NotStabilized(m_max))
}

/// Stabilization order `m(b)` and the stabilized `Kill^{m(b)}(b)`.
pub fn stabilization_order(
    chart: &impl CartanChart,
    b: &[f64],
    m_max: usize,
    opts: RankOptions,
) -> Result<(usize, KillingJetSolution), KillingError> {
    let jet = omega_jet(chart, b, m_max + 1)?;
    let s = stabilize_jet(&jet, m_max, opts)?;
    Ok((s.order, s.solution))
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberReport {
    pub moved: Vec<f64>,
    pub dim_here: usize,
    pub dim_there: usize,
    /// Largest principal angle between `Kill^m(b·exp(tX))` and
    /// `Ad(exp(−tX))·Kill^m(b)`.
    pub angle: f64,
}

/// Compares `Kill^m(bp⁻¹)` with `Ad(p)·Kill^m(b)` for `p = exp(−tX)`.
pub fn fiber_consistency(
    chart: &impl CartanChart,
    b: &[f64],
    x: &[f64],
    t: f64,
    m: usize,
    opts: RankOptions,
    tol: f64,
) -> Result<FiberReport, KillingError> {
    let alg = chart.algebra();
    let moved = vertical_flow(chart, b, x, t, tol)?;
    let here = killing_from_jet(&omega_jet(chart, b, m)?, m, opts);
    let there = killing_from_jet(&omega_jet(chart, &moved, m)?, m, opts);
    let minus: Vec<f64> = x.iter().map(|v| -t * v).collect();
    let ad = alg
        .adjoint_of_group_element(&minus)
        .map_err(|_| BundleError::NotVertical)?
        .to_na();
    let image = crate::linalg::orthonormal_basis(&(ad * here.basis_matrix()), 1e-10);
    Ok(FiberReport {
        moved,
        dim_here: here.dim(),
        dim_there: there.dim(),
        angle: max_principal_angle(&image, &there.basis_matrix()),
    })
}

/// One checkpoint of a transported generator.
#[derive(Clone, Debug, Serialize)]
pub struct TransportSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub generator: Vec<f64>,
    /// `max_r ‖J_r(γ(t)) ⌞ A(t)‖ / (‖J‖‖A(t)‖)`.
    pub membership: f64,
    /// Distance of `A(t)/‖A(t)‖` from the computed `Kill(γ(t))`.
    pub subspace_distance: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TransportOptions {
    /// Checkpoints are equally spaced in `[−t_max, t_max]`.
    pub t_max: f64,
    pub checkpoints: usize,
    /// Jet order used for membership.
    pub m: usize,
    pub rank: RankOptions,
    pub tol: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            t_max: 1.0,
            checkpoints: 11,
            m: 2,
            rank: RankOptions::default(),
            tol: 1e-11,
        }
    }
}

/// Generator `A(t) = ω_{γ(t)}(φ^t_* Ã)` along `γ(t) = exp(b, tX)`.
pub fn transport_generator(
    chart: &impl CartanChart,
    b: &[f64],
    a: &[f64],
    x: &[f64],
    opts: &TransportOptions,
) -> Result<Vec<TransportSample>, KillingError> {
    let TransportOptions {
        t_max,
        checkpoints,
        m,
        tol,
        ..
    } = *opts;
    let n = crate::bundle::dim(chart);
    if a.len() != n {
        return Err(KillingError::Dimension {
            expected: n,
            got: a.len(),
        });
    }
    let jet0 = omega_jet(chart, b, m)?;
    let feas = membership_residual(&jet0, m, a);
    if feas > 1e-6 {
        return Err(KillingError::Infeasible(feas));
    }
    let w0 = omega_checked(chart, b)?;
    let field0 = w0
        .solve_vec(a)
        .ok_or_else(|| BundleError::Singular(b.to_vec()))?;
    let times: Vec<f64> = if checkpoints <= 1 {
        vec![0.0]
    } else {
        (0..checkpoints)
            .map(|i| -t_max + 2.0 * t_max * i as f64 / (checkpoints - 1) as f64)
            .collect()
    };
    let mut out = Vec::with_capacity(times.len());
    for &t in &times {
        let (point, pushed) = if t == 0.0 {
            (b.to_vec(), field0.clone())
        } else {
            let f = flow(chart, b, x, t, tol)?;
            let pushed = f.pushforward.mul_vec(&field0);
            (f.endpoint, pushed)
        };
        let w = omega_checked(chart, &point)?;
        let generator = w.mul_vec(&pushed);
        let jet = omega_jet(chart, &point, m)?;
        let membership = membership_residual(&jet, m, &generator);
        let kill = killing_from_jet(&jet, m, opts.rank).basis_matrix();
        let g = DVector::from_column_slice(&generator);
        let unit = &g / g.norm().max(1e-300);
        let proj = &kill * (kill.transpose() * &unit);
        out.push(TransportSample {
            t,
            point,
            generator,
            membership,
            subspace_distance: (unit - proj).norm(),
        });
    }
    Ok(out)
}
