//! Adaptive Dormand–Prince 5(4) integration.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    /// The right-hand side refused a state (for example outside the chart
    /// domain) and no smaller step avoided it.
    #[error("trajectory left the admissible region at t = {t}: {reason}")]
    Rejected { t: f64, reason: String },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest normalized local error estimate among accepted steps.
    pub max_error: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `f` may return `Err` to reject a state; the step is then shortened.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<f64>, OdeStats), OdeError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, String>,
{
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0.to_vec(), stats));
    }
    let dir = span.signum();
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y).map_err(|reason| OdeError::Rejected { t, reason })?;

    let norm = |v: &[f64], y: &[f64]| {
        (v.iter()
            .zip(y)
            .map(|(a, b)| {
                let s = opts.atol + opts.rtol * b.abs();
                (a / s) * (a / s)
            })
            .sum::<f64>()
            / n.max(1) as f64)
            .sqrt()
    };
    let d0 = norm(&y, &y);
    let d1 = norm(&k1, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-4
    } else {
        0.01 * d0 / d1
    }
    .min(span.abs());
    let h_min = 1e-14 * span.abs().max(t0.abs());
    let mut last_reject: Option<String> = None;

    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    while dir * (t1 - t) > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps { t });
        }
        if h < h_min {
            return Err(match last_reject {
                Some(reason) => OdeError::Rejected { t, reason },
                None => OdeError::StepUnderflow { t },
            });
        }
        let last = h >= (t1 - t).abs();
        if last {
            h = (t1 - t).abs();
        }
        let hs = dir * h;
        k[0].copy_from_slice(&k1);
        let mut failed = None;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += hs * a * kj[i];
                    }
                }
                stage[i] = acc;
            }
            match f(t + C[s] * hs, &stage) {
                Ok(v) => k[s] = v,
                Err(reason) => {
                    failed = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = failed {
            last_reject = Some(reason);
            stats.rejected += 1;
            h *= 0.25;
            continue;
        }
        // stage now holds the fifth-order solution (FSAL row)
        let mut err = vec![0.0; n];
        for (i, e) in err.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += E[j] * kj[i];
            }
            *e = hs * acc;
        }
        let scale_y: Vec<f64> = y
            .iter()
            .zip(&stage)
            .map(|(a, b)| a.abs().max(b.abs()))
            .collect();
        let err_norm = norm(&err, &scale_y);
        if err_norm <= 1.0 {
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&stage);
            k1.copy_from_slice(&k[6]);
            stats.accepted += 1;
            stats.max_error = stats.max_error.max(err_norm);
            last_reject = None;
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = if err_norm.is_finite() {
                (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let opts = OdeOptions::with_tol(1e-12);
        let (y, stats) = integrate(|_, y| Ok(vec![y[0]]), 0.0, 1.0, &[1.0], &opts).unwrap();
        assert!((y[0] - 1f64.exp()).abs() < 1e-10);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let opts = OdeOptions::with_tol(1e-12);
        let rhs = |_: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let (y, _) = integrate(rhs, 0.0, -2.0, &[0.0, 1.0], &opts).unwrap();
        assert!((y[0] - (-2f64).sin()).abs() < 1e-10);
        assert!((y[1] - (-2f64).cos()).abs() < 1e-10);
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let opts = OdeOptions::with_tol(1e-10);
        let (y, stats) = integrate(|_, _| Ok(vec![1.0]), 0.5, 0.5, &[3.0], &opts).unwrap();
        assert_eq!(y, vec![3.0]);
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn rejection_reports_exit_time() {
        let opts = OdeOptions::with_tol(1e-10);
        let rhs = |_: f64, y: &[f64]| {
            if y[0] > 1.0 {
                Err("outside".to_string())
            } else {
                Ok(vec![1.0])
            }
        };
        match integrate(rhs, 0.0, 3.0, &[0.0], &opts) {
            Err(OdeError::Rejected { t, .. }) => assert!((t - 1.0).abs() < 1e-6, "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
