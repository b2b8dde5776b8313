//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use cartan::bch::{bch_terms, evaluate_in_algebra, taylor_fit_zeta, TaylorGrid};
use cartan::bundle::zeta;
use cartan::curvature::{curvature_at, equivariance_check, omega_jet, vertical_identity_residual};
use cartan::frobenius::{
    ball_samples, delta_k, descend_to_base, integrate_killing_field, local_automorphism, SignChoice,
};
use cartan::frontends::builtin::{BUMP_CENTER, BUMP_RADIUS};
use cartan::frontends::{builtin_metric, KleinChart};
use cartan::killing::{
    fiber_consistency, scan_strata, stabilization_order, transport_generator, Grid, RankOptions,
    StrataOptions, StrataReport, TransportOptions,
};
use cartan::{CartanChart, Geometry};
use common::*;
use nalgebra::DMatrix;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn geometry(name: &str) -> Geometry {
    Geometry::builtin(name).expect("built-in geometry")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * r.gen_range(-1.0..1.0)).collect()
}

fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn bch_symbolic() -> Check {
    let a = bch_terms(3).map_err(|e| e.to_string())?;
    let expected: [&[(&str, BigRational)]; 3] = [
        &[("X", frac(1, 1)), ("Y", frac(1, 1))],
        &[("XY", frac(1, 1))],
        &[("XXY", frac(1, 2)), ("XYY", frac(1, 2))],
    ];
    for (k, (ak, want)) in a.iter().zip(expected).enumerate() {
        let got: Vec<(String, BigRational)> = ak.terms().map(|(w, c)| (w, c.clone())).collect();
        let want: Vec<(String, BigRational)> = want.iter().map(|(w, c)| (w.to_string(), c.clone())).collect();
        ensure(got == want, || format!("a_{}: {got:?} vs {want:?}", k + 1))?;
    }
    let text = a[2].to_string();
    ensure(text == "1/2 [X,[X,Y]] + 1/2 [[X,Y],Y]", || text.clone())?;
    Ok(format!("a_3 = {text}"))
}

fn bch_klein() -> Check {
    let grid = TaylorGrid::default();
    let mut worst = 0.0_f64;
    let mut worst_oracle = 0.0_f64;
    let mut r = rng(11);
    for name in ["so3", "heisenberg"] {
        let chart = KleinChart::builtin(name).unwrap();
        let basis = chart.matrix_basis().unwrap().to_vec();
        let origin = vec![0.0; 3];
        let terms = bch_terms(4).unwrap();
        for _ in 0..5 {
            let x = uniform(&mut r, 3, 0.8);
            let y = uniform(&mut r, 3, 0.8);
            let fit = taylor_fit_zeta(&chart, &origin, &x, &y, 4, grid).map_err(|e| e.to_string())?;
            // oracle samples of log(e^{tX} e^{tY}) and their own polynomial fit
            let ts: Vec<f64> = (1..=grid.points)
                .flat_map(|i| [-(i as f64) * grid.h, i as f64 * grid.h])
                .collect();
            let mut samples = Vec::new();
            for &t in &ts {
                let tx: Vec<f64> = x.iter().map(|v| v * t).collect();
                let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
                let prod = expm(&chart.to_matrix(&tx).unwrap().to_na())
                    * expm(&chart.to_matrix(&ty).unwrap().to_na());
                let oracle = coordinates(&basis, &logm_near_identity(&prod));
                let ours = zeta(&chart, &origin, &tx, &ty, 1e-13).map_err(|e| e.to_string())?;
                worst_oracle = worst_oracle.max(max_abs_diff(&ours, &oracle));
                samples.push(oracle);
            }
            let oracle_coef: Vec<Vec<f64>> = (0..3)
                .map(|c| polyfit_no_constant(&ts, &samples.iter().map(|s| s[c]).collect::<Vec<_>>(), grid.degree))
                .collect();
            let mut fact = 1.0;
            for k in 1..=4 {
                fact *= k as f64;
                let alg = evaluate_in_algebra(&terms[k - 1], chart.algebra(), &x, &y);
                let scale = max_abs(&alg).max(1.0);
                let rel = max_abs_diff(&fit.z[k - 1], &alg) / scale;
                let oracle_z: Vec<f64> = (0..3).map(|c| oracle_coef[c][k - 1] * fact).collect();
                let rel_oracle = max_abs_diff(&oracle_z, &alg) / scale;
                worst = worst.max(rel).max(rel_oracle);
            }
        }
    }
    ensure(worst <= 1e-5, || format!("relative error {worst:.3e}"))?;
    ensure(worst_oracle <= 1e-9, || format!("zeta vs matrix log {worst_oracle:.3e}"))?;
    Ok(format!("max rel err {worst:.2e}, zeta vs matrix log {worst_oracle:.2e}"))
}

fn bch_curved_second_order() -> Check {
    let chart = geometry("sphere2");
    let alg = chart.algebra();
    let grid = TaylorGrid::default();
    let mut r = rng(23);
    let mut worst = 0.0_f64;
    let mut worst_k = 0.0_f64;
    for _ in 0..5 {
        let mut b = uniform(&mut r, 2, 1.0);
        b.push(r.gen_range(-1.0..1.0));
        let x = uniform(&mut r, 3, 0.5);
        let y = uniform(&mut r, 3, 0.5);
        let fit = taylor_fit_zeta(&chart, &b, &x, &y, 2, grid).map_err(|e| e.to_string())?;
        let k = curvature_at(&chart, &b).map_err(|e| e.to_string())?;
        let kxy: Vec<f64> = (0..3)
            .map(|c| {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        acc += k.get(0, i, j, c) * x[i] * y[j];
                    }
                }
                acc
            })
            .collect();
        worst_k = worst_k.max(max_abs_diff(&kxy, &curvature_fd(&chart, &b, &x, &y)));
        let xy = alg.bracket_of(&x, &y);
        let expected: Vec<f64> = xy.iter().zip(&kxy).map(|(p, q)| p - q).collect();
        worst = worst.max(max_abs_diff(&fit.z[1], &expected));
    }
    ensure(worst_k <= 1e-6, || format!("curvature vs frame-bracket oracle {worst_k:.3e}"))?;
    ensure(worst <= 1e-5, || format!("abs err {worst:.3e}"))?;
    Ok(format!("max abs err {worst:.2e}, K oracle agreement {worst_k:.2e}"))
}

fn killing_dimensions() -> Check {
    let cases: &[(&str, [f64; 2], usize, bool)] = &[
        ("flat2", [0.2, -0.1], 3, false),
        ("sphere2", [0.3, 0.2], 3, true),
        ("hyperbolic2", [0.1, -0.2], 3, true),
        ("revolution", [0.7, 0.0], 1, true),
        ("bump", [BUMP_CENTER[0], BUMP_CENTER[1]], 0, true),
    ];
    let mut parts = Vec::new();
    for &(name, x, expected, oracle) in cases {
        if oracle {
            let (k_oracle, _) = oracle_killing_dimension(&builtin_metric(name).unwrap(), &x);
            ensure(k_oracle == expected, || format!("{name}: oracle null space {k_oracle}"))?;
        }
        let chart = geometry(name);
        let (order, sol) = stabilization_order(&chart, &chart.lift(&x), 4, RankOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(sol.dim() == expected, || format!("{name}: k = {} expected {expected}", sol.dim()))?;
        ensure(order <= 4, || format!("{name}: m = {order}"))?;
        ensure(sol.gap >= 1e2, || format!("{name}: gap {:.3e}", sol.gap))?;
        parts.push(format!("{name} k={} m={order}", sol.dim()));
    }
    Ok(parts.join("; "))
}

fn vertical_identity() -> Check {
    let mut worst = 0.0_f64;
    for name in ["sphere2", "bump"] {
        let chart = geometry(name);
        for b in [[0.1, 0.2, 0.0], [-0.3, 0.05, 0.4], [0.2, -0.25, -0.7]] {
            let jet = omega_jet(&chart, &b, 2).map_err(|e| e.to_string())?;
            for r in 1..=2 {
                let res = vertical_identity_residual(chart.algebra(), &jet, r, &[0.0, 0.0, 1.0]);
                worst = worst.max(res);
            }
        }
    }
    ensure(worst <= 1e-4, || format!("rel err {worst:.3e}"))?;
    Ok(format!("max rel err {worst:.2e}"))
}

fn equivariance() -> Check {
    let x = [0.0, 0.0, 1.0];
    let mut worst = 0.0_f64;
    let mut worst_angle = 0.0_f64;
    for (name, b) in [
        ("sphere2", [0.1, 0.2, 0.0]),
        ("sphere2", [-0.4, 0.3, 0.5]),
        ("bump", [0.1, -0.1, 0.2]),
    ] {
        let chart = geometry(name);
        let rep = equivariance_check(&chart, &b, &x, 0.3, 2, 1e-12).map_err(|e| e.to_string())?;
        worst = rep.residuals.iter().fold(worst, |m, v| m.max(*v));
        for m in 1..=2 {
            let f = fiber_consistency(&chart, &b, &x, 0.3, m, RankOptions::default(), 1e-12)
                .map_err(|e| e.to_string())?;
            ensure(f.dim_here == f.dim_there, || format!("dimension {} vs {}", f.dim_here, f.dim_there))?;
            worst_angle = worst_angle.max(f.angle);
        }
    }
    ensure(worst <= 1e-4, || format!("jet residual {worst:.3e}"))?;
    ensure(worst_angle <= 1e-4, || format!("principal angle {worst_angle:.3e}"))?;
    Ok(format!("jet residual {worst:.2e}, principal angle {worst_angle:.2e}"))
}

fn frobenius_integration() -> Check {
    let chart = geometry("sphere2");
    let b = chart.lift(&[0.1, -0.15]);
    let (_, sol) = stabilization_order(&chart, &b, 4, RankOptions::default()).map_err(|e| e.to_string())?;
    ensure(sol.dim() == 3, || format!("k = {}", sol.dim()))?;
    let radius = 0.3;
    let params = ball_samples(3, radius, 12, 5);
    let mut worst = 0.0_f64;
    let mut recovered: Vec<Vec<f64>> = Vec::new();
    let mut points: Option<Vec<Vec<f64>>> = None;
    for a in &sol.basis {
        let field = integrate_killing_field(&chart, &b, a, radius, &params, 1e-12).map_err(|e| e.to_string())?;
        let d = descend_to_base(&chart, &field, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max(d.killing_residual);
        if let Some(p) = &points {
            ensure(max_abs_diff(&p.concat(), &d.points.concat()) < 1e-12, || "sample points differ".into())?;
        }
        points = Some(d.points.clone());
        recovered.push(d.vectors.concat());
    }
    let points = points.unwrap();
    let closed: Vec<Vec<f64>> = sphere_rotation_fields()
        .iter()
        .map(|v| points.iter().flat_map(|x| v(x)).collect())
        .collect();
    let to_mat = |cols: &[Vec<f64>]| DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i]);
    let rec = to_mat(&recovered);
    let rank = rec.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-8).count();
    ensure(rank == 3, || format!("recovered span has rank {rank}"))?;
    let angle = principal_angle(&rec, &to_mat(&closed));
    ensure(worst <= 1e-4, || format!("|L_A g| {worst:.3e}"))?;
    ensure(angle <= 1e-3, || format!("principal angle {angle:.3e}"))?;
    Ok(format!("|L_A g| {worst:.2e}, angle to rotation fields {angle:.2e}"))
}

fn local_automorphism_check() -> Check {
    let chart = geometry("sphere2");
    let b = vec![0.1, 0.2, 0.0];
    let b2 = vec![-0.35, 0.25, 0.6];
    let params = ball_samples(3, 0.3, 100, 17);
    let auto = local_automorphism(&chart, &b, &b2, 0.3, &params, 1e-12).map_err(|e| e.to_string())?;
    ensure(auto.relation.related, || "points not related".into())?;
    ensure(auto.samples.len() == 100, || "sample count".into())?;
    ensure(auto.max_residual <= 1e-5, || format!("|f*w - w| {:.3e}", auto.max_residual))?;
    Ok(format!("|f*w - w| {:.2e} over 100 samples", auto.max_residual))
}

fn transport() -> Check {
    let chart = geometry("sphere2");
    let b = chart.lift(&[0.05, -0.1]);
    let (_, sol) = stabilization_order(&chart, &b, 4, RankOptions::default()).map_err(|e| e.to_string())?;
    let opts = TransportOptions {
        t_max: 1.0,
        checkpoints: 11,
        ..TransportOptions::default()
    };
    let x = [0.6, 0.3, 0.0];
    let mut worst = 0.0_f64;
    for a in &sol.basis {
        let samples = transport_generator(&chart, &b, a, &x, &opts).map_err(|e| e.to_string())?;
        ensure(samples.len() == 11, || format!("{} checkpoints", samples.len()))?;
        worst = samples.iter().fold(worst, |m, s| m.max(s.membership));
    }
    ensure(worst <= 1e-5, || format!("membership {worst:.3e}"))?;
    Ok(format!("{} generators, max membership residual {worst:.2e}", sol.dim()))
}

fn strata_signature(r: &StrataReport) -> Vec<(Option<usize>, Option<usize>, bool)> {
    r.samples.iter().map(|s| (s.k, s.component, s.regular)).collect()
}

fn strata_scan() -> Check {
    let bump = geometry("bump");
    let grid = Grid::new(vec![(-1.5, 1.5, 41); 2]).unwrap();
    let opts = StrataOptions {
        workers: Some(4),
        seed: 3,
        ..StrataOptions::default()
    };
    let report = scan_strata(&bump, &grid, &opts);
    ensure(report.failed_count == 0, || format!("{} samples failed", report.failed_count))?;
    let ks: Vec<(usize, usize)> = report.strata.iter().map(|s| (s.k, s.size)).collect();
    ensure(
        report.strata.len() == 2 && ks.iter().any(|s| s.0 == 3) && ks.iter().any(|s| s.0 == 0),
        || format!("strata {ks:?}"),
    )?;
    let step = 3.0 / 40.0;
    for (i, s) in report.samples.iter().enumerate() {
        let dist = ((s.x[0] - BUMP_CENTER[0]).powi(2) + (s.x[1] - BUMP_CENTER[1]).powi(2)).sqrt();
        if s.regular {
            if s.k == Some(0) {
                ensure(dist < BUMP_RADIUS, || format!("k = 0 outside the support at {:?}", s.x))?;
            }
            if dist > BUMP_RADIUS {
                ensure(s.k == Some(3), || format!("k = {:?} outside the support at {:?}", s.k, s.x))?;
            }
        } else {
            // irregular samples form the interface: their stencil sees both levels
            let levels: std::collections::BTreeSet<Option<usize>> =
                grid.neighbors(i, 1).iter().map(|&j| report.samples[j].k).collect();
            ensure(levels.len() > 1, || format!("irregular sample away from the interface at {:?}", s.x))?;
            ensure(dist > 0.5 * BUMP_RADIUS && dist < BUMP_RADIUS + 2.0 * step, || {
                format!("irregular sample at distance {dist:.3} from the centre")
            })?;
        }
    }
    let again = scan_strata(&bump, &grid, &StrataOptions { workers: Some(1), ..opts.clone() });
    ensure(strata_signature(&report) == strata_signature(&again), || "scan not deterministic".into())?;

    let sphere = geometry("sphere2");
    let sgrid = Grid::new(vec![(-1.2, 1.2, 21); 2]).unwrap();
    let srep = scan_strata(&sphere, &sgrid, &opts);
    ensure(
        srep.strata.len() == 1 && srep.strata[0].k == 3 && srep.locally_homogeneous,
        || format!("sphere strata {:?}, homogeneous {}", srep.strata, srep.locally_homogeneous),
    )?;
    let irregular = report.samples.len() - report.regular_count;
    Ok(format!(
        "bump strata {ks:?} with {irregular} interface samples; sphere one stratum, locally homogeneous"
    ))
}

fn recursion_sign() -> Check {
    let chart = geometry("sphere2");
    let b = [0.2, -0.1, 0.3];
    let table = delta_k(&chart, &b, &[0.3, -0.2, 0.4], &[-0.1, 0.5, 0.2], 2, 1e-4).map_err(|e| e.to_string())?;
    let row = &table.rows[1];
    let detail = format!(
        "errors: minus {:.2e}, plus {:.2e}",
        row.minus_error.unwrap_or(f64::NAN),
        row.plus_error.unwrap_or(f64::NAN)
    );
    match row.choice {
        Some(SignChoice::Minus) => Ok(format!("sign '-' ({detail})")),
        Some(SignChoice::Plus) => Ok(format!("sign '+' ({detail})")),
        Some(SignChoice::Both) => Err(format!("both signs match ({detail}); the derivative term vanishes on this geometry")),
        _ => Err(format!("neither sign matches ({detail})")),
    }
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Check)> = vec![
        ("BCH symbolic terms a_1..a_3", 1, bch_symbolic),
        ("BCH series on SO(3) and Heisenberg charts", 10, bch_klein),
        ("second-order zeta coefficient on the sphere", 30, bch_curved_second_order),
        ("Killing dimensions and stabilization", 60, killing_dimensions),
        ("vertical identity for curvature derivatives", 30, vertical_identity),
        ("equivariance of jets and Killing spaces", 30, equivariance),
        ("Frobenius integration of sphere generators", 60, frobenius_integration),
        ("local automorphism between related points", 30, local_automorphism_check),
        ("transport of generators along a geodesic", 30, transport),
        ("strata scan of bump and sphere", 300, strata_scan),
        ("sign of the delta recursion on the sphere", 60, recursion_sign),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > Duration::from_secs(limit) => Err(format!("{d}; took longer than {limit} s")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => {
                failures += 1;
                ("FAIL", d.as_str())
            }
        };
        println!("{tag} [{:>2}] {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
