//! Subcommand implementations. Verdicts live in the report's `pass` field;
//! errors are reserved for inputs that cannot be analysed.

use crate::config::{parse_list, CliError, Common, Format};
use crate::report::{envelope, to_json_string, value};
use cartan::bch::{bch_terms, verify_prop_bch, TaylorGrid, MAX_ORDER};
use cartan::bundle::{dim, exp_map, log};
use cartan::curvature::{equivariance_check, omega_jet, vertical_identity_residual};
use cartan::frobenius::{
    ball_samples, descend_to_base, integrate_killing_field, verify_killing, VerifyOptions,
};
use cartan::killing::{
    fiber_consistency, scan_strata, stabilize_jet, transport_generator, Grid, RankOptions,
    StrataOptions, TransportOptions, MIN_GAP,
};
use cartan::{CartanChart, Geometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub struct Output {
    pub text: String,
    /// Extra files written next to `--out` (extension, contents).
    pub side: Vec<(&'static str, String)>,
}

fn rank_opts(c: &Common) -> RankOptions {
    RankOptions {
        tol_rank: c.tol_rank,
        ..RankOptions::default()
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// `Common` echo extended with command-specific settings.
fn config_echo(c: &Common, extra: Value) -> Value {
    let mut cfg = value(c);
    if let (Value::Object(map), Value::Object(more)) = (&mut cfg, extra) {
        map.extend(more);
    }
    cfg
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Serialize)]
struct GeneratorCheck {
    generator: Vec<f64>,
    bracket_residual: f64,
    pullback_residual: f64,
    base_killing_residual: Option<f64>,
    pass: bool,
}

pub fn killing(c: &Common, radius: f64, samples: usize) -> Result<Output, CliError> {
    let chart = c.geometry()?;
    let b = c.bundle_point(&chart)?;
    if !(radius > 0.0) {
        return Err(CliError::Input("--radius must be positive".into()));
    }
    let jet = omega_jet(&chart, &b, c.m + 1)?;
    let stab = stabilize_jet(&jet, c.m, rank_opts(c))?;
    let params = ball_samples(dim(&chart), radius, samples, c.seed);
    let verify = VerifyOptions {
        tol: c.tol_ode,
        ..VerifyOptions::default()
    };
    let mut checks = Vec::new();
    for a in &stab.solution.basis {
        let field = integrate_killing_field(&chart, &b, a, radius, &params, c.tol_ode)?;
        let report = verify_killing(&chart, &field, &verify)?;
        let base = match chart.base_metric() {
            Some(_) => Some(descend_to_base(&chart, &field, 1e-4)?.killing_residual),
            None => None,
        };
        let pass = report.bracket_residual <= c.tol
            && report.pullback_residual <= c.tol
            && base.map_or(true, |r| r <= c.tol);
        checks.push(GeneratorCheck {
            generator: a.clone(),
            bracket_residual: report.bracket_residual,
            pullback_residual: report.pullback_residual,
            base_killing_residual: base,
            pass,
        });
    }
    let pass = !stab.solution.ill_separated && checks.iter().all(|g| g.pass);
    let result = json!({
        "geometry": chart.label(),
        "basepoint": b,
        "k_m": stab.k_m,
        "k": stab.solution.dim(),
        "stabilization_order": stab.order,
        "solution": value(&stab.solution),
        "field_radius": radius,
        "field_samples": samples,
        "generators": value(&checks),
    });
    let tolerances = json!({"verify": c.tol, "ode": c.tol_ode, "rank": c.tol_rank, "min_gap": MIN_GAP});
    let out = envelope(
        "killing",
        config_echo(c, json!({"radius": radius, "samples": samples})), tolerances, result, pass);
    Ok(Output {
        text: to_json_string(&out),
        side: Vec::new(),
    })
}

fn default_grid(chart: &Geometry) -> Grid {
    let axes = chart.domain().bounds()[..chart.base_dim()]
        .iter()
        .map(|&(lo, hi)| {
            let pad = 0.125 * (hi - lo);
            (lo + pad, hi - pad, 21)
        })
        .collect();
    Grid::new(axes).expect("chart domains are non-empty")
}

pub fn strata(c: &Common, grid_args: &[String], stencil: usize) -> Result<Output, CliError> {
    let chart = c.geometry()?;
    let n = chart.base_dim();
    let grid = if grid_args.is_empty() {
        default_grid(&chart)
    } else {
        let mut axes = grid_args
            .iter()
            .map(|s| Grid::parse_axis(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Input)?;
        if axes.len() == 1 && n > 1 {
            axes = vec![axes[0]; n];
        }
        if axes.len() != n {
            return Err(CliError::Input(format!("{n} grid axes required, got {}", axes.len())));
        }
        Grid::new(axes).map_err(CliError::Input)?
    };
    let opts = StrataOptions {
        m_max: c.m,
        rank: rank_opts(c),
        stencil_radius: stencil,
        workers: c.workers,
        seed: c.seed,
    };
    let report = scan_strata(&chart, &grid, &opts);
    let pass = report.failed_count == 0;
    let levels: Vec<Value> = report
        .k_levels()
        .into_iter()
        .map(|(k, size)| json!({"k": k, "size": size}))
        .collect();
    let mut result = value(&report);
    result["k_levels"] = Value::Array(levels);
    let tolerances = json!({"rank": c.tol_rank, "ode": c.tol_ode});
    let json_text = to_json_string(&envelope(
        "strata",
        config_echo(c, json!({"grid": value(&grid), "stencil": stencil})), tolerances, result, pass));
    let csv = report.to_csv();
    let (text, side) = match c.format {
        Some(Format::Csv) => (csv, vec![("json", json_text)]),
        _ => (json_text, vec![("csv", csv)]),
    };
    Ok(Output { text, side })
}

pub struct BchArgs<'a> {
    pub order: Option<usize>,
    pub verify: bool,
    pub kmax: usize,
    pub x: Option<&'a str>,
    pub y: Option<&'a str>,
    pub h: f64,
    pub degree: usize,
}

fn bch_echo(c: &Common, a: &BchArgs) -> Value {
    config_echo(
        c,
        json!({"order": a.order, "verify": a.verify, "kmax": a.kmax, "x": a.x, "y": a.y, "h": a.h, "degree": a.degree}),
    )
}

pub fn bch(c: &Common, args: &BchArgs) -> Result<Output, CliError> {
    if args.order.is_none() && !args.verify {
        return Err(CliError::Input("bch needs --order or --verify".into()));
    }
    if let Some(k) = args.order {
        let terms = bch_terms(k)?;
        let a = &terms[k - 1];
        if !args.verify {
            let text = match c.format {
                Some(Format::Json) => {
                    let coeffs: Vec<Value> = a
                        .terms()
                        .map(|(w, q)| json!({"lyndon_word": w, "coefficient": q.to_string()}))
                        .collect();
                    let result = json!({"order": k, "expansion": a.to_string(), "terms": coeffs});
                    to_json_string(&envelope("bch", bch_echo(c, args), json!({}), result, true))
                }
                _ => format!("a_{k}(X,Y) = {a}\n"),
            };
            return Ok(Output {
                text,
                side: Vec::new(),
            });
        }
    }
    let kmax = args.order.unwrap_or(args.kmax);
    if kmax == 0 || kmax > MAX_ORDER {
        return Err(CliError::Input(format!("--kmax must be in 1..={MAX_ORDER}")));
    }
    let chart = c.geometry()?;
    let b = c.bundle_point(&chart)?;
    let n = dim(&chart);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut pick = |given: Option<&str>| -> Result<Vec<f64>, CliError> {
        let v = match given {
            Some(text) => parse_list(text)?,
            None => random_vector(&mut rng, n, 0.5),
        };
        if v.len() != n {
            return Err(CliError::Input(format!("algebra vectors need {n} entries, got {}", v.len())));
        }
        Ok(v)
    };
    let x = pick(args.x)?;
    let y = pick(args.y)?;
    let grid = TaylorGrid {
        h: args.h,
        degree: args.degree,
        tol: c.tol_ode.min(1e-13),
        ..TaylorGrid::default()
    };
    let report = verify_prop_bch(&chart, &b, &x, &y, kmax, c.tol, grid)?;
    let result = json!({
        "geometry": chart.label(),
        "basepoint": b,
        "x": x,
        "y": y,
        "k_max": kmax,
        "rows": value(&report.rows),
    });
    let tolerances = json!({"relative": c.tol, "zeta": grid.tol, "h": grid.h, "degree": grid.degree});
    let pass = report.pass;
    Ok(Output {
        text: to_json_string(&envelope("bch", bch_echo(c, args), tolerances, result, pass)),
        side: Vec::new(),
    })
}

pub const CHECKS: &[(&str, &str)] = &[
    ("lie.jacobi", "Jacobi identity of the structure constants"),
    ("bundle.exp_log", "log_b(exp_b X) recovers X"),
    ("curvature.vertical_identity", "D^rK(b)(X) = -X.D^{r-1}K(b) for X in p, r = 1, 2"),
    ("curvature.equivariance", "curvature jets transform under Ad(p) along fibres, orders <= 2"),
    ("killing.stabilization", "Kill^m(b) stabilizes with a separated singular spectrum"),
    ("killing.fiber", "Kill^m(b p^-1) = Ad(p) Kill^m(b)"),
    ("killing.transport", "generators transported along a flow stay in Kill"),
    ("frobenius.field", "an integrated generator commutes with the constant fields and preserves omega"),
    ("frobenius.base_killing", "the projected field satisfies the Killing equation (metric geometries)"),
    ("bch.series", "Taylor coefficients of zeta match the bracket polynomials up to order 3"),
];

#[derive(Serialize)]
struct CheckOutcome {
    name: &'static str,
    description: &'static str,
    /// `pass`, `fail`, `skipped` or `error`.
    status: &'static str,
    value: Option<f64>,
    tol: f64,
    detail: String,
}

enum Verdict {
    Measured(f64, String),
    Skipped(String),
}

pub fn verify_list() -> Output {
    let text = CHECKS
        .iter()
        .map(|(n, d)| format!("{n}\t{d}\n"))
        .collect();
    Output {
        text,
        side: Vec::new(),
    }
}

pub fn verify(c: &Common, only: &[String]) -> Result<Output, CliError> {
    for name in only {
        if !CHECKS.iter().any(|(n, _)| n == name) {
            return Err(CliError::Input(format!("unknown check '{name}'")));
        }
    }
    let chart = c.geometry()?;
    let b = c.bundle_point(&chart)?;
    let n = dim(&chart);
    let alg = chart.algebra();
    let p0 = alg.p_start();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let x = random_vector(&mut rng, n, 0.2);
    let y = random_vector(&mut rng, n, 0.5);
    let vertical = (p0 < n).then(|| {
        let mut v = vec![0.0; n];
        v[p0] = 1.0;
        v
    });
    let first_generator = || -> Result<Option<Vec<f64>>, CliError> {
        let jet = omega_jet(&chart, &b, c.m + 1)?;
        Ok(stabilize_jet(&jet, c.m, rank_opts(c))?.solution.basis.into_iter().next())
    };
    let no_p = || Verdict::Skipped("structure group is trivial".into());
    let no_gen = || Verdict::Skipped("no Killing generators at this point".into());

    let run = |name: &str| -> Result<Verdict, CliError> {
        Ok(match name {
            "lie.jacobi" => Verdict::Measured(alg.jacobi_residual(), String::new()),
            "bundle.exp_log" => {
                let end = exp_map(&chart, &b, &x, c.tol_ode * 1e-2)?.endpoint;
                let back = log(&chart, &b, &end, c.tol_ode * 1e-2)?;
                let err = back.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                Verdict::Measured(err, format!("|X| = {:.3e}", max_abs(&x)))
            }
            "curvature.vertical_identity" => match &vertical {
                None => no_p(),
                Some(v) => {
                    let jet = omega_jet(&chart, &b, 2)?;
                    let r = (1..=2)
                        .map(|r| vertical_identity_residual(alg, &jet, r, v))
                        .fold(0.0, f64::max);
                    Verdict::Measured(r, String::new())
                }
            },
            "curvature.equivariance" => match &vertical {
                None => no_p(),
                Some(v) => {
                    let rep = equivariance_check(&chart, &b, v, 0.3, 2, c.tol_ode * 1e-2)?;
                    let worst = rep
                        .residuals
                        .iter()
                        .zip(&rep.absolute)
                        .map(|(r, a)| r.min(*a))
                        .fold(0.0, f64::max);
                    Verdict::Measured(worst, "min(relative, absolute) per order".into())
                }
            },
            "killing.stabilization" => {
                let jet = omega_jet(&chart, &b, c.m + 1)?;
                let s = stabilize_jet(&jet, c.m, rank_opts(c))?;
                let ok = !s.solution.ill_separated;
                Verdict::Measured(
                    if ok { 0.0 } else { 1.0 },
                    format!("k_m = {:?}, m(b) = {}, gap = {:.3e}", s.k_m, s.order, s.solution.gap),
                )
            }
            "killing.fiber" => match &vertical {
                None => no_p(),
                Some(v) => {
                    let rep = fiber_consistency(&chart, &b, v, 0.3, 2, rank_opts(c), c.tol_ode * 1e-2)?;
                    if rep.dim_here != rep.dim_there {
                        Verdict::Measured(f64::INFINITY, format!("dimensions {} vs {}", rep.dim_here, rep.dim_there))
                    } else {
                        Verdict::Measured(rep.angle, format!("dimension {}", rep.dim_here))
                    }
                }
            },
            "killing.transport" => match first_generator()? {
                None => no_gen(),
                Some(a) => {
                    let mut dir = vec![0.0; n];
                    dir[0] = 1.0;
                    let opts = TransportOptions {
                        t_max: 0.3,
                        checkpoints: 5,
                        rank: rank_opts(c),
                        tol: c.tol_ode * 1e-1,
                        ..TransportOptions::default()
                    };
                    let samples = transport_generator(&chart, &b, &a, &dir, &opts)?;
                    let worst = samples.iter().map(|s| s.membership).fold(0.0, f64::max);
                    Verdict::Measured(worst, format!("{} checkpoints", samples.len()))
                }
            },
            "frobenius.field" => match first_generator()? {
                None => no_gen(),
                Some(a) => {
                    let params = ball_samples(n, 0.15, 2, c.seed);
                    let field = integrate_killing_field(&chart, &b, &a, 0.15, &params, c.tol_ode)?;
                    let verify = VerifyOptions {
                        tol: c.tol_ode,
                        ..VerifyOptions::default()
                    };
                    let rep = verify_killing(&chart, &field, &verify)?;
                    Verdict::Measured(
                        rep.bracket_residual.max(rep.pullback_residual),
                        format!("bracket {:.3e}, pullback {:.3e}", rep.bracket_residual, rep.pullback_residual),
                    )
                }
            },
            "frobenius.base_killing" => match (chart.base_metric(), first_generator()?) {
                (None, _) => Verdict::Skipped("geometry has no base metric".into()),
                (_, None) => no_gen(),
                (_, Some(a)) => {
                    let params = ball_samples(n, 0.15, 4, c.seed);
                    let field = integrate_killing_field(&chart, &b, &a, 0.15, &params, c.tol_ode)?;
                    let d = descend_to_base(&chart, &field, 1e-4)?;
                    Verdict::Measured(d.killing_residual, String::new())
                }
            },
            "bch.series" => {
                let grid = TaylorGrid::default();
                let rep = verify_prop_bch(&chart, &b, &x, &y, 3, c.tol, grid)?;
                let worst = rep.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
                Verdict::Measured(worst, String::new())
            }
            _ => unreachable!("names are validated"),
        })
    };

    let mut outcomes = Vec::new();
    for &(name, description) in CHECKS {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let (status, value, detail) = match run(name) {
            Ok(Verdict::Measured(v, d)) => (if v <= c.tol { "pass" } else { "fail" }, Some(v), d),
            Ok(Verdict::Skipped(d)) => ("skipped", None, d),
            Err(CliError::Input(e)) => return Err(CliError::Input(e)),
            Err(e) => ("error", None, e.to_string()),
        };
        outcomes.push(CheckOutcome {
            name,
            description,
            status,
            value,
            tol: c.tol,
            detail,
        });
    }
    let pass = outcomes.iter().all(|o| o.status == "pass" || o.status == "skipped");
    let result = json!({
        "geometry": chart.label(),
        "basepoint": b,
        "checks": value(&outcomes),
    });
    let tolerances = json!({"check": c.tol, "ode": c.tol_ode, "rank": c.tol_rank});
    Ok(Output {
        text: to_json_string(&envelope("verify", config_echo(c, json!({"only": only})), tolerances, result, pass)),
        side: Vec::new(),
    })
}
