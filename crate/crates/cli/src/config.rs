//! Shared flags, geometry resolution and error classification.

use cartan::bundle::{BundleError, DEFAULT_TOL};
use cartan::frobenius::FrobeniusError;
use cartan::killing::KillingError;
use cartan::{CartanChart, Geometry, MetricSpec};
use clap::{Args, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::OutsideDomain(_) | BundleError::Dimension { .. } | BundleError::Domain(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<KillingError> for CliError {
    fn from(e: KillingError) -> Self {
        match e {
            KillingError::Curvature(cartan::curvature::CurvatureError::Bundle(b)) => b.into(),
            KillingError::Dimension { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FrobeniusError> for CliError {
    fn from(e: FrobeniusError) -> Self {
        match e {
            FrobeniusError::Killing(k) => k.into(),
            FrobeniusError::OutsideBall { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<cartan::curvature::CurvatureError> for CliError {
    fn from(e: cartan::curvature::CurvatureError) -> Self {
        KillingError::from(e).into()
    }
}

impl From<cartan::bch::BchError> for CliError {
    fn from(e: cartan::bch::BchError) -> Self {
        match e {
            cartan::bch::BchError::Bundle(b) => b.into(),
            cartan::bch::BchError::Order(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Common {
    /// Built-in geometry: flat2, sphere2, hyperbolic2, revolution(f), bump(eps), klein:<algebra>
    #[arg(long, conflicts_with = "metric_file")]
    pub geometry: Option<String>,
    /// Metric file (JSON with n, g, domain, name)
    #[arg(long)]
    pub metric_file: Option<PathBuf>,
    /// Comma-separated base coordinates (or full bundle coordinates)
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Highest derivative order considered for stabilization
    #[arg(long, default_value_t = cartan::curvature::M_MAX)]
    pub m: usize,
    /// Integrator tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol_ode: f64,
    /// Relative singular-value threshold for the Killing rank decision
    #[arg(long, default_value_t = cartan::killing::TOL_RANK)]
    pub tol_rank: f64,
    /// Verification tolerance for pass/fail
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for grid scans
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output format (JSON unless stated otherwise per command)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("tol-ode", self.tol_ode), ("tol-rank", self.tol_rank), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::Input("--workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry, CliError> {
        match (&self.geometry, &self.metric_file) {
            (Some(name), None) => Geometry::builtin(name).map_err(|e| CliError::Input(e.to_string())),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let spec = MetricSpec::from_json(&text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                Ok(Geometry::from_metric(spec))
            }
            (None, None) => Err(CliError::Input("one of --geometry or --metric-file is required".into())),
            (Some(_), Some(_)) => Err(CliError::Input("--geometry and --metric-file are exclusive".into())),
        }
    }

    /// Bundle point from `--point`; base coordinates are lifted to the zero
    /// section. Defaults to the chart origin.
    pub fn bundle_point(&self, chart: &Geometry) -> Result<Vec<f64>, CliError> {
        let n = chart.algebra().dim();
        let coords = match &self.point {
            Some(text) => parse_list(text)?,
            None => vec![0.0; chart.base_dim()],
        };
        let b = if coords.len() == chart.base_dim() {
            chart.lift(&coords)
        } else if coords.len() == n {
            coords
        } else {
            return Err(CliError::Input(format!(
                "--point needs {} base or {n} bundle coordinates, got {}",
                chart.base_dim(),
                coords.len()
            )));
        };
        if !chart.domain().contains(&b) {
            return Err(CliError::Input(format!("point {b:?} is outside the chart domain")));
        }
        Ok(b)
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("malformed coordinate '{s}' in '{text}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Input(format!("non-finite coordinate in '{text}'")))
            }
        })
        .collect()
}
