//! Riemannian metrics given by coefficient expressions on a coordinate box.

use super::expr::{Expr, ParseError, Parser};
use crate::bundle::BoxDomain;
use crate::linalg::Mat;
use crate::scalar::Real;
use serde::Deserialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("entry g[{row}][{col}]: {source}")]
    Syntax {
        row: usize,
        col: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Literal(#[from] ParseError),
    #[error("metric is not symmetric: g[{0}][{1}] differs from g[{1}][{0}]")]
    Asymmetric(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("metric is not positive definite at {} probe point(s), first {:?}", .0.len(), .0.first())]
    NotPositive(Vec<Vec<f64>>),
    #[error("metric evaluates to a non-finite value at {0:?}")]
    NotFinite(Vec<f64>),
    #[error("invalid metric file: {0}")]
    File(String),
    #[error("singular metric at {0:?}")]
    Singular(Vec<f64>),
}

/// Symmetric matrix of expressions `g_ij(x1..xn)` on a box.
///
/// Mirrored entries share one expression object.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    name: String,
    n: usize,
    g: Vec<Vec<Arc<Expr>>>,
    /// `dg[k][i][j] = ∂_k g_ij`.
    dg: Vec<Vec<Vec<Arc<Expr>>>>,
    domain: BoxDomain,
}

#[derive(Deserialize)]
struct MetricFile {
    n: usize,
    g: Vec<Vec<String>>,
    domain: Vec<[f64; 2]>,
    #[serde(default)]
    name: Option<String>,
}

const PROBES_PER_AXIS: usize = 5;

impl MetricSpec {
    pub fn new(name: &str, entries: Vec<Vec<Expr>>, domain: BoxDomain) -> Result<Self, MetricError> {
        let n = entries.len();
        if n == 0 {
            return Err(MetricError::Dimension("empty metric".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        if domain.dim() != n {
            return Err(MetricError::Dimension(format!(
                "domain has {} axes, metric is {n}×{n}",
                domain.dim()
            )));
        }
        for row in &entries {
            for e in row {
                if e.arity() > n {
                    return Err(MetricError::Dimension(format!(
                        "expression '{e}' uses x{} in dimension {n}",
                        e.arity()
                    )));
                }
            }
        }
        let probes = domain.probe_points(PROBES_PER_AXIS);
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i][j] != entries[j][i] {
                    let differs = probes.iter().any(|x| {
                        let (a, b): (f64, f64) = (entries[i][j].eval(x), entries[j][i].eval(x));
                        (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
                    });
                    if differs {
                        return Err(MetricError::Asymmetric(i, j));
                    }
                }
            }
        }
        let g: Vec<Vec<Arc<Expr>>> = {
            let mut shared: Vec<Vec<Option<Arc<Expr>>>> = vec![vec![None; n]; n];
            for i in 0..n {
                for j in i..n {
                    let e = Arc::new(entries[i][j].clone());
                    shared[i][j] = Some(e.clone());
                    shared[j][i] = Some(e);
                }
            }
            shared
                .into_iter()
                .map(|r| r.into_iter().map(Option::unwrap).collect())
                .collect()
        };
        let dg = (0..n)
            .map(|k| {
                let mut rows: Vec<Vec<Option<Arc<Expr>>>> = vec![vec![None; n]; n];
                for i in 0..n {
                    for j in i..n {
                        let d = Arc::new(g[i][j].diff(k));
                        rows[i][j] = Some(d.clone());
                        rows[j][i] = Some(d);
                    }
                }
                rows.into_iter()
                    .map(|r| r.into_iter().map(Option::unwrap).collect())
                    .collect()
            })
            .collect();
        let spec = MetricSpec {
            name: name.to_string(),
            n,
            g,
            dg,
            domain,
        };
        spec.check_probes(&probes)?;
        Ok(spec)
    }

    fn check_probes(&self, probes: &[Vec<f64>]) -> Result<(), MetricError> {
        let mut failing = Vec::new();
        for x in probes {
            let g: Mat<f64> = self.metric(x);
            if g.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(MetricError::NotFinite(x.clone()));
            }
            let pos = g.cholesky().map(|l| (0..self.n).all(|i| l[(i, i)] > 0.0));
            if pos != Some(true) {
                failing.push(x.clone());
            }
        }
        if failing.is_empty() {
            Ok(())
        } else {
            Err(MetricError::NotPositive(failing))
        }
    }

    /// Parses the JSON metric file format.
    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        let file: MetricFile =
            serde_json::from_str(text).map_err(|e| MetricError::File(e.to_string()))?;
        if file.g.len() != file.n {
            return Err(MetricError::Dimension(format!(
                "n = {} but g has {} rows",
                file.n,
                file.g.len()
            )));
        }
        let mut entries = Vec::with_capacity(file.n);
        for (row, line) in file.g.iter().enumerate() {
            let mut parsed = Vec::with_capacity(line.len());
            for (col, text) in line.iter().enumerate() {
                parsed.push(
                    Expr::parse(text).map_err(|source| MetricError::Syntax { row, col, source })?,
                );
            }
            entries.push(parsed);
        }
        let domain = BoxDomain::new(file.domain.iter().map(|r| (r[0], r[1])).collect())
            .map_err(|e| MetricError::File(e.to_string()))?;
        let name = file.name.unwrap_or_else(|| "metric".to_string());
        Self::new(&name, entries, domain)
    }

    /// Parses a matrix literal such as `[[1, 0], [0, x1^2]]`.
    pub fn parse_literal(name: &str, text: &str, domain: BoxDomain) -> Result<Self, MetricError> {
        let mut p = Parser::new(text);
        let mut rows = Vec::new();
        p.expect(b'[')?;
        loop {
            p.expect(b'[')?;
            let mut row = vec![p.expr()?];
            while p.peek() == Some(b',') {
                p.pos += 1;
                row.push(p.expr()?);
            }
            p.expect(b']')?;
            rows.push(row);
            if p.peek() == Some(b',') {
                p.pos += 1;
                continue;
            }
            break;
        }
        p.expect(b']')?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input").into());
        }
        Self::new(name, rows, domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn entry(&self, i: usize, j: usize) -> &Arc<Expr> {
        &self.g[i][j]
    }

    pub fn metric<T: Real>(&self, x: &[T]) -> Mat<T> {
        symmetric(self.n, |i, j| self.g[i][j].eval(x))
    }

    /// `[∂_k g]` for `k = 0..n`.
    pub fn metric_derivatives<T: Real>(&self, x: &[T]) -> Vec<Mat<T>> {
        self.dg
            .iter()
            .map(|dk| symmetric(self.n, |i, j| dk[i][j].eval(x)))
            .collect()
    }

    /// Christoffel symbols as matrices `Γ[k][(i, j)] = Γ^k_{ij}`.
    pub fn christoffel_generic<T: Real>(&self, x: &[T]) -> Option<Vec<Mat<T>>> {
        let ginv = self.metric(x).inverse()?;
        Some(christoffel_from(&ginv, &self.metric_derivatives(x)))
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<Mat<f64>>, MetricError> {
        self.christoffel_generic(x)
            .ok_or_else(|| MetricError::Singular(x.to_vec()))
    }
}

fn symmetric<T: Real>(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Mat<T> {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            if i != j {
                m[(j, i)] = v.clone();
            }
            m[(i, j)] = v;
        }
    }
    m
}

/// `Γ^k_{ij} = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` from `g⁻¹` and `∂g`.
pub fn christoffel_from<T: Real>(ginv: &Mat<T>, dg: &[Mat<T>]) -> Vec<Mat<T>> {
    let n = ginv.rows();
    let half = T::from_f64_lossy(0.5);
    let lowered: Vec<Mat<T>> = (0..n)
        .map(|l| {
            Mat::from_fn(n, n, |i, j| {
                (dg[i][(j, l)].clone() + dg[j][(i, l)].clone() - dg[l][(i, j)].clone())
                    * half.clone()
            })
        })
        .collect();
    (0..n)
        .map(|k| {
            Mat::from_fn(n, n, |i, j| {
                let mut acc = T::zero();
                for (l, low) in lowered.iter().enumerate() {
                    acc = acc + ginv[(k, l)].clone() * low[(i, j)].clone();
                }
                acc
            })
        })
        .collect()
}
