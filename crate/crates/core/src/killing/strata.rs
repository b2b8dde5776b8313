//! Level sets of `k(x) = dim Kill^∞` over a grid of base points.

use super::{stabilize_jet, RankOptions};
use crate::bundle::CartanChart;
use crate::curvature::omega_jet;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Tensor grid `lo:hi:steps` per base axis.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Grid {
    pub axes: Vec<(f64, f64, usize)>,
}

impl Grid {
    pub fn new(axes: Vec<(f64, f64, usize)>) -> Result<Self, String> {
        if axes.is_empty() || axes.iter().any(|&(_, _, s)| s == 0) {
            return Err("grid has no samples".into());
        }
        if axes.iter().any(|&(lo, hi, s)| !(lo.is_finite() && hi.is_finite()) || (s > 1 && hi < lo)) {
            return Err("grid bounds must be finite with lo ≤ hi".into());
        }
        Ok(Grid { axes })
    }

    /// Parses `lo:hi:steps`.
    pub fn parse_axis(text: &str) -> Result<(f64, f64, usize), String> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:steps, got '{text}'"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number '{s}'"));
        let steps = parts[2]
            .parse::<usize>()
            .map_err(|_| format!("bad step count '{}'", parts[2]))?;
        Ok((num(parts[0])?, num(parts[1])?, steps))
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.2).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat index, first axis slowest.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, &(_, _, s)) in self.axes.iter().enumerate().rev() {
            idx[d] = flat % s;
            flat /= s;
        }
        idx
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, &(_, _, s))| acc * s + i)
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.axes)
            .map(|(&i, &(lo, hi, s))| {
                if s == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (s - 1) as f64
                }
            })
            .collect()
    }

    /// Flat indices of the `(2r+1)^n` stencil around `flat`, excluding itself.
    pub fn neighbors(&self, flat: usize, radius: usize) -> Vec<usize> {
        let centre = self.multi_index(flat);
        let r = radius as isize;
        let mut out = Vec::new();
        let mut offset = vec![-r; centre.len()];
        loop {
            if offset.iter().any(|&o| o != 0) {
                let cand: Option<Vec<usize>> = centre
                    .iter()
                    .zip(&offset)
                    .zip(&self.axes)
                    .map(|((&c, &o), &(_, _, s))| {
                        let v = c as isize + o;
                        (v >= 0 && v < s as isize).then_some(v as usize)
                    })
                    .collect();
                if let Some(c) = cand {
                    out.push(self.flat_index(&c));
                }
            }
            let mut d = 0;
            loop {
                if d == offset.len() {
                    return out;
                }
                offset[d] += 1;
                if offset[d] <= r {
                    break;
                }
                offset[d] = -r;
                d += 1;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrataOptions {
    pub m_max: usize,
    pub rank: RankOptions,
    /// Half-width of the regularity stencil in grid steps.
    pub stencil_radius: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Recorded in reports; the scan itself draws no random numbers.
    pub seed: u64,
}

impl Default for StrataOptions {
    fn default() -> Self {
        StrataOptions {
            m_max: super::super::curvature::M_MAX,
            rank: RankOptions::default(),
            stencil_radius: 1,
            workers: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleResult {
    pub index: Vec<usize>,
    pub x: Vec<f64>,
    /// `k_1, …, k_{m_max+1}`.
    pub k_m: Vec<usize>,
    pub k: Option<usize>,
    pub stabilization_order: Option<usize>,
    pub gap: Option<f64>,
    /// Killing generators reach every direction of `g/p`.
    pub orbit_open: bool,
    pub regular: bool,
    /// Stratum id for regular samples.
    pub component: Option<usize>,
    pub error: Option<String>,
}

/// A connected component of regular samples sharing the same `k`.
#[derive(Clone, Debug, Serialize)]
pub struct Stratum {
    pub id: usize,
    pub k: usize,
    pub size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrataReport {
    pub chart: String,
    pub chart_hash: String,
    pub grid: Grid,
    pub options: StrataOptions,
    pub samples: Vec<SampleResult>,
    pub strata: Vec<Stratum>,
    pub regular_count: usize,
    pub failed_count: usize,
    pub max_stabilization_order: Option<usize>,
    /// One stratum covering the grid with open local orbits.
    pub locally_homogeneous: bool,
    pub notes: Vec<String>,
}

fn fnv1a(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in text.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn scan_sample(
    chart: &impl CartanChart,
    grid: &Grid,
    flat: usize,
    opts: &StrataOptions,
) -> SampleResult {
    let index = grid.multi_index(flat);
    let x = grid.point(&index);
    let mut out = SampleResult {
        index,
        x: x.clone(),
        k_m: Vec::new(),
        k: None,
        stabilization_order: None,
        gap: None,
        orbit_open: false,
        regular: false,
        component: None,
        error: None,
    };
    let b = chart.lift(&x);
    let jet = match omega_jet(chart, &b, opts.m_max + 1) {
        Ok(j) => j,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.k_m = (1..=opts.m_max + 1)
        .map(|m| super::killing_from_jet(&jet, m, opts.rank).dim())
        .collect();
    match stabilize_jet(&jet, opts.m_max, opts.rank) {
        Ok(s) => {
            let n = chart.base_dim();
            let basis = s.solution.basis_matrix();
            let horizontal = basis.rows(0, n).into_owned();
            let rank = if horizontal.ncols() == 0 {
                0
            } else {
                horizontal
                    .singular_values()
                    .iter()
                    .filter(|&&v| v > 1e-6)
                    .count()
            };
            out.orbit_open = rank == n;
            out.k = Some(s.solution.dim());
            out.stabilization_order = Some(s.order);
            out.gap = Some(s.solution.gap);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Computes `k_m`, `k` and `m(b)` at every grid sample over the chart's zero
/// section, classifies regular samples and labels the strata.
pub fn scan_strata<C: CartanChart>(chart: &C, grid: &Grid, opts: &StrataOptions) -> StrataReport {
    let count = grid.len();
    let run = || -> Vec<SampleResult> {
        (0..count)
            .into_par_iter()
            .map(|i| scan_sample(chart, grid, i, opts))
            .collect()
    };
    let mut samples = match opts.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };

    let mut notes = Vec::new();
    if count == 1 {
        notes.push("insufficient neighborhood".to_string());
    }
    let neighbors: Vec<Vec<usize>> = (0..count)
        .map(|i| grid.neighbors(i, opts.stencil_radius))
        .collect();
    for i in 0..count {
        let Some(k) = samples[i].k else { continue };
        samples[i].regular = neighbors[i].iter().all(|&j| samples[j].k == Some(k));
    }

    let mut strata = Vec::new();
    let mut stack = Vec::new();
    for start in 0..count {
        if !samples[start].regular || samples[start].component.is_some() {
            continue;
        }
        let k = samples[start].k.expect("regular samples have k");
        let id = strata.len();
        let mut size = 0;
        samples[start].component = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            for &j in &grid.neighbors(i, 1) {
                if samples[j].regular && samples[j].component.is_none() && samples[j].k == Some(k) {
                    samples[j].component = Some(id);
                    stack.push(j);
                }
            }
        }
        strata.push(Stratum { id, k, size });
    }

    let regular_count = samples.iter().filter(|s| s.regular).count();
    let failed_count = samples.iter().filter(|s| s.error.is_some()).count();
    let locally_homogeneous = strata.len() == 1
        && regular_count == count
        && samples.iter().all(|s| s.orbit_open);
    let label = chart.label();
    let hash_input = format!("{label}|{:?}", chart.domain().bounds());
    StrataReport {
        chart: label,
        chart_hash: fnv1a(&hash_input),
        grid: grid.clone(),
        options: opts.clone(),
        max_stabilization_order: samples.iter().filter_map(|s| s.stabilization_order).max(),
        samples,
        strata,
        regular_count,
        failed_count,
        locally_homogeneous,
        notes,
    }
}

impl StrataReport {
    /// Distinct `k` values over the strata, with total sizes.
    pub fn k_levels(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for s in &self.strata {
            *out.entry(s.k).or_insert(0) += s.size;
        }
        out
    }

    /// One row per sample.
    pub fn to_csv(&self) -> String {
        let n = self.grid.axes.len();
        let orders = self.options.m_max + 1;
        let mut out = String::new();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=orders).map(|m| format!("k_{m}")));
        header.extend(
            ["k", "m_b", "regular", "component", "error"]
                .iter()
                .map(|s| s.to_string()),
        );
        out.push_str(&header.join(","));
        out.push('\n');
        for s in &self.samples {
            let mut row: Vec<String> = s.x.iter().map(|v| format!("{v:.16e}")).collect();
            for m in 0..orders {
                row.push(s.k_m.get(m).map(|k| k.to_string()).unwrap_or_default());
            }
            row.push(s.k.map(|k| k.to_string()).unwrap_or_default());
            row.push(s.stabilization_order.map(|k| k.to_string()).unwrap_or_default());
            row.push(s.regular.to_string());
            row.push(s.component.map(|k| k.to_string()).unwrap_or_default());
            row.push(
                s.error
                    .as_deref()
                    .map(|e| format!("\"{}\"", e.replace('"', "'")))
                    .unwrap_or_default(),
            );
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}
