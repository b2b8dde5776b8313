//! Truncated multivariate Taylor polynomials.
//!
//! A [`Jet`] holds the Taylor coefficients of a smooth function around a
//! point up to some total degree. Arithmetic and the elementary functions act
//! on jets exactly (up to rounding), so evaluating a chart's connection form
//! on jets yields all of its derivatives at once. Differentiation lowers the
//! degree to which a jet is valid by one; every operation tracks that degree.
//!
//! Constant jets carry no layout and broadcast against any other jet.

use crate::scalar::{bump_taylor, Real, Scalar};
use num_bigint::BigInt;
use num_traits::{FromPrimitive, One, Zero};
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial bookkeeping for `nvars` variables up to total degree `max_deg`.
pub struct JetLayout {
    nvars: usize,
    max_deg: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `degree_end[d]` = number of monomials of degree ≤ d.
    degree_end: Vec<usize>,
    /// products `(i, j, k)` with `x^i x^j = x^k`, grouped by `deg(k)`.
    mul_by_deg: Vec<Vec<(u32, u32, u32)>>,
    /// `∂/∂x_v`: entries `(src, dst, factor)`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetLayout({} vars, degree {})", self.nvars, self.max_deg)
    }
}

impl JetLayout {
    fn build(nvars: usize, max_deg: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut degree_end = Vec::with_capacity(max_deg + 1);
        for d in 0..=max_deg {
            let mut cur = vec![0u8; nvars];
            push_compositions(&mut exps, &mut cur, 0, d);
            degree_end.push(exps.len());
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degs: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let mut mul_by_deg = vec![Vec::new(); max_deg + 1];
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                let d = degs[i] + degs[j];
                if d > max_deg {
                    continue;
                }
                let e: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                let k = index[&e];
                mul_by_deg[d].push((i as u32, j as u32, k as u32));
            }
        }
        let mut deriv = vec![Vec::new(); nvars];
        for (src, e) in exps.iter().enumerate() {
            for v in 0..nvars {
                if e[v] == 0 {
                    continue;
                }
                let mut t = e.clone();
                t[v] -= 1;
                deriv[v].push((src as u32, index[&t] as u32, e[v] as f64));
            }
        }
        JetLayout {
            nvars,
            max_deg,
            exps,
            index,
            degree_end,
            mul_by_deg,
            deriv,
        }
    }

    /// Shared layout for the given shape; layouts are cached process-wide.
    pub fn shared(nvars: usize, max_deg: usize) -> Arc<JetLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((nvars, max_deg))
            .or_insert_with(|| Arc::new(JetLayout::build(nvars, max_deg)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Exponent vector of the `i`-th monomial (graded order).
    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn max_degree(&self) -> usize {
        self.max_deg
    }

    fn len(&self, deg: usize) -> usize {
        self.degree_end[deg.min(self.max_deg)]
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        push_compositions(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

const CONST_DEG: usize = usize::MAX;

/// Truncated Taylor expansion `Σ c_α (x − x₀)^α`.
#[derive(Clone)]
pub struct Jet {
    c: Vec<f64>,
    deg: usize,
    layout: Option<Arc<JetLayout>>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.layout.is_none() {
            write!(f, "Jet({})", self.c[0])
        } else {
            write!(f, "Jet(deg {}, {:?})", self.deg, self.c)
        }
    }
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet {
            c: vec![v],
            deg: CONST_DEG,
            layout: None,
        }
    }

    /// Independent variables `x_i = point_i + δ_i` valid to `degree`.
    pub fn variables(point: &[f64], degree: usize) -> Vec<Jet> {
        let layout = JetLayout::shared(point.len(), degree);
        let n = layout.len(degree);
        point
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut c = vec![0.0; n];
                c[0] = p;
                if degree >= 1 {
                    let mut e = vec![0u8; point.len()];
                    e[i] = 1;
                    c[layout.index[&e]] = 1.0;
                }
                Jet {
                    c,
                    deg: degree,
                    layout: Some(layout.clone()),
                }
            })
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Degree to which the expansion is valid (`usize::MAX` for constants).
    pub fn degree(&self) -> usize {
        self.deg
    }

    pub fn is_constant(&self) -> bool {
        self.layout.is_none()
    }

    /// Coefficient of the monomial with exponents `exps`.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        match &self.layout {
            None => {
                if exps.iter().all(|&e| e == 0) {
                    self.c[0]
                } else {
                    0.0
                }
            }
            Some(l) => l
                .index
                .get(exps)
                .and_then(|&i| self.c.get(i).copied())
                .unwrap_or(0.0),
        }
    }

    /// Mixed partial derivative `∂^α f(x₀)`.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let fact: f64 = exps
            .iter()
            .map(|&e| crate::scalar::factorial(e as usize))
            .product();
        self.coeff(exps) * fact
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `∂/∂x_v`; the result is valid to one degree less.
    pub fn d(&self, v: usize) -> Jet {
        let Some(layout) = &self.layout else {
            return Jet::constant(0.0);
        };
        let deg = self.deg.saturating_sub(1);
        let n = layout.len(deg);
        let mut out = vec![0.0; n];
        for &(src, dst, f) in &layout.deriv[v] {
            let (src, dst) = (src as usize, dst as usize);
            if dst < n && src < self.c.len() {
                out[dst] += f * self.c[src];
            }
        }
        Jet {
            c: out,
            deg,
            layout: Some(layout.clone()),
        }
    }

    /// Drops terms above `deg`.
    pub fn truncate(mut self, deg: usize) -> Jet {
        if let Some(layout) = &self.layout {
            if deg < self.deg {
                self.c.truncate(layout.len(deg));
                self.deg = deg;
            }
        }
        self
    }

    fn scale(mut self, s: f64) -> Jet {
        for x in &mut self.c {
            *x *= s;
        }
        self
    }

    fn combine(a: &Jet, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        match (&a.layout, &b.layout) {
            (None, None) => Jet::constant(f(a.c[0], b.c[0])),
            (Some(l), None) => {
                let mut c: Vec<f64> = a.c.iter().map(|&x| f(x, 0.0)).collect();
                c[0] = f(a.c[0], b.c[0]);
                Jet {
                    c,
                    deg: a.deg,
                    layout: Some(l.clone()),
                }
            }
            (None, Some(l)) => {
                let mut c: Vec<f64> = b.c.iter().map(|&y| f(0.0, y)).collect();
                c[0] = f(a.c[0], b.c[0]);
                Jet {
                    c,
                    deg: b.deg,
                    layout: Some(l.clone()),
                }
            }
            (Some(l), Some(_)) => {
                let deg = a.deg.min(b.deg);
                let n = l.len(deg);
                let c = (0..n).map(|i| f(a.c[i], b.c[i])).collect();
                Jet {
                    c,
                    deg,
                    layout: Some(l.clone()),
                }
            }
        }
    }

    fn product(a: &Jet, b: &Jet) -> Jet {
        match (&a.layout, &b.layout) {
            (None, None) => Jet::constant(a.c[0] * b.c[0]),
            (Some(_), None) => a.clone().scale(b.c[0]),
            (None, Some(_)) => b.clone().scale(a.c[0]),
            (Some(l), Some(_)) => {
                let deg = a.deg.min(b.deg);
                let n = l.len(deg);
                let mut c = vec![0.0; n];
                for group in &l.mul_by_deg[..=deg.min(l.max_deg)] {
                    for &(i, j, k) in group {
                        c[k as usize] += a.c[i as usize] * b.c[j as usize];
                    }
                }
                Jet {
                    c,
                    deg,
                    layout: Some(l.clone()),
                }
            }
        }
    }

    /// `Σ_k t_k (x − x₀)^k` where `t_k` are the Taylor coefficients of a
    /// univariate function at the constant term of `self`.
    fn compose(&self, taylor: impl Fn(usize) -> Vec<f64>) -> Jet {
        if self.layout.is_none() {
            return Jet::constant(taylor(0)[0]);
        }
        let order = self.deg.min(self.layout.as_ref().unwrap().max_deg);
        let t = taylor(order);
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Jet::constant(t[order]);
        for k in (0..order).rev() {
            r = Jet::product(&r, &h);
            r.c[0] += t[k];
        }
        if r.layout.is_none() {
            let mut out = self.clone();
            out.c.iter_mut().for_each(|x| *x = 0.0);
            out.c[0] = r.c[0];
            return out;
        }
        r
    }
}

fn binomial_series(x0: f64, a: f64, order: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(order + 1);
    let mut coef = 1.0;
    for k in 0..=order {
        t.push(coef * x0.powf(a - k as f64));
        coef *= (a - k as f64) / (k as f64 + 1.0);
    }
    t
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet::combine(&self, &rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet::combine(&self, &rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::product(&self, &rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.layout.is_none() {
            return self.scale(1.0 / rhs.c[0]);
        }
        Jet::product(&self, &rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Zero for Jet {
    fn zero() -> Self {
        Jet::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }
}

impl One for Jet {
    fn one() -> Self {
        Jet::constant(1.0)
    }
}

impl FromPrimitive for Jet {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Jet::constant(n as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Jet::constant(n as f64))
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Jet::constant(x))
    }
}

impl Scalar for Jet {
    fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        Jet::constant(<f64 as Scalar>::from_ratio(num, den))
    }

    fn re(&self) -> f64 {
        self.c[0]
    }
}

impl Real for Jet {
    fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    fn magnitude(&self) -> f64 {
        self.max_abs()
    }

    fn sin(self) -> Self {
        let x0 = self.c[0];
        self.compose(|n| {
            let (s, c) = x0.sin_cos();
            let cyc = [s, c, -s, -c];
            (0..=n)
                .map(|k| cyc[k % 4] / crate::scalar::factorial(k))
                .collect()
        })
    }

    fn cos(self) -> Self {
        let x0 = self.c[0];
        self.compose(|n| {
            let (s, c) = x0.sin_cos();
            let cyc = [c, -s, -c, s];
            (0..=n)
                .map(|k| cyc[k % 4] / crate::scalar::factorial(k))
                .collect()
        })
    }

    fn tan(self) -> Self {
        self.clone().sin() / self.cos()
    }

    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose(|n| (0..=n).map(|k| e / crate::scalar::factorial(k)).collect())
    }

    fn ln(self) -> Self {
        let x0 = self.c[0];
        self.compose(|n| {
            (0..=n)
                .map(|k| {
                    if k == 0 {
                        x0.ln()
                    } else {
                        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                        sign / (k as f64 * x0.powi(k as i32))
                    }
                })
                .collect()
        })
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut base = self;
        let mut acc = Jet::constant(1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = Jet::product(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = Jet::product(&base, &base);
            }
        }
        acc
    }

    fn powf(self, a: f64) -> Self {
        if a.fract() == 0.0 && a.abs() < 64.0 {
            return self.powi(a as i32);
        }
        let x0 = self.c[0];
        self.compose(|n| binomial_series(x0, a, n))
    }

    fn recip(self) -> Self {
        let x0 = self.c[0];
        self.compose(|n| binomial_series(x0, -1.0, n))
    }

    fn bump(self, deriv: u32) -> Self {
        let x0 = self.c[0];
        let k = deriv as usize;
        self.compose(|n| {
            let full = bump_taylor(x0, n + k);
            (0..=n)
                .map(|j| {
                    // ψ^{(k)} expanded: coefficient of h^j is c_{k+j} (k+j)!/j!
                    let mut f = 1.0;
                    for m in (j + 1)..=(j + k) {
                        f *= m as f64;
                    }
                    full[k + j] * f
                })
                .collect()
        })
    }
}
