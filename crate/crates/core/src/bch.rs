//! Baker–Campbell–Hausdorff coefficients in the free Lie algebra on two
//! letters, and their numerical comparison with time derivatives of
//! `ζ_b(tX, tY)`.
//!
//! The series is normalized as `ζ(tX, tY) = Σ_k (t^k/k!) a_k(X, Y)`, so `a_k`
//! is `k!` times the usual homogeneous term.

use crate::bundle::{dim, omega_checked, zeta, BundleError, CartanChart};
use crate::curvature::field_bracket;
use crate::jet::Jet;
use crate::liealg::LieAlgebra;
use crate::scalar::{factorial, Scalar};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

/// Highest supported order.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BchError {
    #[error("order {0} outside 1..={MAX_ORDER}")]
    Order(usize),
    #[error("polynomial is not a Lie element (word {0})")]
    NotLie(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("Taylor fit is ill-conditioned: {0}")]
    IllConditioned(String),
}

type Word = Vec<u8>;

fn word_label(w: &[u8]) -> String {
    w.iter().map(|&c| if c == 0 { 'X' } else { 'Y' }).collect()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Element of the free associative algebra on `X = 0`, `Y = 1`.
#[derive(Clone, Debug, Default, PartialEq)]
struct Assoc {
    terms: BTreeMap<Word, BigRational>,
}

impl Assoc {
    fn word(w: Word) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(w, BigRational::one());
        Assoc { terms }
    }

    fn add_scaled(&mut self, other: &Assoc, s: &BigRational) {
        for (w, c) in &other.terms {
            let e = self.terms.entry(w.clone()).or_insert_with(BigRational::zero);
            *e += c * s;
            if e.is_zero() {
                self.terms.remove(w);
            }
        }
    }

    /// Product truncated above degree `max_deg`.
    fn mul(&self, other: &Assoc, max_deg: usize) -> Assoc {
        let mut out = Assoc::default();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                if u.len() + v.len() > max_deg {
                    continue;
                }
                let mut w = u.clone();
                w.extend_from_slice(v);
                let e = out.terms.entry(w.clone()).or_insert_with(BigRational::zero);
                *e += a * b;
                if e.is_zero() {
                    out.terms.remove(&w);
                }
            }
        }
        out
    }

    fn commutator(&self, other: &Assoc) -> Assoc {
        let deg = usize::MAX;
        let mut out = self.mul(other, deg);
        out.add_scaled(&other.mul(self, deg), &-BigRational::one());
        out
    }

    fn homogeneous(&self, k: usize) -> Assoc {
        Assoc {
            terms: self
                .terms
                .iter()
                .filter(|(w, _)| w.len() == k)
                .map(|(w, c)| (w.clone(), c.clone()))
                .collect(),
        }
    }
}

/// `w` is strictly smaller than each of its proper suffixes.
pub fn is_lyndon(w: &[u8]) -> bool {
    !w.is_empty() && (1..w.len()).all(|i| w < &w[i..])
}

/// Lyndon words of length `k` over `{X, Y}` in increasing order.
pub fn lyndon_words(k: usize) -> Vec<Word> {
    // Duval's generation of all Lyndon words up to length k
    let mut out = Vec::new();
    let mut w: Vec<u8> = vec![0];
    while !w.is_empty() {
        if w.len() == k {
            out.push(w.clone());
        }
        let m = w.len();
        while w.len() < k {
            let c = w[w.len() - m];
            w.push(c);
        }
        while w.last() == Some(&1) {
            w.pop();
        }
        if let Some(last) = w.last_mut() {
            *last += 1;
        }
    }
    out
}

/// Standard factorization `w = uv` with `v` the longest proper Lyndon suffix.
fn standard_factorization(w: &[u8]) -> (&[u8], &[u8]) {
    let split = (1..w.len())
        .find(|&i| is_lyndon(&w[i..]))
        .expect("words of length ≥ 2 have a Lyndon suffix");
    (&w[..split], &w[split..])
}

/// Associative expansion of the standard bracketing of a Lyndon word.
fn expansion(w: &[u8], memo: &mut HashMap<Word, Assoc>) -> Assoc {
    if let Some(p) = memo.get(w) {
        return p.clone();
    }
    let p = if w.len() == 1 {
        Assoc::word(w.to_vec())
    } else {
        let (u, v) = standard_factorization(w);
        expansion(u, memo).commutator(&expansion(v, memo))
    };
    memo.insert(w.to_vec(), p.clone());
    p
}

/// A Lie polynomial in `X, Y` with rational coefficients, stored over the
/// Lyndon basis (standard bracketings).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BracketPolynomial {
    terms: BTreeMap<Word, BigRational>,
}

impl BracketPolynomial {
    pub fn x() -> Self {
        Self::letter(0)
    }

    pub fn y() -> Self {
        Self::letter(1)
    }

    fn letter(c: u8) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![c], BigRational::one());
        BracketPolynomial { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Longest word length (0 for the zero polynomial).
    pub fn order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// `(Lyndon word, coefficient)` pairs, e.g. `("XXY", 1/2)`.
    pub fn terms(&self) -> impl Iterator<Item = (String, &BigRational)> {
        self.terms.iter().map(|(w, c)| (word_label(w), c))
    }

    pub fn coefficient(&self, word: &str) -> BigRational {
        let w: Word = word.bytes().map(|b| u8::from(b == b'Y')).collect();
        self.terms.get(&w).cloned().unwrap_or_else(BigRational::zero)
    }

    fn to_assoc(&self, memo: &mut HashMap<Word, Assoc>) -> Assoc {
        let mut out = Assoc::default();
        for (w, c) in &self.terms {
            out.add_scaled(&expansion(w, memo), c);
        }
        out
    }

    /// Triangular reduction: the smallest word of a Lie element is Lyndon
    /// and leads its own standard bracketing.
    fn from_assoc(p: &Assoc, memo: &mut HashMap<Word, Assoc>) -> Result<Self, BchError> {
        let mut rest = p.clone();
        let mut terms = BTreeMap::new();
        while let Some((w, c)) = rest.terms.iter().next().map(|(w, c)| (w.clone(), c.clone())) {
            if !is_lyndon(&w) {
                return Err(BchError::NotLie(word_label(&w)));
            }
            rest.add_scaled(&expansion(&w, memo), &-c.clone());
            terms.insert(w, c);
        }
        Ok(BracketPolynomial { terms })
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (w, c) in &other.terms {
            let e = terms.entry(w.clone()).or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(w);
            }
        }
        BracketPolynomial { terms }
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        if s.is_zero() {
            return Self::default();
        }
        BracketPolynomial {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c * s)).collect(),
        }
    }

    /// `[self, other]`, reduced to the Lyndon basis.
    pub fn bracket(&self, other: &Self) -> Self {
        let mut memo = HashMap::new();
        let p = self.to_assoc(&mut memo).commutator(&other.to_assoc(&mut memo));
        Self::from_assoc(&p, &mut memo).expect("brackets of Lie elements are Lie")
    }

    /// Image under the letter swap `X ↔ Y`.
    pub fn swap_letters(&self) -> Self {
        let mut memo = HashMap::new();
        let p = self.to_assoc(&mut memo);
        let swapped = Assoc {
            terms: p
                .terms
                .iter()
                .map(|(w, c)| (w.iter().map(|&l| 1 - l).collect(), c.clone()))
                .collect(),
        };
        Self::from_assoc(&swapped, &mut memo).expect("swap preserves Lie elements")
    }

    /// Substitutes `x`, `y` with the given bracket.
    pub fn evaluate_with<S: Scalar>(
        &self,
        x: &[S],
        y: &[S],
        bracket: &dyn Fn(&[S], &[S]) -> Vec<S>,
    ) -> Vec<S> {
        fn eval<S: Scalar>(
            w: &[u8],
            x: &[S],
            y: &[S],
            bracket: &dyn Fn(&[S], &[S]) -> Vec<S>,
            memo: &mut HashMap<Word, Vec<S>>,
        ) -> Vec<S> {
            if w.len() == 1 {
                return if w[0] == 0 { x.to_vec() } else { y.to_vec() };
            }
            if let Some(v) = memo.get(w) {
                return v.clone();
            }
            let (u, v) = standard_factorization(w);
            let a = eval(u, x, y, bracket, memo);
            let b = eval(v, x, y, bracket, memo);
            let out = bracket(&a, &b);
            memo.insert(w.to_vec(), out.clone());
            out
        }
        let mut memo = HashMap::new();
        let mut acc = vec![S::zero(); x.len()];
        for (w, c) in &self.terms {
            let v = eval(w, x, y, bracket, &mut memo);
            let s = S::from_ratio(c.numer(), c.denom());
            for (a, vi) in acc.iter_mut().zip(v) {
                *a = a.clone() + s.clone() * vi;
            }
        }
        acc
    }
}

impl fmt::Display for BracketPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn bracketing(w: &[u8]) -> String {
            if w.len() == 1 {
                return word_label(w);
            }
            let (u, v) = standard_factorization(w);
            format!("[{},{}]", bracketing(u), bracketing(v))
        }
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if !mag.is_one() {
                write!(f, "{mag} ")?;
            }
            write!(f, "{}", bracketing(w))?;
        }
        Ok(())
    }
}

fn check_order(k: usize) -> Result<(), BchError> {
    if k == 0 || k > MAX_ORDER {
        Err(BchError::Order(k))
    } else {
        Ok(())
    }
}

/// `a_1, …, a_{k_max}` from `log(exp X · exp Y)` in the free associative
/// algebra, rescaled by `k!`.
pub fn bch_terms(k_max: usize) -> Result<Vec<BracketPolynomial>, BchError> {
    check_order(k_max)?;
    let exp_letter = |c: u8| {
        let mut p = Assoc::default();
        let mut fact = BigRational::one();
        for n in 0..=k_max {
            if n > 0 {
                fact *= BigRational::from_integer(BigInt::from(n));
            }
            p.terms.insert(vec![c; n], fact.recip());
        }
        p
    };
    let product = exp_letter(0).mul(&exp_letter(1), k_max);
    let mut q = product.clone();
    q.terms.remove(&Vec::new());
    let mut log = Assoc::default();
    let mut power = q.clone();
    for m in 1..=k_max {
        let sign = if m % 2 == 1 { 1 } else { -1 };
        log.add_scaled(&power, &rat(sign, m as i64));
        power = power.mul(&q, k_max);
    }
    let mut memo = HashMap::new();
    let mut out = Vec::with_capacity(k_max);
    let mut fact = BigRational::one();
    for k in 1..=k_max {
        fact *= BigRational::from_integer(BigInt::from(k));
        let lie = BracketPolynomial::from_assoc(&log.homogeneous(k), &mut memo)?;
        out.push(lie.scale(&fact));
    }
    Ok(out)
}

/// `a_k(X, Y)` in a Lie algebra.
pub fn evaluate_in_algebra(
    poly: &BracketPolynomial,
    lie: &LieAlgebra,
    x: &[f64],
    y: &[f64],
) -> Vec<f64> {
    poly.evaluate_with(x, y, &|a, b| lie.bracket_of(a, b))
}

/// `ω_b(a(X̃, Ỹ))` with exact brackets of the ω-constant fields.
pub fn evaluate_vector_fields(
    chart: &impl CartanChart,
    b: &[f64],
    poly: &BracketPolynomial,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>, BchError> {
    let w0 = omega_checked(chart, b)?;
    let vars = Jet::variables(b, poly.order().max(1));
    let winv = chart
        .omega(&vars)
        .inverse()
        .ok_or_else(|| BundleError::Singular(b.to_vec()))?;
    let lift = |v: &[f64]| winv.mul_vec(&v.iter().map(|&c| Jet::constant(c)).collect::<Vec<_>>());
    let field = poly.evaluate_with(&lift(x), &lift(y), &|a, c| field_bracket(a, c));
    let value: Vec<f64> = field.iter().map(Jet::value).collect();
    Ok(w0.mul_vec(&value))
}

/// Symmetric sampling grid `t ∈ ±{1..points}·h` and fit degree.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TaylorGrid {
    pub h: f64,
    pub points: usize,
    pub degree: usize,
    /// Tolerance for the `log` inside `ζ`.
    pub tol: f64,
}

impl Default for TaylorGrid {
    fn default() -> Self {
        TaylorGrid {
            h: 0.05,
            points: 6,
            degree: 9,
            tol: 1e-13,
        }
    }
}

/// Fitted `z_k = k!·c_k` with one-sigma errors from the fit covariance.
#[derive(Clone, Debug, Serialize)]
pub struct TaylorFit {
    pub z: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
    pub grid: TaylorGrid,
}

/// Least-squares polynomial fit of `t ↦ ζ_b(tX, tY)` (no constant term).
pub fn taylor_fit_zeta(
    chart: &impl CartanChart,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    k_max: usize,
    grid: TaylorGrid,
) -> Result<TaylorFit, BchError> {
    let n = dim(chart);
    let deg = grid.degree;
    let ts: Vec<f64> = (1..=grid.points)
        .flat_map(|i| [-(i as f64) * grid.h, i as f64 * grid.h])
        .collect();
    if k_max == 0 || deg < k_max || ts.len() <= deg {
        return Err(BchError::IllConditioned(format!(
            "{} samples for degree {deg} and order {k_max}",
            ts.len()
        )));
    }
    let samples: Vec<Vec<f64>> = ts
        .par_iter()
        .map(|&t| {
            let tx: Vec<f64> = x.iter().map(|v| v * t).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
            zeta(chart, b, &tx, &ty, grid.tol)
        })
        .collect::<Result<_, _>>()?;
    // columns scaled by h^j keep the normal matrix well conditioned
    let a = DMatrix::from_fn(ts.len(), deg, |i, j| (ts[i] / grid.h).powi(j as i32 + 1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return Err(BchError::IllConditioned(format!("condition {:.3e}", smax / smin)));
    }
    let cov_unit = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| BchError::IllConditioned("singular normal matrix".into()))?;
    let dof = (ts.len() - deg) as f64;
    let mut z = vec![vec![0.0; n]; k_max];
    let mut errors = vec![vec![0.0; n]; k_max];
    for c in 0..n {
        let rhs = DVector::from_iterator(ts.len(), samples.iter().map(|s| s[c]));
        let coef = svd
            .solve(&rhs, 1e-14)
            .map_err(|e| BchError::IllConditioned(e.to_string()))?;
        let resid = &a * &coef - &rhs;
        let sigma2 = resid.norm_squared() / dof;
        for k in 1..=k_max {
            let scale = factorial(k) / grid.h.powi(k as i32);
            z[k - 1][c] = coef[k - 1] * scale;
            errors[k - 1][c] = (sigma2 * cov_unit[(k - 1, k - 1)]).sqrt() * scale;
        }
    }
    Ok(TaylorFit { z, errors, grid })
}

#[derive(Clone, Debug, Serialize)]
pub struct BchRow {
    pub k: usize,
    pub fitted: Vec<f64>,
    pub expected: Vec<f64>,
    pub fit_error: Vec<f64>,
    pub abs_err: f64,
    pub rel_err: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BchReport {
    pub rows: Vec<BchRow>,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the fitted `z_k` with `ω_b(a_k(X̃, Ỹ))`, passing order `k` when
/// the error is within `tol` relative to `max(‖expected‖, 1)`.
pub fn verify_prop_bch(
    chart: &impl CartanChart,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    k_max: usize,
    tol: f64,
    grid: TaylorGrid,
) -> Result<BchReport, BchError> {
    let terms = bch_terms(k_max)?;
    let fit = taylor_fit_zeta(chart, b, x, y, k_max, grid)?;
    let mut rows = Vec::with_capacity(k_max);
    for (k, a_k) in terms.iter().enumerate() {
        let expected = evaluate_vector_fields(chart, b, a_k, x, y)?;
        let fitted = fit.z[k].clone();
        let abs_err = fitted
            .iter()
            .zip(&expected)
            .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        let scale = expected.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let rel_err = abs_err / scale.max(1.0);
        rows.push(BchRow {
            k: k + 1,
            fitted,
            expected,
            fit_error: fit.errors[k].clone(),
            abs_err,
            rel_err,
            pass: rel_err <= tol,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(BchReport { rows, tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> BigRational {
        rat(1, 2)
    }

    #[test]
    fn lyndon_words_small() {
        let labels: Vec<String> = lyndon_words(4).iter().map(|w| word_label(w)).collect();
        assert_eq!(labels, vec!["XXXY", "XXYY", "XYYY"]);
        // necklace count: (1/k) Σ μ(d) 2^{k/d}
        let counts: Vec<usize> = (1..=8).map(|k| lyndon_words(k).len()).collect();
        assert_eq!(counts, vec![2, 1, 2, 3, 6, 9, 18, 30]);
        assert!(is_lyndon(&[0, 0, 1]) && !is_lyndon(&[0, 1, 0]));
    }

    #[test]
    fn low_order_terms() {
        let a = bch_terms(3).unwrap();
        let (x, y) = (BracketPolynomial::x(), BracketPolynomial::y());
        assert_eq!(a[0], x.add(&y));
        assert_eq!(a[1], x.bracket(&y));
        let a3 = x.bracket(&x.bracket(&y)).add(&y.bracket(&y.bracket(&x))).scale(&half());
        assert_eq!(a[2], a3);
        assert_eq!(a[2].to_string(), "1/2 [X,[X,Y]] + 1/2 [[X,Y],Y]");
    }

    #[test]
    fn fourth_order_is_single_bracket() {
        // a_4 = 4!·(−1/24)[Y,[X,[X,Y]]]
        let a = bch_terms(4).unwrap();
        let (x, y) = (BracketPolynomial::x(), BracketPolynomial::y());
        let expect = y.bracket(&x.bracket(&x.bracket(&y))).scale(&rat(-1, 1));
        assert_eq!(a[3], expect);
    }

    #[test]
    fn letter_swap_parity() {
        let a = bch_terms(MAX_ORDER).unwrap();
        for (i, ak) in a.iter().enumerate() {
            let k = i + 1;
            let sign = if k % 2 == 1 { 1 } else { -1 };
            assert_eq!(ak.swap_letters(), ak.scale(&rat(sign, 1)), "k = {k}");
        }
    }

    #[test]
    fn order_bounds() {
        assert_eq!(bch_terms(0), Err(BchError::Order(0)));
        assert!(bch_terms(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn algebra_evaluations() {
        let a = bch_terms(5).unwrap();
        let abelian = LieAlgebra::builtin("abelian3").unwrap();
        let x = [0.3, -0.2, 0.5];
        let y = [0.1, 0.4, -0.3];
        for ak in &a[1..] {
            assert!(evaluate_in_algebra(ak, &abelian, &x, &y).iter().all(|v| *v == 0.0));
        }
        let so3 = LieAlgebra::builtin("so3").unwrap();
        let e = evaluate_in_algebra(&a[1], &so3, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(e, vec![0.0, 0.0, 1.0]);
        let heis = LieAlgebra::builtin("heisenberg").unwrap();
        for ak in &a[2..] {
            assert!(evaluate_in_algebra(ak, &heis, &x, &y).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn exact_evaluation_over_rationals() {
        let so3 = crate::liealg::ExactLieAlgebra::builtin("so3").unwrap();
        let a = bch_terms(3).unwrap();
        let x: Vec<BigRational> = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        let y: Vec<BigRational> = vec![rat(0, 1), rat(1, 1), rat(0, 1)];
        let v = a[2].evaluate_with(&x, &y, &|p, q| so3.bracket(p, q).unwrap());
        // ½([e1,e3·(−1)…]) evaluated exactly
        let direct = {
            let xy = so3.bracket(&x, &y).unwrap();
            let t1 = so3.bracket(&x, &xy).unwrap();
            let yx = so3.bracket(&y, &x).unwrap();
            let t2 = so3.bracket(&y, &yx).unwrap();
            t1.iter().zip(&t2).map(|(p, q)| (p + q) * half()).collect::<Vec<_>>()
        };
        assert_eq!(v, direct);
    }
}
