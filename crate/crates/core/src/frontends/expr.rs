//! Metric coefficient expressions: parsing, printing, exact differentiation
//! and evaluation over any [`Real`] scalar.
//!
//! Grammar:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | base ('^' exponent)?
//! exponent := int | '-' int | '(' '-'? int ('/' int)? ')'
//! base     := number | 'x' digit+ | func '(' expr ')' | '(' expr ')'
//! func     := sin | cos | tan | exp | log | sqrt | bump
//! ```
//!
//! `bump(s)` is the compactly supported profile `exp(1 − 1/(1 − s))` for
//! `s < 1` and zero otherwise. Fractional exponents must be parenthesized, so
//! `x1^2/4` is `(x1^2)/4`.

use crate::scalar::Real;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("syntax error at position {pos}: {msg}")]
pub struct ParseError {
    /// Byte offset into the input (0-based).
    pub pos: usize,
    pub msg: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    /// `d`-th derivative of the bump profile.
    Bump(u32),
}

impl Func {
    fn name(&self) -> String {
        match self {
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Tan => "tan".into(),
            Func::Exp => "exp".into(),
            Func::Log => "log".into(),
            Func::Sqrt => "sqrt".into(),
            Func::Bump(0) => "bump".into(),
            Func::Bump(d) => format!("bump{d}"),
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "bump" => Func::Bump(0),
            _ => {
                let d = s.strip_prefix("bump")?;
                if d.is_empty() || !d.bytes().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                Func::Bump(d.parse().ok()?)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based variable index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// `base^(p/q)` with `q > 0` and the fraction in lowest terms.
    Pow(Box<Expr>, i64, i64),
    Call(Func, Box<Expr>),
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let mut p = Parser::new(text);
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Largest variable index used plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Expr::Num(v) => T::from_f64_lossy(*v),
            Expr::Var(i) => x[*i].clone(),
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, p, q) => {
                let base = a.eval(x);
                if *q == 1 {
                    base.powi(*p as i32)
                } else if *q == 2 && *p == 1 {
                    base.sqrt()
                } else {
                    base.powf(*p as f64 / *q as f64)
                }
            }
            Expr::Call(f, a) => {
                let u = a.eval(x);
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Tan => u.tan(),
                    Func::Exp => u.exp(),
                    Func::Log => u.ln(),
                    Func::Sqrt => u.sqrt(),
                    Func::Bump(d) => u.bump(*d),
                }
            }
        }
    }

    /// Exact partial derivative with respect to variable `v`.
    pub fn diff(&self, v: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Div(a, b) => {
                // (a' b - a b') / b^2
                let num = sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                );
                div(num, pow((**b).clone(), 2, 1))
            }
            Pow(a, p, q) => {
                let da = a.diff(v);
                if is_num(&da, 0.0) {
                    return Num(0.0);
                }
                let coef = Num(*p as f64 / *q as f64);
                mul(mul(coef, pow((**a).clone(), p - q, *q)), da)
            }
            Call(f, a) => {
                let da = a.diff(v);
                if is_num(&da, 0.0) {
                    return Num(0.0);
                }
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => add(Num(1.0), pow(call(Func::Tan, u), 2, 1)),
                    Func::Exp => call(Func::Exp, u),
                    Func::Log => return div(da, u),
                    Func::Sqrt => return div(da, mul(Num(2.0), call(Func::Sqrt, u))),
                    Func::Bump(d) => call(Func::Bump(d + 1), u),
                };
                mul(outer, da)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 0,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        let paren = prec < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(i) => write!(f, "x{}", i + 1)?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 3)?;
            }
            Expr::Add(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" + ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" - ")?;
                b.write_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("*")?;
                b.write_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("/")?;
                b.write_prec(f, 3)?;
            }
            Expr::Pow(a, p, q) => {
                a.write_prec(f, 5)?;
                if *q == 1 && *p >= 0 {
                    write!(f, "^{p}")?;
                } else if *q == 1 {
                    write!(f, "^({p})")?;
                } else {
                    write!(f, "^({p}/{q})")?;
                }
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ if is_num(&a, -1.0) => neg(b),
        _ if is_num(&b, -1.0) => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::Div(Box::new(a), Box::new(b))
}

fn pow(a: Expr, p: i64, q: i64) -> Expr {
    let g = gcd(p, q).max(1);
    let (p, q) = (p / g, q / g);
    if p == 0 {
        return Expr::Num(1.0);
    }
    if p == q {
        return a;
    }
    Expr::Pow(Box::new(a), p, q)
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

pub(crate) struct Parser<'a> {
    pub(crate) src: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    pub(crate) fn error(&self, msg: &str) -> ParseError {
        ParseError {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    pub(crate) fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    pub(crate) fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    pub(crate) fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let (p, q) = self.exponent()?;
            let g = gcd(p, q).max(1);
            return Ok(Expr::Pow(Box::new(base), p / g, q / g));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError {
                pos: start,
                msg: "exponent out of range".into(),
            })
    }

    fn exponent(&mut self) -> Result<(i64, i64), ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let sign = if self.peek() == Some(b'-') {
                    self.pos += 1;
                    -1
                } else {
                    1
                };
                let p = sign * self.integer()?;
                let q = if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let q = self.integer()?;
                    if q == 0 {
                        return Err(self.error("zero denominator in exponent"));
                    }
                    q
                } else {
                    1
                };
                self.expect(b')')?;
                Ok((p, q))
            }
            Some(b'-') => {
                self.pos += 1;
                Ok((-self.integer()?, 1))
            }
            _ => Ok((self.integer()?, 1)),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |s: &mut Self| {
            let st = s.pos;
            while s.pos < s.src.len() && s.src[s.pos].is_ascii_digit() {
                s.pos += 1;
            }
            s.pos - st
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError {
            pos: start,
            msg: format!("malformed number '{text}'"),
        })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(idx) = word.strip_prefix('x') {
                    if !idx.is_empty() && idx.bytes().all(|c| c.is_ascii_digit()) {
                        let i: usize = idx.parse().map_err(|_| ParseError {
                            pos: start,
                            msg: format!("bad variable '{word}'"),
                        })?;
                        if i == 0 {
                            return Err(ParseError {
                                pos: start,
                                msg: "variables are numbered from x1".into(),
                            });
                        }
                        return Ok(Expr::Var(i - 1));
                    }
                }
                let func = Func::from_name(word).ok_or(ParseError {
                    pos: start,
                    msg: format!("unknown identifier '{word}'"),
                })?;
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("8/4/2", &[]), 1.0);
        assert_eq!(ev("2*3^2", &[]), 18.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("x1^2/4", &[2.0]), 1.0);
        assert_eq!(ev("x1^(1/2)", &[4.0]), 2.0);
        assert_eq!(ev("x1^-1", &[4.0]), 0.25);
        assert_eq!(ev("x1^(-3/2)", &[4.0]), 0.125);
        assert!((ev("4/(1+x1^2+x2^2)^2", &[1.0, 1.0]) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(ev("1.5e2 + x2", &[0.0, 1.0]), 151.0);
    }

    #[test]
    fn syntax_errors_report_position() {
        let e = Expr::parse("1 + * 2").unwrap_err();
        assert_eq!(e.pos, 4);
        let e = Expr::parse("sin x1").unwrap_err();
        assert_eq!(e.pos, 4);
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("x1^(1/0)").is_err());
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        let e = Expr::parse("(x1 + x2)*x3 - (x1 - x2) / (x2*x3)").unwrap();
        assert_eq!(e.to_string(), "(x1 + x2)*x3 - (x1 - x2)/(x2*x3)");
        let e = Expr::parse("x1 - (x2 - x3)").unwrap();
        assert_eq!(e.to_string(), "x1 - (x2 - x3)");
        let e = Expr::parse("(-x1)^2 + x1^(2/4)").unwrap();
        assert_eq!(e.to_string(), "(-x1)^2 + x1^(1/2)");
    }

    #[test]
    fn polar_derivatives() {
        let e = Expr::parse("x1^2*sin(x2)").unwrap();
        let d1 = e.diff(0);
        let d2 = e.diff(1);
        let x = [1.3, 0.4];
        assert!((d1.eval(&x) - 2.0 * 1.3 * 0.4_f64.sin()).abs() < 1e-14);
        assert!((d2.eval(&x) - 1.69 * 0.4_f64.cos()).abs() < 1e-14);
        assert_eq!(Expr::parse("x2").unwrap().diff(0), Expr::Num(0.0));
    }

    fn fd_check(src: &str, x: &[f64]) {
        let e = Expr::parse(src).unwrap();
        for v in 0..x.len() {
            let h = 1e-5;
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[v] += h;
            xm[v] -= h;
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
            let exact = e.diff(v).eval(x);
            assert!(
                (fd - exact).abs() <= 1e-8 * exact.abs().max(1.0),
                "{src} d{v}: {fd} vs {exact}"
            );
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.3_f64, -0.7];
        for src in [
            "sin(x1*x2) + cos(x2)^3",
            "tan(x1) - exp(x1 - x2^2)",
            "log(2 + x1^2) * sqrt(3 + x2)",
            "x1^(3/2) / (1 + x2^2)",
            "(1 + x1^2)^(-1/3)",
            "bump(x1^2 + x2^2)",
            "-x1*x2 + 4/(1 + x1^2 + x2^2)^2",
        ] {
            fd_check(src, &[x[0].abs(), x[1]]);
        }
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (1u32..20).prop_map(|n| n.to_string()),
            (1usize..=3).prop_map(|i| format!("x{i}")),
            (1u32..99).prop_map(|n| format!("0.{n}")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/({b})")),
                (inner.clone(), -3i64..4).prop_map(|(a, p)| format!("({a})^({p})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("exp(({a})/9)")),
                inner.prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_roundtrip(src in arb_expr()) {
            let e = Expr::parse(&src).unwrap();
            let printed = e.to_string();
            let again = Expr::parse(&printed).unwrap();
            prop_assert_eq!(&again, &e);
            prop_assert_eq!(again.to_string(), printed);
        }

        #[test]
        fn derivative_matches_finite_difference(src in arb_expr(), a in 0.2f64..1.0, b in 0.2f64..1.0, c in 0.2f64..1.0) {
            let e = Expr::parse(&src).unwrap();
            let x = [a, b, c];
            let h = 1e-6;
            for v in 0..3 {
                let mut xp = x; xp[v] += h;
                let mut xm = x; xm[v] -= h;
                let (fp, fm) = (e.eval(&xp), e.eval(&xm));
                let exact = e.diff(v).eval(&x);
                if !(fp.is_finite() && fm.is_finite() && exact.is_finite()) || exact.abs() > 1e4 {
                    continue;
                }
                let fd = (fp - fm) / (2.0 * h);
                let scale = exact.abs().max(fp.abs()).max(1.0);
                prop_assert!((fd - exact).abs() <= 1e-5 * scale, "{} d{}: {} vs {}", src, v, fd, exact);
            }
        }
    }
}
