//! Symbolic superfunctions on a single chart.
//!
//! Expressions are trees over even and odd coordinates. Odd derivatives use
//! the LEFT convention: `∂_θ(θ f) = f` for θ-free `f`, extended as an odd
//! derivation, `∂_θ(ab) = ∂_θ(a) b + (-1)^|a| a ∂_θ(b)`.
//!
//! Grammar accepted by [`Expr::parse`]:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= '-'? integer | '(' '-'? integer ')'
//! atom    := number | name | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | log
//! ```

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grassmann::{koszul, GrassmannElement, Parity};

/// Ordered even and odd coordinate names. Index `i < m` is even, the rest odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartSignature {
    even: Vec<String>,
    odd: Vec<String>,
}

impl ChartSignature {
    pub fn new<S: AsRef<str>>(even: &[S], odd: &[S]) -> Result<Self> {
        let even: Vec<String> = even.iter().map(|s| s.as_ref().to_string()).collect();
        let odd: Vec<String> = odd.iter().map(|s| s.as_ref().to_string()).collect();
        let mut seen = HashSet::new();
        for name in even.iter().chain(&odd) {
            if !is_identifier(name) || is_function_name(name) {
                return Err(Error::InvalidArgument(format!(
                    "`{name}` is not a valid coordinate name"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateCoordinate(name.clone()));
            }
        }
        Ok(Self { even, odd })
    }

    pub fn even_dim(&self) -> usize {
        self.even.len()
    }

    pub fn odd_dim(&self) -> usize {
        self.odd.len()
    }

    pub fn dim(&self) -> usize {
        self.even.len() + self.odd.len()
    }

    pub fn is_odd(&self, index: usize) -> bool {
        index >= self.even.len()
    }

    /// Parity bit of coordinate `index`.
    pub fn parity_bit(&self, index: usize) -> u32 {
        u32::from(self.is_odd(index))
    }

    pub fn parity(&self, index: usize) -> Parity {
        Parity::from_bit(self.parity_bit(index))
    }

    pub fn name(&self, index: usize) -> &str {
        if index < self.even.len() {
            &self.even[index]
        } else {
            &self.odd[index - self.even.len()]
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.even.iter().chain(&self.odd).map(String::as_str)
    }

    pub fn even_names(&self) -> &[String] {
        &self.even
    }

    pub fn odd_names(&self) -> &[String] {
        &self.odd
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().position(|n| n == name)
    }

    pub fn var(&self, name: &str) -> Result<Expr> {
        let index = self
            .index_of(name)
            .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))?;
        Ok(Expr::Var {
            index,
            odd: self.is_odd(index),
        })
    }

    /// Signature `(q_i, v_i)` of the tangent chart; velocity names get `prefix`.
    pub fn doubled(&self, prefix: &str) -> Result<Self> {
        let mut even = self.even.clone();
        even.extend(self.even.iter().map(|n| format!("{prefix}{n}")));
        let mut odd = self.odd.clone();
        odd.extend(self.odd.iter().map(|n| format!("{prefix}{n}")));
        Self::new(&even, &odd)
    }

    /// Position of base coordinate `i` and of its velocity inside [`Self::doubled`].
    pub fn doubled_indices(&self, i: usize) -> (usize, usize) {
        let m = self.even.len();
        let n = self.odd.len();
        if i < m {
            (i, m + i)
        } else {
            let k = i - m;
            (2 * m + k, 2 * m + n + k)
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_function_name(s: &str) -> bool {
    Func::from_name(s).is_some()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Log,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "log" => Some(Func::Log),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
        }
    }

    fn apply_real(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Log => x.ln(),
        }
    }

    /// k-th derivative at `x`.
    fn derivative(self, k: usize, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Func::Cos => match k % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            Func::Log => {
                if k == 0 {
                    x.ln()
                } else {
                    let fact: f64 = (1..k).map(|j| j as f64).product();
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * fact / x.powi(k as i32)
                }
            }
        }
    }

    /// Symbolic `f'(arg)`.
    fn derivative_expr(self, arg: &Expr) -> Expr {
        match self {
            Func::Exp => Expr::Func(Func::Exp, Box::new(arg.clone())),
            Func::Sin => Expr::Func(Func::Cos, Box::new(arg.clone())),
            Func::Cos => Expr::Product(vec![
                Expr::Const(-1.0),
                Expr::Func(Func::Sin, Box::new(arg.clone())),
            ]),
            Func::Log => Expr::Recip(Box::new(arg.clone())),
        }
    }
}

/// Symbolic superfunction. Products are ordered.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var { index: usize, odd: bool },
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// Integer power; negative exponents require an even base.
    Pow(Box<Expr>, i32),
    Recip(Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn parse(text: &str, sig: &ChartSignature) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            sig,
            len: text.len(),
        };
        let e = parser.expr()?;
        if let Some((tok, at)) = parser.tokens.get(parser.pos) {
            return Err(Error::Syntax {
                position: *at,
                message: format!("unexpected token {tok:?}"),
            });
        }
        e.check_parity()?;
        Ok(e.simplify())
    }

    /// Parity of the expression; `Nonhomogeneous` when additive terms disagree.
    pub fn parity(&self) -> Parity {
        match self {
            Expr::Const(_) => Parity::Even,
            Expr::Var { odd, .. } => Parity::from_bit(u32::from(*odd)),
            Expr::Sum(terms) => {
                let mut out: Option<Parity> = None;
                for t in terms {
                    if t.is_zero() {
                        continue;
                    }
                    let p = t.parity();
                    match out {
                        None => out = Some(p),
                        Some(q) if q != p => return Parity::Nonhomogeneous,
                        _ => {}
                    }
                }
                out.unwrap_or(Parity::Even)
            }
            Expr::Product(factors) => factors
                .iter()
                .fold(Parity::Even, |acc, f| acc.combine(f.parity())),
            Expr::Pow(base, n) => match (base.parity(), *n) {
                (_, 0) => Parity::Even,
                (Parity::Odd, 1) => Parity::Odd,
                (Parity::Odd, _) => Parity::Even,
                (p, _) => p,
            },
            Expr::Recip(_) | Expr::Func(..) => Parity::Even,
        }
    }

    /// Rejects reciprocals, negative powers and elementary functions of
    /// non-even arguments.
    pub fn check_parity(&self) -> Result<()> {
        match self {
            Expr::Const(_) | Expr::Var { .. } => Ok(()),
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().try_for_each(Expr::check_parity),
            Expr::Pow(b, n) => {
                b.check_parity()?;
                if *n < 0 && b.parity() != Parity::Even {
                    return Err(Error::ParityViolation(
                        "negative power of a non-even expression".into(),
                    ));
                }
                if *n >= 2 && b.parity() == Parity::Nonhomogeneous {
                    return Err(Error::ParityViolation(
                        "power of a mixed-parity expression".into(),
                    ));
                }
                Ok(())
            }
            Expr::Recip(b) => {
                b.check_parity()?;
                if b.parity() != Parity::Even {
                    return Err(Error::ParityViolation(
                        "reciprocal of a non-even expression".into(),
                    ));
                }
                Ok(())
            }
            Expr::Func(f, b) => {
                b.check_parity()?;
                if b.parity() != Parity::Even {
                    return Err(Error::ParityViolation(format!(
                        "{} of a non-even expression",
                        f.name()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Conservative normalization: flattens, folds constants, kills odd
    /// squares and sorts odd factors with sign tracking.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var { .. } => self.clone(),
            Expr::Sum(terms) => simplify_sum(terms.iter().map(Expr::simplify).collect()),
            Expr::Product(factors) => {
                simplify_product(factors.iter().map(Expr::simplify).collect())
            }
            Expr::Pow(base, n) => {
                let b = base.simplify();
                match (&b, *n) {
                    (_, 0) => Expr::Const(1.0),
                    (_, 1) => b,
                    (Expr::Const(c), n) if *c != 0.0 || n > 0 => Expr::Const(c.powi(n)),
                    (_, n) if n >= 2 && b.parity() == Parity::Odd => Expr::zero(),
                    (Expr::Pow(inner, m), n) if m.checked_mul(n).is_some() => {
                        Expr::Pow(inner.clone(), m * n).simplify()
                    }
                    _ => Expr::Pow(Box::new(b), *n),
                }
            }
            Expr::Recip(base) => {
                let b = base.simplify();
                match b {
                    Expr::Const(c) if c != 0.0 => Expr::Const(1.0 / c),
                    Expr::Recip(inner) => *inner,
                    other => Expr::Recip(Box::new(other)),
                }
            }
            Expr::Func(f, arg) => {
                let a = arg.simplify();
                match (f, &a) {
                    (Func::Log, Expr::Const(c)) if *c <= 0.0 => Expr::Func(*f, Box::new(a)),
                    (_, Expr::Const(c)) => Expr::Const(f.apply_real(*c)),
                    _ => Expr::Func(*f, Box::new(a)),
                }
            }
        }
    }

    /// Graded partial derivative with respect to coordinate `index`.
    pub fn partial(&self, index: usize, odd: bool) -> Result<Expr> {
        Ok(self.partial_raw(index, odd)?.simplify())
    }

    /// Partial derivative by coordinate name.
    pub fn partial_by_name(&self, sig: &ChartSignature, name: &str) -> Result<Expr> {
        let index = sig
            .index_of(name)
            .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))?;
        self.partial(index, sig.is_odd(index))
    }

    fn partial_raw(&self, index: usize, odd: bool) -> Result<Expr> {
        match self {
            Expr::Const(_) => Ok(Expr::zero()),
            Expr::Var { index: i, .. } => Ok(Expr::Const(if *i == index { 1.0 } else { 0.0 })),
            Expr::Sum(terms) => Ok(Expr::Sum(
                terms
                    .iter()
                    .map(|t| t.partial_raw(index, odd))
                    .collect::<Result<_>>()?,
            )),
            Expr::Product(factors) => {
                let mut terms = Vec::new();
                // parity bit of f_0 ... f_{i-1}; None once a mixed factor was passed
                let mut prefix: Option<u32> = Some(0);
                for (i, f) in factors.iter().enumerate() {
                    let d = f.partial_raw(index, odd)?.simplify();
                    if !d.is_zero() {
                        let sign = if odd {
                            let p = prefix.ok_or(Error::NonHomogeneousOperand)?;
                            koszul(p, 1)
                        } else {
                            1.0
                        };
                        let mut new_factors = Vec::with_capacity(factors.len() + 1);
                        if sign < 0.0 {
                            new_factors.push(Expr::Const(-1.0));
                        }
                        new_factors.extend(factors[..i].iter().cloned());
                        new_factors.push(d);
                        new_factors.extend(factors[i + 1..].iter().cloned());
                        terms.push(Expr::Product(new_factors));
                    }
                    prefix = match (prefix, f.parity().bit()) {
                        (Some(p), Some(b)) => Some(p ^ b),
                        _ => None,
                    };
                }
                Ok(Expr::Sum(terms))
            }
            Expr::Pow(base, n) => {
                let db = base.partial_raw(index, odd)?;
                match *n {
                    0 => Ok(Expr::zero()),
                    1 => Ok(db),
                    n => {
                        if base.parity() == Parity::Odd {
                            // odd squares vanish identically
                            return Ok(Expr::zero());
                        }
                        Ok(Expr::Product(vec![
                            Expr::Const(n as f64),
                            Expr::Pow(base.clone(), n - 1),
                            db,
                        ]))
                    }
                }
            }
            Expr::Recip(base) => {
                let db = base.partial_raw(index, odd)?;
                Ok(Expr::Product(vec![
                    Expr::Const(-1.0),
                    Expr::Pow(base.clone(), -2),
                    db,
                ]))
            }
            Expr::Func(f, arg) => {
                let da = arg.partial_raw(index, odd)?;
                Ok(Expr::Product(vec![f.derivative_expr(arg), da]))
            }
        }
    }

    /// Evaluates at a point whose coordinate values are given in signature order.
    pub fn eval(&self, point: &SuperPoint) -> Result<GrassmannElement> {
        self.eval_values(point.values(), point.generators())
    }

    pub fn eval_values(
        &self,
        values: &[GrassmannElement],
        generators: usize,
    ) -> Result<GrassmannElement> {
        match self {
            Expr::Const(c) => Ok(GrassmannElement::scalar(generators, *c)),
            Expr::Var { index, .. } => values
                .get(*index)
                .cloned()
                .ok_or_else(|| Error::InvalidPoint(format!("no value for coordinate {index}"))),
            Expr::Sum(terms) => {
                let mut acc = GrassmannElement::zero(generators);
                for t in terms {
                    acc += &t.eval_values(values, generators)?;
                }
                Ok(acc)
            }
            Expr::Product(factors) => {
                let mut acc = GrassmannElement::one(generators);
                for f in factors {
                    let v = f.eval_values(values, generators)?;
                    acc = acc.checked_mul(&v)?;
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(acc)
            }
            Expr::Pow(base, n) => {
                let b = base.eval_values(values, generators)?;
                if *n >= 0 {
                    Ok(b.pow(*n as u32))
                } else {
                    Ok(invert_even(&b)?.pow(n.unsigned_abs()))
                }
            }
            Expr::Recip(base) => invert_even(&base.eval_values(values, generators)?),
            Expr::Func(f, arg) => {
                let a = arg.eval_values(values, generators)?;
                if a.parity() != Parity::Even {
                    return Err(Error::ParityViolation(format!(
                        "{} applied to a non-even value",
                        f.name()
                    )));
                }
                if *f == Func::Log && a.body() <= 0.0 {
                    return Err(Error::Domain(format!("log of body {}", a.body())));
                }
                let f = *f;
                Ok(a.taylor(|k, b| f.derivative(k, b)))
            }
        }
    }

    /// Replaces every variable `i` by `replacements[i]`.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        self.substitute_raw(replacements).simplify()
    }

    fn substitute_raw(&self, r: &[Expr]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var { index, .. } => r[*index].clone(),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.substitute_raw(r)).collect()),
            Expr::Product(fs) => Expr::Product(fs.iter().map(|f| f.substitute_raw(r)).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.substitute_raw(r)), *n),
            Expr::Recip(b) => Expr::Recip(Box::new(b.substitute_raw(r))),
            Expr::Func(f, b) => Expr::Func(*f, Box::new(b.substitute_raw(r))),
        }
    }

    /// Renames variable indices through `map` (old index -> new index).
    pub fn reindex(&self, map: &[usize]) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var { index, odd } => Expr::Var {
                index: map[*index],
                odd: *odd,
            },
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.reindex(map)).collect()),
            Expr::Product(fs) => Expr::Product(fs.iter().map(|f| f.reindex(map)).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.reindex(map)), *n),
            Expr::Recip(b) => Expr::Recip(Box::new(b.reindex(map))),
            Expr::Func(f, b) => Expr::Func(*f, Box::new(b.reindex(map))),
        }
    }

    /// Sets every odd variable to zero (the body part of a superfunction).
    pub fn drop_odd(&self) -> Expr {
        self.drop_odd_raw().simplify()
    }

    fn drop_odd_raw(&self) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var { odd: true, .. } => Expr::zero(),
            Expr::Var { .. } => self.clone(),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(Expr::drop_odd_raw).collect()),
            Expr::Product(fs) => Expr::Product(fs.iter().map(Expr::drop_odd_raw).collect()),
            Expr::Pow(b, n) => Expr::Pow(Box::new(b.drop_odd_raw()), *n),
            Expr::Recip(b) => Expr::Recip(Box::new(b.drop_odd_raw())),
            Expr::Func(f, b) => Expr::Func(*f, Box::new(b.drop_odd_raw())),
        }
    }

    /// Real value at a body point for an expression free of odd variables.
    pub fn eval_real(&self, body: &[f64]) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var { odd: true, .. } => Ok(0.0),
            Expr::Var { index, .. } => body
                .get(*index)
                .copied()
                .ok_or_else(|| Error::InvalidPoint(format!("no value for coordinate {index}"))),
            Expr::Sum(ts) => ts.iter().try_fold(0.0, |acc, t| Ok(acc + t.eval_real(body)?)),
            Expr::Product(fs) => fs.iter().try_fold(1.0, |acc, f| Ok(acc * f.eval_real(body)?)),
            Expr::Pow(b, n) => {
                let v = b.eval_real(body)?;
                if *n < 0 && v == 0.0 {
                    return Err(Error::Domain("negative power of zero".into()));
                }
                Ok(v.powi(*n))
            }
            Expr::Recip(b) => {
                let v = b.eval_real(body)?;
                if v == 0.0 {
                    return Err(Error::Domain("reciprocal of zero".into()));
                }
                Ok(1.0 / v)
            }
            Expr::Func(f, b) => {
                let v = b.eval_real(body)?;
                if *f == Func::Log && v <= 0.0 {
                    return Err(Error::Domain(format!("log of {v}")));
                }
                Ok(f.apply_real(v))
            }
        }
    }

    /// Renders in the parser's grammar.
    pub fn render(&self, sig: &ChartSignature) -> String {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    format!("({c})")
                } else {
                    format!("{c}")
                }
            }
            Expr::Var { index, .. } => sig.name(*index).to_string(),
            Expr::Sum(ts) => {
                if ts.is_empty() {
                    return "0".into();
                }
                ts.iter().map(|t| t.render(sig)).collect::<Vec<_>>().join(" + ")
            }
            Expr::Product(fs) => {
                if fs.is_empty() {
                    return "1".into();
                }
                fs.iter()
                    .map(|f| match f {
                        Expr::Sum(_) => format!("({})", f.render(sig)),
                        _ => f.render(sig),
                    })
                    .collect::<Vec<_>>()
                    .join("*")
            }
            Expr::Pow(b, n) => {
                let base = match **b {
                    Expr::Var { .. } | Expr::Func(..) => b.render(sig),
                    Expr::Const(c) if c >= 0.0 => b.render(sig),
                    _ => format!("({})", b.render(sig)),
                };
                if *n < 0 {
                    format!("{base}^({n})")
                } else {
                    format!("{base}^{n}")
                }
            }
            Expr::Recip(b) => format!("1/({})", b.render(sig)),
            Expr::Func(f, b) => format!("{}({})", f.name(), b.render(sig)),
        }
    }
}

fn invert_even(v: &GrassmannElement) -> Result<GrassmannElement> {
    match v.parity() {
        Parity::Even => {}
        _ => {
            return Err(Error::ParityViolation(
                "reciprocal of a non-even value".into(),
            ))
        }
    }
    if v.body() == 0.0 {
        return Err(Error::Domain("reciprocal of a value with zero body".into()));
    }
    v.invert()
}

fn simplify_sum(terms: Vec<Expr>) -> Expr {
    let mut constant = 0.0;
    let mut out = Vec::new();
    for t in terms {
        match t {
            Expr::Const(c) => constant += c,
            Expr::Sum(inner) => {
                for u in inner {
                    match u {
                        Expr::Const(c) => constant += c,
                        other => out.push(other),
                    }
                }
            }
            other => out.push(other),
        }
    }
    if constant != 0.0 {
        out.push(Expr::Const(constant));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

fn simplify_product(factors: Vec<Expr>) -> Expr {
    let mut coeff = 1.0;
    let mut flat = Vec::new();
    for f in factors {
        match f {
            Expr::Const(c) => coeff *= c,
            Expr::Product(inner) => {
                for g in inner {
                    match g {
                        Expr::Const(c) => coeff *= c,
                        other => flat.push(other),
                    }
                }
            }
            other => flat.push(other),
        }
    }
    if coeff == 0.0 {
        return Expr::zero();
    }

    let homogeneous = flat.iter().all(|f| f.parity() != Parity::Nonhomogeneous);
    let mut ordered = if homogeneous {
        let (evens, mut odds): (Vec<Expr>, Vec<Expr>) =
            flat.into_iter().partition(|f| f.parity() == Parity::Even);
        // insertion sort of the odd factors; each transposition flips the sign
        let key = |e: &Expr, pos: usize| match e {
            Expr::Var { index, .. } => (0usize, *index),
            _ => (1usize, pos),
        };
        let mut keyed: Vec<((usize, usize), Expr)> =
            odds.drain(..).enumerate().map(|(p, e)| (key(&e, p), e)).collect();
        for i in 1..keyed.len() {
            let mut j = i;
            while j > 0 && keyed[j - 1].0 > keyed[j].0 {
                keyed.swap(j - 1, j);
                coeff = -coeff;
                j -= 1;
            }
        }
        for w in keyed.windows(2) {
            if w[0].0 .0 == 0 && w[0].0 == w[1].0 {
                return Expr::zero();
            }
        }
        let mut all = evens;
        all.extend(keyed.into_iter().map(|(_, e)| e));
        all
    } else {
        flat
    };

    if ordered.is_empty() {
        return Expr::Const(coeff);
    }
    if coeff != 1.0 {
        ordered.insert(0, Expr::Const(coeff));
    }
    if ordered.len() == 1 {
        ordered.pop().unwrap()
    } else {
        Expr::Product(ordered)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("bad number `{lit}`"),
                })?;
                out.push((Token::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    sig: &'a ChartSignature,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        let at = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Syntax {
                position: at,
                message: format!("expected {want:?}, found {other:?}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Some(Token::Minus) => {
                    self.bump();
                    let t = self.term()?;
                    terms.push(Expr::Product(vec![Expr::Const(-1.0), t]));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Some(Token::Slash) => {
                    self.bump();
                    let d = self.unary()?;
                    factors.push(Expr::Recip(Box::new(d)));
                }
                _ => break,
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Product(factors)
        })
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Minus) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Product(vec![Expr::Const(-1.0), inner]));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.bump();
            let n = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        let paren = matches!(self.peek(), Some(Token::LParen));
        if paren {
            self.bump();
        }
        let negative = matches!(self.peek(), Some(Token::Minus));
        if negative {
            self.bump();
        }
        let at = self.here();
        let n = match self.bump() {
            Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            other => {
                return Err(Error::Syntax {
                    position: at,
                    message: format!("exponent must be an integer, found {other:?}"),
                })
            }
        };
        if paren {
            self.expect(Token::RParen)?;
        }
        Ok(if negative { -n } else { n })
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.here();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Token::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen)?;
                    return Ok(Expr::Func(f, Box::new(arg)));
                }
                match self.sig.index_of(&name) {
                    Some(index) => Ok(Expr::Var {
                        index,
                        odd: self.sig.is_odd(index),
                    }),
                    None => Err(Error::UnknownIdentifier(name)),
                }
            }
            other => Err(Error::Syntax {
                position: at,
                message: format!("unexpected {other:?}"),
            }),
        }
    }
}

/// Grassmann-valued coordinates: a morphism `R^{0|L} -> chart`, given by the
/// pullback of every coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPoint {
    generators: usize,
    values: Vec<GrassmannElement>,
}

impl SuperPoint {
    /// Checks generator counts and that even (odd) coordinates carry even (odd) values.
    pub fn new(sig: &ChartSignature, values: Vec<GrassmannElement>) -> Result<Self> {
        if values.len() != sig.dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                sig.dim(),
                values.len()
            )));
        }
        let generators = values.first().map_or(0, GrassmannElement::generators);
        for (i, v) in values.iter().enumerate() {
            if v.generators() != generators {
                return Err(Error::MismatchedGeneratorCount(generators, v.generators()));
            }
            let want = sig.parity(i);
            if v.parity() != want && !v.is_zero() {
                return Err(Error::ParityViolation(format!(
                    "coordinate `{}` is {:?} but its value {} is {:?}",
                    sig.name(i),
                    want,
                    v,
                    v.parity()
                )));
            }
        }
        Ok(Self { generators, values })
    }

    /// No parity check; used on integrator stages whose parity is preserved by construction.
    pub fn from_values_unchecked(generators: usize, values: Vec<GrassmannElement>) -> Self {
        Self { generators, values }
    }

    /// The body point `(body, 0)` embedded over `generators`.
    pub fn from_body(sig: &ChartSignature, body: &[f64], generators: usize) -> Result<Self> {
        if body.len() != sig.even_dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} even coordinates, got {}",
                sig.even_dim(),
                body.len()
            )));
        }
        let mut values: Vec<GrassmannElement> = body
            .iter()
            .map(|b| GrassmannElement::scalar(generators, *b))
            .collect();
        values.extend((0..sig.odd_dim()).map(|_| GrassmannElement::zero(generators)));
        Ok(Self { generators, values })
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn values(&self) -> &[GrassmannElement] {
        &self.values
    }

    pub fn into_values(self) -> Vec<GrassmannElement> {
        self.values
    }

    pub fn value(&self, i: usize) -> &GrassmannElement {
        &self.values[i]
    }

    /// Bodies of the even coordinates.
    pub fn body(&self, sig: &ChartSignature) -> Vec<f64> {
        self.values[..sig.even_dim()].iter().map(|v| v.body()).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn extend(&self, generators: usize) -> Self {
        Self {
            generators,
            values: self.values.iter().map(|v| v.extend(generators)).collect(),
        }
    }
}

/// A chart morphism given by the pullbacks of the target coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperMorphism {
    source: ChartSignature,
    target: ChartSignature,
    pullbacks: Vec<Expr>,
}

impl SuperMorphism {
    pub fn new(source: ChartSignature, target: ChartSignature, pullbacks: Vec<Expr>) -> Result<Self> {
        if pullbacks.len() != target.dim() {
            return Err(Error::SignatureMismatch(format!(
                "{} pullbacks for a target of dimension {}",
                pullbacks.len(),
                target.dim()
            )));
        }
        for (k, e) in pullbacks.iter().enumerate() {
            e.check_parity()?;
            if !e.is_zero() && e.parity() != target.parity(k) {
                return Err(Error::ParityViolation(format!(
                    "pullback of `{}` must be {:?}, got {:?}",
                    target.name(k),
                    target.parity(k),
                    e.parity()
                )));
            }
        }
        Ok(Self {
            source,
            target,
            pullbacks,
        })
    }

    /// Parses `(target coordinate, expression in source coordinates)` pairs;
    /// coordinates that are not mentioned pull back to zero.
    pub fn parse<S: AsRef<str>>(
        source: &ChartSignature,
        target: &ChartSignature,
        pullbacks: &[(S, S)],
    ) -> Result<Self> {
        let mut exprs = vec![Expr::zero(); target.dim()];
        for (name, text) in pullbacks {
            let k = target
                .index_of(name.as_ref())
                .ok_or_else(|| Error::UnknownCoordinate(name.as_ref().to_string()))?;
            exprs[k] = Expr::parse(text.as_ref(), source)?;
        }
        Self::new(source.clone(), target.clone(), exprs)
    }

    pub fn identity(sig: &ChartSignature) -> Self {
        let pullbacks = (0..sig.dim())
            .map(|i| Expr::Var {
                index: i,
                odd: sig.is_odd(i),
            })
            .collect();
        Self {
            source: sig.clone(),
            target: sig.clone(),
            pullbacks,
        }
    }

    pub fn source(&self) -> &ChartSignature {
        &self.source
    }

    pub fn target(&self) -> &ChartSignature {
        &self.target
    }

    pub fn pullbacks(&self) -> &[Expr] {
        &self.pullbacks
    }

    pub fn pullback(&self, k: usize) -> &Expr {
        &self.pullbacks[k]
    }

    /// `self ∘ inner`: `inner` maps into the source of `self`.
    pub fn compose(&self, inner: &SuperMorphism) -> Result<SuperMorphism> {
        if inner.target != self.source {
            return Err(Error::SignatureMismatch(
                "target of the inner morphism differs from the source of the outer".into(),
            ));
        }
        let pullbacks = self
            .pullbacks
            .iter()
            .map(|e| e.substitute(&inner.pullbacks))
            .collect();
        SuperMorphism::new(inner.source.clone(), self.target.clone(), pullbacks)
    }

    /// Image of a Grassmann point: evaluates every pullback at it.
    pub fn apply(&self, p: &SuperPoint) -> Result<SuperPoint> {
        let values = self
            .pullbacks
            .iter()
            .map(|e| e.eval(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(SuperPoint::from_values_unchecked(p.generators(), values))
    }
}

/// Free-function form of [`Expr::parse`].
pub fn expr_parse(text: &str, sig: &ChartSignature) -> Result<Expr> {
    Expr::parse(text, sig)
}

/// Free-function form of [`Expr::partial_by_name`].
pub fn expr_partial(e: &Expr, sig: &ChartSignature, coord: &str) -> Result<Expr> {
    e.partial_by_name(sig, coord)
}

pub fn expr_eval(e: &Expr, p: &SuperPoint) -> Result<GrassmannElement> {
    e.eval(p)
}

/// `f ∘ g`.
pub fn morphism_compose(f: &SuperMorphism, g: &SuperMorphism) -> Result<SuperMorphism> {
    f.compose(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig12() -> ChartSignature {
        ChartSignature::new(&["x"], &["th1", "th2"]).unwrap()
    }

    fn g(l: usize, pairs: &[(u32, f64)]) -> GrassmannElement {
        GrassmannElement::from_pairs(l, pairs).unwrap()
    }

    #[test]
    fn parse_polynomial() {
        let s = sig12();
        let e = Expr::parse("x^2 + 1", &s).unwrap();
        assert!(matches!(e, Expr::Sum(_)));
        assert_eq!(e.parity(), Parity::Even);
        let p = SuperPoint::from_body(&s, &[3.0], 0).unwrap();
        assert_eq!(e.eval(&p).unwrap().body(), 10.0);
    }

    #[test]
    fn parse_odd_monomial_is_even() {
        let e = Expr::parse("th1*th2", &sig12()).unwrap();
        assert_eq!(e.parity(), Parity::Even);
        assert!(matches!(e, Expr::Product(ref f) if f.len() == 2));
    }

    #[test]
    fn odd_square_vanishes() {
        let s = sig12();
        assert!(Expr::parse("th1^2", &s).unwrap().is_zero());
        assert!(Expr::parse("th1*x*th1", &s).unwrap().is_zero());
    }

    #[test]
    fn odd_factors_sorted_with_sign() {
        let s = sig12();
        let a = Expr::parse("th2*th1", &s).unwrap();
        let b = Expr::parse("-(th1*th2)", &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_errors() {
        let s = sig12();
        assert!(matches!(
            Expr::parse("x + y", &s),
            Err(Error::UnknownIdentifier(n)) if n == "y"
        ));
        assert!(matches!(Expr::parse("x + * 2", &s), Err(Error::Syntax { .. })));
        assert!(matches!(Expr::parse("(x", &s), Err(Error::Syntax { .. })));
        assert!(matches!(Expr::parse("x^1.5", &s), Err(Error::Syntax { .. })));
        assert!(matches!(
            Expr::parse("1/th1", &s),
            Err(Error::ParityViolation(_))
        ));
        assert!(matches!(
            Expr::parse("exp(th1)", &s),
            Err(Error::ParityViolation(_))
        ));
    }

    #[test]
    fn left_odd_derivative() {
        let s = sig12();
        let e = Expr::parse("th1*th2", &s).unwrap();
        assert_eq!(
            expr_partial(&e, &s, "th1").unwrap(),
            Expr::parse("th2", &s).unwrap()
        );
        assert_eq!(
            expr_partial(&e, &s, "th2").unwrap(),
            Expr::parse("-th1", &s).unwrap()
        );
        let f = Expr::parse("x^2*th1", &s).unwrap();
        let d = expr_partial(&f, &s, "x").unwrap();
        let p = SuperPoint::new(&s, vec![g(1, &[(0, 1.5)]), g(1, &[(1, 1.0)]), g(1, &[])]).unwrap();
        assert_eq!(d.eval(&p).unwrap(), g(1, &[(1, 3.0)]));
        assert!(matches!(
            expr_partial(&f, &s, "z"),
            Err(Error::UnknownCoordinate(_))
        ));
    }

    #[test]
    fn odd_derivative_across_mixed_factor() {
        let s = sig12();
        let e = Expr::Product(vec![
            Expr::parse("x + th1", &s).unwrap(),
            s.var("th2").unwrap(),
        ]);
        assert!(matches!(
            e.partial(2, true),
            Err(Error::NonHomogeneousOperand)
        ));
    }

    #[test]
    fn eval_with_nilpotent_soul() {
        let s = ChartSignature::new(&["x"], &["a", "b"]).unwrap();
        let p = SuperPoint::new(
            &s,
            vec![g(2, &[(0, 2.0), (3, 1.0)]), g(2, &[]), g(2, &[])],
        )
        .unwrap();
        let sq = Expr::parse("x^2", &s).unwrap();
        assert_eq!(sq.eval(&p).unwrap(), g(2, &[(0, 4.0), (3, 4.0)]));
        let q = SuperPoint::new(&s, vec![g(2, &[(3, 1.0)]), g(2, &[]), g(2, &[])]).unwrap();
        let ex = Expr::parse("exp(x)", &s).unwrap();
        assert_eq!(ex.eval(&q).unwrap(), g(2, &[(0, 1.0), (3, 1.0)]));
    }

    #[test]
    fn odd_value_for_even_coordinate_rejected() {
        let s = sig12();
        let err = SuperPoint::new(&s, vec![g(1, &[(1, 1.0)]), g(1, &[]), g(1, &[])]);
        assert!(matches!(err, Err(Error::ParityViolation(_))));
        let e = Expr::parse("1/x", &s).unwrap();
        let bad = SuperPoint::from_values_unchecked(1, vec![g(1, &[(1, 1.0)]), g(1, &[]), g(1, &[])]);
        assert!(matches!(e.eval(&bad), Err(Error::ParityViolation(_))));
    }

    #[test]
    fn log_domain_error() {
        let s = sig12();
        let e = Expr::parse("log(x)", &s).unwrap();
        let p = SuperPoint::from_body(&s, &[-1.0], 0).unwrap();
        assert!(matches!(e.eval(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn compose_examples() {
        let s = sig12();
        let id = SuperMorphism::identity(&s);
        let shift = SuperMorphism::parse(&s, &s, &[("x", "x"), ("th1", "th1 + x*th1"), ("th2", "th2")])
            .unwrap();
        assert_eq!(morphism_compose(&id, &shift).unwrap(), shift);
        let dbl = SuperMorphism::parse(&s, &s, &[("x", "2*x"), ("th1", "th1"), ("th2", "th2")]).unwrap();
        let c = morphism_compose(&shift, &dbl).unwrap();
        let expected =
            SuperMorphism::parse(&s, &s, &[("x", "2*x"), ("th1", "th1 + 2*x*th1"), ("th2", "th2")])
                .unwrap();
        let p = SuperPoint::new(
            &s,
            vec![g(2, &[(0, 0.7), (3, 0.3)]), g(2, &[(1, 1.1), (2, -0.4)]), g(2, &[(2, 0.9)])],
        )
        .unwrap();
        assert!(c.apply(&p).unwrap().max_abs_diff(&expected.apply(&p).unwrap()) < 1e-14);

        let lin_a = SuperMorphism::parse(&s, &s, &[("x", "3*x"), ("th1", "th1 + th2"), ("th2", "th2")])
            .unwrap();
        let lin_b = SuperMorphism::parse(&s, &s, &[("x", "-x"), ("th1", "2*th1"), ("th2", "th1 - th2")])
            .unwrap();
        // B ∘ A pulls back through A's pullbacks
        let ba = morphism_compose(&lin_b, &lin_a).unwrap();
        let expected = SuperMorphism::parse(
            &s,
            &s,
            &[("x", "-3*x"), ("th1", "2*th1 + 2*th2"), ("th2", "th1")],
        )
        .unwrap();
        assert!(ba.apply(&p).unwrap().max_abs_diff(&expected.apply(&p).unwrap()) < 1e-14);
    }

    #[test]
    fn morphism_parity_enforced() {
        let s = sig12();
        assert!(matches!(
            SuperMorphism::parse(&s, &s, &[("x", "th1")]),
            Err(Error::ParityViolation(_))
        ));
    }

    #[test]
    fn render_round_trips() {
        let s = sig12();
        for text in [
            "x^2 + 1",
            "-(th1*th2) + exp(x)*th1*th2",
            "1/(1 + x)",
            "(1 + x)^(-2)*th1",
            "log(2 + x) - sin(x)*cos(x)",
        ] {
            let e = Expr::parse(text, &s).unwrap();
            let back = Expr::parse(&e.render(&s), &s).unwrap();
            assert_eq!(e, back, "{text}");
        }
    }

    #[test]
    fn doubled_signature_layout() {
        let s = ChartSignature::new(&["x", "y"], &["a", "b"]).unwrap();
        let d = s.doubled("v_").unwrap();
        let names: Vec<_> = d.names().collect();
        assert_eq!(names, ["x", "y", "v_x", "v_y", "a", "b", "v_a", "v_b"]);
        assert_eq!(s.doubled_indices(1), (1, 3));
        assert_eq!(s.doubled_indices(3), (5, 7));
    }

    #[test]
    fn signature_rejects_duplicates() {
        assert!(matches!(
            ChartSignature::new(&["x"], &["x"]),
            Err(Error::DuplicateCoordinate(_))
        ));
        assert!(ChartSignature::new(&["exp"], &[] as &[&str]).is_err());
    }
}
