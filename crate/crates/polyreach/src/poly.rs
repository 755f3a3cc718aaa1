//! Sparse multivariate polynomials with symbolic differentiation and
//! interval-arithmetic range bounding.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Closed scalar interval `[lo, hi]`, the result type of range bounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBound {
    pub lo: f64,
    pub hi: f64,
}

impl RangeBound {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "range bound [{lo}, {hi}] inverted");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub const ZERO: RangeBound = RangeBound { lo: 0.0, hi: 0.0 };

    /// The symmetric unit interval `[-1, 1]`.
    pub const UNIT: RangeBound = RangeBound { lo: -1.0, hi: 1.0 };

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn rad(self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn add(self, other: Self) -> Self {
        Self::new(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn mul(self, other: Self) -> Self {
        let c = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        Self::new(
            c.iter().cloned().fold(f64::INFINITY, f64::min),
            c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            Self::new(k * self.lo, k * self.hi)
        } else {
            Self::new(k * self.hi, k * self.lo)
        }
    }

    pub fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    /// `self^e` with the exact even-power rule: an even power of an interval
    /// containing zero starts at zero, not at a signed product.
    pub fn pow(self, e: u32) -> Self {
        match e {
            0 => Self::point(1.0),
            1 => self,
            _ if e % 2 == 1 => Self::new(self.lo.powi(e as i32), self.hi.powi(e as i32)),
            _ => {
                let a = self.lo.abs().powi(e as i32);
                let b = self.hi.abs().powi(e as i32);
                let hi = a.max(b);
                let lo = if self.lo <= 0.0 && self.hi >= 0.0 {
                    0.0
                } else {
                    a.min(b)
                };
                Self::new(lo, hi)
            }
        }
    }

    pub fn is_finite(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A single monomial: coefficient times a product of integer powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

impl Term {
    pub fn total_degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Sparse multivariate polynomial in `nvars` variables, kept in canonical
/// form: exponent vectors pairwise distinct, zero-coefficient terms removed,
/// terms ordered lexicographically by exponent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpr {
    nvars: usize,
    terms: Vec<Term>,
}

impl PolyExpr {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, vec![Term { coeff: c, exps: vec![0; nvars] }])
    }

    /// The monomial `x_index`.
    pub fn variable(nvars: usize, index: usize) -> Self {
        assert!(index < nvars);
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        Self::from_terms(nvars, vec![Term { coeff: 1.0, exps }])
    }

    /// Builds a polynomial from raw terms and normalizes it.
    pub fn from_terms(nvars: usize, terms: Vec<Term>) -> Self {
        let mut p = Self { nvars, terms };
        p.normalize();
        p
    }

    fn normalize(&mut self) {
        for t in &self.terms {
            debug_assert_eq!(t.exps.len(), self.nvars);
        }
        self.terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.exps == t.exps => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        self.terms = merged;
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Term::total_degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.nvars, terms)
    }

    pub fn neg(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { coeff: -t.coeff, exps: t.exps.clone() })
            .collect();
        Self { nvars: self.nvars, terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { coeff: k * t.coeff, exps: t.exps.clone() })
            .collect();
        Self::from_terms(self.nvars, terms)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps = a
                    .exps
                    .iter()
                    .zip(&b.exps)
                    .map(|(x, y)| x + y)
                    .collect();
                terms.push(Term { coeff: a.coeff * b.coeff, exps });
            }
        }
        Self::from_terms(self.nvars, terms)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.nvars, 1.0);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes `subs[k]` for variable `k`. All substituted polynomials
    /// must share a variable space, which becomes the output space.
    pub fn compose(&self, subs: &[PolyExpr]) -> Self {
        assert_eq!(subs.len(), self.nvars);
        let out_nvars = subs.first().map_or(0, PolyExpr::nvars);
        for s in subs {
            assert_eq!(s.nvars(), out_nvars);
        }
        let mut acc = Self::zero(out_nvars);
        for t in &self.terms {
            let mut m = Self::constant(out_nvars, t.coeff);
            for (k, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    m = m.mul(&subs[k].pow(e));
                }
            }
            acc = acc.add(&m);
        }
        acc
    }

    /// Exact value at a point.
    pub fn eval_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "polynomial in {} variables evaluated at a point of length {}",
                self.nvars,
                x.len()
            )));
        }
        let mut acc = 0.0;
        for t in &self.terms {
            let mut m = t.coeff;
            for (k, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    m *= x[k].powi(e as i32);
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Sound range enclosure over a box, monomial-wise: within one monomial
    /// all variable powers are independent, so the product of their intervals
    /// is exact; over-approximation only enters through the sum over terms.
    pub fn eval_interval(&self, box_: &[RangeBound]) -> Result<RangeBound> {
        if box_.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "polynomial in {} variables bounded over a box of dimension {}",
                self.nvars,
                box_.len()
            )));
        }
        let mut acc = RangeBound::ZERO;
        for t in &self.terms {
            let mut m = RangeBound::point(t.coeff);
            for (k, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    m = m.mul(box_[k].pow(e));
                }
            }
            acc = acc.add(m);
        }
        Ok(acc)
    }

    /// Range enclosure over the unit box `[-1,1]^nvars`.
    pub fn bound(&self) -> RangeBound {
        let unit = vec![RangeBound::UNIT; self.nvars];
        self.eval_interval(&unit).expect("unit box matches nvars")
    }

    /// Exact symbolic partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Self {
        assert!(var < self.nvars, "variable index out of range");
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exps[var] > 0)
            .map(|t| {
                let mut exps = t.exps.clone();
                let e = exps[var];
                exps[var] = e - 1;
                Term { coeff: t.coeff * e as f64, exps }
            })
            .collect();
        Self::from_terms(self.nvars, terms)
    }

    /// Keeps only terms with total degree at least `min_degree`.
    pub fn high_degree_part(&self, min_degree: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.total_degree() >= min_degree)
            .cloned()
            .collect();
        Self { nvars: self.nvars, terms }
    }

    /// Coefficient of the monomial with the given exponent vector (0 if absent).
    pub fn coeff_of(&self, exps: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|t| t.exps == exps)
            .map_or(0.0, |t| t.coeff)
    }

    /// Renders using the names from `varnames`; `Display` uses `x1, x2, ...`.
    pub fn to_string_with(&self, varnames: &[String]) -> String {
        assert_eq!(varnames.len(), self.nvars);
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let c = t.coeff;
            if i == 0 {
                if c < 0.0 {
                    out.push_str("-");
                }
            } else if c < 0.0 {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mag = c.abs();
            let has_vars = t.exps.iter().any(|&e| e > 0);
            let mut factors: Vec<String> = Vec::new();
            if mag != 1.0 || !has_vars {
                factors.push(format!("{}", mag));
            }
            for (k, &e) in t.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(varnames[k].clone()),
                    _ => factors.push(format!("{}^{}", varnames[k], e)),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

impl fmt::Display for PolyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|k| format!("x{k}")).collect();
        write!(f, "{}", self.to_string_with(&names))
    }
}

/// JSON form `{"terms": [[coeff, [e1,...]], ...]}`.
#[derive(Serialize, Deserialize)]
struct PolyExprJson {
    terms: Vec<(f64, Vec<u32>)>,
}

impl Serialize for PolyExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyExprJson {
            terms: self
                .terms
                .iter()
                .map(|t| (t.coeff, t.exps.clone()))
                .collect(),
        }
        .serialize(s)
    }
}

impl PolyExpr {
    /// Deserializes the JSON term list; `nvars` cannot be inferred from an
    /// empty list, so it is an explicit argument.
    pub fn from_json_terms(nvars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, exps) in &terms {
            if exps.len() != nvars {
                return Err(Error::DimensionMismatch(format!(
                    "term exponent vector of length {} in a {}-variable polynomial",
                    exps.len(),
                    nvars
                )));
            }
        }
        Ok(Self::from_terms(
            nvars,
            terms
                .into_iter()
                .map(|(coeff, exps)| Term { coeff, exps })
                .collect(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src: src.as_bytes(), pos: 0 }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    out.push((Tok::Plus, start));
                    self.pos += 1;
                }
                b'-' => {
                    out.push((Tok::Minus, start));
                    self.pos += 1;
                }
                b'*' => {
                    out.push((Tok::Star, start));
                    self.pos += 1;
                }
                b'^' => {
                    out.push((Tok::Caret, start));
                    self.pos += 1;
                }
                b'(' => {
                    out.push((Tok::LParen, start));
                    self.pos += 1;
                }
                b')' => {
                    out.push((Tok::RParen, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'.' => {
                    out.push((self.number(start)?, start));
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut end = self.pos;
                    while end < self.src.len()
                        && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                    {
                        end += 1;
                    }
                    let name = std::str::from_utf8(&self.src[self.pos..end])
                        .expect("ascii idents")
                        .to_string();
                    out.push((Tok::Ident(name), start));
                    self.pos = end;
                }
                other => {
                    return Err(Error::Syntax {
                        position: start,
                        message: format!("unexpected character `{}`", other as char),
                    })
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        let mut end = self.pos;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        if end < self.src.len() && self.src[end] == b'.' {
            end += 1;
            while end < self.src.len() && self.src[end].is_ascii_digit() {
                end += 1;
            }
        }
        // scientific suffix, only when followed by a digit or signed digit
        if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
            let mut probe = end + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                end = probe;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..end]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = end;
        Ok(Tok::Num(value))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    cursor: usize,
    varnames: &'a [String],
    end_pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.cursor)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end_pos, |(_, p)| *p)
    }

    fn nvars(&self) -> usize {
        self.varnames.len()
    }

    // expr := ['+'|'-'] term (('+'|'-') term)*
    fn expr(&mut self) -> Result<PolyExpr> {
        let mut negate = false;
        if let Some((tok, _)) = self.peek() {
            if *tok == Tok::Plus {
                self.next();
            } else if *tok == Tok::Minus {
                self.next();
                negate = true;
            }
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        while let Some((tok, _)) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.next();
                    let t = self.term()?;
                    acc = acc.add(&t);
                }
                Tok::Minus => {
                    self.next();
                    let t = self.term()?;
                    acc = acc.sub(&t);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    // term := factor ('*' factor)*
    fn term(&mut self) -> Result<PolyExpr> {
        let mut acc = self.factor()?;
        while let Some((Tok::Star, _)) = self.peek() {
            self.next();
            let f = self.factor()?;
            acc = acc.mul(&f);
        }
        Ok(acc)
    }

    // factor := atom ['^' uint]
    fn factor(&mut self) -> Result<PolyExpr> {
        let base = self.atom()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.next();
            let pos = self.here();
            match self.next() {
                Some((Tok::Num(v), _)) => {
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(Error::InvalidExponent {
                            position: pos,
                            message: format!("`{v}` is not a non-negative integer"),
                        });
                    }
                    Ok(base.pow(v as u32))
                }
                Some((Tok::Minus, _)) => Err(Error::InvalidExponent {
                    position: pos,
                    message: "negative exponents are not supported".to_string(),
                }),
                _ => Err(Error::Syntax {
                    position: pos,
                    message: "expected integer exponent after `^`".to_string(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    // atom := number | ident | '(' expr ')'
    fn atom(&mut self) -> Result<PolyExpr> {
        let pos = self.here();
        match self.next() {
            Some((Tok::Num(v), _)) => Ok(PolyExpr::constant(self.nvars(), v)),
            Some((Tok::Ident(name), p)) => {
                match self.varnames.iter().position(|v| *v == name) {
                    Some(k) => Ok(PolyExpr::variable(self.nvars(), k)),
                    None => Err(Error::UnknownIdentifier { name, position: p }),
                }
            }
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    other => Err(Error::Syntax {
                        position: other.map_or(self.end_pos, |(_, p)| p),
                        message: "expected `)`".to_string(),
                    }),
                }
            }
            Some((tok, p)) => Err(Error::Syntax {
                position: p,
                message: format!("unexpected token `{tok:?}`"),
            }),
            None => Err(Error::Syntax {
                position: pos,
                message: "unexpected end of input".to_string(),
            }),
        }
    }
}

/// Parses an expression over the given variable names into canonical
/// monomial form. Grammar: identifiers, reals, `+ - * ^` with non-negative
/// integer powers, and parentheses.
pub fn parse(text: &str, varnames: &[String]) -> Result<PolyExpr> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        toks,
        cursor: 0,
        varnames,
        end_pos: text.len(),
    };
    let p = parser.expr()?;
    if parser.cursor != parser.toks.len() {
        let (_, pos) = parser.toks[parser.cursor];
        return Err(Error::Syntax {
            position: pos,
            message: "trailing input".to_string(),
        });
    }
    Ok(p)
}
