//! Expression language for analytic surfaces.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | factor
//! factor := atom ('^' integer)?
//! atom   := number | variable | 'pi' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Exponents are integers, optionally signed or parenthesized (`x^-2`,
//! `x^(-2)`). `-x^2` parses as `-(x^2)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::taylor::Taylor2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    SyntaxError { pos: usize, msg: String },
    #[error("unknown function `{name}` at offset {pos}")]
    UnknownFunction { pos: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::SyntaxError { pos, .. } | ParseError::UnknownFunction { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Sqrt,
    Exp,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn check_domain(self, a: f64) -> Result<(), DomainError> {
        let bad = match self {
            Func::Sqrt => a < 0.0,
            Func::Log => a <= 0.0,
            Func::Tan => a.cos() == 0.0,
            _ => false,
        };
        if bad || !a.is_finite() {
            Err(DomainError(format!("{}({a}) is undefined", self.name())))
        } else {
            Ok(())
        }
    }

    pub fn value(self, a: f64) -> Result<f64, DomainError> {
        self.check_domain(a)?;
        Ok(match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Atan => a.atan(),
            Func::Sqrt => a.sqrt(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
        })
    }

    /// Value and first four derivatives at `a`.
    pub fn derivatives(self, a: f64) -> Result<[f64; 5], DomainError> {
        self.check_domain(a)?;
        let d = match self {
            Func::Sin => {
                let (s, c) = a.sin_cos();
                [s, c, -s, -c, s]
            }
            Func::Cos => {
                let (s, c) = a.sin_cos();
                [c, -s, -c, s, c]
            }
            Func::Tan => {
                let t = a.tan();
                let s = 1.0 + t * t;
                [t, s, 2.0 * t * s, s * (2.0 + 6.0 * t * t), s * t * (16.0 + 24.0 * t * t)]
            }
            Func::Atan => {
                let q = 1.0 + a * a;
                [
                    a.atan(),
                    1.0 / q,
                    -2.0 * a / (q * q),
                    (6.0 * a * a - 2.0) / (q * q * q),
                    24.0 * a * (1.0 - a * a) / (q * q * q * q),
                ]
            }
            Func::Sqrt => {
                if a == 0.0 {
                    return Err(DomainError("sqrt is not differentiable at 0".into()));
                }
                let s = a.sqrt();
                [
                    s,
                    0.5 / s,
                    -0.25 / (a * s),
                    0.375 / (a * a * s),
                    -0.9375 / (a * a * a * s),
                ]
            }
            Func::Exp => [a.exp(); 5],
            Func::Log => [
                a.ln(),
                1.0 / a,
                -1.0 / (a * a),
                2.0 / (a * a * a),
                -6.0 / (a * a * a * a),
            ],
        };
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Index into the expression's variable names.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// A parsed expression in two variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    vars: [String; 2],
    source: String,
}

/// Arithmetic needed to evaluate an [`ExprAst`].
pub trait ExprValue: Sized + Copy {
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Result<Self, DomainError>;
    fn powi(self, n: i32) -> Result<Self, DomainError>;
    fn apply(self, f: Func) -> Result<Self, DomainError>;
}

impl ExprValue for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, DomainError> {
        if o == 0.0 {
            return Err(DomainError("division by zero".into()));
        }
        Ok(self / o)
    }
    fn powi(self, n: i32) -> Result<Self, DomainError> {
        if n < 0 && self == 0.0 {
            return Err(DomainError("negative power of zero".into()));
        }
        Ok(self.powi(n))
    }
    fn apply(self, f: Func) -> Result<Self, DomainError> {
        f.value(self)
    }
}

fn reciprocal(t: Taylor2) -> Result<Taylor2, DomainError> {
    let a = t.value();
    if a == 0.0 {
        return Err(DomainError("division by zero".into()));
    }
    let r = 1.0 / a;
    Ok(t.compose(&[r, -r * r, 2.0 * r * r * r, -6.0 * r.powi(4), 24.0 * r.powi(5)]))
}

impl ExprValue for Taylor2 {
    fn constant(c: f64) -> Self {
        Taylor2::constant(c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, DomainError> {
        Ok(self * reciprocal(o)?)
    }
    fn powi(self, n: i32) -> Result<Self, DomainError> {
        if n >= 0 {
            Ok(Taylor2::powi(&self, n as u32))
        } else {
            Ok(Taylor2::powi(&reciprocal(self)?, n.unsigned_abs()))
        }
    }
    fn apply(self, f: Func) -> Result<Self, DomainError> {
        Ok(self.compose(&f.derivatives(self.value())?))
    }
}

impl ExprAst {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String; 2] {
        &self.vars
    }

    /// Evaluates with any [`ExprValue`] arithmetic.
    pub fn eval_generic<T: ExprValue>(&self, a: T, b: T) -> Result<T, DomainError> {
        let out = eval_node(&self.root, &[a, b])?;
        if !out.value().is_finite() {
            return Err(DomainError("non-finite value".into()));
        }
        Ok(out)
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64, DomainError> {
        self.eval_generic(a, b)
    }

    /// Degree-4 Taylor expansion at `(a, b)`.
    pub fn taylor(&self, a: f64, b: f64) -> Result<Taylor2, DomainError> {
        let t = self.eval_generic(Taylor2::var_x(a), Taylor2::var_y(b))?;
        if !t.is_finite() {
            return Err(DomainError(format!("non-finite derivative at ({a}, {b})")));
        }
        Ok(t)
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval_node<T: ExprValue>(n: &Node, vars: &[T; 2]) -> Result<T, DomainError> {
    Ok(match n {
        Node::Const(c) => T::constant(*c),
        Node::Var(i) => vars[*i],
        Node::Neg(a) => eval_node(a, vars)?.neg(),
        Node::Add(a, b) => eval_node(a, vars)?.add(eval_node(b, vars)?),
        Node::Sub(a, b) => eval_node(a, vars)?.sub(eval_node(b, vars)?),
        Node::Mul(a, b) => eval_node(a, vars)?.mul(eval_node(b, vars)?),
        Node::Div(a, b) => eval_node(a, vars)?.div(eval_node(b, vars)?)?,
        Node::Pow(a, k) => eval_node(a, vars)?.powi(*k)?,
        Node::Call(f, a) => eval_node(a, vars)?.apply(*f)?,
    })
}

/// Parses an expression in `x` and `y`.
pub fn parse_expression(text: &str) -> Result<ExprAst, ParseError> {
    parse_with_vars(text, ["x", "y"])
}

/// Parses an expression in two named variables.
pub fn parse_with_vars(text: &str, vars: [&str; 2]) -> Result<ExprAst, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vars,
    };
    let root = p.expr()?;
    match p.peek() {
        (Tok::End, _) => {}
        (t, pos) => {
            return Err(ParseError::SyntaxError {
                pos,
                msg: format!("unexpected {t}"),
            })
        }
    }
    Ok(ExprAst {
        root,
        vars: [vars[0].to_string(), vars[1].to_string()],
        source: text.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v, _) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            let mut integer = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                integer = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integer = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::SyntaxError {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(v, integer), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ParseError::SyntaxError {
                        pos: start,
                        msg: format!("unexpected character `{}`", &text[start..].chars().next().unwrap()),
                    })
                }
            };
            out.push((tok, start));
            i += 1;
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    vars: [&'a str; 2],
}

impl Parser<'_> {
    fn peek(&self) -> (Tok, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.peek();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let (t, pos) = self.bump();
        if t == want {
            Ok(())
        } else {
            Err(ParseError::SyntaxError {
                pos,
                msg: format!("expected {want}, found {t}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek().0 {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.factor(),
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek().0 != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let k = self.exponent()?;
        Ok(Node::Pow(Box::new(base), k))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let paren = self.peek().0 == Tok::LParen;
        if paren {
            self.bump();
        }
        let mut sign = 1;
        match self.peek().0 {
            Tok::Op('-') => {
                sign = -1;
                self.bump();
            }
            Tok::Op('+') => {
                self.bump();
            }
            _ => {}
        }
        let (t, pos) = self.bump();
        let k = match t {
            Tok::Num(v, true) if v <= i32::MAX as f64 => sign * v as i32,
            other => {
                return Err(ParseError::SyntaxError {
                    pos,
                    msg: format!("expected integer exponent, found {other}"),
                })
            }
        };
        if paren {
            self.expect(Tok::RParen)?;
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (t, pos) = self.bump();
        match t {
            Tok::Num(v, _) => Ok(Node::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    let f = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { pos, name })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else if name == "pi" {
                    Ok(Node::Const(std::f64::consts::PI))
                } else {
                    Err(ParseError::SyntaxError {
                        pos,
                        msg: format!("unknown identifier `{name}`"),
                    })
                }
            }
            other => Err(ParseError::SyntaxError {
                pos,
                msg: format!("expected a value, found {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_basic_forms() {
        let e = parse_expression("y^2/(x^2+y^2)").unwrap();
        assert_eq!(e.eval(1.0, 1.0).unwrap(), 0.5);
        let e = parse_expression("sin(x)*cos(y)").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse_expression("x +").unwrap_err();
        assert!(matches!(err, ParseError::SyntaxError { pos: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_function() {
        let err = parse_expression("1 + foo(x)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownFunction {
                pos: 4,
                name: "foo".into()
            }
        );
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expression("-x^2 + 2*y - 3/4").unwrap();
        assert_eq!(e.eval(3.0, 1.0).unwrap(), -9.0 + 2.0 - 0.75);
        let e = parse_expression("x^-2 + x^(-1) + 2^3").unwrap();
        assert_eq!(e.eval(2.0, 0.0).unwrap(), 0.25 + 0.5 + 8.0);
        let e = parse_expression("  2 *  pi ").unwrap();
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn rejects_fractional_exponent_and_junk() {
        assert!(parse_expression("x^2.5").is_err());
        assert!(parse_expression("x $ y").is_err());
        assert!(parse_expression("2x").is_err());
        assert!(parse_expression("(x").is_err());
        assert!(parse_expression("z").is_err());
    }

    #[test]
    fn custom_variables() {
        let e = parse_with_vars("cos(s)*t", ["s", "t"]).unwrap();
        assert_eq!(e.eval(0.0, 2.0).unwrap(), 2.0);
        assert!(parse_with_vars("x", ["s", "t"]).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(parse_expression("1/x").unwrap().eval(0.0, 1.0).is_err());
        assert!(parse_expression("sqrt(x)").unwrap().eval(-1.0, 0.0).is_err());
        assert!(parse_expression("log(x)").unwrap().eval(0.0, 0.0).is_err());
        assert!(parse_expression("x^-1").unwrap().taylor(0.0, 0.0).is_err());
        assert!(parse_expression("sqrt(x)").unwrap().taylor(0.0, 1.0).is_err());
    }
}
