//! A small arithmetic expression language for user-supplied scalar functions of `x` and `t`.
//!
//! Grammar (standard precedence, `^` right-associative, unary minus applies to a whole power):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-')? power
//! power  := atom ('^' factor)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the variables `x` and `t`, the named constants `hbar`, `m`, `pi` and `e`,
//! the functions `exp`, `log`, `sin`, `cos`, `sqrt`, `abs`, and (only when declared through
//! [`parse_with_params`]) user parameters, which must be bound with [`bind_constants`] before
//! evaluation. Implicit multiplication (`2x`) is a syntax error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::Array2;

use crate::grid::{Field, PhysParams, SpaceTimeGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at byte {offset} {message}")]
    Arity {
        name: String,
        offset: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("result is not finite")]
    NonFinite,
    #[error("unbound parameter `{0}`")]
    Unbound(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BindError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("binding for `{0}` is not finite")]
    NonFinite(String),
}

/// Evaluation error located on a grid node.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("at x = {x}, t = {t} (node {i}, slice {j}): {source}")]
pub struct FieldEvalError {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub t: f64,
    pub source: EvalError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Named {
    Hbar,
    Mass,
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Named(Named),
    /// User parameter awaiting [`bind_constants`].
    Param(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Values of the physical constants referenced by `hbar` and `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consts {
    pub hbar: f64,
    pub m: f64,
}

impl From<PhysParams> for Consts {
    fn from(p: PhysParams) -> Self {
        Consts {
            hbar: p.hbar(),
            m: p.mass(),
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn zero() -> Self {
        Expr::Num(0.0)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Named(_) | Expr::Param(_) => false,
            Expr::Unary(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Names of unbound parameters, sorted.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Param(name) => {
                out.insert(name.clone());
            }
            Expr::Unary(_, a) => a.collect_params(out),
            Expr::Binary(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            _ => {}
        }
    }

    pub fn is_closed(&self) -> bool {
        self.params().is_empty()
    }

    /// Evaluates at `(x, t)`.
    pub fn eval(&self, x: f64, t: f64, consts: Consts) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Named(Named::Hbar) => consts.hbar,
            Expr::Named(Named::Mass) => consts.m,
            Expr::Named(Named::Pi) => std::f64::consts::PI,
            Expr::Named(Named::E) => std::f64::consts::E,
            Expr::Param(name) => return Err(EvalError::Unbound(name.clone())),
            Expr::Unary(op, a) => {
                let a = a.eval(x, t, consts)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::Domain(format!("log of {a}")));
                        }
                        a.ln()
                    }
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::Domain(format!("sqrt of {a}")));
                        }
                        a.sqrt()
                    }
                    UnaryOp::Abs => a.abs(),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x, t, consts)?;
                let b = b.eval(x, t, consts)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinaryOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::Domain(format!(
                                "negative base {a} with non-integer exponent {b}"
                            )));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.powf(b)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Samples the expression at every node of `grid`.
    pub fn eval_field(
        &self,
        grid: &SpaceTimeGrid,
        consts: Consts,
    ) -> Result<Field, FieldEvalError> {
        let mut values = Array2::zeros((grid.nt(), grid.nx()));
        for j in 0..grid.nt() {
            let t = grid.t(j);
            for i in 0..grid.nx() {
                let x = grid.x(i);
                values[[j, i]] = self
                    .eval(x, t, consts)
                    .map_err(|source| FieldEvalError { i, j, x, t, source })?;
            }
        }
        Ok(Field::from_values(*grid, values).expect("eval guarantees finite samples"))
    }
}

/// Replaces every parameter node with its bound value.
pub fn bind_constants(expr: &Expr, bindings: &BTreeMap<String, f64>) -> Result<Expr, BindError> {
    Ok(match expr {
        Expr::Param(name) => {
            let v = *bindings
                .get(name)
                .ok_or_else(|| BindError::Unbound(name.clone()))?;
            if !v.is_finite() {
                return Err(BindError::NonFinite(name.clone()));
            }
            Expr::Num(v)
        }
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(bind_constants(a, bindings)?)),
        Expr::Binary(op, a, b) => Expr::Binary(
            *op,
            Box::new(bind_constants(a, bindings)?),
            Box::new(bind_constants(b, bindings)?),
        ),
        other => other.clone(),
    })
}

/// Parses a closed expression: only built-in identifiers are accepted.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    parse_with_params(source, &[] as &[&str])
}

/// Parses an expression in which `params` may appear as unbound parameters.
pub fn parse_with_params<S: AsRef<str>>(source: &str, params: &[S]) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        len: source.len(),
        params: params.iter().map(|s| s.as_ref().to_string()).collect(),
    };
    if parser.tokens.is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let e = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(e)
}

/// Parses, then binds every identifier named in `bindings`.
pub fn parse_bound(source: &str, bindings: &BTreeMap<String, f64>) -> Result<Expr, ExprError> {
    let names: Vec<&str> = bindings.keys().map(String::as_str).collect();
    let e = parse_with_params(source, &names)?;
    Ok(bind_constants(&e, bindings)?)
}

/// Either stage of turning text into a closed expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Bind(#[from] BindError),
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Caret => "`^`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(TokenKind::Plus),
            b'-' => Some(TokenKind::Minus),
            b'*' => Some(TokenKind::Star),
            b'/' => Some(TokenKind::Slash),
            b'^' => Some(TokenKind::Caret),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            out.push(Token {
                kind,
                offset: start,
            });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // Exponent only when digits follow; a bare `e` is left for the parser to reject.
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            if !v.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("number `{text}` overflows"),
                });
            }
            out.push(Token {
                kind: TokenKind::Num(v),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
    params: BTreeSet<String>,
}

fn function(name: &str) -> Option<UnaryOp> {
    Some(match name {
        "exp" => UnaryOp::Exp,
        "log" => UnaryOp::Log,
        "sin" => UnaryOp::Sin,
        "cos" => UnaryOp::Cos,
        "sqrt" => UnaryOp::Sqrt,
        "abs" => UnaryOp::Abs,
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.len, |t| t.offset)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::Syntax {
                offset: t.offset,
                message: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                offset: self.len,
                message: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek_kind(), Some(TokenKind::Minus)) {
            self.pos += 1;
            let inner = self.power()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek_kind(), Some(TokenKind::Caret)) {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(tok) = self.next() else {
            return Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.offset),
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let called = matches!(self.peek_kind(), Some(TokenKind::LParen));
        if let Some(op) = function(&name) {
            if !called {
                return Err(ParseError::Arity {
                    name,
                    offset,
                    message: "is a function and takes exactly one argument".into(),
                });
            }
            self.pos += 1;
            let arg = self.expr()?;
            if matches!(self.peek_kind(), Some(TokenKind::Comma)) {
                return Err(ParseError::Arity {
                    name,
                    offset,
                    message: "takes exactly one argument".into(),
                });
            }
            self.expect(TokenKind::RParen)?;
            return Ok(Expr::Unary(op, Box::new(arg)));
        }
        let leaf = match name.as_str() {
            "x" => Expr::Var(Var::X),
            "t" => Expr::Var(Var::T),
            "hbar" => Expr::Named(Named::Hbar),
            "m" => Expr::Named(Named::Mass),
            "pi" => Expr::Named(Named::Pi),
            "e" => Expr::Named(Named::E),
            _ if self.params.contains(&name) => Expr::Param(name.clone()),
            _ => return Err(ParseError::UnknownIdentifier { name, offset }),
        };
        if called {
            return Err(ParseError::Arity {
                name,
                offset,
                message: "is not a function".into(),
            });
        }
        Ok(leaf)
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized; re-parses to an identically evaluating tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Named(Named::Hbar) => f.write_str("hbar"),
            Expr::Named(Named::Mass) => f.write_str("m"),
            Expr::Named(Named::Pi) => f.write_str("pi"),
            Expr::Named(Named::E) => f.write_str("e"),
            Expr::Param(name) => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-({a}))"),
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Exp => "exp",
                    UnaryOp::Log => "log",
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "(({a}){sym}({b}))")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Consts = Consts { hbar: 1.0, m: 1.0 };

    fn ev(src: &str, x: f64, t: f64) -> f64 {
        parse(src).unwrap().eval(x, t, UNIT).unwrap()
    }

    fn bindings(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("2*x + exp(-t)", 1.0, 0.0), 3.0);
        assert_eq!(ev("hbar^2/(2*m)", 0.0, 0.0), 0.5);
        assert_eq!(ev("0", 3.0, 7.0), 0.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*4", 0.0, 0.0), 14.0);
        assert_eq!(ev("-x^2", 2.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("8/2/2", 0.0, 0.0), 2.0);
        assert_eq!(ev("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(ev("1.5e2 + 2E-1", 0.0, 0.0), 150.2);
    }

    #[test]
    fn unknown_identifier_is_reported() {
        match parse("cos(k*x)") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "k");
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert!(matches!(parse("2x"), Err(ParseError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("(1+2"), Err(ParseError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("1 + $"), Err(ParseError::Syntax { offset: 4, .. })));
        assert!(matches!(parse(""), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("--x"), Err(ParseError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("2e"), Err(ParseError::Syntax { offset: 1, .. })));
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(parse("sin(x, t)"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("exp + 1"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("x(2)"), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn evaluation_errors() {
        let c = UNIT;
        assert_eq!(
            parse("x*t/(x*t)").unwrap().eval(0.0, 1.0, c),
            Err(EvalError::DivisionByZero)
        );
        assert!(matches!(parse("log(x)").unwrap().eval(0.0, 0.0, c), Err(EvalError::Domain(_))));
        assert!(matches!(parse("log(x)").unwrap().eval(-1.0, 0.0, c), Err(EvalError::Domain(_))));
        assert!(matches!(parse("sqrt(x)").unwrap().eval(-1.0, 0.0, c), Err(EvalError::Domain(_))));
        assert!(matches!(parse("x^0.5").unwrap().eval(-4.0, 0.0, c), Err(EvalError::Domain(_))));
        assert_eq!(parse("x^3").unwrap().eval(-2.0, 0.0, c), Ok(-8.0));
        assert_eq!(parse("exp(x)").unwrap().eval(1000.0, 0.0, c), Err(EvalError::NonFinite));
    }

    #[test]
    fn binding_constants() {
        let e = parse_with_params("exp(c*t)", &["c"]).unwrap();
        let bound = bind_constants(&e, &bindings(&[("c", 0.5)])).unwrap();
        assert!((bound.eval(0.0, 2.0, UNIT).unwrap() - std::f64::consts::E).abs() < 1e-15);

        let e = parse_with_params("c*x", &["c"]).unwrap();
        let bound = bind_constants(&e, &bindings(&[("c", 2.0)])).unwrap();
        assert_eq!(bound, parse("2*x").unwrap());
        assert_eq!(
            bind_constants(&e, &BTreeMap::new()),
            Err(BindError::Unbound("c".into()))
        );
        assert!(e.eval(1.0, 0.0, UNIT).is_err());

        let e = parse_with_params("a*x+b", &["a", "b"]).unwrap();
        let bound = bind_constants(&e, &bindings(&[("a", 0.0), ("b", 1.0)])).unwrap();
        assert!(bound.is_closed());
        for x in [-3.0, 0.0, 0.25, 10.0] {
            assert_eq!(bound.eval(x, x * 0.5, UNIT).unwrap(), 1.0);
        }
    }

    #[test]
    fn parse_bound_uses_only_given_names() {
        let e = parse_bound("k*x", &bindings(&[("k", 3.0)])).unwrap();
        assert_eq!(e.eval(2.0, 0.0, UNIT).unwrap(), 6.0);
        assert!(matches!(
            parse_bound("k*x + w", &bindings(&[("k", 3.0)])),
            Err(ExprError::Parse(ParseError::UnknownIdentifier { .. }))
        ));
    }

    #[test]
    fn dependency_queries() {
        let e = parse("sin(x) + 1").unwrap();
        assert!(e.depends_on(Var::X));
        assert!(!e.depends_on(Var::T));
    }

    #[test]
    fn display_round_trip() {
        for src in ["-x^2", "2^3^2", "1-(2-3)", "exp(-t)*cos(pi*x)", "-0.5", "abs(x)/hbar"] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            for (x, t) in [(0.3, 0.1), (-1.2, 2.0)] {
                assert_eq!(
                    e.eval(x, t, UNIT).unwrap().to_bits(),
                    again.eval(x, t, UNIT).unwrap().to_bits()
                );
            }
        }
    }
}
