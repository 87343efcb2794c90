//! A small arithmetic expression language for matrix-field entries.
//!
//! Expressions range over the time variable `t`, the entry variables
//! `p_11 .. p_nn` of the state matrix, literals, `+ - * / ^`, unary minus,
//! and the functions `sin cos exp sqrt abs`. Precedence, tightest first:
//! `^` (right-associative), unary minus, `* /`, `+ -`.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree. Variable indices are stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Var { row: usize, col: usize },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluate at time `t` with state matrix `p`. Division by (near) zero,
    /// the square root of a negative, and non-finite results are domain
    /// errors rather than NaNs.
    pub fn eval(&self, t: f64, p: &Matrix) -> Result<f64> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Time => t,
            Expr::Var { row, col } => p[(*row, *col)],
            Expr::Neg(e) => -e.eval(t, p)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(t, p)?;
                let y = b.eval(t, p)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(Error::FieldEval {
                                t,
                                reason: "division by zero".into(),
                            });
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, e) => {
                let x = e.eval(t, p)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(Error::FieldEval {
                                t,
                                reason: format!("sqrt of negative value {x}"),
                            });
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                }
            }
        };
        if !v.is_finite() {
            return Err(Error::FieldEval {
                t,
                reason: format!("non-finite result {v}"),
            });
        }
        Ok(v)
    }

    /// True when the expression references a state entry `p_ij`.
    pub fn references_state(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Time => false,
            Expr::Var { .. } => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.references_state(),
            Expr::Bin(_, a, b) => a.references_state() || b.references_state(),
        }
    }
}

impl fmt::Display for Expr {
    /// Canonical fully-parenthesized form; `parse(print(e))` evaluates
    /// identically to `e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => {
                if *x < 0.0 || x.is_sign_negative() {
                    write!(f, "({x})")
                } else {
                    write!(f, "{x}")
                }
            }
            Expr::Time => write!(f, "t"),
            Expr::Var { row, col } => write!(f, "p_{}{}", row + 1, col + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
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

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Token::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix: 1e-3, 2.5E+4
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((start, Token::Num(value)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
            }
            _ => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    dim: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.src_len)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let off = self.offset();
        match self.advance() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Parse {
                offset: off,
                message: format!("expected {what}"),
            }),
        }
    }

    // expr := term { (+|-) term }
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary { (*|/) unary }
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.advance();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.advance();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power   (so -x^2 parses as -(x^2))
    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom [ '^' unary ]   (right-associative exponent)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.advance();
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let off = self.offset();
        match self.advance() {
            Some(Token::Num(x)) => Ok(Expr::Num(x)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing parenthesis")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => self.ident(off, &name),
            _ => Err(Error::Parse {
                offset: off,
                message: "expected a number, variable, function, or '('".into(),
            }),
        }
    }

    fn ident(&mut self, off: usize, name: &str) -> Result<Expr> {
        if name == "t" {
            return Ok(Expr::Time);
        }
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(f) = func {
            self.expect(Token::LParen, &format!("'(' after {name}"))?;
            let arg = self.expr()?;
            self.expect(Token::RParen, "closing parenthesis")?;
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix("p_") {
            let digits: Vec<u32> = rest.chars().filter_map(|c| c.to_digit(10)).collect();
            if digits.len() == 2 && rest.len() == 2 {
                let (i, j) = (digits[0] as usize, digits[1] as usize);
                if i >= 1 && i <= self.dim && j >= 1 && j <= self.dim {
                    return Ok(Expr::Var {
                        row: i - 1,
                        col: j - 1,
                    });
                }
                return Err(Error::Parse {
                    offset: off,
                    message: format!(
                        "variable {name} out of range for dimension {} (valid: p_11 .. p_{0}{0})",
                        self.dim
                    ),
                });
            }
        }
        Err(Error::Parse {
            offset: off,
            message: format!("unknown identifier '{name}'"),
        })
    }
}

/// Parse an entry expression against a state dimension `n` (entry variables
/// `p_11 .. p_nn`; `n <= 9` because indices are written as digit pairs).
pub fn parse_expression(src: &str, n: usize) -> Result<Expr> {
    if n == 0 || n > 9 {
        return Err(Error::Usage(format!(
            "expression variables support dimensions 1..=9, got {n}"
        )));
    }
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        dim: n,
        src_len: src.len(),
    };
    let e = p.expr()?;
    if p.pos != tokens.len() {
        return Err(Error::Parse {
            offset: p.offset(),
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}
