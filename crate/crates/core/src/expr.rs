//! Scalar source-term expressions in `x`, `y`.
//!
//! Grammar, loosest first: `+ -`, then `* /`, then unary `-`, then `^`
//! (right associative). So `-2^2 = -4` and `2^3^2 = 512`. Variables are
//! `x`, `y`, `r = sqrt(x^2 + y^2)` and `theta = atan2(y, x)` in `(-pi, pi]`;
//! constants `pi` and `e`; functions `sin cos exp sqrt abs log`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    E,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Evaluates at `(x, y)`. Square roots and logarithms of negative
    /// numbers and other NaN-producing operations are reported as errors.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::X) => Ok(x),
            Expr::Var(Var::Y) => Ok(y),
            Expr::Var(Var::R) => Ok(x.hypot(y)),
            Expr::Var(Var::Theta) => Ok(y.atan2(x)),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::E => Ok(std::f64::consts::E),
            Expr::Neg(a) => Ok(-a.eval(x, y)?),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x, y)?, b.eval(x, y)?);
                let v = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                };
                if v.is_nan() && !a.is_nan() && !b.is_nan() {
                    return Err(Error::Domain(format!("{a} {} {b} is undefined", op.symbol())));
                }
                Ok(v)
            }
            Expr::Call(f, a) => {
                let a = a.eval(x, y)?;
                if matches!(f, Func::Sqrt | Func::Log) && a < 0.0 {
                    return Err(Error::Domain(format!("{}({a}) of a negative argument", f.name())));
                }
                let v = match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Log => a.ln(),
                };
                if v.is_nan() && !a.is_nan() {
                    return Err(Error::Domain(format!("{}({a}) is undefined", f.name())));
                }
                Ok(v)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::E => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// Fully parenthesized form; `parse` reads it back to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::R) => f.write_str("r"),
            Expr::Var(Var::Theta) => f.write_str("theta"),
            Expr::Pi => f.write_str("pi"),
            Expr::E => f.write_str("e"),
            // a bare literal after `-` would read back as a negative literal
            Expr::Neg(a) if matches!(**a, Expr::Num(_)) => write!(f, "(-({a}))"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(offset: usize, message: impl Into<String>) -> Error {
        Error::ExprParse {
            offset,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let bytes = self.src.as_bytes();
        let mut out = Vec::new();
        loop {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            let Some(&c) = bytes.get(self.pos) else {
                out.push((start, Tok::End));
                return Ok(out);
            };
            let tok = match c {
                b'0'..=b'9' | b'.' => {
                    let mut end = self.pos;
                    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                        end += 1;
                    }
                    // exponent only when followed by digits, so `2e` is `2 * e` territory
                    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                        let mut k = end + 1;
                        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                            k += 1;
                        }
                        if k < bytes.len() && bytes[k].is_ascii_digit() {
                            while k < bytes.len() && bytes[k].is_ascii_digit() {
                                k += 1;
                            }
                            end = k;
                        }
                    }
                    let text = &self.src[start..end];
                    self.pos = end;
                    Tok::Num(
                        text.parse()
                            .map_err(|_| Self::err(start, format!("invalid number `{text}`")))?,
                    )
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let mut end = self.pos;
                    while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                        end += 1;
                    }
                    self.pos = end;
                    Tok::Ident(self.src[start..end].to_string())
                }
                b'+' | b'-' | b'*' | b'/' | b'^' => {
                    self.pos += 1;
                    Tok::Op(c as char)
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                _ => {
                    let ch = self.src[start..].chars().next().unwrap();
                    return Err(Self::err(start, format!("unexpected character `{ch}`")));
                }
            };
            out.push((start, tok));
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

const ADD_BP: u8 = 10;
const MUL_BP: u8 = 20;
const NEG_BP: u8 = 30;
const POW_BP: u8 = 40;

impl Parser {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if !matches!(t.1, Tok::End) {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match &self.peek().1 {
                Tok::Op(c) => *c,
                _ => break,
            };
            let (op, lbp, rbp) = match op {
                '+' => (BinOp::Add, ADD_BP, ADD_BP + 1),
                '-' => (BinOp::Sub, ADD_BP, ADD_BP + 1),
                '*' => (BinOp::Mul, MUL_BP, MUL_BP + 1),
                '/' => (BinOp::Div, MUL_BP, MUL_BP + 1),
                '^' => (BinOp::Pow, POW_BP, POW_BP),
                _ => unreachable!(),
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        let (offset, tok) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('-') => {
                // `-3` is a literal unless an exponent follows, keeping `-2^2 = -(2^2)`
                if let Tok::Num(v) = self.peek().1 {
                    if self.toks[self.pos + 1].1 != Tok::Op('^') {
                        self.bump();
                        return Ok(Expr::Num(-v));
                    }
                }
                Ok(Expr::Neg(Box::new(self.expr(NEG_BP)?)))
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.close(offset)?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "r" => Ok(Expr::Var(Var::R)),
                "theta" => Ok(Expr::Var(Var::Theta)),
                "pi" => Ok(Expr::Pi),
                "e" => Ok(Expr::E),
                other => {
                    let func = Func::from_name(other).ok_or_else(|| Error::ExprParse {
                        offset,
                        message: format!("unknown identifier `{other}`"),
                    })?;
                    let (open, t) = self.bump();
                    if t != Tok::LParen {
                        return Err(Error::ExprParse {
                            offset: open,
                            message: format!("expected `(` after function `{other}`"),
                        });
                    }
                    let arg = self.expr(0)?;
                    self.close(open)?;
                    Ok(Expr::call(func, arg))
                }
            },
            Tok::End => Err(Error::ExprParse {
                offset,
                message: "unexpected end of input, expected an operand".into(),
            }),
            t => Err(Error::ExprParse {
                offset,
                message: format!("expected an operand, found {}", describe(&t)),
            }),
        }
    }

    fn close(&mut self, open: usize) -> Result<()> {
        let (offset, t) = self.bump();
        match t {
            Tok::RParen => Ok(()),
            Tok::End => Err(Error::ExprParse {
                offset,
                message: format!("unclosed parenthesis opened at byte {open}, expected `)`"),
            }),
            t => Err(Error::ExprParse {
                offset,
                message: format!("expected `)`, found {}", describe(&t)),
            }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr(0)?;
    let (offset, t) = p.bump();
    if t != Tok::End {
        return Err(Error::ExprParse {
            offset,
            message: format!("expected an operator or end of input, found {}", describe(&t)),
        });
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse(s)
    }
}
