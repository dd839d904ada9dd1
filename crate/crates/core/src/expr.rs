//! A small arithmetic language for the scalar functions in a problem
//! file: the right-hand side `f(t, u, ud, w)`, the delay `h(t)`, the
//! history `φ(t)` and the impulse maps `𝒥_k(u)`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names are `t`, `u`, `ud` (delayed state), `w` (the implicit
//! derivative value), `P` (`Ψ(t) − Ψ(0)`), `alpha`, `beta`, `rho` and the
//! constants `pi` and `e`. Which variables are visible depends on the
//! [`Context`]. Functions: `abs`, `exp`, `ln`, `sqrt`, `sin`, `cos`,
//! `min`, `max` and `sat(x, c) = x / (c (1 + x))`.

use std::fmt;

use crate::error::{Error, Result};

/// Longest accepted source text.
pub const MAX_SOURCE_LEN: usize = 16 * 1024;
/// Deepest accepted nesting of sub-expressions.
pub const MAX_DEPTH: usize = 64;

/// Where an expression is used, which decides the visible variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    Rhs,
    Delay,
    History,
    Impulse,
}

impl Context {
    fn allows(self, var: Var) -> bool {
        use Var::*;
        match self {
            Context::Rhs => true,
            Context::Delay => matches!(var, T | P | Alpha | Beta | Rho),
            Context::History => matches!(var, T),
            Context::Impulse => matches!(var, T | U | P | Alpha | Beta | Rho),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    U,
    Ud,
    W,
    P,
    Alpha,
    Beta,
    Rho,
}

impl Var {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "t" => Var::T,
            "u" => Var::U,
            "ud" => Var::Ud,
            "w" => Var::W,
            "P" => Var::P,
            "alpha" => Var::Alpha,
            "beta" => Var::Beta,
            "rho" => Var::Rho,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::U => "u",
            Var::Ud => "ud",
            Var::W => "w",
            Var::P => "P",
            Var::Alpha => "alpha",
            Var::Beta => "beta",
            Var::Rho => "rho",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Min,
    Max,
    Sat,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            "sat" => Func::Sat,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sat => "sat",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Sat => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
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

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values bound to the variables during evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub t: f64,
    pub u: f64,
    pub ud: f64,
    pub w: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

impl Expr {
    /// Parses `src` and checks that every variable is visible in `ctx`.
    pub fn parse(src: &str, ctx: Context) -> Result<Expr> {
        if src.len() > MAX_SOURCE_LEN {
            return Err(Error::Parse {
                offset: MAX_SOURCE_LEN,
                message: format!("expression longer than {MAX_SOURCE_LEN} bytes"),
            });
        }
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            ctx,
            depth: 0,
            src_len: src.len(),
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(tok) => Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind.describe()),
            }),
        }
    }

    pub fn eval(&self, b: &Bindings) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => match v {
                Var::T => b.t,
                Var::U => b.u,
                Var::Ud => b.ud,
                Var::W => b.w,
                Var::P => b.p,
                Var::Alpha => b.alpha,
                Var::Beta => b.beta,
                Var::Rho => b.rho,
            },
            Expr::Neg(e) => -e.eval(b),
            Expr::Bin(op, l, r) => {
                let (x, y) = (l.eval(b), r.eval(b));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(b);
                match f {
                    Func::Abs => x.abs(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Min => x.min(args[1].eval(b)),
                    Func::Max => x.max(args[1].eval(b)),
                    Func::Sat => {
                        let c = args[1].eval(b);
                        x / (c * (1.0 + x))
                    }
                }
            }
        }
    }

    /// True if the expression reads variable `v`.
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(x) => *x == v,
            Expr::Neg(e) => e.uses(v),
            Expr::Bin(_, l, r) => l.uses(v) || r.uses(v),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised; re-parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_finite() {
                    write!(f, "{c:e}")
                } else {
                    write!(f, "(1e999)")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::Ident(s) => format!("name `{s}`"),
            TokenKind::Op(c) => format!("operator `{c}`"),
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

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(src[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => out.push(Token {
                kind: TokenKind::Op(c as char),
                offset: start,
            }),
            b'(' => out.push(Token {
                kind: TokenKind::LParen,
                offset: start,
            }),
            b')' => out.push(Token {
                kind: TokenKind::RParen,
                offset: start,
            }),
            b',' => out.push(Token {
                kind: TokenKind::Comma,
                offset: start,
            }),
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    ctx: Context,
    depth: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eof_error(&self, what: &str) -> Error {
        Error::Parse {
            offset: self.src_len,
            message: format!("unexpected end of input, expected {what}"),
        }
    }

    fn peek_op(&self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => Some(*c),
            _ => None,
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let offset = self.peek().map_or(self.src_len, |t| t.offset);
            return Err(Error::Parse {
                offset,
                message: format!("expression nested deeper than {MAX_DEPTH}"),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op(&['+', '-']) {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op(&['*', '/']) {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let e = if self.peek_op(&['-']).is_some() {
            self.pos += 1;
            Expr::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op(&['^']).is_some() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        match self.next() {
            Some(tok) if tok.kind == kind => Ok(()),
            Some(tok) => Err(Error::Parse {
                offset: tok.offset,
                message: format!(
                    "expected {}, found {}",
                    kind.describe(),
                    tok.kind.describe()
                ),
            }),
            None => Err(self.eof_error(&kind.describe())),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.next().ok_or_else(|| self.eof_error("an operand"))?;
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::Const(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                ) {
                    let func = Func::from_name(&name).ok_or_else(|| Error::Parse {
                        offset: tok.offset,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(
                        self.peek(),
                        Some(Token {
                            kind: TokenKind::Comma,
                            ..
                        })
                    ) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen)?;
                    if args.len() != func.arity() {
                        return Err(Error::Parse {
                            offset: tok.offset,
                            message: format!(
                                "`{name}` takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Const(std::f64::consts::E)),
                    _ => {}
                }
                let var = Var::from_name(&name).ok_or_else(|| Error::Parse {
                    offset: tok.offset,
                    message: format!("unknown name `{name}`"),
                })?;
                if !self.ctx.allows(var) {
                    return Err(Error::Parse {
                        offset: tok.offset,
                        message: format!(
                            "variable `{name}` is not available in a {:?} expression",
                            self.ctx
                        ),
                    });
                }
                Ok(Expr::Var(var))
            }
            other => Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}
