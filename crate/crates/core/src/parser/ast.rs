use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Cos,
    Sin,
    /// `d(x)`: the velocity of coordinate `x`.
    Dot,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    /// Numeric literal, kept as written.
    Number(String),
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub line: usize,
    pub column: usize,
}

/// Positions are bookkeeping; two expressions are equal when their trees are.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, line: usize, column: usize) -> Self {
        Expr { kind, line, column }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            ExprKind::Neg(_) => 3,
            ExprKind::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_with(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(s) | ExprKind::Ident(s) => write!(f, "{s}"),
            ExprKind::Neg(e) => {
                write!(f, "-")?;
                e.write_with(f, 3)
            }
            ExprKind::Binary(op, l, r) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                l.write_with(f, p)?;
                write!(f, "{sym}")?;
                r.write_with(f, p + 1)
            }
            ExprKind::Pow(b, n) => {
                b.write_with(f, 5)?;
                write!(f, "^{n}")
            }
            ExprKind::Call(func, arg) => {
                let name = match func {
                    Func::Cos => "cos",
                    Func::Sin => "sin",
                    Func::Dot => "d",
                };
                write!(f, "{name}(")?;
                arg.write_bare(f)?;
                write!(f, ")")
            }
        }
    }

    /// Numeric evaluation; `lookup` resolves identifiers and `d(x)` is
    /// looked up under the name `d(x)`.
    pub fn eval_f64(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match &self.kind {
            ExprKind::Number(s) => s.parse::<f64>().ok()?,
            ExprKind::Ident(name) => lookup(name)?,
            ExprKind::Neg(e) => -e.eval_f64(lookup)?,
            ExprKind::Binary(op, l, r) => {
                let (a, b) = (l.eval_f64(lookup)?, r.eval_f64(lookup)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            ExprKind::Pow(b, n) => b.eval_f64(lookup)?.powi(*n as i32),
            ExprKind::Call(Func::Cos, a) => a.eval_f64(lookup)?.cos(),
            ExprKind::Call(Func::Sin, a) => a.eval_f64(lookup)?.sin(),
            ExprKind::Call(Func::Dot, a) => lookup(&format!("d({a})"))?,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}
