//! Recursive-descent parser from tokens to statements.

use super::ast::{BinOp, Expr, ExprKind, Func};
use super::lexer::{Tok, Token};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Rational,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub coordinate: String,
    pub momentum: Option<String>,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SimulateSource {
    pub init: Vec<(Expr, Expr)>,
    pub dt: Option<Expr>,
    pub t_end: Option<Expr>,
    pub observe: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Var(Vec<VarDecl>),
    Param { name: String, value: Expr, kind: Option<ParamKind>, line: usize, column: usize },
    Lagrangian(Expr),
    Gauge { lhs: Expr, rhs: Expr },
    Simulate(SimulateSource),
}

pub const RESERVED: &[&str] = &["var", "param", "L", "gauge", "simulate", "d", "cos", "sin", "pi", "rational", "float"];

pub struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Token, message: String) -> Error {
        Error::Syntax { line: t.line, column: t.column, message }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(Self::error_at(&t, format!("expected {what}, found {}", t.tok.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(Self::error_at(&t, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek().tok, Tok::Newline | Tok::Semicolon) {
            self.next();
        }
    }

    fn end_statement(&mut self) -> Result<()> {
        let t = self.next();
        match t.tok {
            Tok::Newline | Tok::Semicolon | Tok::Eof => Ok(()),
            ref other => Err(Self::error_at(&t, format!("unexpected {} after statement", other.describe()))),
        }
    }

    pub fn statements(&mut self) -> Result<Vec<Statement>> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if self.peek().tok == Tok::Eof {
                return Ok(out);
            }
            out.push(self.statement()?);
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        let (word, t) = self.ident("a statement (`var`, `param`, `L`, `gauge` or `simulate`)")?;
        let stmt = match word.as_str() {
            "var" => self.var_statement(&t)?,
            "param" => self.param_statement()?,
            "L" => {
                self.expect(Tok::Equals, "`=`")?;
                Statement::Lagrangian(self.expr()?)
            }
            "gauge" => {
                let lhs = self.expr()?;
                self.expect(Tok::Equals, "`=` in gauge condition")?;
                let rhs = self.expr()?;
                Statement::Gauge { lhs, rhs }
            }
            "simulate" => return self.simulate_block().map(Statement::Simulate),
            other => return Err(Self::error_at(&t, format!("unknown statement `{other}`"))),
        };
        self.end_statement()?;
        Ok(stmt)
    }

    fn var_statement(&mut self, start: &Token) -> Result<Statement> {
        let mut decls = Vec::new();
        while let Tok::Ident(_) = self.peek().tok {
            let (coordinate, t) = self.ident("a coordinate name")?;
            let momentum = if self.peek().tok == Tok::Colon {
                self.next();
                Some(self.ident("a momentum name")?.0)
            } else {
                None
            };
            decls.push(VarDecl { coordinate, momentum, line: t.line, column: t.column });
            if self.peek().tok == Tok::Comma {
                self.next();
            }
        }
        if decls.is_empty() {
            return Err(Self::error_at(start, "`var` needs at least one coordinate".into()));
        }
        Ok(Statement::Var(decls))
    }

    fn param_statement(&mut self) -> Result<Statement> {
        let (name, t) = self.ident("a parameter name")?;
        self.expect(Tok::Equals, "`=`")?;
        let value = self.expr()?;
        let kind = match &self.peek().tok {
            Tok::Ident(k) if k == "rational" => Some(ParamKind::Rational),
            Tok::Ident(k) if k == "float" => Some(ParamKind::Float),
            _ => None,
        };
        if kind.is_some() {
            self.next();
        }
        Ok(Statement::Param { name, value, kind, line: t.line, column: t.column })
    }

    fn simulate_block(&mut self) -> Result<SimulateSource> {
        self.expect(Tok::LBrace, "`{` after `simulate`")?;
        let mut sim = SimulateSource::default();
        loop {
            self.skip_newlines();
            if self.peek().tok == Tok::RBrace {
                self.next();
                break;
            }
            let (key, t) = self.ident("a simulate key (`init`, `dt`, `t_end`, `observe`)")?;
            self.expect(Tok::Colon, "`:`")?;
            match key.as_str() {
                "init" => loop {
                    let lhs = self.expr()?;
                    self.expect(Tok::Equals, "`=` in initial condition")?;
                    let rhs = self.expr()?;
                    sim.init.push((lhs, rhs));
                    if self.peek().tok != Tok::Comma {
                        break;
                    }
                    self.next();
                },
                "dt" => sim.dt = Some(self.expr()?),
                "t_end" => sim.t_end = Some(self.expr()?),
                "observe" => loop {
                    sim.observe.push(self.expr()?);
                    if self.peek().tok != Tok::Comma {
                        break;
                    }
                    self.next();
                },
                other => return Err(Self::error_at(&t, format!("unknown simulate key `{other}`"))),
            }
            let t = self.peek().clone();
            if !matches!(t.tok, Tok::Newline | Tok::Semicolon | Tok::RBrace) {
                return Err(Self::error_at(&t, format!("unexpected {} in simulate block", t.tok.describe())));
            }
        }
        self.end_statement()?;
        Ok(sim)
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let t = self.next();
            let rhs = self.term()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), t.line, t.column);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let t = self.next();
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), t.line, t.column);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek().tok {
            Tok::Minus => {
                let t = self.next();
                Ok(Expr::new(ExprKind::Neg(Box::new(self.unary()?)), t.line, t.column))
            }
            Tok::Plus => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        let t = self.next();
        let n = self.next();
        match &n.tok {
            Tok::Number(s) => match s.parse::<u32>() {
                Ok(k) => Ok(Expr::new(ExprKind::Pow(Box::new(base), k), t.line, t.column)),
                Err(_) => Err(Self::error_at(&n, format!("exponent must be a non-negative integer, found `{s}`"))),
            },
            other => Err(Self::error_at(&n, format!("expected an integer exponent, found {}", other.describe()))),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Number(s) => Ok(Expr::new(ExprKind::Number(s.clone()), t.line, t.column)),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "cos" => Some(Func::Cos),
                    "sin" => Some(Func::Sin),
                    "d" => Some(Func::Dot),
                    _ => None,
                };
                match func {
                    Some(func) => {
                        self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::new(ExprKind::Call(func, Box::new(arg)), t.line, t.column))
                    }
                    None => Ok(Expr::new(ExprKind::Ident(name.clone()), t.line, t.column)),
                }
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            other => Err(Self::error_at(&t, format!("expected an expression, found {}", other.describe()))),
        }
    }
}
