//! Expansion of parsed expressions into the structured quadratic form.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind, Func};
use crate::error::{Error, Result};
use crate::expr::{AffineForm, PhaseSpace, TrigKind, TrigTerm};
use crate::matrix::RatMatrix;
use crate::scalar::{self, Scalar};

/// A constant: exact rational times an optional float factor.
///
/// Keeping the factor separate lets `w*x1 - w*x3` factor into a frequency
/// `w` and the exact argument `x1 - x3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coef {
    pub exact: Scalar,
    pub float: Option<f64>,
}

impl Coef {
    pub fn exact(s: Scalar) -> Self {
        Coef { exact: s, float: None }
    }

    pub fn float(x: f64) -> Self {
        Coef { exact: Scalar::one(), float: Some(x) }
    }

    pub fn zero() -> Self {
        Coef::exact(Scalar::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.exact.is_zero()
    }

    pub fn is_exact(&self) -> bool {
        self.float.is_none()
    }

    pub fn value(&self) -> f64 {
        scalar::to_f64(&self.exact) * self.float.unwrap_or(1.0)
    }

    /// Exact value, or the exact binary value of the float.
    pub fn to_scalar_lossy(&self) -> Option<Scalar> {
        match self.float {
            None => Some(self.exact.clone()),
            Some(_) => scalar::from_f64_exact(self.value()),
        }
    }

    fn same_factor(&self, other: &Coef) -> bool {
        self.float.map(f64::to_bits) == other.float.map(f64::to_bits)
    }

    pub fn add(&self, other: &Coef) -> Coef {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.same_factor(other) {
            let sum = &self.exact + &other.exact;
            return if sum.is_zero() { Coef::zero() } else { Coef { exact: sum, float: self.float } };
        }
        Coef::float(self.value() + other.value())
    }

    pub fn mul(&self, other: &Coef) -> Coef {
        let float = match (self.float, other.float) {
            (None, f) | (f, None) => f,
            (Some(a), Some(b)) => Some(a * b),
        };
        let exact = &self.exact * &other.exact;
        if exact.is_zero() {
            Coef::zero()
        } else {
            Coef { exact, float }
        }
    }

    pub fn neg(&self) -> Coef {
        Coef { exact: -self.exact.clone(), float: self.float }
    }

    /// `None` on division by zero.
    pub fn div(&self, other: &Coef) -> Option<Coef> {
        if other.is_zero() {
            return None;
        }
        let float = match (self.float, other.float) {
            (a, None) => a,
            (None, Some(b)) => Some(1.0 / b),
            (Some(a), Some(b)) => Some(a / b),
        };
        Some(Coef { exact: &self.exact / &other.exact, float })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Coord(usize),
    Vel(usize),
    Mom(usize),
}

/// Which identifiers an expression may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Parameter values: constants only.
    Constant,
    /// The Lagrangian: coordinates, velocities, trig.
    Lagrangian,
    /// Gauge conditions, initial data, observables: affine in phase variables.
    Phase,
}

#[derive(Clone, Debug, PartialEq)]
struct TrigPart {
    coef: Coef,
    kind: TrigKind,
    arg: BTreeMap<Vec<Atom>, Coef>,
    text: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Vec<Atom>, Coef>,
    trig: Vec<TrigPart>,
}

impl Poly {
    fn constant(c: Coef) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms, trig: Vec::new() }
    }

    fn atom(a: Atom) -> Poly {
        Poly { terms: BTreeMap::from([(vec![a], Coef::exact(Scalar::one()))]), trig: Vec::new() }
    }

    fn as_constant(&self) -> Option<Coef> {
        if !self.trig.is_empty() {
            return None;
        }
        match self.terms.len() {
            0 => Some(Coef::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    fn add_term(terms: &mut BTreeMap<Vec<Atom>, Coef>, key: Vec<Atom>, c: Coef) {
        let sum = match terms.get(&key) {
            Some(old) => old.add(&c),
            None => c,
        };
        if sum.is_zero() {
            terms.remove(&key);
        } else {
            terms.insert(key, sum);
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (k, c) in other.terms {
            Self::add_term(&mut self.terms, k, c);
        }
        self.trig.extend(other.trig);
        self
    }

    fn scale(mut self, c: &Coef) -> Poly {
        if c.is_zero() {
            return Poly::default();
        }
        for v in self.terms.values_mut() {
            *v = v.mul(c);
        }
        for t in &mut self.trig {
            t.coef = t.coef.mul(c);
        }
        self
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.terms.keys().flatten()
    }
}

fn unsupported(e: &Expr, reason: &str) -> Error {
    Error::UnsupportedTerm { term: e.to_string(), reason: reason.into() }
}

/// Resolves identifiers while expanding.
pub struct Scope<'a> {
    pub space: &'a PhaseSpace,
    pub params: &'a BTreeMap<String, Coef>,
    pub context: Context,
}

impl Scope<'_> {
    fn ident(&self, name: &str, e: &Expr) -> Result<Poly> {
        if name == "pi" {
            return Ok(Poly::constant(Coef::float(std::f64::consts::PI)));
        }
        if let Some(c) = self.params.get(name) {
            return Ok(Poly::constant(c.clone()));
        }
        let n = self.space.n();
        match self.space.index_of(name) {
            Some(i) if i < n && self.context != Context::Constant => Ok(Poly::atom(Atom::Coord(i))),
            Some(i) if i >= n && self.context == Context::Phase => Ok(Poly::atom(Atom::Mom(i - n))),
            Some(_) if self.context == Context::Constant => Err(unsupported(e, "parameter values must be constant")),
            Some(_) => Err(unsupported(e, "momenta cannot appear in the Lagrangian")),
            None => Err(Error::UndeclaredIdentifier { name: name.into(), line: e.line, column: e.column }),
        }
    }

    pub fn expand(&self, e: &Expr) -> Result<Poly> {
        match &e.kind {
            ExprKind::Number(s) => scalar::parse_decimal(s)
                .map(|v| Poly::constant(Coef::exact(v)))
                .ok_or_else(|| Error::Syntax { line: e.line, column: e.column, message: format!("malformed number `{s}`") }),
            ExprKind::Ident(name) => self.ident(name, e),
            ExprKind::Neg(inner) => Ok(self.expand(inner)?.scale(&Coef::exact(-Scalar::one()))),
            ExprKind::Binary(op, l, r) => {
                let (a, b) = (self.expand(l)?, self.expand(r)?);
                match op {
                    BinOp::Add => Ok(a.add(b)),
                    BinOp::Sub => Ok(a.add(b.scale(&Coef::exact(-Scalar::one())))),
                    BinOp::Mul => self.multiply(a, b, e),
                    BinOp::Div => {
                        let denom = b.as_constant().ok_or_else(|| Error::NonConstantDivision {
                            expr: r.to_string(),
                            line: e.line,
                            column: e.column,
                        })?;
                        let inv = Coef::exact(Scalar::one()).div(&denom).ok_or_else(|| unsupported(e, "division by zero"))?;
                        Ok(a.scale(&inv))
                    }
                }
            }
            ExprKind::Pow(base, n) => {
                let b = self.expand(base)?;
                if let Some(c) = b.as_constant() {
                    return Ok(Poly::constant((0..*n).fold(Coef::exact(Scalar::one()), |acc, _| acc.mul(&c))));
                }
                match n {
                    0 => Ok(Poly::constant(Coef::exact(Scalar::one()))),
                    1 => Ok(b),
                    2 => self.multiply(b.clone(), b, e),
                    _ => Err(unsupported(e, "only squares of non-constant expressions are supported")),
                }
            }
            ExprKind::Call(Func::Dot, arg) => {
                if self.context != Context::Lagrangian {
                    return Err(unsupported(e, "velocities are only allowed in the Lagrangian"));
                }
                match &arg.kind {
                    ExprKind::Ident(name) => match self.space.index_of(name) {
                        Some(i) if i < self.space.n() => Ok(Poly::atom(Atom::Vel(i))),
                        Some(_) => Err(unsupported(e, "d() takes a coordinate, not a momentum")),
                        None => Err(Error::UndeclaredIdentifier { name: name.clone(), line: arg.line, column: arg.column }),
                    },
                    _ => Err(unsupported(e, "d() takes a single declared coordinate")),
                }
            }
            ExprKind::Call(func, arg) => {
                let kind = if *func == Func::Cos { TrigKind::Cos } else { TrigKind::Sin };
                let a = self.expand(arg)?;
                if let Some(c) = a.as_constant() {
                    let x = c.value();
                    let v = if kind == TrigKind::Cos { x.cos() } else { x.sin() };
                    return Ok(Poly::constant(Coef::float(v)));
                }
                if self.context != Context::Lagrangian {
                    return Err(unsupported(e, "trigonometric terms are only allowed in the Lagrangian"));
                }
                if !a.trig.is_empty() {
                    return Err(unsupported(e, "nested trigonometric functions"));
                }
                if a.atoms().any(|x| matches!(x, Atom::Vel(_))) {
                    return Err(unsupported(e, "velocity inside a trigonometric argument"));
                }
                if a.degree() > 1 {
                    return Err(unsupported(e, "trigonometric arguments must be affine"));
                }
                Ok(Poly {
                    terms: BTreeMap::new(),
                    trig: vec![TrigPart { coef: Coef::exact(Scalar::one()), kind, arg: a.terms, text: e.to_string() }],
                })
            }
        }
    }

    fn multiply(&self, a: Poly, b: Poly, e: &Expr) -> Result<Poly> {
        if let Some(c) = a.as_constant() {
            return Ok(b.scale(&c));
        }
        if let Some(c) = b.as_constant() {
            return Ok(a.scale(&c));
        }
        if !a.trig.is_empty() || !b.trig.is_empty() {
            return Err(unsupported(e, "trigonometric terms may only be multiplied by constants"));
        }
        let mut terms = BTreeMap::new();
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let mut key: Vec<Atom> = ka.iter().chain(kb).copied().collect();
                if key.len() > 2 {
                    return Err(unsupported(e, "polynomial degree above two"));
                }
                key.sort();
                Poly::add_term(&mut terms, key, ca.mul(cb));
            }
        }
        Ok(Poly { terms, trig: Vec::new() })
    }

    /// Constant value of an expression.
    pub fn constant(&self, e: &Expr) -> Result<Coef> {
        self.expand(e)?.as_constant().ok_or_else(|| unsupported(e, "expected a constant"))
    }

    /// Affine form over phase space with exact coefficients, plus the
    /// constant term as a [`Coef`] (which may be a float).
    pub fn affine(&self, e: &Expr) -> Result<(AffineForm, Coef)> {
        let p = self.expand(e)?;
        if p.degree() > 1 || !p.trig.is_empty() {
            return Err(unsupported(e, "expected an affine expression in phase variables"));
        }
        let n = self.space.n();
        let mut form = AffineForm::zero(2 * n);
        let mut constant = Coef::zero();
        for (k, c) in &p.terms {
            match k.as_slice() {
                [] => constant = c.clone(),
                [atom] => {
                    let exact = if c.is_exact() {
                        c.exact.clone()
                    } else {
                        return Err(Error::NonRationalStructuralCoefficient { term: e.to_string() });
                    };
                    let idx = match atom {
                        Atom::Coord(i) => *i,
                        Atom::Mom(i) => n + i,
                        Atom::Vel(_) => return Err(unsupported(e, "velocities are only allowed in the Lagrangian")),
                    };
                    form.set_coeff(idx, exact);
                }
                _ => unreachable!("degree checked"),
            }
        }
        Ok((form, constant))
    }
}

/// `L = ½ q̇ᵀKq̇ + q̇ᵀ(Bq + c) − (½ qᵀUq + dᵀq) + offset + Σ trig`, with
/// trig arguments over the coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredLagrangian {
    pub space: PhaseSpace,
    #[serde(with = "rows")]
    pub k: RatMatrix,
    #[serde(with = "rows")]
    pub b: RatMatrix,
    #[serde(with = "scalar::serde_scalar_vec")]
    pub c: Vec<Scalar>,
    #[serde(with = "rows")]
    pub u: RatMatrix,
    #[serde(with = "scalar::serde_scalar_vec")]
    pub d: Vec<Scalar>,
    #[serde(with = "scalar::serde_scalar")]
    pub offset: Scalar,
    pub trig: Vec<TrigTerm>,
}

mod rows {
    use crate::matrix::RatMatrix;
    use crate::scalar::{serde_scalar_rows, Scalar};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &RatMatrix, s: S) -> Result<S::Ok, S::Error> {
        serde_scalar_rows::serialize(&m.to_rows(), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RatMatrix, D::Error> {
        let rows: Vec<Vec<Scalar>> = serde_scalar_rows::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        Ok(RatMatrix::from_rows_with_cols(rows, cols))
    }
}

fn monomial_text(space: &PhaseSpace, key: &[Atom]) -> String {
    let parts: Vec<String> = key
        .iter()
        .map(|a| match a {
            Atom::Coord(i) => space.coordinates()[*i].clone(),
            Atom::Vel(i) => format!("d({})", space.coordinates()[*i]),
            Atom::Mom(i) => space.momenta()[*i].clone(),
        })
        .collect();
    if parts.is_empty() {
        "constant term".into()
    } else {
        parts.join("*")
    }
}

impl StructuredLagrangian {
    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// Builds the structured form from an expansion of the Lagrangian.
    pub fn from_poly(space: &PhaseSpace, poly: &Poly) -> Result<Self> {
        let n = space.n();
        let mut k = RatMatrix::zeros(n, n);
        let mut b = RatMatrix::zeros(n, n);
        let mut u = RatMatrix::zeros(n, n);
        let mut c = vec![Scalar::zero(); n];
        let mut d = vec![Scalar::zero(); n];
        let mut offset = Scalar::zero();
        let two = scalar::int(2);
        for (key, coef) in &poly.terms {
            let exact = || {
                if coef.is_exact() {
                    Ok(coef.exact.clone())
                } else {
                    Err(Error::NonRationalStructuralCoefficient { term: monomial_text(space, key) })
                }
            };
            match key.as_slice() {
                [] => offset = coef.to_scalar_lossy().ok_or_else(|| Error::InvalidModel("non-finite constant".into()))?,
                [Atom::Vel(i)] => {
                    c[*i] = coef
                        .to_scalar_lossy()
                        .ok_or_else(|| Error::InvalidModel(format!("non-finite source on d({})", space.coordinates()[*i])))?
                }
                [Atom::Coord(i)] => d[*i] = -exact()?,
                [Atom::Vel(i), Atom::Vel(j)] => {
                    let v = exact()?;
                    if i == j {
                        k[(*i, *i)] = &v * &two;
                    } else {
                        k[(*i, *j)] = v.clone();
                        k[(*j, *i)] = v;
                    }
                }
                [Atom::Coord(j), Atom::Vel(i)] => b[(*i, *j)] = exact()?,
                [Atom::Coord(i), Atom::Coord(j)] => {
                    let v = -exact()?;
                    if i == j {
                        u[(*i, *i)] = &v * &two;
                    } else {
                        u[(*i, *j)] = v.clone();
                        u[(*j, *i)] = v;
                    }
                }
                _ => {
                    return Err(Error::UnsupportedTerm {
                        term: monomial_text(space, key),
                        reason: "not a term of a quadratic Lagrangian".into(),
                    })
                }
            }
        }
        let mut trig = Vec::new();
        for part in &poly.trig {
            if part.coef.is_zero() {
                continue;
            }
            trig.push(Self::trig_term(space, part)?);
        }
        Ok(StructuredLagrangian { space: space.clone(), k, b, c, u, d, offset, trig })
    }

    fn trig_term(space: &PhaseSpace, part: &TrigPart) -> Result<TrigTerm> {
        let n = space.n();
        let mut argument = AffineForm::zero(n);
        let mut factor: Option<Option<f64>> = None;
        let mut phase = 0.0;
        for (key, c) in &part.arg {
            match key.as_slice() {
                [] => phase = c.value(),
                [Atom::Coord(i)] => {
                    match factor {
                        None => factor = Some(c.float),
                        Some(f) if f.map(f64::to_bits) == c.float.map(f64::to_bits) => {}
                        Some(_) => return Err(Error::NonRationalStructuralCoefficient { term: part.text.clone() }),
                    }
                    argument.set_coeff(*i, c.exact.clone());
                }
                _ => return Err(Error::UnsupportedTerm { term: part.text.clone(), reason: "argument must be affine in coordinates".into() }),
            }
        }
        let scale = scalar::primitive_scale(argument.coeffs());
        let argument = argument.scale(&scale);
        let frequency = factor.flatten().unwrap_or(1.0) / scalar::to_f64(&scale);
        Ok(TrigTerm::with_phase(part.kind, part.coef.value(), frequency, argument, phase))
    }

    /// Lagrangian value at `(q, q̇)`.
    pub fn eval(&self, q: &[f64], qdot: &[f64]) -> f64 {
        let n = self.n();
        let (k, b, u) = (self.k.to_f64(), self.b.to_f64(), self.u.to_f64());
        let mut total = scalar::to_f64(&self.offset);
        for i in 0..n {
            total += qdot[i] * scalar::to_f64(&self.c[i]) - scalar::to_f64(&self.d[i]) * q[i];
            for j in 0..n {
                total += 0.5 * k[i][j] * qdot[i] * qdot[j] + b[i][j] * qdot[i] * q[j] - 0.5 * u[i][j] * q[i] * q[j];
            }
        }
        total + self.trig.iter().map(|t| t.eval(q)).sum::<f64>()
    }

    pub fn check_invariants(&self) -> Result<()> {
        if !self.k.is_symmetric() || !self.u.is_symmetric() {
            return Err(Error::InvalidModel("K and U must be symmetric".into()));
        }
        if self.trig.iter().any(|t| t.argument.dim() != self.n()) {
            return Err(Error::InvalidModel("trig arguments must be over coordinates".into()));
        }
        Ok(())
    }
}
