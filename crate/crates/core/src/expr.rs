//! Phase-space functions and their bracket/substitution algebra.
//!
//! A [`PhaseFunction`] is `½ zᵀQz + l·z + c + Σ trig`, where the quadratic
//! and affine parts are exact and each trig term carries a float physical
//! amplitude and frequency on top of an exact structural weight. Brackets
//! are only ever taken with an affine first argument, so the class is
//! closed under everything the constraint engine needs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::RatMatrix;
use crate::scalar::{self, Scalar};

/// Ordered coordinates `q₁..qₙ` with paired momenta `p₁..pₙ`. Phase index
/// `i < n` is `qᵢ`, index `n + i` is `pᵢ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpace {
    coordinates: Vec<String>,
    momenta: Vec<String>,
}

impl PhaseSpace {
    pub fn new(coordinates: Vec<String>, momenta: Vec<String>) -> Result<Self> {
        if coordinates.len() != momenta.len() {
            return Err(Error::DimensionMismatch("one momentum name per coordinate".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in coordinates.iter().chain(&momenta) {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate phase-space name `{name}`")));
            }
        }
        Ok(PhaseSpace { coordinates, momenta })
    }

    /// Coordinates with default momentum names `p_<name>`.
    pub fn with_default_momenta(coordinates: &[&str]) -> Result<Self> {
        Self::new(
            coordinates.iter().map(|s| s.to_string()).collect(),
            coordinates.iter().map(|s| format!("p_{s}")).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.coordinates.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn momenta(&self) -> &[String] {
        &self.momenta
    }

    pub fn names(&self) -> Vec<String> {
        self.coordinates.iter().chain(&self.momenta).cloned().collect()
    }

    pub fn name(&self, i: usize) -> &str {
        let n = self.n();
        if i < n {
            &self.coordinates[i]
        } else {
            &self.momenta[i - n]
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coordinates
            .iter()
            .position(|c| c == name)
            .or_else(|| self.momenta.iter().position(|m| m == name).map(|i| i + self.n()))
    }

    pub fn is_momentum(&self, i: usize) -> bool {
        i >= self.n()
    }

    /// The canonical structure `J`: `{qᵢ,pⱼ} = δᵢⱼ`.
    pub fn symplectic(&self) -> RatMatrix {
        let n = self.n();
        let mut j = RatMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = Scalar::one();
            j[(n + i, i)] = -Scalar::one();
        }
        j
    }

    /// Momenta first, then coordinates: the order used to pick the sign of
    /// a normalized constraint.
    pub fn momenta_first_order(&self) -> Vec<usize> {
        (self.n()..self.dim()).chain(0..self.n()).collect()
    }
}

/// `a·z + c` with exact coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineForm {
    #[serde(with = "scalar::serde_scalar_vec")]
    coeffs: Vec<Scalar>,
    #[serde(with = "scalar::serde_scalar")]
    constant: Scalar,
}

impl AffineForm {
    pub fn new(coeffs: Vec<Scalar>, constant: Scalar) -> Self {
        AffineForm { coeffs, constant }
    }

    pub fn zero(dim: usize) -> Self {
        AffineForm { coeffs: vec![Scalar::zero(); dim], constant: Scalar::zero() }
    }

    pub fn variable(dim: usize, i: usize) -> Self {
        let mut f = Self::zero(dim);
        f.coeffs[i] = Scalar::one();
        f
    }

    pub fn constant_form(dim: usize, c: Scalar) -> Self {
        AffineForm { coeffs: vec![Scalar::zero(); dim], constant: c }
    }

    pub fn from_i64(coeffs: &[i64], constant: i64) -> Self {
        AffineForm { coeffs: coeffs.iter().map(|&c| scalar::int(c)).collect(), constant: scalar::int(constant) }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Scalar {
        &self.coeffs[i]
    }

    pub fn constant(&self) -> &Scalar {
        &self.constant
    }

    pub fn set_coeff(&mut self, i: usize, value: Scalar) {
        self.coeffs[i] = value;
    }

    pub fn set_constant(&mut self, value: Scalar) {
        self.constant = value;
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.is_constant()
    }

    /// True when no variable appears.
    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Coefficients followed by the constant.
    pub fn augmented(&self) -> Vec<Scalar> {
        let mut v = self.coeffs.clone();
        v.push(self.constant.clone());
        v
    }

    pub fn from_augmented(mut v: Vec<Scalar>) -> Self {
        let constant = v.pop().expect("augmented vector has a constant slot");
        AffineForm { coeffs: v, constant }
    }

    pub fn add(&self, other: &AffineForm) -> AffineForm {
        assert_eq!(self.dim(), other.dim(), "affine forms over different spaces");
        AffineForm {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            constant: &self.constant + &other.constant,
        }
    }

    pub fn sub(&self, other: &AffineForm) -> AffineForm {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, s: &Scalar) -> AffineForm {
        AffineForm { coeffs: self.coeffs.iter().map(|a| a * s).collect(), constant: &self.constant * s }
    }

    /// Linear combination `Σ wₖ fₖ`.
    pub fn combination(dim: usize, weights: &[Scalar], forms: &[&AffineForm]) -> AffineForm {
        weights
            .iter()
            .zip(forms)
            .filter(|(w, _)| !w.is_zero())
            .fold(AffineForm::zero(dim), |acc, (w, f)| acc.add(&f.scale(w)))
    }

    /// Exact bracket `{self, other}` under the constant structure `s`.
    pub fn bracket(&self, other: &AffineForm, structure: &RatMatrix) -> Scalar {
        let row = structure.vec_mul(&self.coeffs);
        row.iter()
            .zip(&other.coeffs)
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .fold(Scalar::zero(), |acc, (a, b)| acc + a * b)
    }

    pub fn eval(&self, z: &[Scalar]) -> Scalar {
        self.coeffs.iter().zip(z).fold(self.constant.clone(), |acc, (a, x)| acc + a * x)
    }

    pub fn eval_f64(&self, z: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(z)
            .filter(|(a, _)| !a.is_zero())
            .fold(scalar::to_f64(&self.constant), |acc, (a, x)| acc + scalar::to_f64(a) * x)
    }

    pub fn pullback(&self, map: &AffineMap) -> AffineForm {
        assert_eq!(self.dim(), map.target_dim(), "pullback dimension mismatch");
        let coeffs = map.matrix.vec_mul(&self.coeffs);
        let shift = self.coeffs.iter().zip(&map.offset).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
        AffineForm { coeffs, constant: &self.constant + shift }
    }

    /// Keeps only the listed variables; fails if a dropped variable appears.
    pub fn restrict(&self, keep: &[usize], names: &[String]) -> Result<AffineForm> {
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() && !keep.contains(&i) {
                return Err(Error::DimensionMismatch(format!("`{}` still present after restriction", names[i])));
            }
        }
        Ok(AffineForm { coeffs: keep.iter().map(|&i| self.coeffs[i].clone()).collect(), constant: self.constant.clone() })
    }

    /// Scales to a primitive integer coefficient vector whose leading
    /// entry (in `order`) is positive. The constant scales along.
    pub fn normalized(&self, order: &[usize]) -> AffineForm {
        if self.is_constant() {
            return self.clone();
        }
        let mut factor = scalar::primitive_scale(&self.coeffs);
        let lead = order.iter().map(|&i| &self.coeffs[i]).find(|c| !c.is_zero());
        if lead.is_some_and(|c| c.is_negative()) {
            factor = -factor;
        }
        self.scale(&factor)
    }

    pub fn format(&self, names: &[String]) -> String {
        let mut out = String::new();
        for (c, name) in self.coeffs.iter().zip(names) {
            if !c.is_zero() {
                scalar::push_term(&mut out, c, name);
            }
        }
        if !self.constant.is_zero() || out.is_empty() {
            scalar::push_term(&mut out, &self.constant, "");
        }
        out
    }
}

/// `z = A w + b`, mapping a source space (dimension `A.cols`) into a target
/// space (dimension `A.rows`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineMap {
    pub matrix: RatMatrix,
    pub offset: Vec<Scalar>,
}

impl AffineMap {
    pub fn linear(matrix: RatMatrix) -> Self {
        let offset = vec![Scalar::zero(); matrix.rows()];
        AffineMap { matrix, offset }
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cos,
    Sin,
}

impl TrigKind {
    fn apply(self, x: f64) -> f64 {
        match self {
            TrigKind::Cos => x.cos(),
            TrigKind::Sin => x.sin(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            TrigKind::Cos => "cos",
            TrigKind::Sin => "sin",
        }
    }
}

/// `amplitude · weight · kind(frequency · argument(z) + phase)`.
///
/// `weight` is exact and absorbs every structural factor picked up under
/// brackets and scalar multiplication; zero tests look only at it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    #[serde(with = "scalar::serde_scalar")]
    pub weight: Scalar,
    pub frequency: f64,
    pub phase: f64,
    pub argument: AffineForm,
    pub kind: TrigKind,
}

impl TrigTerm {
    pub fn new(kind: TrigKind, amplitude: f64, frequency: f64, argument: AffineForm) -> Self {
        Self::with_phase(kind, amplitude, frequency, argument, 0.0)
    }

    pub fn with_phase(kind: TrigKind, amplitude: f64, frequency: f64, argument: AffineForm, phase: f64) -> Self {
        TrigTerm { amplitude, weight: Scalar::one(), frequency, phase, argument, kind }.canonical()
    }

    /// Fixes the sign conventions so equal functions compare equal:
    /// positive frequency, positive leading argument coefficient.
    fn canonical(mut self) -> Self {
        if self.frequency < 0.0 {
            self.frequency = -self.frequency;
            self.argument = self.argument.scale(&-Scalar::one());
        }
        let lead = self.argument.coeffs().iter().find(|c| !c.is_zero());
        if lead.is_some_and(|c| c.is_negative()) {
            self.argument = self.argument.scale(&-Scalar::one());
            self.phase = -self.phase;
            if self.kind == TrigKind::Sin {
                self.weight = -self.weight;
            }
        }
        if self.phase == 0.0 {
            self.phase = 0.0; // drop a negative zero
        }
        self
    }

    fn same_shape(&self, other: &TrigTerm) -> bool {
        self.kind == other.kind
            && self.amplitude.to_bits() == other.amplitude.to_bits()
            && self.frequency.to_bits() == other.frequency.to_bits()
            && self.phase.to_bits() == other.phase.to_bits()
            && self.argument == other.argument
    }

    pub fn coefficient_f64(&self) -> f64 {
        self.amplitude * scalar::to_f64(&self.weight)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.coefficient_f64() * self.kind.apply(self.frequency * self.argument.eval_f64(z) + self.phase)
    }

    fn format(&self, names: &[String]) -> String {
        let arg = self.argument.format(names);
        let mut inner = if self.frequency == 1.0 { format!("({arg})") } else { format!("{}*({arg})", self.frequency) };
        if self.phase != 0.0 {
            let _ = write!(inner, " + {}", self.phase);
        }
        format!("{}({inner})", self.kind.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFunction {
    quadratic: RatMatrix,
    linear: AffineForm,
    trig: Vec<TrigTerm>,
}

impl PhaseFunction {
    pub fn zero(dim: usize) -> Self {
        PhaseFunction { quadratic: RatMatrix::zeros(dim, dim), linear: AffineForm::zero(dim), trig: Vec::new() }
    }

    /// `½ zᵀQz + linear + Σ trig`; `quadratic` must be symmetric.
    pub fn new(quadratic: RatMatrix, linear: AffineForm, trig: Vec<TrigTerm>) -> Result<Self> {
        if !quadratic.is_symmetric() {
            return Err(Error::DimensionMismatch("quadratic part must be symmetric".into()));
        }
        let dim = linear.dim();
        if quadratic.rows() != dim || trig.iter().any(|t| t.argument.dim() != dim) {
            return Err(Error::DimensionMismatch("phase function parts over different spaces".into()));
        }
        let mut f = PhaseFunction { quadratic, linear, trig: Vec::new() };
        f.push_trig_terms(trig);
        Ok(f)
    }

    pub fn from_affine(f: AffineForm) -> Self {
        let dim = f.dim();
        PhaseFunction { quadratic: RatMatrix::zeros(dim, dim), linear: f, trig: Vec::new() }
    }

    pub fn from_trig(dim: usize, term: TrigTerm) -> Self {
        let mut f = Self::zero(dim);
        f.push_trig_terms(vec![term]);
        f
    }

    /// Half the square of an affine form, `½ (a·z + c)²`.
    pub fn half_square(f: &AffineForm) -> Self {
        let dim = f.dim();
        let mut q = RatMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                q[(i, j)] = f.coeff(i) * f.coeff(j);
            }
        }
        let linear = AffineForm::new(
            f.coeffs().iter().map(|a| a * f.constant()).collect(),
            f.constant() * f.constant() / scalar::int(2),
        );
        PhaseFunction { quadratic: q, linear, trig: Vec::new() }
    }

    /// Product of two affine forms.
    pub fn product(f: &AffineForm, g: &AffineForm) -> Self {
        let dim = f.dim();
        let mut q = RatMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                q[(i, j)] = f.coeff(i) * g.coeff(j) + f.coeff(j) * g.coeff(i);
            }
        }
        let linear = AffineForm::new(
            (0..dim).map(|i| f.coeff(i) * g.constant() + g.coeff(i) * f.constant()).collect(),
            f.constant() * g.constant(),
        );
        PhaseFunction { quadratic: q, linear, trig: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn quadratic(&self) -> &RatMatrix {
        &self.quadratic
    }

    pub fn linear(&self) -> &AffineForm {
        &self.linear
    }

    pub fn trig_terms(&self) -> &[TrigTerm] {
        &self.trig
    }

    pub fn is_quadratic_free(&self) -> bool {
        self.quadratic.is_zero()
    }

    /// Structural zero: every exact part vanishes and no trig term survives.
    pub fn is_zero(&self) -> bool {
        self.quadratic.is_zero() && self.linear.is_zero() && self.trig.is_empty()
    }

    /// The function as an affine form, if it has no quadratic or trig part.
    pub fn as_affine(&self) -> Option<&AffineForm> {
        (self.quadratic.is_zero() && self.trig.is_empty()).then_some(&self.linear)
    }

    fn push_trig_terms(&mut self, terms: Vec<TrigTerm>) {
        for term in terms {
            let term = term.canonical();
            if term.weight.is_zero() {
                continue;
            }
            if let Some(existing) = self.trig.iter_mut().find(|t| t.same_shape(&term)) {
                existing.weight += term.weight;
            } else {
                self.trig.push(term);
            }
        }
        self.trig.retain(|t| !t.weight.is_zero());
    }

    pub fn add(&self, other: &PhaseFunction) -> PhaseFunction {
        assert_eq!(self.dim(), other.dim(), "phase functions over different spaces");
        let mut out = PhaseFunction {
            quadratic: self.quadratic.add(&other.quadratic),
            linear: self.linear.add(&other.linear),
            trig: self.trig.clone(),
        };
        out.push_trig_terms(other.trig.clone());
        out
    }

    pub fn sub(&self, other: &PhaseFunction) -> PhaseFunction {
        self.add(&other.scale(&-Scalar::one()))
    }

    pub fn scale(&self, s: &Scalar) -> PhaseFunction {
        if s.is_zero() {
            return PhaseFunction::zero(self.dim());
        }
        PhaseFunction {
            quadratic: self.quadratic.scale(s),
            linear: self.linear.scale(s),
            trig: self.trig.iter().map(|t| TrigTerm { weight: &t.weight * s, ..t.clone() }).collect(),
        }
    }

    pub fn combination(dim: usize, weights: &[Scalar], funcs: &[&PhaseFunction]) -> PhaseFunction {
        weights
            .iter()
            .zip(funcs)
            .filter(|(w, _)| !w.is_zero())
            .fold(PhaseFunction::zero(dim), |acc, (w, f)| acc.add(&f.scale(w)))
    }

    /// Derivative of the function along the constant direction `w`:
    /// `Σⱼ wⱼ ∂/∂zⱼ`.
    pub fn directional_derivative(&self, w: &[Scalar]) -> PhaseFunction {
        let dim = self.dim();
        let coeffs = self.quadratic.mul_vec(w);
        let constant = w.iter().zip(self.linear.coeffs()).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
        let mut out = PhaseFunction::from_affine(AffineForm::new(coeffs, constant));
        let mut terms = Vec::new();
        for t in &self.trig {
            let s = w.iter().zip(t.argument.coeffs()).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
            if s.is_zero() {
                continue;
            }
            let (kind, weight) = match t.kind {
                TrigKind::Cos => (TrigKind::Sin, -(&t.weight * &s)),
                TrigKind::Sin => (TrigKind::Cos, &t.weight * &s),
            };
            terms.push(TrigTerm {
                amplitude: t.amplitude * t.frequency,
                weight,
                frequency: t.frequency,
                phase: t.phase,
                argument: t.argument.clone(),
                kind,
            });
        }
        out.push_trig_terms(terms);
        debug_assert_eq!(out.dim(), dim);
        out
    }

    /// Exact gradient of the polynomial part, one affine form per variable.
    pub fn polynomial_gradient(&self) -> Vec<AffineForm> {
        (0..self.dim())
            .map(|i| AffineForm::new(self.quadratic.row(i).to_vec(), self.linear.coeff(i).clone()))
            .collect()
    }

    pub fn pullback(&self, map: &AffineMap) -> PhaseFunction {
        assert_eq!(self.dim(), map.target_dim(), "pullback dimension mismatch");
        let a = &map.matrix;
        let b = &map.offset;
        let quadratic = a.transpose().mul(&self.quadratic).mul(a);
        let qb = self.quadratic.mul_vec(b);
        let b_q_b = qb.iter().zip(b).fold(Scalar::zero(), |acc, (x, y)| acc + x * y);
        let lin_from_quad = AffineForm::new(a.vec_mul(&qb), b_q_b / scalar::int(2));
        let linear = self.linear.pullback(map).add(&lin_from_quad);
        let mut out = PhaseFunction { quadratic, linear, trig: Vec::new() };
        out.push_trig_terms(
            self.trig.iter().map(|t| TrigTerm { argument: t.argument.pullback(map), ..t.clone() }).collect(),
        );
        out
    }

    pub fn substitute(&self, s: &AffineSubstitution) -> Result<PhaseFunction> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch("substitution over a different space".into()));
        }
        Ok(self.pullback(&s.as_map()))
    }

    pub fn depends_on(&self, i: usize) -> bool {
        !self.linear.coeff(i).is_zero()
            || self.quadratic.row(i).iter().any(|x| !x.is_zero())
            || self.trig.iter().any(|t| !t.argument.coeff(i).is_zero())
    }

    /// Re-expresses the function over the listed variables only.
    pub fn restrict(&self, keep: &[usize], names: &[String]) -> Result<PhaseFunction> {
        if let Some(i) = (0..self.dim()).find(|i| !keep.contains(i) && self.depends_on(*i)) {
            return Err(Error::DimensionMismatch(format!("`{}` still present after restriction", names[i])));
        }
        let quadratic = self.quadratic.submatrix(keep, keep);
        let linear = self.linear.restrict(keep, names)?;
        let trig = self
            .trig
            .iter()
            .map(|t| Ok(TrigTerm { argument: t.argument.restrict(keep, names)?, ..t.clone() }))
            .collect::<Result<Vec<_>>>()?;
        PhaseFunction::new(quadratic, linear, trig)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let q = self.quadratic.to_f64();
        let mut quad = 0.0;
        for (i, row) in q.iter().enumerate() {
            for (j, qij) in row.iter().enumerate() {
                quad += qij * z[i] * z[j];
            }
        }
        0.5 * quad + self.linear.eval_f64(z) + self.trig.iter().map(|t| t.eval(z)).sum::<f64>()
    }

    pub fn format(&self, names: &[String]) -> String {
        let mut out = String::new();
        let half = scalar::rat(1, 2);
        for i in 0..self.dim() {
            let c = &self.quadratic[(i, i)] * &half;
            if !c.is_zero() {
                scalar::push_term(&mut out, &c, &format!("{}^2", names[i]));
            }
            for j in i + 1..self.dim() {
                let c = &self.quadratic[(i, j)];
                if !c.is_zero() {
                    scalar::push_term(&mut out, c, &format!("{}*{}", names[i], names[j]));
                }
            }
        }
        for (c, name) in self.linear.coeffs().iter().zip(names) {
            if !c.is_zero() {
                scalar::push_term(&mut out, c, name);
            }
        }
        for t in &self.trig {
            let c = t.coefficient_f64();
            let body = t.format(names);
            if out.is_empty() {
                if c == 1.0 {
                    out.push_str(&body);
                } else if c == -1.0 {
                    let _ = write!(out, "-{body}");
                } else {
                    let _ = write!(out, "{c}*{body}");
                }
            } else {
                let sign = if c < 0.0 { " - " } else { " + " };
                let mag = c.abs();
                if mag == 1.0 {
                    let _ = write!(out, "{sign}{body}");
                } else {
                    let _ = write!(out, "{sign}{mag}*{body}");
                }
            }
        }
        if !self.linear.constant().is_zero() || out.is_empty() {
            scalar::push_term(&mut out, self.linear.constant(), "");
        }
        out
    }
}

impl Serialize for PhaseFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(with = "scalar::serde_scalar_rows")]
            quadratic: &'a [Vec<Scalar>],
            linear: &'a AffineForm,
            trig: &'a [TrigTerm],
        }
        Repr { quadratic: &self.quadratic.to_rows(), linear: &self.linear, trig: &self.trig }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhaseFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            #[serde(with = "scalar::serde_scalar_rows")]
            quadratic: Vec<Vec<Scalar>>,
            linear: AffineForm,
            trig: Vec<TrigTerm>,
        }
        let r = Repr::deserialize(d)?;
        let dim = r.linear.dim();
        let q = RatMatrix::from_rows_with_cols(r.quadratic, dim);
        PhaseFunction::new(q, r.linear, r.trig).map_err(serde::de::Error::custom)
    }
}

/// Map from eliminated variables to affine forms over the others.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSubstitution {
    dim: usize,
    map: BTreeMap<usize, AffineForm>,
}

impl AffineSubstitution {
    pub fn empty(dim: usize) -> Self {
        AffineSubstitution { dim, map: BTreeMap::new() }
    }

    /// Fails unless the substitution is in solved form: no substituted
    /// variable appears in any image.
    pub fn new(dim: usize, map: BTreeMap<usize, AffineForm>, names: &[String]) -> Result<Self> {
        for form in map.values() {
            if form.dim() != dim {
                return Err(Error::DimensionMismatch("substitution image over a different space".into()));
            }
            if let Some(&v) = map.keys().find(|&&v| !form.coeff(v).is_zero()) {
                return Err(Error::NotSolvedForm(names.get(v).cloned().unwrap_or_else(|| v.to_string())));
            }
        }
        Ok(AffineSubstitution { dim, map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&AffineForm> {
        self.map.get(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &AffineForm)> {
        self.map.iter()
    }

    pub fn eliminated(&self) -> Vec<usize> {
        self.map.keys().copied().collect()
    }

    pub fn as_map(&self) -> AffineMap {
        let mut matrix = RatMatrix::identity(self.dim);
        let mut offset = vec![Scalar::zero(); self.dim];
        for (&v, form) in &self.map {
            for j in 0..self.dim {
                matrix[(v, j)] = form.coeff(j).clone();
            }
            offset[v] = form.constant().clone();
        }
        AffineMap { matrix, offset }
    }

    pub fn apply_affine(&self, f: &AffineForm) -> AffineForm {
        f.pullback(&self.as_map())
    }
}

/// `{f, g}` under the constant bracket `structure`.
pub fn bracket_affine(f: &AffineForm, g: &PhaseFunction, structure: &RatMatrix) -> Result<PhaseFunction> {
    if f.dim() != g.dim() || structure.rows() != f.dim() || !structure.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "bracket of forms over dimensions {} and {} with a {}x{} structure",
            f.dim(),
            g.dim(),
            structure.rows(),
            structure.cols()
        )));
    }
    let direction = structure.vec_mul(f.coeffs());
    Ok(g.directional_derivative(&direction))
}

/// Canonical Poisson bracket `{f, g}` with an affine first argument.
pub fn poisson_bracket_affine(space: &PhaseSpace, f: &AffineForm, g: &PhaseFunction) -> Result<PhaseFunction> {
    bracket_affine(f, g, &space.symplectic())
}

/// Applies a solved-form substitution to a phase function.
pub fn substitute_affine(g: &PhaseFunction, s: &AffineSubstitution) -> Result<PhaseFunction> {
    let out = g.substitute(s)?;
    debug_assert!(s.eliminated().iter().all(|&v| !out.depends_on(v)));
    Ok(out)
}
