//! The Dirac–Bergmann constraint algorithm.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{bracket_affine, AffineForm, PhaseFunction, PhaseSpace, TrigTerm};
use crate::matrix::{RatMatrix, RowBasis};
use crate::parser::StructuredLagrangian;
use crate::scalar::{self, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Primary,
    Secondary,
    Gauge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintClass {
    Unknown,
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: AffineForm,
    pub origin: Origin,
    pub generation: usize,
    pub class: ConstraintClass,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Multiplier {
    Determined(PhaseFunction),
    Free,
}

/// Result of one round of persistence conditions.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    /// No new constraints; some multipliers remain free.
    Closed(Vec<Multiplier>),
    NewConstraints(Vec<Constraint>),
    /// No new constraints and every multiplier is determined.
    MultipliersFixed(Vec<Multiplier>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintAnalysis {
    pub space: PhaseSpace,
    pub hamiltonian: PhaseFunction,
    pub constraints: Vec<Constraint>,
    /// `C[k][l] = {χ_k, χ_l}`.
    pub matrix: RatMatrix,
    pub multipliers: Vec<Multiplier>,
    /// Combinations of constraints spanning the first-class sector.
    pub fcc_basis: Vec<Vec<Scalar>>,
    /// Indices of the constraints chosen as the second-class set.
    pub scc_selection: Vec<usize>,
    pub classified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofReport {
    pub phase: usize,
    pub config: usize,
    pub fcc: usize,
    pub scc: usize,
    pub dimension: usize,
    pub gauge_pending: bool,
}

impl fmt::Display for DofReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} - (2 x {} + 1 x {}) = {} phase-space DOF, {} in configuration space",
            self.dimension, self.fcc, self.scc, self.phase, self.config
        )
    }
}

/// Constant antisymmetric bracket `D[i][j] = {zᵢ, zⱼ}` over named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracStructure {
    pub names: Vec<String>,
    pub matrix: RatMatrix,
}

impl DiracStructure {
    pub fn canonical(space: &PhaseSpace) -> Self {
        DiracStructure { names: space.names(), matrix: space.symplectic() }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn bracket(&self, i: usize, j: usize) -> &Scalar {
        &self.matrix[(i, j)]
    }

    /// Bracket between named variables.
    pub fn bracket_named(&self, a: &str, b: &str) -> Option<Scalar> {
        Some(self.matrix[(self.index_of(a)?, self.index_of(b)?)].clone())
    }

    pub fn bracket_forms(&self, f: &AffineForm, g: &AffineForm) -> Scalar {
        f.bracket(g, &self.matrix)
    }

    pub fn restrict(&self, keep: &[usize]) -> DiracStructure {
        DiracStructure {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            matrix: self.matrix.submatrix(keep, keep),
        }
    }
}

fn label(prefix: &str, k: usize) -> String {
    format!("{prefix}{k}")
}

/// `χ = nᵀ(p − Bq − c)` for each null direction `n` of `K`.
pub fn derive_primary_constraints(l: &StructuredLagrangian) -> Vec<Constraint> {
    let n = l.n();
    let order = l.space.momenta_first_order();
    l.k.null_space()
        .into_iter()
        .enumerate()
        .map(|(idx, nv)| {
            let nb = l.b.vec_mul(&nv);
            let mut coeffs = vec![Scalar::zero(); 2 * n];
            for j in 0..n {
                coeffs[j] = -nb[j].clone();
                coeffs[n + j] = nv[j].clone();
            }
            let constant = -nv.iter().zip(&l.c).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
            Constraint {
                form: AffineForm::new(coeffs, constant).normalized(&order),
                origin: Origin::Primary,
                generation: 0,
                class: ConstraintClass::Unknown,
                label: label("χ", idx + 1),
            }
        })
        .collect()
}

/// `H = ½ (p−Bq−c)ᵀ K⁺ (p−Bq−c) + ½ qᵀUq + dᵀq − offset − Σ trig`.
pub fn canonical_hamiltonian(l: &StructuredLagrangian) -> Result<PhaseFunction> {
    if !l.k.is_symmetric() {
        return Err(Error::InvalidModel("kinetic matrix is not symmetric".into()));
    }
    let n = l.n();
    let dim = 2 * n;
    // w = M z − c with M = [−B | I]
    let mut m = RatMatrix::zeros(n, dim);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -l.b[(i, j)].clone();
        }
        m[(i, n + i)] = Scalar::one();
    }
    let kp = l.k.symmetric_pseudo_inverse();
    let mut quadratic = m.transpose().mul(&kp).mul(&m);
    for i in 0..n {
        for j in 0..n {
            quadratic[(i, j)] += &l.u[(i, j)];
        }
    }
    let kc = kp.mul_vec(&l.c);
    let ckc = kc.iter().zip(&l.c).fold(Scalar::zero(), |acc, (a, b)| acc + a * b);
    let mut linear_coeffs: Vec<Scalar> = m.vec_mul(&kc).into_iter().map(|x| -x).collect();
    for j in 0..n {
        linear_coeffs[j] += &l.d[j];
    }
    let linear = AffineForm::new(linear_coeffs, ckc / scalar::int(2) - &l.offset);
    let trig = l
        .trig
        .iter()
        .map(|t| {
            let mut coeffs = t.argument.coeffs().to_vec();
            coeffs.resize(dim, Scalar::zero());
            TrigTerm {
                argument: AffineForm::new(coeffs, t.argument.constant().clone()),
                weight: -t.weight.clone(),
                ..t.clone()
            }
        })
        .collect();
    PhaseFunction::new(quadratic, linear, trig)
}

fn constraint_matrix(space: &PhaseSpace, constraints: &[Constraint]) -> RatMatrix {
    let j = space.symplectic();
    let m = constraints.len();
    let mut c = RatMatrix::zeros(m, m);
    for a in 0..m {
        for b in a + 1..m {
            let v = constraints[a].form.bracket(&constraints[b].form, &j);
            c[(b, a)] = -v.clone();
            c[(a, b)] = v;
        }
    }
    c
}

fn constraint_basis(constraints: &[Constraint]) -> RowBasis {
    let width = constraints.first().map_or(0, |c| c.form.dim() + 1);
    let mut basis = RowBasis::new(width);
    for c in constraints {
        basis.insert(c.form.augmented());
    }
    basis
}

/// Splits each function into a coefficient vector over a shared basis:
/// the affine coordinates (with constant) and every distinct trig shape.
struct Decomposition {
    width_affine: usize,
    shapes: Vec<TrigTerm>,
    rows: Vec<Vec<Scalar>>,
}

impl Decomposition {
    fn new(funcs: &[PhaseFunction]) -> Self {
        let dim = funcs.first().map_or(0, PhaseFunction::dim);
        let mut shapes: Vec<TrigTerm> = Vec::new();
        for f in funcs {
            for t in f.trig_terms() {
                let unit = TrigTerm { weight: Scalar::one(), ..t.clone() };
                if !shapes.contains(&unit) {
                    shapes.push(unit);
                }
            }
        }
        let rows = funcs
            .iter()
            .map(|f| {
                debug_assert!(f.is_quadratic_free(), "bracket of an affine form with a quadratic is affine");
                let mut row = f.linear().augmented();
                row.extend(shapes.iter().map(|s| {
                    f.trig_terms()
                        .iter()
                        .find(|t| TrigTerm { weight: Scalar::one(), ..(*t).clone() } == *s)
                        .map_or_else(Scalar::zero, |t| t.weight.clone())
                }));
                row
            })
            .collect();
        Decomposition { width_affine: dim + 1, shapes, rows }
    }

    fn combine(&self, weights: &[Scalar]) -> Vec<Scalar> {
        let width = self.width_affine + self.shapes.len();
        let mut out = vec![Scalar::zero(); width];
        for (w, row) in weights.iter().zip(&self.rows) {
            if w.is_zero() {
                continue;
            }
            for (o, x) in out.iter_mut().zip(row) {
                if !x.is_zero() {
                    *o += w * x;
                }
            }
        }
        out
    }

    fn to_function(&self, v: &[Scalar]) -> PhaseFunction {
        let dim = self.width_affine - 1;
        let affine = AffineForm::from_augmented(v[..self.width_affine].to_vec());
        let trig = self
            .shapes
            .iter()
            .zip(&v[self.width_affine..])
            .filter(|(_, w)| !w.is_zero())
            .map(|(s, w)| TrigTerm { weight: w.clone(), ..s.clone() })
            .collect();
        PhaseFunction::new(RatMatrix::zeros(dim, dim), affine, trig).expect("affine plus trig is well formed")
    }
}

fn combination_label(weights: &[Scalar], constraints: &[Constraint]) -> String {
    let mut out = String::new();
    for (w, c) in weights.iter().zip(constraints) {
        if !w.is_zero() {
            scalar::push_term(&mut out, w, &c.label);
        }
    }
    out
}

/// Multipliers from `Cα = −h`: the particular solution with free
/// multipliers set to zero.
fn solve_multipliers(c: &RatMatrix, h: &[PhaseFunction]) -> Vec<Multiplier> {
    let m = c.rows();
    if m == 0 {
        return Vec::new();
    }
    let dim = h[0].dim();
    let ech = c.echelon();
    let null = c.null_space();
    (0..m)
        .map(|l| {
            if null.iter().any(|v| !v[l].is_zero()) {
                return Multiplier::Free;
            }
            let row = ech.pivots.iter().position(|&p| p == l).expect("determined multiplier is a pivot");
            let weights: Vec<Scalar> = ech.transform.row(row).iter().map(|x| -x).collect();
            let refs: Vec<&PhaseFunction> = h.iter().collect();
            Multiplier::Determined(PhaseFunction::combination(dim, &weights, &refs))
        })
        .collect()
}

impl ConstraintAnalysis {
    fn new(space: PhaseSpace, hamiltonian: PhaseFunction, constraints: Vec<Constraint>) -> Self {
        let matrix = constraint_matrix(&space, &constraints);
        ConstraintAnalysis {
            space,
            hamiltonian,
            constraints,
            matrix,
            multipliers: Vec::new(),
            fcc_basis: Vec::new(),
            scc_selection: Vec::new(),
            classified: false,
        }
    }

    /// Primary constraints and the canonical Hamiltonian, before persistence.
    pub fn initial(l: &StructuredLagrangian) -> Result<Self> {
        Ok(Self::new(l.space.clone(), canonical_hamiltonian(l)?, derive_primary_constraints(l)))
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn forms(&self) -> Vec<AffineForm> {
        self.constraints.iter().map(|c| c.form.clone()).collect()
    }

    pub fn fcc_forms(&self) -> Vec<AffineForm> {
        let refs: Vec<&AffineForm> = self.constraints.iter().map(|c| &c.form).collect();
        let order = self.space.momenta_first_order();
        self.fcc_basis
            .iter()
            .map(|w| AffineForm::combination(self.space.dim(), w, &refs).normalized(&order))
            .collect()
    }

    pub fn scc_forms(&self) -> Vec<AffineForm> {
        self.scc_selection.iter().map(|&i| self.constraints[i].form.clone()).collect()
    }

    fn format_residual(&self, f: &PhaseFunction) -> String {
        f.format(&self.space.names())
    }

    /// One round of persistence conditions.
    pub fn persistence_step(&self) -> Result<StepOutcome> {
        let j = self.space.symplectic();
        let h: Vec<PhaseFunction> = self
            .constraints
            .iter()
            .map(|c| bracket_affine(&c.form, &self.hamiltonian, &j))
            .collect::<Result<_>>()?;
        let decomposition = Decomposition::new(&h);
        let mut basis = constraint_basis(&self.constraints);
        let generation = self.constraints.iter().map(|c| c.generation).max().unwrap_or(0) + 1;
        let order = self.space.momenta_first_order();
        let mut fresh = Vec::new();
        for v in self.matrix.left_null_space() {
            let residual = decomposition.combine(&v);
            let residual_fn = decomposition.to_function(&residual);
            let name = combination_label(&v, &self.constraints);
            if residual[decomposition.width_affine..].iter().any(|w| !w.is_zero()) {
                return Err(Error::UnsupportedNonAffineConstraint {
                    constraint: name,
                    residual: self.format_residual(&residual_fn),
                });
            }
            let reduced = basis.reduce(residual[..decomposition.width_affine].to_vec());
            let form = AffineForm::from_augmented(reduced);
            if form.is_zero() {
                continue;
            }
            if form.is_constant() {
                return Err(Error::Inconsistent { constraint: name, residual: self.format_residual(&residual_fn) });
            }
            basis.insert(form.augmented());
            fresh.push(Constraint {
                form: form.normalized(&order),
                origin: Origin::Secondary,
                generation,
                class: ConstraintClass::Unknown,
                label: label("χ", self.constraints.len() + fresh.len() + 1),
            });
        }
        if !fresh.is_empty() {
            return Ok(StepOutcome::NewConstraints(fresh));
        }
        let multipliers = solve_multipliers(&self.matrix, &h);
        if multipliers.iter().all(|m| matches!(m, Multiplier::Determined(_))) {
            Ok(StepOutcome::MultipliersFixed(multipliers))
        } else {
            Ok(StepOutcome::Closed(multipliers))
        }
    }

    /// Classifies the current constraints: first-class combinations from
    /// the null space of `C`, second-class rows chosen greedily in order.
    pub fn classify(&self) -> Result<ConstraintAnalysis> {
        let mut out = self.clone();
        out.fcc_basis = self
            .matrix
            .null_space()
            .into_iter()
            .map(|v| {
                let s = scalar::primitive_scale(&v);
                let mut v: Vec<Scalar> = v.iter().map(|x| x * &s).collect();
                if v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
                    v.iter_mut().for_each(|x| *x = -x.clone());
                }
                v
            })
            .collect();
        out.scc_selection = self.matrix.independent_rows();
        if out.scc_selection.len() % 2 != 0 {
            return Err(Error::OddSecondClassCount(out.scc_selection.len()));
        }
        for (i, c) in out.constraints.iter_mut().enumerate() {
            c.class = if out.scc_selection.contains(&i) { ConstraintClass::Second } else { ConstraintClass::First };
        }
        out.classified = true;
        Ok(out)
    }

    pub fn dof(&self) -> DofReport {
        let dimension = self.space.dim();
        let fcc = self.fcc_basis.len();
        let scc = self.scc_selection.len();
        let phase = dimension - 2 * fcc - scc;
        DofReport { phase, config: phase / 2, fcc, scc, dimension, gauge_pending: fcc > 0 }
    }

    /// Appends gauge conditions (one per first-class constraint) and
    /// reclassifies; every constraint must end up second class.
    pub fn add_gauge_conditions(&self, gauges: &[AffineForm]) -> Result<ConstraintAnalysis> {
        if !self.classified {
            return self.classify()?.add_gauge_conditions(gauges);
        }
        let expected = self.fcc_basis.len();
        if gauges.len() != expected {
            return Err(Error::WrongGaugeCount { expected, got: gauges.len() });
        }
        if gauges.is_empty() {
            return Ok(self.clone());
        }
        let names = self.space.names();
        let order = self.space.momenta_first_order();
        let mut basis = constraint_basis(&self.constraints);
        let mut constraints = self.constraints.clone();
        let generation = constraints.iter().map(|c| c.generation).max().unwrap_or(0) + 1;
        for (i, g) in gauges.iter().enumerate() {
            if g.dim() != self.space.dim() {
                return Err(Error::DimensionMismatch("gauge condition over a different space".into()));
            }
            if !basis.insert(g.augmented()) {
                return Err(Error::DegenerateGauge(format!(
                    "gauge condition {} = 0 is a combination of the existing constraints",
                    g.format(&names)
                )));
            }
            constraints.push(Constraint {
                form: g.normalized(&order),
                origin: Origin::Gauge,
                generation,
                class: ConstraintClass::Unknown,
                label: label("Θ", i + 1),
            });
        }
        let mut out = ConstraintAnalysis::new(self.space.clone(), self.hamiltonian.clone(), constraints);
        out.multipliers = self.multipliers.clone();
        let out = out.classify()?;
        if !out.fcc_basis.is_empty() {
            let remaining: Vec<String> = out.fcc_forms().iter().map(|f| f.format(&names)).collect();
            return Err(Error::DegenerateGauge(format!(
                "first-class freedom remains: {}",
                remaining.join(", ")
            )));
        }
        Ok(out)
    }

    /// Phase variables whose bracket matrix with the first-class
    /// constraints is invertible; usable as gauge conditions `z = 0`.
    pub fn suggest_gauges(&self) -> Result<Vec<AffineForm>> {
        let fcc = self.fcc_forms();
        if fcc.is_empty() {
            return Ok(Vec::new());
        }
        let dim = self.space.dim();
        let j = self.space.symplectic();
        let mut chosen: Vec<AffineForm> = Vec::new();
        for idx in 0..dim {
            if chosen.len() == fcc.len() {
                break;
            }
            let candidate = AffineForm::variable(dim, idx);
            let mut trial = chosen.clone();
            trial.push(candidate);
            let f = RatMatrix::from_rows(
                fcc.iter().map(|psi| trial.iter().map(|g| psi.bracket(g, &j)).collect()).collect(),
            );
            if f.rank() == trial.len() {
                chosen = trial;
            }
        }
        if chosen.len() != fcc.len() {
            return Err(Error::DegenerateGauge("no coordinate gauge fixes the first-class freedom".into()));
        }
        self.add_gauge_conditions(&chosen)?;
        Ok(chosen)
    }

    /// Dirac structure over the chosen second-class constraints.
    pub fn dirac_structure(&self, selection: &[usize]) -> Result<DiracStructure> {
        let j = self.space.symplectic();
        let forms: Vec<&AffineForm> = selection.iter().map(|&i| &self.constraints[i].form).collect();
        let d = dirac_step(&j, &forms, &self.selection_label(selection))?;
        Ok(DiracStructure { names: self.space.names(), matrix: d })
    }

    /// Dirac structure built in stages: each stage is applied with the
    /// bracket produced by the previous ones.
    pub fn dirac_structure_staged(&self, stages: &[Vec<usize>]) -> Result<DiracStructure> {
        let mut d = self.space.symplectic();
        for stage in stages {
            let forms: Vec<&AffineForm> = stage.iter().map(|&i| &self.constraints[i].form).collect();
            d = dirac_step(&d, &forms, &self.selection_label(stage))?;
        }
        Ok(DiracStructure { names: self.space.names(), matrix: d })
    }

    /// Dirac structure over the classification's second-class set.
    pub fn default_dirac_structure(&self) -> Result<DiracStructure> {
        let analysis = if self.classified { self.clone() } else { self.classify()? };
        analysis.dirac_structure(&analysis.scc_selection)
    }

    fn selection_label(&self, selection: &[usize]) -> String {
        selection
            .iter()
            .map(|&i| self.constraints.get(i).map_or_else(|| format!("#{i}"), |c| c.label.clone()))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// `S − S G (GᵀSG)⁻¹ GᵀS`, where the columns of `G` are constraint gradients.
fn dirac_step(s: &RatMatrix, forms: &[&AffineForm], label: &str) -> Result<RatMatrix> {
    if forms.is_empty() {
        return Ok(s.clone());
    }
    let g = RatMatrix::from_rows(forms.iter().map(|f| f.coeffs().to_vec()).collect()).transpose();
    let sg = s.mul(&g);
    let core = g.transpose().mul(&sg);
    let inv = core.inverse().ok_or_else(|| Error::SingularSelection(label.to_string()))?;
    let gs = g.transpose().mul(s);
    Ok(s.sub(&sg.mul(&inv).mul(&gs)))
}

/// Iterates persistence to closure.
pub fn run_constraint_chain(l: &StructuredLagrangian) -> Result<ConstraintAnalysis> {
    let mut analysis = ConstraintAnalysis::initial(l)?;
    // each round adds at least one independent constraint, at most 2n in total
    for _ in 0..=2 * l.n() + 1 {
        match analysis.persistence_step()? {
            StepOutcome::NewConstraints(fresh) => {
                let mut constraints = analysis.constraints.clone();
                constraints.extend(fresh);
                analysis = ConstraintAnalysis::new(analysis.space.clone(), analysis.hamiltonian.clone(), constraints);
            }
            StepOutcome::Closed(m) | StepOutcome::MultipliersFixed(m) => {
                analysis.multipliers = m;
                return Ok(analysis);
            }
        }
    }
    unreachable!("constraint chain exceeded the phase-space dimension")
}

/// Chain plus classification.
pub fn analyze(l: &StructuredLagrangian) -> Result<ConstraintAnalysis> {
    run_constraint_chain(l)?.classify()
}
