//! The `.sqc` circuit-model format.
//!
//! ```text
//! # inductively shunted junction
//! var x1:P1 x2:P2 x3:P3 X:π
//! param E = 1 float
//! param w = 2 float
//! param L1 = 3/2
//! L = X*(d(x3) - d(x1)) + E*cos(w*X) - (x1 - x2)^2/(2*L1) - (x2 - x3)^2/2
//! gauge x1 = 0
//! simulate { init: x3 = 0.5, P3 = 0.2; dt: 1e-3; t_end: 10; observe: x3 }
//! ```

mod ast;
mod grammar;
mod lexer;
mod structure;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

pub use ast::{BinOp, Expr, ExprKind, Func};
pub use grammar::{ParamKind, SimulateSource, Statement, VarDecl};
pub use structure::{Coef, Context, StructuredLagrangian};

use crate::error::{Error, Result};
use crate::expr::{AffineForm, PhaseSpace};
use crate::scalar;
use structure::Scope;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Coef,
    pub kind: Option<ParamKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeCondition {
    pub text: String,
    pub form: AffineForm,
}

/// `form(z) = value` at `t = 0`; `form` has no constant term.
#[derive(Clone, Debug, PartialEq)]
pub struct InitCondition {
    pub text: String,
    pub form: AffineForm,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub label: String,
    pub form: AffineForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSpec {
    pub init: Vec<InitCondition>,
    pub dt: f64,
    pub t_end: f64,
    pub observe: Vec<Observable>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitModel {
    pub space: PhaseSpace,
    pub params: Vec<Param>,
    pub lagrangian_expr: Expr,
    pub lagrangian: StructuredLagrangian,
    pub gauges: Vec<GaugeCondition>,
    pub simulate: Option<SimulateSpec>,
    statements: Vec<Statement>,
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = grammar::Parser::new(lexer::tokenize(text)?);
    let e = p.expr()?;
    let rest = p.statements()?;
    if !rest.is_empty() {
        return Err(Error::Syntax { line: 1, column: 1, message: format!("trailing input after `{e}`") });
    }
    Ok(e)
}

/// Parses and validates a model.
pub fn parse_model(text: &str) -> Result<CircuitModel> {
    let statements = grammar::Parser::new(lexer::tokenize(text)?).statements()?;
    build(statements, &BTreeMap::new())
}

/// Re-derives the structured Lagrangian from the model's expression.
pub fn validate_structure(model: &CircuitModel) -> Result<StructuredLagrangian> {
    let params = model.param_map();
    let scope = Scope { space: &model.space, params: &params, context: Context::Lagrangian };
    let l = StructuredLagrangian::from_poly(&model.space, &scope.expand(&model.lagrangian_expr)?)?;
    l.check_invariants()?;
    Ok(l)
}

fn reserved(name: &str, line: usize, column: usize) -> Result<()> {
    if grammar::RESERVED.contains(&name) {
        return Err(Error::Syntax { line, column, message: format!("`{name}` is a reserved word") });
    }
    Ok(())
}

fn build(statements: Vec<Statement>, overrides: &BTreeMap<String, Coef>) -> Result<CircuitModel> {
    let mut coordinates = Vec::new();
    let mut momenta = Vec::new();
    for s in &statements {
        if let Statement::Var(decls) = s {
            for d in decls {
                reserved(&d.coordinate, d.line, d.column)?;
                let momentum = d.momentum.clone().unwrap_or_else(|| format!("p_{}", d.coordinate));
                reserved(&momentum, d.line, d.column)?;
                coordinates.push(d.coordinate.clone());
                momenta.push(momentum);
            }
        }
    }
    if coordinates.is_empty() {
        return Err(Error::InvalidModel("no coordinates declared (`var ...`)".into()));
    }
    let space = PhaseSpace::new(coordinates, momenta)?;

    let mut params = Vec::new();
    let mut values: BTreeMap<String, Coef> = BTreeMap::new();
    for s in &statements {
        if let Statement::Param { name, value, kind, line, column } = s {
            reserved(name, *line, *column)?;
            if space.index_of(name).is_some() || values.contains_key(name) {
                return Err(Error::Syntax { line: *line, column: *column, message: format!("`{name}` is already declared") });
            }
            let scope = Scope { space: &space, params: &values, context: Context::Constant };
            let mut v = match overrides.get(name) {
                Some(c) => c.clone(),
                None => scope.constant(value)?,
            };
            match kind {
                Some(ParamKind::Float) => v = Coef::float(v.value()),
                Some(ParamKind::Rational) if !v.is_exact() => {
                    return Err(Error::NonRationalStructuralCoefficient { term: format!("param {name}") })
                }
                _ => {}
            }
            values.insert(name.clone(), v.clone());
            params.push(Param { name: name.clone(), value: v, kind: *kind });
        }
    }
    if let Some(unknown) = overrides.keys().find(|k| !values.contains_key(*k)) {
        return Err(Error::InvalidArgument(format!("unknown parameter `{unknown}`")));
    }

    let mut lagrangians = statements.iter().filter_map(|s| match s {
        Statement::Lagrangian(e) => Some(e),
        _ => None,
    });
    let lagrangian_expr = lagrangians.next().ok_or_else(|| Error::InvalidModel("missing `L = ...`".into()))?.clone();
    if let Some(second) = lagrangians.next() {
        return Err(Error::Syntax { line: second.line, column: second.column, message: "Lagrangian defined twice".into() });
    }
    let lscope = Scope { space: &space, params: &values, context: Context::Lagrangian };
    let lagrangian = StructuredLagrangian::from_poly(&space, &lscope.expand(&lagrangian_expr)?)?;
    lagrangian.check_invariants()?;

    let phase = Scope { space: &space, params: &values, context: Context::Phase };
    let mut gauges = Vec::new();
    let mut simulate = None;
    for s in &statements {
        match s {
            Statement::Gauge { lhs, rhs } => {
                let (a, ca) = phase.affine(lhs)?;
                let (b, cb) = phase.affine(rhs)?;
                let constant = ca
                    .add(&cb.neg())
                    .to_scalar_lossy()
                    .ok_or_else(|| Error::InvalidModel("non-finite gauge constant".into()))?;
                let mut form = a.sub(&b);
                form.set_constant(constant);
                if form.is_constant() {
                    return Err(Error::InvalidModel(format!("gauge condition `{lhs} = {rhs}` has no phase variable")));
                }
                gauges.push(GaugeCondition { text: format!("{lhs} = {rhs}"), form });
            }
            Statement::Simulate(sim) => {
                if simulate.is_some() {
                    return Err(Error::InvalidModel("more than one simulate block".into()));
                }
                simulate = Some(simulate_spec(&phase, sim)?);
            }
            _ => {}
        }
    }
    Ok(CircuitModel { space, params, lagrangian_expr, lagrangian, gauges, simulate, statements })
}

fn simulate_spec(scope: &Scope<'_>, sim: &SimulateSource) -> Result<SimulateSpec> {
    let mut init = Vec::new();
    for (lhs, rhs) in &sim.init {
        let (mut form, c) = scope.affine(lhs)?;
        if form.is_constant() {
            return Err(Error::InvalidModel(format!("initial condition `{lhs}` has no phase variable")));
        }
        let value = scope.constant(rhs)?.value() - c.value() - scalar::to_f64(form.constant());
        form.set_constant(scalar::zero());
        init.push(InitCondition { text: format!("{lhs} = {rhs}"), form, value });
    }
    let number = |e: &Option<Expr>, key: &str| -> Result<f64> {
        let e = e.as_ref().ok_or_else(|| Error::InvalidModel(format!("simulate block needs `{key}`")))?;
        let v = scope.constant(e)?.value();
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidModel(format!("`{key}` must be positive, got {v}")))
        }
    };
    let dt = number(&sim.dt, "dt")?;
    let t_end = number(&sim.t_end, "t_end")?;
    if t_end < dt {
        return Err(Error::InvalidModel("`t_end` must be at least `dt`".into()));
    }
    let mut observe = Vec::new();
    for e in &sim.observe {
        let (mut form, c) = scope.affine(e)?;
        form.set_constant(c.to_scalar_lossy().unwrap_or_else(scalar::zero));
        observe.push(Observable { label: e.to_string(), form });
    }
    Ok(SimulateSpec { init, dt, t_end, observe })
}

impl CircuitModel {
    pub fn param_map(&self) -> BTreeMap<String, Coef> {
        self.params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }

    pub fn param(&self, name: &str) -> Option<&Coef> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Rebuilds the model with some parameters replaced.
    pub fn with_params(&self, overrides: &[(&str, Coef)]) -> Result<CircuitModel> {
        let map: BTreeMap<String, Coef> = overrides.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let mut statements = self.statements.clone();
        for s in &mut statements {
            if let Statement::Param { name, value, .. } = s {
                if let Some(c) = map.get(name) {
                    let text = match c.float {
                        None => c.exact.to_string(),
                        Some(_) => format!("{:?}", c.value()),
                    };
                    *value = parse_expr(&text)?;
                }
            }
        }
        build(statements, &map)
    }

    /// Replaces the gauge conditions.
    pub fn with_gauges(&self, gauges: Vec<GaugeCondition>) -> CircuitModel {
        CircuitModel { gauges, ..self.clone() }
    }

    /// Parses an affine phase-space expression in this model's scope.
    pub fn phase_form(&self, text: &str) -> Result<AffineForm> {
        let e = parse_expr(text)?;
        let params = self.param_map();
        let scope = Scope { space: &self.space, params: &params, context: Context::Phase };
        let (mut form, c) = scope.affine(&e)?;
        form.set_constant(c.to_scalar_lossy().unwrap_or_else(scalar::zero));
        Ok(form)
    }

    /// Evaluates the Lagrangian expression as written, at `(q, q̇)`.
    pub fn eval_lagrangian_expr(&self, q: &[f64], qdot: &[f64]) -> Option<f64> {
        let lookup = |name: &str| -> Option<f64> {
            if name == "pi" {
                return Some(std::f64::consts::PI);
            }
            if let Some(p) = self.param(name) {
                return Some(p.value());
            }
            let coords = self.space.coordinates();
            if let Some(i) = coords.iter().position(|c| c == name) {
                return Some(q[i]);
            }
            let inner = name.strip_prefix("d(")?.strip_suffix(')')?;
            coords.iter().position(|c| c == inner).map(|i| qdot[i])
        };
        self.lagrangian_expr.eval_f64(&lookup)
    }

    /// Source text that re-parses to an equivalent model.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            let _ = writeln!(out, "{}", StatementDisplay(s));
        }
        out
    }
}

struct StatementDisplay<'a>(&'a Statement);

impl fmt::Display for StatementDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Statement::Var(decls) => {
                write!(f, "var")?;
                for d in decls {
                    write!(f, " {}", d.coordinate)?;
                    if let Some(m) = &d.momentum {
                        write!(f, ":{m}")?;
                    }
                }
                Ok(())
            }
            Statement::Param { name, value, kind, .. } => {
                write!(f, "param {name} = {value}")?;
                match kind {
                    Some(ParamKind::Rational) => write!(f, " rational"),
                    Some(ParamKind::Float) => write!(f, " float"),
                    None => Ok(()),
                }
            }
            Statement::Lagrangian(e) => write!(f, "L = {e}"),
            Statement::Gauge { lhs, rhs } => write!(f, "gauge {lhs} = {rhs}"),
            Statement::Simulate(sim) => {
                writeln!(f, "simulate {{")?;
                if !sim.init.is_empty() {
                    let items: Vec<String> = sim.init.iter().map(|(l, r)| format!("{l} = {r}")).collect();
                    writeln!(f, "  init: {}", items.join(", "))?;
                }
                if let Some(dt) = &sim.dt {
                    writeln!(f, "  dt: {dt}")?;
                }
                if let Some(t) = &sim.t_end {
                    writeln!(f, "  t_end: {t}")?;
                }
                if !sim.observe.is_empty() {
                    let items: Vec<String> = sim.observe.iter().map(|e| e.to_string()).collect();
                    writeln!(f, "  observe: {}", items.join(", "))?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    const INDUCTIVE: &str = "
var x1:P1 x2:P2 x3:P3 X:π
param E = 1.25 float
param w = 2 float
param L1 = 3/2
param L2 = 1/2
L = X*(d(x3) - d(x1)) + E*cos(w*X) - (x1 - x2)^2/(2*L1) - (x2 - x3)^2/(2*L2)
";

    #[test]
    fn inductive_structure() {
        let m = parse_model(INDUCTIVE).unwrap();
        let l = &m.lagrangian;
        assert!(l.k.is_zero());
        assert_eq!(l.b[(2, 3)], int(1));
        assert_eq!(l.b[(0, 3)], int(-1));
        assert_eq!(l.u[(0, 0)], rat(2, 3));
        assert_eq!(l.u[(0, 1)], rat(-2, 3));
        assert_eq!(l.trig.len(), 1);
        let t = &l.trig[0];
        assert_eq!((t.amplitude, t.frequency), (1.25, 2.0));
        assert_eq!(t.argument, AffineForm::from_i64(&[0, 0, 0, 1], 0));
    }

    #[test]
    fn free_particle() {
        let m = parse_model("var x\nL = (1/2)*d(x)^2").unwrap();
        assert_eq!(m.lagrangian.k[(0, 0)], int(1));
        assert!(m.lagrangian.b.is_zero() && m.lagrangian.u.is_zero() && m.lagrangian.trig.is_empty());
        assert_eq!(m.space.momenta(), ["p_x"]);
    }

    #[test]
    fn source_term_and_coupling() {
        let m = parse_model(
            "var x1:P1 x2:P2\nparam C = 2\nparam Psi = 0.3 float\nparam E = 1 float\nparam A = 3 float\n\
             L = (C/2)*d(x1)^2 + E*cos(2*pi*x1/A) - x2*d(x1) + d(x2)*Psi",
        )
        .unwrap();
        let l = &m.lagrangian;
        assert_eq!(l.k[(0, 0)], int(2));
        assert_eq!(l.b[(0, 1)], int(-1));
        assert_eq!(scalar::to_f64(&l.c[1]), 0.3);
        assert!((l.trig[0].frequency - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(
            parse_model("var x\nL = y*d(x)"),
            Err(Error::UndeclaredIdentifier { ref name, line: 2, column: 5 }) if name == "y"
        ));
        assert!(matches!(parse_model("var x\nL = d(x)/x"), Err(Error::NonConstantDivision { line: 2, .. })));
        assert!(matches!(parse_model("var x\nL = (d(x)"), Err(Error::Syntax { line: 2, .. })));
        assert!(matches!(parse_model("var x\nL = d(x)^3"), Err(Error::UnsupportedTerm { .. })));
        assert!(matches!(parse_model("var x\nparam w = 1\nL = cos(w*d(x))"), Err(Error::UnsupportedTerm { .. })));
        assert!(matches!(
            parse_model("var x\nparam k = 0.5 float\nL = k*x^2"),
            Err(Error::NonRationalStructuralCoefficient { .. })
        ));
    }

    #[test]
    fn gauge_and_simulate() {
        let text = format!("{INDUCTIVE}gauge 2*x1 + 3*x3 = 0\nsimulate {{\n init: x3 - x1 = 0.5, P3 = 0.2\n dt: 1e-3; t_end: 10\n observe: x3 - x1\n}}\n");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.gauges[0].form, AffineForm::from_i64(&[2, 0, 3, 0, 0, 0, 0, 0], 0));
        let sim = m.simulate.as_ref().unwrap();
        assert_eq!(sim.init.len(), 2);
        assert_eq!(sim.init[0].value, 0.5);
        assert_eq!((sim.dt, sim.t_end), (1e-3, 10.0));
        assert_eq!(sim.observe[0].label, "x3 - x1");
    }

    #[test]
    fn source_round_trip() {
        let text = format!("{INDUCTIVE}gauge x1 = 0\nsimulate {{ init: x3 = 1; dt: 0.01; t_end: 1 }}\n");
        let m = parse_model(&text).unwrap();
        let again = parse_model(&m.to_source()).unwrap();
        assert_eq!(again.lagrangian, m.lagrangian);
        assert_eq!(again.gauges, m.gauges);
        assert_eq!(again.simulate, m.simulate);
        assert_eq!(again.to_source(), m.to_source());
    }

    #[test]
    fn parameter_overrides() {
        let m = parse_model(INDUCTIVE).unwrap();
        let m2 = m.with_params(&[("L1", Coef::exact(int(5)))]).unwrap();
        assert_eq!(m2.lagrangian.u[(0, 0)], rat(1, 5));
        assert!(matches!(m.with_params(&[("nope", Coef::exact(int(1)))]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn literal_text_survives_printing() {
        let e = parse_expr("-(a - b)*c^2/(2*f) - (x - (y - z))").unwrap();
        assert_eq!(e.to_string(), "-(a - b)*c^2/(2*f) - (x - (y - z))");
    }
}
