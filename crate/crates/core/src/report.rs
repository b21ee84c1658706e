//! Analysis reports: assembly, JSON and Markdown rendering, golden comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirac::{ConstraintAnalysis, ConstraintClass, DiracStructure, Multiplier, Origin};
use crate::error::{Error, Result};
use crate::expr::AffineForm;
use crate::matrix::same_span;
use crate::parser::CircuitModel;
use crate::pipeline::Pipeline;
use crate::reduction::{chart_from_forms, CanonicalChart, CommutatorEntry};
use crate::scalar::{self, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: ModelSection,
    pub constraints: Vec<ConstraintEntry>,
    pub classification: ClassificationSection,
    pub dof: DofSection,
    pub brackets: BracketSection,
    pub reduction: Option<ReductionSection>,
    pub chart: Option<ChartSection>,
    pub hamiltonian: HamiltonianSection,
    pub commutators: Option<Vec<CommutatorEntry>>,
    pub dynamics: Option<DynamicsSection>,
    pub warnings: Vec<String>,
    /// Present only when golden data was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<ComparisonEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub coordinates: Vec<String>,
    pub momenta: Vec<String>,
    pub params: BTreeMap<String, String>,
    pub lagrangian: String,
    pub gauges: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub label: String,
    pub origin: Origin,
    pub generation: usize,
    pub class: ConstraintClass,
    pub text: String,
    pub form: AffineForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormEntry {
    pub name: String,
    pub text: String,
    pub form: AffineForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierEntry {
    pub constraint: String,
    /// `None` when the multiplier is left arbitrary.
    pub value: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSection {
    #[serde(with = "scalar::serde_scalar_rows")]
    pub matrix: Vec<Vec<Scalar>>,
    pub first_class: Vec<FormEntry>,
    pub second_class: Vec<String>,
    pub multipliers: Vec<MultiplierEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofSection {
    pub phase: usize,
    pub config: usize,
    pub fcc: usize,
    pub scc: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub a: String,
    pub b: String,
    #[serde(with = "scalar::serde_scalar")]
    pub value: Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSection {
    /// Which constraints the structure was built from.
    pub stage: String,
    pub names: Vec<String>,
    #[serde(with = "scalar::serde_scalar_rows")]
    pub matrix: Vec<Vec<Scalar>>,
    pub nonzero: Vec<BracketEntry>,
    pub checks: Option<CheckSection>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSection {
    pub seed: u64,
    pub cases: usize,
    pub antisymmetry: bool,
    pub bilinearity: bool,
    pub constraints_central: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSection {
    pub retained: Vec<String>,
    pub substitution: Vec<FormEntry>,
    #[serde(with = "scalar::serde_scalar_rows")]
    pub structure: Vec<Vec<Scalar>>,
    pub hamiltonian: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSection {
    pub variables: Vec<String>,
    pub coordinates: Vec<FormEntry>,
    pub inverse: Vec<FormEntry>,
    pub canonical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSection {
    pub canonical: String,
    pub reduced: Option<String>,
    pub chart: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSummary {
    pub label: String,
    pub initial: f64,
    pub last: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub epsilon: f64,
    /// Sup-norm deviation per observable.
    pub errors: Vec<f64>,
    pub sup_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeRun {
    pub gauges: Vec<String>,
    pub nonzero: Vec<BracketEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSweepSection {
    pub runs: Vec<GaugeRun>,
    pub observables: Vec<String>,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSection {
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub variables: Vec<String>,
    pub initial: Vec<f64>,
    pub last: Vec<f64>,
    pub energy_initial: f64,
    pub energy_drift: f64,
    pub observables: Vec<ObservableSummary>,
    pub oracle: Option<OracleSection>,
    pub gauge_sweep: Option<GaugeSweepSection>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub item: String,
    pub ok: bool,
    pub detail: String,
}

fn form_entry(name: impl Into<String>, form: &AffineForm, names: &[String]) -> FormEntry {
    FormEntry { name: name.into(), text: form.format(names), form: form.clone() }
}

/// Nonzero upper-triangle entries.
pub fn nonzero_brackets(d: &DiracStructure) -> Vec<BracketEntry> {
    let n = d.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = d.bracket(i, j);
            if !v.is_zero() {
                out.push(BracketEntry { a: d.names[i].clone(), b: d.names[j].clone(), value: v.clone() });
            }
        }
    }
    out
}

fn classification(a: &ConstraintAnalysis) -> ClassificationSection {
    let names = a.space.names();
    let multipliers = a
        .multipliers
        .iter()
        .zip(&a.constraints)
        .map(|(m, c)| MultiplierEntry {
            constraint: c.label.clone(),
            value: match m {
                Multiplier::Determined(f) => Some(f.format(&names)),
                Multiplier::Free => None,
            },
        })
        .collect();
    ClassificationSection {
        matrix: a.matrix.to_rows(),
        first_class: a.fcc_forms().iter().enumerate().map(|(i, f)| form_entry(format!("Φ{}", i + 1), f, &names)).collect(),
        second_class: a.scc_selection.iter().map(|&i| a.constraints[i].label.clone()).collect(),
        multipliers,
    }
}

fn chart_section(chart: &CanonicalChart, structure: &DiracStructure) -> ChartSection {
    let names = &chart.source_names;
    let chart_names = chart.chart_names();
    ChartSection {
        variables: names.clone(),
        coordinates: chart_names
            .iter()
            .enumerate()
            .map(|(i, n)| form_entry(n.clone(), &chart.coordinate(i), names))
            .collect(),
        inverse: names.iter().enumerate().map(|(i, n)| form_entry(n.clone(), &chart.source_in_chart(i), &chart_names)).collect(),
        canonical: chart.is_canonical_for(structure),
    }
}

/// Randomized exact checks of the bracket in `d` and of the centrality of
/// the constraints it was built from.
pub fn bracket_checks(d: &DiracStructure, constraints: &[AffineForm], seed: u64, cases: usize) -> CheckSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = d.dim();
    let draw = |rng: &mut ChaCha8Rng| -> AffineForm {
        AffineForm::new(
            (0..dim).map(|_| scalar::rat(rng.gen_range(-9..=9), rng.gen_range(1..=5))).collect(),
            scalar::int(rng.gen_range(-5..=5)),
        )
    };
    let (mut antisymmetry, mut bilinearity, mut central) = (true, true, true);
    for _ in 0..cases {
        let (f, g, h) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let s = scalar::rat(rng.gen_range(-7..=7), rng.gen_range(1..=4));
        antisymmetry &= d.bracket_forms(&f, &g) == -d.bracket_forms(&g, &f);
        bilinearity &= d.bracket_forms(&f.scale(&s).add(&g), &h) == s.clone() * d.bracket_forms(&f, &h) + d.bracket_forms(&g, &h);
        for c in constraints {
            central &= d.bracket_forms(c, &f).is_zero();
        }
    }
    CheckSection { seed, cases, antisymmetry, bilinearity, constraints_central: central }
}

/// Report for the analysis and reduction stages of a pipeline run.
pub fn build_report(model: &CircuitModel, pipeline: &Pipeline, seed: Option<u64>) -> Result<AnalysisReport> {
    let a = &pipeline.analysis;
    let names = a.space.names();
    let final_analysis = pipeline.final_analysis();
    let constraints = a
        .constraints
        .iter()
        .map(|c| ConstraintEntry {
            label: c.label.clone(),
            origin: c.origin,
            generation: c.generation,
            class: c.class,
            text: c.form.format(&names),
            form: c.form.clone(),
        })
        .collect();
    let dof = a.dof();
    let (structure, stage) = match (&pipeline.reduced, &pipeline.gauged) {
        (Some(r), Some(_)) => (r.full_structure.clone(), "gauge fixed".to_string()),
        (Some(r), None) => (r.full_structure.clone(), "second class".to_string()),
        (None, Some(g)) => (g.default_dirac_structure()?, "gauge fixed".to_string()),
        (None, None) => (pipeline.scc_structure.clone(), "second class".to_string()),
    };
    let used: Vec<AffineForm> = match &pipeline.reduced {
        Some(r) => r.selection.iter().map(|&i| final_analysis.constraints[i].form.clone()).collect(),
        None if pipeline.gauged.is_some() => final_analysis.scc_forms(),
        None => a.scc_forms(),
    };
    let checks = seed.map(|s| bracket_checks(&structure, &used, s, 64));
    let reduction = pipeline.reduced.as_ref().map(|r| {
        let retained = r.retained_names();
        ReductionSection {
            substitution: r.substitution.iter().map(|(&i, f)| form_entry(names[i].clone(), f, &names)).collect(),
            structure: r.structure.matrix.to_rows(),
            hamiltonian: r.hamiltonian.format(&retained),
            retained,
        }
    });
    let chart = match (&pipeline.chart, &pipeline.reduced) {
        (Some(c), Some(r)) => Some(chart_section(c, &r.structure)),
        _ => None,
    };
    let hamiltonian = HamiltonianSection {
        canonical: a.hamiltonian.format(&names),
        reduced: reduction.as_ref().map(|r| r.hamiltonian.clone()),
        chart: match (&pipeline.chart_hamiltonian, &pipeline.chart) {
            (Some(h), Some(c)) => Some(h.format(&c.chart_names())),
            _ => None,
        },
    };
    Ok(AnalysisReport {
        model: ModelSection {
            coordinates: model.space.coordinates().to_vec(),
            momenta: model.space.momenta().to_vec(),
            params: model
                .params
                .iter()
                .map(|p| {
                    let v = match p.value.float {
                        None => p.value.exact.to_string(),
                        Some(_) => format!("{:?}", p.value.value()),
                    };
                    (p.name.clone(), v)
                })
                .collect(),
            lagrangian: model.lagrangian_expr.to_string(),
            gauges: match &pipeline.gauged {
                Some(g) => g
                    .constraints
                    .iter()
                    .filter(|c| c.origin == Origin::Gauge)
                    .map(|c| format!("{} = 0", c.form.format(&names)))
                    .collect(),
                None => Vec::new(),
            },
        },
        constraints,
        classification: classification(a),
        dof: DofSection { phase: dof.phase, config: dof.config, fcc: dof.fcc, scc: dof.scc },
        brackets: BracketSection {
            stage,
            names: structure.names.clone(),
            matrix: structure.matrix.to_rows(),
            nonzero: nonzero_brackets(&structure),
            checks,
        },
        reduction,
        chart,
        hamiltonian,
        commutators: pipeline.commutators.as_ref().map(|t| t.entries.clone()),
        dynamics: None,
        warnings: pipeline.warnings.clone(),
        comparison: None,
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("report JSON: {e}")))
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(self)
    }
}

fn rows_equal(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> bool {
    a == b
}

fn spans_match(a: &[&AffineForm], b: &[&AffineForm]) -> bool {
    let rows = |f: &[&AffineForm]| -> Vec<Vec<Scalar>> { f.iter().map(|x| x.augmented()).collect() };
    let width = |f: &[&AffineForm]| f.first().map(|x| x.dim());
    width(a) == width(b) && same_span(&rows(a), &rows(b))
}

/// Semantic comparison against an expected report: constraint spans as
/// row spaces, charts through their bracket pushforward.
pub fn compare_reports(actual: &AnalysisReport, golden: &AnalysisReport, structure: Option<&DiracStructure>) -> Vec<ComparisonEntry> {
    let mut out = Vec::new();
    let mut push = |item: &str, ok: bool, detail: String| out.push(ComparisonEntry { item: item.into(), ok, detail });
    let act: Vec<&AffineForm> = actual.constraints.iter().map(|c| &c.form).collect();
    let gold: Vec<&AffineForm> = golden.constraints.iter().map(|c| &c.form).collect();
    push(
        "constraint span",
        act.len() == gold.len() && spans_match(&act, &gold),
        format!("{} constraints, expected {}", act.len(), gold.len()),
    );
    let act: Vec<&AffineForm> = actual.classification.first_class.iter().map(|c| &c.form).collect();
    let gold: Vec<&AffineForm> = golden.classification.first_class.iter().map(|c| &c.form).collect();
    push("first-class span", act.len() == gold.len() && spans_match(&act, &gold), format!("{} first class", act.len()));
    push(
        "dof",
        actual.dof == golden.dof,
        format!("phase {} config {}, expected phase {} config {}", actual.dof.phase, actual.dof.config, golden.dof.phase, golden.dof.config),
    );
    push(
        "brackets",
        actual.brackets.names == golden.brackets.names && rows_equal(&actual.brackets.matrix, &golden.brackets.matrix),
        format!("{} nonzero entries", actual.brackets.nonzero.len()),
    );
    match (&golden.chart, &actual.reduction, structure) {
        (Some(g), Some(r), Some(d)) if g.variables == r.retained => {
            let k = g.coordinates.len() / 2;
            let q: Vec<AffineForm> = g.coordinates[..k].iter().map(|e| e.form.clone()).collect();
            let p: Vec<AffineForm> = g.coordinates[k..].iter().map(|e| e.form.clone()).collect();
            let ok = chart_from_forms(d, &q, &p).is_ok_and(|c| c.is_canonical_for(d));
            push("chart", ok, "expected chart pushed forward through the computed bracket".into());
        }
        (Some(_), _, _) => push("chart", false, "retained variables differ from the expected chart".into()),
        (None, _, _) => {}
    }
    if let Some(gc) = &golden.commutators {
        let table: Vec<CommutatorEntry> = actual.commutators.clone().unwrap_or_default();
        let lookup = |a: &str, b: &str| {
            table.iter().find_map(|e| {
                if e.a == a && e.b == b {
                    Some(e.value.clone())
                } else if e.a == b && e.b == a {
                    Some(-e.value.clone())
                } else {
                    None
                }
            })
        };
        let bad: Vec<String> =
            gc.iter().filter(|e| lookup(&e.a, &e.b).as_ref() != Some(&e.value)).map(|e| e.to_string()).collect();
        push("commutators", bad.is_empty(), if bad.is_empty() { format!("{} entries", gc.len()) } else { bad.join("; ") });
    }
    out
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn matrix_block(out: &mut String, names: &[String], m: &[Vec<Scalar>]) {
    let mut header = vec![""];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = m
        .iter()
        .zip(names)
        .map(|(row, n)| std::iter::once(n.clone()).chain(row.iter().map(|x| x.to_string())).collect())
        .collect();
    table(out, &header, &rows);
}

pub fn render_markdown(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let m = &r.model;
    let _ = writeln!(out, "# Circuit analysis\n");
    let _ = writeln!(out, "## Model\n");
    let pairs: Vec<String> = m.coordinates.iter().zip(&m.momenta).map(|(q, p)| format!("{q} ↔ {p}")).collect();
    let _ = writeln!(out, "Variables: {}\n", pairs.join(", "));
    if !m.params.is_empty() {
        let ps: Vec<String> = m.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let _ = writeln!(out, "Parameters: {}\n", ps.join(", "));
    }
    let _ = writeln!(out, "```\nL = {}\n```\n", m.lagrangian);

    let _ = writeln!(out, "## Constraints\n");
    if r.constraints.is_empty() {
        let _ = writeln!(out, "None.\n");
    } else {
        let rows: Vec<Vec<String>> = r
            .constraints
            .iter()
            .map(|c| {
                vec![
                    c.label.clone(),
                    format!("`{} ≈ 0`", c.text),
                    format!("{:?}", c.origin).to_lowercase(),
                    c.generation.to_string(),
                    format!("{:?}", c.class).to_lowercase(),
                ]
            })
            .collect();
        table(&mut out, &["", "constraint", "origin", "generation", "class"], &rows);
    }

    let _ = writeln!(out, "## Canonical Hamiltonian\n\n```\nH = {}\n```\n", r.hamiltonian.canonical);

    let c = &r.classification;
    if !c.multipliers.is_empty() {
        let _ = writeln!(out, "## Multipliers\n");
        let rows: Vec<Vec<String>> = c
            .multipliers
            .iter()
            .map(|m| vec![m.constraint.clone(), m.value.clone().map_or("arbitrary".into(), |v| format!("`{v}`"))])
            .collect();
        table(&mut out, &["constraint", "multiplier"], &rows);
    }

    let _ = writeln!(out, "## Classification\n");
    if !c.matrix.is_empty() {
        let labels: Vec<String> = r.constraints.iter().take(c.matrix.len()).map(|e| e.label.clone()).collect();
        matrix_block(&mut out, &labels, &c.matrix);
    }
    if c.first_class.is_empty() {
        let _ = writeln!(out, "First class: none\n");
    } else {
        let fs: Vec<String> = c.first_class.iter().map(|f| format!("`{}`", f.text)).collect();
        let _ = writeln!(out, "First class: {}\n", fs.join(", "));
    }
    let _ = writeln!(out, "Second class: {}\n", if c.second_class.is_empty() { "none".into() } else { c.second_class.join(", ") });

    let d = &r.dof;
    let dim = m.coordinates.len() * 2;
    let _ = writeln!(out, "## Degrees of freedom\n");
    let _ = writeln!(
        out,
        "2n - (2 x FCC + 1 x SCC) = {dim} - (2 x {} + 1 x {}) = {}, so {} in configuration space.\n",
        d.fcc, d.scc, d.phase, d.config
    );

    let b = &r.brackets;
    let _ = writeln!(out, "## Dirac brackets ({})\n", b.stage);
    if b.nonzero.is_empty() {
        let _ = writeln!(out, "All brackets vanish.\n");
    } else {
        let rows: Vec<Vec<String>> =
            b.nonzero.iter().map(|e| vec![format!("{{{}, {}}}", e.a, e.b), e.value.to_string()]).collect();
        table(&mut out, &["bracket", "value"], &rows);
    }
    if let Some(ch) = &b.checks {
        let _ = writeln!(
            out,
            "Randomized checks (seed {}, {} cases): antisymmetry {}, bilinearity {}, constraints central {}\n",
            ch.seed,
            ch.cases,
            ok(ch.antisymmetry),
            ok(ch.bilinearity),
            ok(ch.constraints_central)
        );
    }

    if let Some(red) = &r.reduction {
        let _ = writeln!(out, "## Reduction\n");
        let _ = writeln!(out, "Retained: {}\n", red.retained.join(", "));
        if !red.substitution.is_empty() {
            let rows: Vec<Vec<String>> = red.substitution.iter().map(|s| vec![s.name.clone(), format!("`{}`", s.text)]).collect();
            table(&mut out, &["variable", "value"], &rows);
        }
        if !red.retained.is_empty() {
            matrix_block(&mut out, &red.retained, &red.structure);
        }
        let _ = writeln!(out, "```\nH = {}\n```\n", red.hamiltonian);
    }

    if let Some(ch) = &r.chart {
        let _ = writeln!(out, "## Canonical chart\n");
        let rows: Vec<Vec<String>> = ch.coordinates.iter().map(|e| vec![e.name.clone(), format!("`{}`", e.text)]).collect();
        table(&mut out, &["coordinate", "definition"], &rows);
        let _ = writeln!(out, "Pushforward is the standard symplectic form: {}\n", ok(ch.canonical));
        if let Some(h) = &r.hamiltonian.chart {
            let _ = writeln!(out, "```\nH = {h}\n```\n");
        }
    }

    if let Some(cs) = &r.commutators {
        let _ = writeln!(out, "## Commutators\n");
        for e in cs {
            let _ = writeln!(out, "- `{e}`");
        }
        out.push('\n');
    }

    if let Some(dy) = &r.dynamics {
        let _ = writeln!(out, "## Dynamics\n");
        let _ = writeln!(
            out,
            "RK4, dt = {}, t_end = {}, {} steps. Energy {} with drift {:e}.\n",
            dy.dt, dy.t_end, dy.steps, dy.energy_initial, dy.energy_drift
        );
        if !dy.observables.is_empty() {
            let rows: Vec<Vec<String>> = dy
                .observables
                .iter()
                .map(|o| vec![format!("`{}`", o.label), o.initial.to_string(), o.last.to_string(), o.min.to_string(), o.max.to_string()])
                .collect();
            table(&mut out, &["observable", "initial", "final", "min", "max"], &rows);
        }
        if let Some(o) = &dy.oracle {
            let _ = writeln!(out, "Regularized oracle at ε = {}: sup error {:e}\n", o.epsilon, o.sup_error);
        }
        if let Some(g) = &dy.gauge_sweep {
            let _ = writeln!(out, "Gauge sweep over {} gauge sets; max deviation of {} is {:e}\n", g.runs.len(), g.observables.join(", "), g.max_deviation);
            for run in &g.runs {
                let vals: Vec<String> = run.nonzero.iter().map(|e| format!("{{{}, {}}} = {}", e.a, e.b, e.value)).collect();
                let _ = writeln!(out, "- {}: {}", run.gauges.join("; "), vals.join(", "));
            }
            out.push('\n');
        }
    }

    if let Some(cmp) = &r.comparison {
        let _ = writeln!(out, "## Comparison with expected results\n");
        let rows: Vec<Vec<String>> =
            cmp.iter().map(|e| vec![e.item.clone(), ok(e.ok).into(), e.detail.clone()]).collect();
        table(&mut out, &["item", "result", "detail"], &rows);
    }

    if !r.warnings.is_empty() {
        let _ = writeln!(out, "## Warnings\n");
        for w in &r.warnings {
            let _ = writeln!(out, "- {w}");
        }
        out.push('\n');
    }
    out
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;
    use crate::pipeline::{run_pipeline, PipelineOptions};

    #[test]
    fn empty_constraint_model_has_canonical_brackets() {
        let model = parse_model("var x\nL = (1/2)*d(x)^2 - (1/2)*x^2").unwrap();
        let p = run_pipeline(&model, &PipelineOptions::default()).unwrap();
        let r = build_report(&model, &p, Some(7)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["constraints"], serde_json::json!([]));
        assert_eq!(json["brackets"]["nonzero"][0]["value"], "1");
        assert_eq!(r.brackets.names, ["x", "p_x"]);
        assert!(r.brackets.checks.as_ref().unwrap().antisymmetry);
        assert_eq!(AnalysisReport::from_json(&r.to_json()).unwrap(), r);
    }
}
