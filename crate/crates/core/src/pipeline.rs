//! Model → analysis → gauge fixing → reduction → chart, in one call.

use crate::dirac::{analyze, ConstraintAnalysis, DiracStructure};
use crate::error::Result;
use crate::expr::{AffineForm, PhaseFunction};
use crate::parser::CircuitModel;
use crate::reduction::{
    darboux_chart, eliminate_with, quantize, reduced_hamiltonian, CanonicalChart, CommutatorTable, PivotPolicy,
    ReducedSystem,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    /// Chain closed and classified, before any gauge condition.
    pub analysis: ConstraintAnalysis,
    /// Dirac structure over the second-class sector of `analysis`.
    pub scc_structure: DiracStructure,
    /// Analysis with gauge conditions appended, when first-class
    /// constraints were present and gauges supplied.
    pub gauged: Option<ConstraintAnalysis>,
    pub reduced: Option<ReducedSystem>,
    pub chart: Option<CanonicalChart>,
    pub chart_hamiltonian: Option<PhaseFunction>,
    pub commutators: Option<CommutatorTable>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    /// Overrides the model's gauge conditions.
    pub gauges: Option<Vec<AffineForm>>,
    pub pivot: PivotPolicy,
    /// Stop after classification and the second-class Dirac structure.
    pub analysis_only: bool,
}

impl Pipeline {
    /// The analysis the reduction was built from.
    pub fn final_analysis(&self) -> &ConstraintAnalysis {
        self.gauged.as_ref().unwrap_or(&self.analysis)
    }
}

pub fn run_pipeline(model: &CircuitModel, options: &PipelineOptions) -> Result<Pipeline> {
    let analysis = analyze(&model.lagrangian)?;
    let scc_structure = analysis.default_dirac_structure()?;
    let mut out = Pipeline {
        analysis,
        scc_structure,
        gauged: None,
        reduced: None,
        chart: None,
        chart_hamiltonian: None,
        commutators: None,
        warnings: Vec::new(),
    };
    let gauges: Vec<AffineForm> = match &options.gauges {
        Some(g) => g.clone(),
        None => model.gauges.iter().map(|g| g.form.clone()).collect(),
    };
    let fcc = out.analysis.fcc_basis.len();
    if fcc > 0 && gauges.is_empty() {
        out.warnings.push(format!("{fcc} FCC unfixed: supply {fcc} gauge condition(s) to reduce"));
        return Ok(out);
    }
    if options.analysis_only && fcc == 0 {
        return Ok(out);
    }
    if fcc > 0 || !gauges.is_empty() {
        out.gauged = Some(out.analysis.add_gauge_conditions(&gauges)?);
    }
    if options.analysis_only {
        return Ok(out);
    }
    let reduced = eliminate_with(out.final_analysis(), None, &options.pivot)?;
    if reduced.retained.is_empty() {
        out.warnings.push("no physical degrees of freedom remain".into());
        out.reduced = Some(reduced);
        return Ok(out);
    }
    let chart = darboux_chart(&reduced.structure)?;
    out.chart_hamiltonian = Some(reduced_hamiltonian(&reduced, &chart)?);
    out.commutators = Some(quantize(&chart, &reduced.structure));
    out.chart = Some(chart);
    out.reduced = Some(reduced);
    Ok(out)
}
