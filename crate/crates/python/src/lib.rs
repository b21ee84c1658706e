//! Python module `sqc`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyFloat, PyList};

use sqc_core::cli::{exit_code, run_command};
use sqc_core::dirac::{ConstraintAnalysis, ConstraintClass};
use sqc_core::dynamics::{integrate, reduced_initial_state, EomSet};
use sqc_core::parser::{parse_model, CircuitModel, Coef, GaugeCondition, InitCondition};
use sqc_core::pipeline::{run_pipeline, Pipeline, PipelineOptions};
use sqc_core::report::build_report;
use sqc_core::scalar::parse_scalar;
use sqc_core::{Error, Scalar};

create_exception!(sqc, SqcError, PyException);

fn err(e: Error) -> PyErr {
    SqcError::new_err((e.to_string(), exit_code(&e)))
}

fn fraction(py: Python<'_>, s: &Scalar) -> PyResult<Py<PyAny>> {
    Ok(py.import("fractions")?.getattr("Fraction")?.call1((s.to_string(),))?.unbind())
}

fn coef(v: &Bound<'_, PyAny>) -> PyResult<Coef> {
    if v.is_instance_of::<PyFloat>() {
        return Ok(Coef::float(v.extract()?));
    }
    let text = v.str()?.to_string();
    parse_scalar(&text)
        .map(Coef::exact)
        .ok_or_else(|| SqcError::new_err((format!("not a rational value: {text}"), 1)))
}

#[pyclass(frozen)]
struct Model {
    inner: CircuitModel,
}

#[pyfunction]
fn parse(source: &str) -> PyResult<Model> {
    parse_model(source).map(|inner| Model { inner }).map_err(err)
}

#[pyfunction]
fn load(path: &str) -> PyResult<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| SqcError::new_err((format!("cannot read {path}: {e}"), 1)))?;
    parse(&text)
}

/// Runs the command line with `args` (without the program name).
/// Returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run(args: Vec<String>) -> (i32, String, String) {
    let (mut out, mut errs) = (Vec::new(), Vec::new());
    let code = run_command(std::iter::once("sqc".to_string()).chain(args), &mut out, &mut errs);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&errs).into_owned())
}

#[pymethods]
impl Model {
    #[getter]
    fn coordinates(&self) -> Vec<String> {
        self.inner.space.coordinates().to_vec()
    }

    #[getter]
    fn momenta(&self) -> Vec<String> {
        self.inner.space.momenta().to_vec()
    }

    #[getter]
    fn gauges(&self) -> Vec<String> {
        self.inner.gauges.iter().map(|g| g.text.clone()).collect()
    }

    /// Exact parameters as `Fraction`, float ones as `float`.
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for p in &self.inner.params {
            match p.value.float {
                Some(x) => d.set_item(&p.name, x)?,
                None => d.set_item(&p.name, fraction(py, &p.value.exact)?)?,
            }
        }
        Ok(d)
    }

    fn to_source(&self) -> String {
        self.inner.to_source()
    }

    fn with_gauges(&self, gauges: Vec<String>) -> PyResult<Model> {
        let gauges = gauges
            .into_iter()
            .map(|text| Ok(GaugeCondition { form: self.inner.phase_form(&text).map_err(err)?, text }))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Model { inner: self.inner.with_gauges(gauges) })
    }

    fn with_params(&self, values: &Bound<'_, PyDict>) -> PyResult<Model> {
        let mut owned = Vec::new();
        for (k, v) in values.iter() {
            owned.push((k.extract::<String>()?, coef(&v)?));
        }
        let refs: Vec<(&str, Coef)> = owned.iter().map(|(k, c)| (k.as_str(), c.clone())).collect();
        self.inner.with_params(&refs).map(|inner| Model { inner }).map_err(err)
    }

    fn analyze(&self) -> PyResult<Analysis> {
        let options = PipelineOptions { analysis_only: true, ..Default::default() };
        let p = run_pipeline(&self.inner, &options).map_err(err)?;
        Ok(Analysis { inner: p.analysis })
    }

    #[pyo3(signature = (gauges=None))]
    fn reduce(&self, gauges: Option<Vec<String>>) -> PyResult<Reduction> {
        let model = match gauges {
            Some(g) => self.with_gauges(g)?.inner,
            None => self.inner.clone(),
        };
        let pipeline = run_pipeline(&model, &PipelineOptions::default()).map_err(err)?;
        Ok(Reduction { model, pipeline })
    }

    fn __repr__(&self) -> String {
        format!("Model(coordinates={:?})", self.inner.space.coordinates())
    }
}

#[pyclass(frozen)]
struct Analysis {
    inner: ConstraintAnalysis,
}

fn labels(a: &ConstraintAnalysis, class: ConstraintClass) -> Vec<String> {
    a.constraints.iter().filter(|c| c.class == class).map(|c| c.label.clone()).collect()
}

#[pymethods]
impl Analysis {
    #[getter]
    fn dof<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dof = self.inner.dof();
        let d = PyDict::new(py);
        d.set_item("phase", dof.phase)?;
        d.set_item("config", dof.config)?;
        d.set_item("fcc", dof.fcc)?;
        d.set_item("scc", dof.scc)?;
        Ok(d)
    }

    /// `(label, class, text)` per constraint.
    #[getter]
    fn constraints(&self) -> Vec<(String, String, String)> {
        let names = self.inner.space.names();
        self.inner
            .constraints
            .iter()
            .map(|c| {
                let class = match c.class {
                    ConstraintClass::First => "first",
                    ConstraintClass::Second => "second",
                    ConstraintClass::Unknown => "unknown",
                };
                (c.label.clone(), class.to_string(), c.form.format(&names))
            })
            .collect()
    }

    #[getter]
    fn first_class(&self) -> Vec<String> {
        labels(&self.inner, ConstraintClass::First)
    }

    #[getter]
    fn second_class(&self) -> Vec<String> {
        labels(&self.inner, ConstraintClass::Second)
    }

    #[getter]
    fn hamiltonian(&self) -> String {
        self.inner.hamiltonian.format(&self.inner.space.names())
    }

    /// Constraint bracket matrix with `Fraction` entries.
    #[getter]
    fn matrix<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = self
            .inner
            .matrix
            .to_rows()
            .iter()
            .map(|r| r.iter().map(|s| fraction(py, s)).collect::<PyResult<Vec<_>>>())
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, rows)
    }
}

#[pyclass(frozen)]
struct Reduction {
    model: CircuitModel,
    pipeline: Pipeline,
}

impl Reduction {
    fn eom_ready(&self) -> PyResult<&sqc_core::reduction::ReducedSystem> {
        self.pipeline.reduced.as_ref().ok_or_else(|| {
            let w = self.pipeline.warnings.join("; ");
            SqcError::new_err((format!("not reduced: {w}"), 2))
        })
    }
}

#[pymethods]
impl Reduction {
    #[getter]
    fn analysis(&self) -> Analysis {
        Analysis { inner: self.pipeline.final_analysis().clone() }
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.pipeline.warnings.clone()
    }

    #[getter]
    fn retained(&self) -> PyResult<Vec<String>> {
        Ok(self.eom_ready()?.retained_names())
    }

    #[getter]
    fn hamiltonian(&self) -> PyResult<String> {
        let r = self.eom_ready()?;
        Ok(r.hamiltonian.format(&r.retained_names()))
    }

    /// `(name, expression)` for each canonical coordinate.
    #[getter]
    fn chart(&self) -> Vec<(String, String)> {
        self.pipeline.chart.as_ref().map(|c| c.describe()).unwrap_or_default()
    }

    /// Dirac bracket of two phase variables.
    fn bracket(&self, py: Python<'_>, a: &str, b: &str) -> PyResult<Py<PyAny>> {
        let s = match &self.pipeline.reduced {
            Some(r) => r.full_structure.bracket_named(a, b),
            None => self.pipeline.scc_structure.bracket_named(a, b),
        };
        let s = s.ok_or_else(|| SqcError::new_err((format!("unknown variable in {{{a}, {b}}}"), 1)))?;
        fraction(py, &s)
    }

    /// Commutator `[a, b]` in units of iħ.
    fn commutator(&self, py: Python<'_>, a: &str, b: &str) -> PyResult<Py<PyAny>> {
        let table = self.pipeline.commutators.as_ref().ok_or_else(|| SqcError::new_err(("no commutator table", 2)))?;
        let s = table.get(a, b).ok_or_else(|| SqcError::new_err((format!("no entry for [{a}, {b}]"), 1)))?;
        fraction(py, &s)
    }

    #[pyo3(signature = (format=None, seed=None))]
    fn report(&self, format: Option<&str>, seed: Option<u64>) -> PyResult<String> {
        let r = build_report(&self.model, &self.pipeline, seed).map_err(err)?;
        match format.unwrap_or("json") {
            "json" => Ok(r.to_json()),
            "md" => Ok(r.to_markdown()),
            other => Err(SqcError::new_err((format!("unknown format {other}"), 1))),
        }
    }

    /// Integrates the reduced equations. `init` maps expressions to
    /// values and defaults to the model's simulate block.
    #[pyo3(signature = (dt=None, t_end=None, init=None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        dt: Option<f64>,
        t_end: Option<f64>,
        init: Option<Vec<(String, f64)>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let system = self.eom_ready()?;
        let sim = self.model.simulate.as_ref();
        let dt = dt.or(sim.map(|s| s.dt)).ok_or_else(|| SqcError::new_err(("dt is required", 1)))?;
        let t_end = t_end.or(sim.map(|s| s.t_end)).ok_or_else(|| SqcError::new_err(("t_end is required", 1)))?;
        let init = match init {
            Some(pairs) => pairs
                .into_iter()
                .map(|(text, value)| Ok(InitCondition { form: self.model.phase_form(&text).map_err(err)?, text, value }))
                .collect::<PyResult<Vec<_>>>()?,
            None => sim.map(|s| s.init.clone()).unwrap_or_default(),
        };
        let eom = EomSet::reduced(system).map_err(err)?;
        let z0 = reduced_initial_state(self.pipeline.final_analysis(), system, &init).map_err(err)?;
        let traj = integrate(&eom, &z0, dt, t_end).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("names", &traj.names)?;
        d.set_item("t", &traj.times)?;
        d.set_item("states", &traj.states)?;
        d.set_item("energy", &traj.energy)?;
        Ok(d)
    }
}

#[pymodule]
fn sqc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SqcError", m.py().get_type::<SqcError>())?;
    m.add_class::<Model>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<Reduction>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
