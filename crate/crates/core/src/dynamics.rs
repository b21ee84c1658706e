//! Hamilton's equations under a Dirac structure, fixed-step integration
//! and the regularized-Lagrangian oracle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dirac::{ConstraintAnalysis, DiracStructure};
use crate::error::{Error, Result};
use crate::expr::{bracket_affine, AffineForm, PhaseFunction, TrigKind};
use crate::matrix::RatMatrix;
use crate::parser::{CircuitModel, InitCondition, StructuredLagrangian};
use crate::pipeline::{run_pipeline, PipelineOptions};
use crate::reduction::ReducedSystem;
use crate::scalar;

/// Float evaluator for a [`PhaseFunction`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledFunction {
    dim: usize,
    quad: Vec<(usize, usize, f64)>,
    linear: Vec<(usize, f64)>,
    constant: f64,
    trig: Vec<CompiledTrig>,
}

#[derive(Clone, Debug, PartialEq)]
struct CompiledTrig {
    coefficient: f64,
    kind: TrigKind,
    frequency: f64,
    phase: f64,
    argument: Vec<(usize, f64)>,
    argument_constant: f64,
}

fn sparse(v: &[scalar::Scalar]) -> Vec<(usize, f64)> {
    v.iter().enumerate().filter(|(_, x)| !num_traits::Zero::is_zero(*x)).map(|(i, x)| (i, scalar::to_f64(x))).collect()
}

impl CompiledFunction {
    pub fn new(f: &PhaseFunction) -> Self {
        let q = f.quadratic();
        let dim = f.dim();
        let mut quad = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let v = &q[(i, j)];
                if !num_traits::Zero::is_zero(v) {
                    quad.push((i, j, scalar::to_f64(v)));
                }
            }
        }
        let trig = f
            .trig_terms()
            .iter()
            .map(|t| CompiledTrig {
                coefficient: t.coefficient_f64(),
                kind: t.kind,
                frequency: t.frequency,
                phase: t.phase,
                argument: sparse(t.argument.coeffs()),
                argument_constant: scalar::to_f64(t.argument.constant()),
            })
            .collect();
        CompiledFunction {
            dim,
            quad,
            linear: sparse(f.linear().coeffs()),
            constant: scalar::to_f64(f.linear().constant()),
            trig,
        }
    }

    fn angle(t: &CompiledTrig, z: &[f64]) -> f64 {
        t.frequency * (t.argument.iter().map(|&(i, a)| a * z[i]).sum::<f64>() + t.argument_constant) + t.phase
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let quad: f64 = self.quad.iter().map(|&(i, j, q)| q * z[i] * z[j]).sum();
        let lin: f64 = self.linear.iter().map(|&(i, a)| a * z[i]).sum();
        let trig: f64 = self
            .trig
            .iter()
            .map(|t| {
                let x = Self::angle(t, z);
                t.coefficient * if t.kind == TrigKind::Cos { x.cos() } else { x.sin() }
            })
            .sum();
        0.5 * quad + lin + self.constant + trig
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for &(i, j, q) in &self.quad {
            g[i] += q * z[j];
        }
        for &(i, a) in &self.linear {
            g[i] += a;
        }
        for t in &self.trig {
            let x = Self::angle(t, z);
            let d = t.coefficient * t.frequency * if t.kind == TrigKind::Cos { -x.sin() } else { x.cos() };
            for &(i, a) in &t.argument {
                g[i] += d * a;
            }
        }
        g
    }
}

/// `żᵢ = {zᵢ, H}` under a constant bracket.
#[derive(Clone, Debug, PartialEq)]
pub struct EomSet {
    pub names: Vec<String>,
    pub fields: Vec<PhaseFunction>,
    pub hamiltonian: PhaseFunction,
    pub structure: RatMatrix,
    /// Constraints whose residuals are monitored (unreduced systems).
    pub constraints: Vec<(String, AffineForm)>,
    compiled: Vec<CompiledFunction>,
    compiled_h: CompiledFunction,
}

pub fn hamiltonian_vector_field(h: &PhaseFunction, d: &DiracStructure) -> Result<EomSet> {
    let dim = d.dim();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian over {} variables, structure over {dim}",
            h.dim()
        )));
    }
    let fields: Vec<PhaseFunction> =
        (0..dim).map(|i| bracket_affine(&AffineForm::variable(dim, i), h, &d.matrix)).collect::<Result<_>>()?;
    let compiled = fields.iter().map(CompiledFunction::new).collect();
    Ok(EomSet {
        names: d.names.clone(),
        fields,
        hamiltonian: h.clone(),
        structure: d.matrix.clone(),
        constraints: Vec::new(),
        compiled,
        compiled_h: CompiledFunction::new(h),
    })
}

impl EomSet {
    /// Reduced equations of motion.
    pub fn reduced(system: &ReducedSystem) -> Result<Self> {
        hamiltonian_vector_field(&system.hamiltonian, &system.structure)
    }

    /// Unreduced equations over the full phase space with the Dirac
    /// structure of `selection`, monitoring every constraint.
    pub fn unreduced(analysis: &ConstraintAnalysis, structure: &DiracStructure) -> Result<Self> {
        let mut eom = hamiltonian_vector_field(&analysis.hamiltonian, structure)?;
        eom.constraints = analysis.constraints.iter().map(|c| (c.label.clone(), c.form.clone())).collect();
        Ok(eom)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn field(&self, z: &[f64]) -> Vec<f64> {
        self.compiled.iter().map(|f| f.eval(z)).collect()
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        self.compiled_h.eval(z)
    }

    /// `Ȧ = {A, H}` as an exact function.
    pub fn time_derivative(&self, a: &AffineForm) -> Result<PhaseFunction> {
        bracket_affine(a, &self.hamiltonian, &self.structure)
    }

    /// `Ä` at `z`, from the exact `Ȧ` and the field.
    pub fn second_derivative(&self, a: &AffineForm, z: &[f64]) -> Result<f64> {
        let adot = CompiledFunction::new(&self.time_derivative(a)?);
        Ok(adot.gradient(z).iter().zip(self.field(z)).map(|(g, f)| g * f).sum())
    }

    /// Jacobian of the field at `z` (central differences on the exact field).
    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for (i, f) in self.compiled.iter().enumerate() {
            let g = f.gradient(z);
            for j in 0..n {
                jac[(i, j)] = g[j];
            }
        }
        jac
    }

    /// Angular frequencies of small oscillations about `z`.
    pub fn linearization_frequencies(&self, z: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .jacobian(z)
            .complex_eigenvalues()
            .iter()
            .map(|c| c.im.abs())
            .filter(|w| *w > 1e-12)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub constraint_labels: Vec<String>,
    /// `constraint_residuals[step][k]`.
    pub constraint_residuals: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    pub fn observe(&self, form: &AffineForm) -> Vec<f64> {
        self.states.iter().map(|s| form.eval_f64(s)).collect()
    }

    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.constraint_residuals.iter().flatten().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            let _ = write!(out, ",{n}");
        }
        out.push_str(",energy\n");
        for ((t, s), h) in self.times.iter().zip(&self.states).zip(&self.energy) {
            let _ = write!(out, "{t}");
            for x in s {
                let _ = write!(out, ",{x}");
            }
            let _ = writeln!(out, ",{h}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let columns: BTreeMap<String, Vec<f64>> =
            self.names.iter().enumerate().map(|(i, n)| (n.clone(), self.column(i))).collect();
        let residuals: BTreeMap<String, Vec<f64>> = self
            .constraint_labels
            .iter()
            .enumerate()
            .map(|(k, n)| (n.clone(), self.constraint_residuals.iter().map(|r| r[k]).collect()))
            .collect();
        serde_json::json!({
            "t": self.times,
            "columns": columns,
            "diagnostics": {
                "energy": self.energy,
                "energy_drift": self.energy_drift(),
                "constraint_residuals": residuals,
            }
        })
    }
}

fn rk4_step(f: &dyn Fn(&[f64]) -> Vec<f64>, z: &[f64], h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = f(z);
    let k2 = f(&add(z, &k1, h / 2.0));
    let k3 = f(&add(z, &k2, h / 2.0));
    let k4 = f(&add(z, &k3, h));
    (0..z.len()).map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be at least dt, got {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Classical fourth-order Runge–Kutta with a fixed step.
pub fn integrate(eom: &EomSet, init: &[f64], dt: f64, t_end: f64) -> Result<Trajectory> {
    if init.len() != eom.dim() {
        return Err(Error::DimensionMismatch(format!("initial state has {} entries, expected {}", init.len(), eom.dim())));
    }
    let steps = step_count(dt, t_end)?;
    let residuals = |z: &[f64]| -> Vec<f64> { eom.constraints.iter().map(|(_, c)| c.eval_f64(z)).collect() };
    let mut traj = Trajectory {
        names: eom.names.clone(),
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        constraint_labels: eom.constraints.iter().map(|(l, _)| l.clone()).collect(),
        constraint_residuals: Vec::new(),
    };
    let mut z = init.to_vec();
    let field = |z: &[f64]| eom.field(z);
    for step in 0..=steps {
        if step > 0 {
            let next = rk4_step(&field, &z, dt);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteState { step, time: step as f64 * dt, last_valid: z });
            }
            z = next;
        }
        traj.times.push(step as f64 * dt);
        traj.energy.push(eom.energy(&z));
        if !eom.constraints.is_empty() {
            traj.constraint_residuals.push(residuals(&z));
        }
        traj.states.push(z.clone());
    }
    Ok(traj)
}

/// A full phase-space point on the constraint surface meeting the initial
/// conditions. Variables left free by both are set to zero.
pub fn initial_state(analysis: &ConstraintAnalysis, init: &[InitCondition]) -> Result<Vec<f64>> {
    let dim = analysis.space.dim();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for c in &analysis.constraints {
        rows.push(c.form.coeffs().to_vec());
        rhs.push(-scalar::to_f64(c.form.constant()));
    }
    for ic in init {
        if ic.form.dim() != dim {
            return Err(Error::DimensionMismatch(format!("initial condition `{}`", ic.text)));
        }
        rows.push(ic.form.coeffs().to_vec());
        rhs.push(ic.value - scalar::to_f64(ic.form.constant()));
    }
    if rows.is_empty() {
        return Ok(vec![0.0; dim]);
    }
    let a = RatMatrix::from_rows_with_cols(rows, dim);
    let ech = a.echelon();
    let t = ech.transform.to_f64();
    let reduced_rhs: Vec<f64> = t.iter().map(|row| row.iter().zip(&rhs).map(|(x, b)| x * b).sum()).collect();
    let scale = rhs.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    for (r, v) in reduced_rhs.iter().enumerate().skip(ech.pivots.len()) {
        if v.abs() > 1e-9 * scale {
            let names = analysis.space.names();
            let combo: Vec<String> = (0..init.len())
                .filter(|&k| !num_traits::Zero::is_zero(&ech.transform[(r, analysis.len() + k)]))
                .map(|k| init[k].text.clone())
                .collect();
            let _ = names;
            return Err(Error::InvalidArgument(format!(
                "initial conditions conflict with the constraints (residual {v:e}): {}",
                combo.join(", ")
            )));
        }
    }
    let mut z = vec![0.0; dim];
    for (r, &p) in ech.pivots.iter().enumerate() {
        z[p] = reduced_rhs[r];
    }
    Ok(z)
}

/// Initial reduced state for a reduced system.
pub fn reduced_initial_state(
    analysis: &ConstraintAnalysis,
    system: &ReducedSystem,
    init: &[InitCondition],
) -> Result<Vec<f64>> {
    let z = initial_state(analysis, init)?;
    Ok(system.retained.iter().map(|&i| z[i]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub gauges: Vec<String>,
    pub observables: Vec<String>,
    pub times: Vec<f64>,
    /// `series[gauge][observable][step]`.
    pub series: Vec<Vec<Vec<f64>>>,
    pub max_deviation: f64,
}

/// Runs the full pipeline and reduced dynamics once per gauge set and
/// compares the observables (full phase-space forms) across gauges.
pub fn check_gauge_invariance(
    model: &CircuitModel,
    gauge_sets: &[Vec<AffineForm>],
    observables: &[AffineForm],
    init: &[InitCondition],
    dt: f64,
    t_end: f64,
) -> Result<GaugeReport> {
    let names = model.space.names();
    let mut series = Vec::new();
    let mut times = Vec::new();
    for gauges in gauge_sets {
        let options = PipelineOptions { gauges: Some(gauges.clone()), ..Default::default() };
        let p = run_pipeline(model, &options)?;
        let system = p.reduced.as_ref().ok_or_else(|| Error::FirstClassRemaining("gauge set left freedom".into()))?;
        let eom = EomSet::reduced(system)?;
        let z0 = reduced_initial_state(p.final_analysis(), system, init)?;
        let traj = integrate(&eom, &z0, dt, t_end)?;
        let forms: Vec<AffineForm> = observables.iter().map(|o| system.reduce_form(o)).collect::<Result<_>>()?;
        series.push(forms.iter().map(|f| traj.observe(f)).collect::<Vec<_>>());
        times = traj.times;
    }
    let mut max_deviation = 0.0f64;
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            for (sa, sb) in series[a].iter().zip(&series[b]) {
                for (x, y) in sa.iter().zip(sb) {
                    max_deviation = max_deviation.max((x - y).abs());
                }
            }
        }
    }
    Ok(GaugeReport {
        gauges: gauge_sets
            .iter()
            .map(|g| g.iter().map(|f| format!("{} = 0", f.format(&names))).collect::<Vec<_>>().join("; "))
            .collect(),
        observables: observables.iter().map(|o| o.format(&names)).collect(),
        times,
        series,
        max_deviation,
    })
}

/// Euler–Lagrange integration of `L + (ε/2) Σ (n·q̇)²` over the null
/// directions `n` of `K`, with no constraint analysis.
#[derive(Clone, Debug)]
pub struct RegularizedOracle {
    n: usize,
    k_eps_inv: DMatrix<f64>,
    k_eps: DMatrix<f64>,
    gyro: DMatrix<f64>,
    b: DMatrix<f64>,
    c: Vec<f64>,
    u: DMatrix<f64>,
    d: Vec<f64>,
    trig: Vec<CompiledTrig>,
    pub epsilon: f64,
}

fn dmatrix(m: &RatMatrix) -> DMatrix<f64> {
    let rows = m.to_f64();
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| rows[i][j])
}

impl RegularizedOracle {
    pub fn new(l: &StructuredLagrangian, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        let n = l.n();
        let mut k_eps = dmatrix(&l.k);
        for v in l.k.null_space() {
            let v: Vec<f64> = v.iter().map(scalar::to_f64).collect();
            for i in 0..n {
                for j in 0..n {
                    k_eps[(i, j)] += epsilon * v[i] * v[j];
                }
            }
        }
        let k_eps_inv = k_eps.clone().try_inverse().ok_or(Error::SingularStructure)?;
        let b = dmatrix(&l.b);
        let trig = l
            .trig
            .iter()
            .map(|t| CompiledTrig {
                coefficient: t.coefficient_f64(),
                kind: t.kind,
                frequency: t.frequency,
                phase: t.phase,
                argument: sparse(t.argument.coeffs()),
                argument_constant: scalar::to_f64(t.argument.constant()),
            })
            .collect();
        Ok(RegularizedOracle {
            n,
            k_eps_inv,
            k_eps,
            gyro: b.transpose() - &b,
            b,
            c: l.c.iter().map(scalar::to_f64).collect(),
            u: dmatrix(&l.u),
            d: l.d.iter().map(scalar::to_f64).collect(),
            trig,
            epsilon,
        })
    }

    /// `(q, q̇) ↦ (q̇, q̈)`.
    fn field(&self, s: &[f64]) -> Vec<f64> {
        let n = self.n;
        let q = nalgebra::DVector::from_column_slice(&s[..n]);
        let qd = nalgebra::DVector::from_column_slice(&s[n..]);
        let mut force = &self.gyro * &qd - &self.u * &q;
        for i in 0..n {
            force[i] -= self.d[i];
        }
        for t in &self.trig {
            let x = CompiledFunction::angle(t, &s[..n]);
            let dv = t.coefficient * t.frequency * if t.kind == TrigKind::Cos { -x.sin() } else { x.cos() };
            for &(i, a) in &t.argument {
                force[i] += dv * a;
            }
        }
        let qdd = &self.k_eps_inv * force;
        s[n..].iter().copied().chain(qdd.iter().copied()).collect()
    }

    fn momenta(&self, s: &[f64]) -> Vec<f64> {
        let n = self.n;
        let q = nalgebra::DVector::from_column_slice(&s[..n]);
        let qd = nalgebra::DVector::from_column_slice(&s[n..]);
        let p = &self.k_eps * qd + &self.b * q;
        (0..n).map(|i| p[i] + self.c[i]).collect()
    }

    /// Integrates from `(q₀, q̇₀)`; the returned trajectory is in `(q, p)`
    /// with `p = K_ε q̇ + Bq + c`, sampled every `dt`.
    pub fn integrate(&self, names: &[String], q0: &[f64], qdot0: &[f64], dt: f64, t_end: f64) -> Result<Trajectory> {
        let steps = step_count(dt, t_end)?;
        let sub = ((dt / (0.05 * self.epsilon)).ceil() as usize).max(1);
        let h = dt / sub as f64;
        let mut s: Vec<f64> = q0.iter().chain(qdot0).copied().collect();
        let mut traj = Trajectory {
            names: names.to_vec(),
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity(steps + 1),
            energy: Vec::new(),
            constraint_labels: Vec::new(),
            constraint_residuals: Vec::new(),
        };
        let field = |z: &[f64]| self.field(z);
        for step in 0..=steps {
            if step > 0 {
                for _ in 0..sub {
                    let next = rk4_step(&field, &s, h);
                    if next.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFiniteState { step, time: step as f64 * dt, last_valid: s });
                    }
                    s = next;
                }
            }
            traj.times.push(step as f64 * dt);
            traj.states.push(s[..self.n].iter().copied().chain(self.momenta(&s)).collect());
        }
        Ok(traj)
    }
}

/// Oracle run started from a point of the constrained flow: `q₀` from
/// `z0` and `q̇₀` from the unreduced Dirac equations at `z0`.
pub fn regularized_oracle(
    l: &StructuredLagrangian,
    unreduced: &EomSet,
    z0: &[f64],
    epsilon: f64,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    let n = l.n();
    let oracle = RegularizedOracle::new(l, epsilon)?;
    let zdot = unreduced.field(z0);
    oracle.integrate(&l.space.names(), &z0[..n], &zdot[..n], dt, t_end)
}

/// Angular frequency from zero crossings of the linearly detrended signal.
pub fn zero_crossing_frequency(times: &[f64], signal: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 3 || signal.len() != n {
        return None;
    }
    let (mt, ms) = (times.iter().sum::<f64>() / n as f64, signal.iter().sum::<f64>() / n as f64);
    let cov: f64 = times.iter().zip(signal).map(|(t, s)| (t - mt) * (s - ms)).sum();
    let var: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    let detrended: Vec<f64> = times.iter().zip(signal).map(|(t, s)| s - ms - slope * (t - mt)).collect();
    let mut crossings = Vec::new();
    for i in 1..n {
        let (a, b) = (detrended[i - 1], detrended[i]);
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            let frac = a / (a - b);
            crossings.push(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 3 {
        return None;
    }
    let span = crossings.last()? - crossings.first()?;
    let half_periods = (crossings.len() - 1) as f64;
    Some(std::f64::consts::PI * half_periods / span)
}
