//! Strong elimination, Darboux charts and the quantization table.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dirac::{ConstraintAnalysis, DiracStructure};
use crate::error::{Error, Result};
use crate::expr::{substitute_affine, AffineForm, AffineMap, AffineSubstitution, PhaseFunction};
use crate::matrix::RatMatrix;
use crate::scalar::{self, Scalar};

/// Which variables Gaussian elimination solves for first.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum PivotPolicy {
    /// Momenta in declaration order, then coordinates in declaration order.
    #[default]
    Default,
    /// The listed phase indices first, then the default order.
    Prefer(Vec<usize>),
}

impl PivotPolicy {
    fn order(&self, n: usize) -> Vec<usize> {
        let default: Vec<usize> = (n..2 * n).chain(0..n).collect();
        match self {
            PivotPolicy::Default => default,
            PivotPolicy::Prefer(first) => {
                let mut order = first.clone();
                order.extend(default.into_iter().filter(|i| !first.contains(i)));
                order
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSystem {
    /// Names of all phase variables of the unreduced system.
    pub names: Vec<String>,
    /// Phase indices kept after elimination.
    pub retained: Vec<usize>,
    pub substitution: AffineSubstitution,
    /// Hamiltonian over the retained variables.
    pub hamiltonian: PhaseFunction,
    /// Dirac structure restricted to the retained variables.
    pub structure: DiracStructure,
    /// Dirac structure over the full phase space.
    pub full_structure: DiracStructure,
    /// Constraints used for elimination.
    pub selection: Vec<usize>,
}

impl ReducedSystem {
    pub fn retained_names(&self) -> Vec<String> {
        self.retained.iter().map(|&i| self.names[i].clone()).collect()
    }

    pub fn eliminated(&self) -> Vec<usize> {
        self.substitution.eliminated()
    }

    /// A full-space affine form expressed over the retained variables.
    pub fn reduce_form(&self, f: &AffineForm) -> Result<AffineForm> {
        self.substitution.apply_affine(f).restrict(&self.retained, &self.names)
    }

    /// A full-space function expressed over the retained variables.
    pub fn reduce_function(&self, f: &PhaseFunction) -> Result<PhaseFunction> {
        substitute_affine(f, &self.substitution)?.restrict(&self.retained, &self.names)
    }

    /// Values of all phase variables from the retained ones.
    pub fn lift(&self, retained_values: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.names.len()];
        for (&i, &v) in self.retained.iter().zip(retained_values) {
            z[i] = v;
        }
        for (&i, form) in self.substitution.iter() {
            z[i] = form.eval_f64(&z);
        }
        z
    }
}

/// Eliminates variables with every constraint; all must be second class.
pub fn strong_eliminate(analysis: &ConstraintAnalysis) -> Result<ReducedSystem> {
    eliminate_with(analysis, None, &PivotPolicy::Default)
}

/// Eliminates with a chosen second-class selection (the classification's
/// when `None`) and pivot policy. With a selection, first-class freedom
/// may remain in the result.
pub fn eliminate_with(
    analysis: &ConstraintAnalysis,
    selection: Option<&[usize]>,
    policy: &PivotPolicy,
) -> Result<ReducedSystem> {
    let analysis = if analysis.classified { analysis.clone() } else { analysis.classify()? };
    let selection: Vec<usize> = match selection {
        Some(s) => s.to_vec(),
        None => {
            if !analysis.fcc_basis.is_empty() {
                let names = analysis.space.names();
                let forms: Vec<String> = analysis.fcc_forms().iter().map(|f| f.format(&names)).collect();
                return Err(Error::FirstClassRemaining(forms.join(", ")));
            }
            (0..analysis.len()).collect()
        }
    };
    let full_structure = analysis.dirac_structure(&selection)?;
    let space = &analysis.space;
    let names = space.names();
    let dim = space.dim();
    let rows: Vec<Vec<Scalar>> = selection.iter().map(|&i| analysis.constraints[i].form.augmented()).collect();
    let system = RatMatrix::from_rows_with_cols(rows, dim + 1);
    let ech = system.echelon_with_order(&policy.order(space.n()));
    if ech.pivots.len() < selection.len() {
        return Err(Error::RankDeficient(format!("{} constraints, rank {}", selection.len(), ech.pivots.len())));
    }
    let mut map = BTreeMap::new();
    for (r, &p) in ech.pivots.iter().enumerate() {
        let row = ech.reduced.row(r);
        let mut coeffs: Vec<Scalar> = row[..dim].iter().map(|x| -x).collect();
        coeffs[p] = Scalar::zero();
        map.insert(p, AffineForm::new(coeffs, -row[dim].clone()));
    }
    let substitution = AffineSubstitution::new(dim, map, &names)?;
    let retained: Vec<usize> = (0..dim).filter(|i| !ech.pivots.contains(i)).collect();
    let hamiltonian = substitute_affine(&analysis.hamiltonian, &substitution)?.restrict(&retained, &names)?;
    let structure = full_structure.restrict(&retained);
    Ok(ReducedSystem { names, retained, substitution, hamiltonian, structure, full_structure, selection })
}

/// Linear canonical coordinates `(Q₁..Q_k, P₁..P_k)` on the retained variables.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalChart {
    pub source_names: Vec<String>,
    pub q_names: Vec<String>,
    pub p_names: Vec<String>,
    /// Rows are `Q₁..Q_k, P₁..P_k` as forms over the source variables.
    pub map: RatMatrix,
    pub inverse: RatMatrix,
}

impl CanonicalChart {
    pub fn pairs(&self) -> usize {
        self.q_names.len()
    }

    pub fn chart_names(&self) -> Vec<String> {
        self.q_names.iter().chain(&self.p_names).cloned().collect()
    }

    /// `T D Tᵀ`, which is the standard symplectic form for a valid chart.
    pub fn pushforward(&self, structure: &DiracStructure) -> RatMatrix {
        self.map.mul(&structure.matrix).mul(&self.map.transpose())
    }

    pub fn is_canonical_for(&self, structure: &DiracStructure) -> bool {
        let k = self.pairs();
        let mut j = RatMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            j[(i, k + i)] = Scalar::one();
            j[(k + i, i)] = -Scalar::one();
        }
        self.pushforward(structure) == j && self.map.mul(&self.inverse) == RatMatrix::identity(2 * k)
    }

    /// Chart coordinate `i` as a form over the source variables.
    pub fn coordinate(&self, i: usize) -> AffineForm {
        AffineForm::new(self.map.row(i).to_vec(), Scalar::zero())
    }

    /// Source variable `i` as a form over the chart variables.
    pub fn source_in_chart(&self, i: usize) -> AffineForm {
        AffineForm::new(self.inverse.row(i).to_vec(), Scalar::zero())
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        let names = &self.source_names;
        self.chart_names().into_iter().enumerate().map(|(i, n)| (n, self.coordinate(i).format(names))).collect()
    }
}

/// Symplectic Gram–Schmidt over the rationals.
pub fn darboux_chart(structure: &DiracStructure) -> Result<CanonicalChart> {
    let d = &structure.matrix;
    let dim = structure.dim();
    if dim % 2 != 0 {
        return Err(Error::OddDimension(dim));
    }
    let bracket = |a: &[Scalar], b: &[Scalar]| -> Scalar {
        let row = d.vec_mul(a);
        row.iter().zip(b).fold(Scalar::zero(), |acc, (x, y)| acc + x * y)
    };
    let mut work: Vec<Vec<Scalar>> = (0..dim)
        .map(|i| {
            let mut v = vec![Scalar::zero(); dim];
            v[i] = Scalar::one();
            v
        })
        .collect();
    let (mut qs, mut ps) = (Vec::new(), Vec::new());
    while let Some(u) = work.first().cloned() {
        let partner = work.iter().enumerate().skip(1).find_map(|(idx, v)| {
            let s = bracket(&u, v);
            (!s.is_zero()).then_some((idx, s))
        });
        let Some((vi, s)) = partner else {
            return Err(Error::SingularStructure);
        };
        let p: Vec<Scalar> = work[vi].iter().map(|x| x / &s).collect();
        work.remove(vi);
        work.remove(0);
        for w in work.iter_mut() {
            let (wp, wq) = (bracket(w, &p), bracket(w, &u));
            for ((x, qv), pv) in w.iter_mut().zip(&u).zip(&p) {
                *x = x.clone() - &wp * qv + &wq * pv;
            }
        }
        work.retain(|w| w.iter().any(|x| !x.is_zero()));
        qs.push(u);
        ps.push(p);
    }
    let k = qs.len();
    if 2 * k != dim {
        return Err(Error::SingularStructure);
    }
    let map = RatMatrix::from_rows(qs.into_iter().chain(ps).collect());
    let inverse = map.inverse().ok_or(Error::SingularStructure)?;
    Ok(CanonicalChart {
        source_names: structure.names.clone(),
        q_names: (1..=k).map(|i| format!("Q{i}")).collect(),
        p_names: (1..=k).map(|i| format!("P{i}")).collect(),
        map,
        inverse,
    })
}

/// Chart from explicit forms: `q[i]` and `p[i]` over the structure's variables.
pub fn chart_from_forms(structure: &DiracStructure, q: &[AffineForm], p: &[AffineForm]) -> Result<CanonicalChart> {
    if q.len() != p.len() || 2 * q.len() != structure.dim() {
        return Err(Error::DimensionMismatch("a chart needs one Q and one P per pair, covering every variable".into()));
    }
    let map = RatMatrix::from_rows(q.iter().chain(p).map(|f| f.coeffs().to_vec()).collect());
    let inverse = map.inverse().ok_or(Error::SingularStructure)?;
    let k = q.len();
    Ok(CanonicalChart {
        source_names: structure.names.clone(),
        q_names: (1..=k).map(|i| format!("Q{i}")).collect(),
        p_names: (1..=k).map(|i| format!("P{i}")).collect(),
        map,
        inverse,
    })
}

/// The reduced Hamiltonian in chart variables.
pub fn reduced_hamiltonian(system: &ReducedSystem, chart: &CanonicalChart) -> Result<PhaseFunction> {
    if chart.inverse.rows() != system.hamiltonian.dim() {
        return Err(Error::DimensionMismatch("chart built for different variables".into()));
    }
    Ok(system.hamiltonian.pullback(&AffineMap::linear(chart.inverse.clone())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorEntry {
    pub a: String,
    pub b: String,
    /// Right-hand side in units of iħ.
    #[serde(with = "scalar::serde_scalar")]
    pub value: Scalar,
    pub canonical: bool,
}

impl fmt::Display for CommutatorEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.value;
        let rhs = if v.is_zero() {
            "0".to_string()
        } else if v.is_one() {
            "iħ".to_string()
        } else if (-v).is_one() {
            "-iħ".to_string()
        } else {
            format!("{v} iħ")
        };
        write!(f, "[{}^, {}^] = {rhs}", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorTable {
    pub entries: Vec<CommutatorEntry>,
}

impl CommutatorTable {
    pub fn get(&self, a: &str, b: &str) -> Option<Scalar> {
        self.entries.iter().find_map(|e| {
            if e.a == a && e.b == b {
                Some(e.value.clone())
            } else if e.a == b && e.b == a {
                Some(-e.value.clone())
            } else {
                None
            }
        })
    }
}

/// `[ẑᵢ, ẑⱼ] = iħ D[i][j]` for the retained variables, then the chart pairs.
pub fn quantize(chart: &CanonicalChart, structure: &DiracStructure) -> CommutatorTable {
    let mut entries = Vec::new();
    let n = structure.dim();
    for i in 0..n {
        for j in i + 1..n {
            let a = AffineForm::variable(n, i);
            let b = AffineForm::variable(n, j);
            let value = structure.bracket(i, j).clone();
            let canonical = chart.map.rows() == n
                && (0..chart.pairs()).any(|k| chart.coordinate(k) == a && chart.coordinate(chart.pairs() + k) == b);
            entries.push(CommutatorEntry {
                a: structure.names[i].clone(),
                b: structure.names[j].clone(),
                value,
                canonical,
            });
        }
    }
    for k in 0..chart.pairs() {
        entries.push(CommutatorEntry {
            a: chart.q_names[k].clone(),
            b: chart.p_names[k].clone(),
            value: Scalar::one(),
            canonical: true,
        });
    }
    CommutatorTable { entries }
}
