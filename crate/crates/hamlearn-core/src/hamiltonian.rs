//! Evolution plans: multi-step geometrically local Hamiltonians.
//!
//! A plan document is JSON: `n`, `dimension`, optional integer `coords`
//! (one tuple per qubit), and `steps`, each carrying a `time` and a list of
//! `{qubits, coeff, pauli}` interaction terms. Coefficients are clamped to
//! [-1, 1] by contract and every body is a single Pauli word, so each term
//! has unit spectral norm.

use crate::dense::{sum_to_dense, DenseOperator};
use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliSum, PauliTerm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Parse-time plausibility bound on |t_k|.
pub const MAX_STEP_TIME: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HamTerm {
    pub qubits: Vec<usize>,
    pub coeff: f64,
    pub word: Vec<Axis>,
}

impl HamTerm {
    pub fn support_mask(&self) -> u64 {
        self.qubits.iter().fold(0, |m, &q| m | (1u64 << q))
    }

    /// The unit-norm Pauli body on the full register.
    pub fn body(&self, n: usize) -> Result<PauliTerm> {
        PauliTerm::from_word(n, &self.qubits, &self.word)
    }

    pub fn word_string(&self) -> String {
        self.word.iter().map(|a| a.symbol()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub terms: Vec<HamTerm>,
}

impl HamiltonianSpec {
    /// Full Hamiltonian as a Pauli sum (coefficients folded in).
    pub fn as_sum(&self) -> Result<PauliSum> {
        let mut sum = PauliSum::zero(self.n);
        for t in &self.terms {
            sum.add_term(&t.body(self.n)?, Complex64::new(t.coeff, 0.0))?;
        }
        Ok(sum)
    }

    pub fn dense(&self, limit: usize) -> Result<DenseOperator> {
        sum_to_dense(&self.as_sum()?, limit)
    }

    /// Checks every body has spectral norm at most one on its own support.
    /// Bodies are single Pauli words so this is exact by construction; the
    /// dense check guards future extensions.
    pub fn validate_body_norms(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            let k = t.qubits.len();
            let local = PauliTerm::from_word(k, &(0..k).collect::<Vec<_>>(), &t.word)?;
            let dense = crate::dense::term_to_dense(&local, 12)?;
            let norm = dense.spectral_norm();
            if norm > 1.0 + 1e-9 {
                return Err(Error::Invalid {
                    what: "hamiltonian term",
                    message: format!("term {i} body norm {norm} exceeds 1"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub time: f64,
    pub ham: HamiltonianSpec,
}

/// K-step evolution plan. Step k is applied to the state first for k = 0,
/// so the overall unitary is U = U_{K-1} ... U_1 U_0 with
/// U_k = exp(-i t_k H_k).
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionPlan {
    pub n: usize,
    pub dimension: usize,
    pub coords: Option<Vec<Vec<i64>>>,
    pub steps: Vec<Step>,
}

impl EvolutionPlan {
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    /// Largest interaction support size across all steps.
    pub fn locality(&self) -> usize {
        self.steps
            .iter()
            .flat_map(|s| s.ham.terms.iter())
            .map(|t| t.qubits.len())
            .max()
            .unwrap_or(0)
    }

    pub fn t_max(&self) -> f64 {
        self.steps.iter().map(|s| s.time.abs()).fold(0.0, f64::max)
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }
}

/// Vertices are individual interaction terms across all steps; edges join
/// terms with overlapping supports.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    pub vertices: Vec<GraphVertex>,
    pub adjacency: Vec<Vec<usize>>,
    pub max_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphVertex {
    pub step: usize,
    pub term: usize,
    pub support: u64,
}

impl InteractionGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

pub fn interaction_graph(plan: &EvolutionPlan) -> InteractionGraph {
    let mut vertices = Vec::new();
    for (k, step) in plan.steps.iter().enumerate() {
        for (j, term) in step.ham.terms.iter().enumerate() {
            vertices.push(GraphVertex {
                step: k,
                term: j,
                support: term.support_mask(),
            });
        }
    }
    let v = vertices.len();
    let mut adjacency = vec![Vec::new(); v];
    for a in 0..v {
        for b in (a + 1)..v {
            if vertices[a].support & vertices[b].support != 0 {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
    InteractionGraph {
        vertices,
        adjacency,
        max_degree,
    }
}

/// Convergence radius of the connected-cluster series: 1/(2 e K d).
pub fn short_time_radius(k: usize, degree: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    // Self-overlap keeps the effective degree at 1 or more.
    let d = degree.max(1);
    1.0 / (2.0 * std::f64::consts::E * (k as f64) * (d as f64))
}

impl EvolutionPlan {
    pub fn short_time(&self, graph: &InteractionGraph) -> bool {
        self.t_max() < short_time_radius(self.k(), graph.max_degree)
    }
}

// --- document (de)serialization -----------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    n: usize,
    dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<Vec<i64>>>,
    steps: Vec<StepDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    time: f64,
    terms: Vec<TermDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    qubits: Vec<usize>,
    coeff: f64,
    pauli: String,
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::PlanParse {
        location: location.into(),
        message: message.into(),
    }
}

pub fn parse_plan(text: &str) -> Result<EvolutionPlan> {
    let doc: PlanDoc = serde_json::from_str(text).map_err(|e| {
        parse_err(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    plan_from_doc(doc)
}

fn plan_from_doc(doc: PlanDoc) -> Result<EvolutionPlan> {
    if doc.n == 0 || doc.n > crate::pauli::MAX_QUBITS {
        return Err(parse_err("n", format!("qubit count {} out of range", doc.n)));
    }
    if doc.dimension == 0 {
        return Err(parse_err("dimension", "must be positive"));
    }
    if let Some(coords) = &doc.coords {
        if coords.len() != doc.n {
            return Err(parse_err(
                "coords",
                format!("{} coordinate tuples for {} qubits", coords.len(), doc.n),
            ));
        }
        for (i, c) in coords.iter().enumerate() {
            if c.len() != doc.dimension {
                return Err(parse_err(
                    format!("coords[{i}]"),
                    format!("tuple length {} does not match dimension {}", c.len(), doc.dimension),
                ));
            }
        }
    }
    if doc.steps.is_empty() {
        return Err(parse_err("steps", "at least one step is required"));
    }
    let mut steps = Vec::with_capacity(doc.steps.len());
    for (k, sd) in doc.steps.into_iter().enumerate() {
        if !sd.time.is_finite() || sd.time.abs() > MAX_STEP_TIME {
            return Err(parse_err(
                format!("steps[{k}].time"),
                format!("time {} is not a plausible step time", sd.time),
            ));
        }
        if sd.terms.is_empty() {
            return Err(parse_err(format!("steps[{k}].terms"), "empty term list"));
        }
        let mut terms = Vec::with_capacity(sd.terms.len());
        for (j, td) in sd.terms.into_iter().enumerate() {
            let loc = format!("steps[{k}].terms[{j}]");
            if td.qubits.is_empty() {
                return Err(parse_err(loc, "empty qubit list"));
            }
            if !td.coeff.is_finite() || td.coeff.abs() > 1.0 {
                return Err(parse_err(
                    loc,
                    format!("coefficient {} outside [-1, 1]", td.coeff),
                ));
            }
            if td.pauli.len() != td.qubits.len() {
                return Err(parse_err(
                    loc,
                    format!(
                        "pauli word '{}' does not match {} qubits",
                        td.pauli,
                        td.qubits.len()
                    ),
                ));
            }
            let mut word = Vec::with_capacity(td.pauli.len());
            for ch in td.pauli.chars() {
                let axis = Axis::from_symbol(ch).ok_or_else(|| {
                    parse_err(&loc as &str, format!("symbol '{ch}' is not one of X, Y, Z"))
                })?;
                word.push(axis);
            }
            let mut seen = 0u64;
            for &q in &td.qubits {
                if q >= doc.n {
                    return Err(parse_err(loc, format!("qubit {q} out of range for n = {}", doc.n)));
                }
                if seen & (1 << q) != 0 {
                    return Err(parse_err(loc, format!("qubit {q} listed twice")));
                }
                seen |= 1 << q;
            }
            terms.push(HamTerm {
                qubits: td.qubits,
                coeff: td.coeff,
                word,
            });
        }
        steps.push(Step {
            time: sd.time,
            ham: HamiltonianSpec { n: doc.n, terms },
        });
    }
    Ok(EvolutionPlan {
        n: doc.n,
        dimension: doc.dimension,
        coords: doc.coords,
        steps,
    })
}

fn plan_to_doc(plan: &EvolutionPlan) -> PlanDoc {
    PlanDoc {
        n: plan.n,
        dimension: plan.dimension,
        coords: plan.coords.clone(),
        steps: plan
            .steps
            .iter()
            .map(|s| StepDoc {
                time: s.time,
                terms: s
                    .ham
                    .terms
                    .iter()
                    .map(|t| TermDoc {
                        qubits: t.qubits.clone(),
                        coeff: t.coeff,
                        pauli: t.word_string(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Canonical serialization; identical plans serialize to identical bytes.
pub fn plan_to_json(plan: &EvolutionPlan) -> String {
    let mut out = serde_json::to_string_pretty(&plan_to_doc(plan)).expect("plan serializes");
    out.push('\n');
    out
}

pub fn plan_digest(plan: &EvolutionPlan) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(plan_to_json(plan).as_bytes());
    hasher.finalize().into()
}

pub fn digest_hex(digest: &[u8; 32]) -> String {
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn load_plan(path: &std::path::Path) -> Result<EvolutionPlan> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.display().to_string(),
        });
    }
    let text = std::fs::read_to_string(path)?;
    parse_plan(&text)
}

// --- stock plan builders --------------------------------------------------

pub mod builders {
    use super::*;

    fn term(qubits: &[usize], coeff: f64, word: &str) -> HamTerm {
        HamTerm {
            qubits: qubits.to_vec(),
            coeff,
            word: word.chars().map(|c| Axis::from_symbol(c).unwrap()).collect(),
        }
    }

    /// Open transverse-field Ising chain: coupling j on nearest-neighbour ZZ
    /// bonds plus field g on every site, one step of length t.
    pub fn tfim_chain(n: usize, j: f64, g: f64, t: f64) -> EvolutionPlan {
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            terms.push(term(&[i, i + 1], j, "ZZ"));
        }
        for i in 0..n {
            terms.push(term(&[i], g, "X"));
        }
        EvolutionPlan {
            n,
            dimension: 1,
            coords: Some((0..n).map(|i| vec![i as i64]).collect()),
            steps: vec![Step {
                time: t,
                ham: HamiltonianSpec { n, terms },
            }],
        }
    }

    /// Open chain of ZZ bonds only.
    pub fn zz_chain(n: usize, j: f64, t: f64) -> EvolutionPlan {
        let terms = (0..n - 1).map(|i| term(&[i, i + 1], j, "ZZ")).collect();
        EvolutionPlan {
            n,
            dimension: 1,
            coords: Some((0..n).map(|i| vec![i as i64]).collect()),
            steps: vec![Step {
                time: t,
                ham: HamiltonianSpec { n, terms },
            }],
        }
    }

    /// Transverse-field Ising model on a rows x cols open grid. Qubit
    /// (r, c) has index r * cols + c and coordinates [c, r].
    pub fn tfim_grid(rows: usize, cols: usize, j: f64, g: f64, t: f64) -> EvolutionPlan {
        let n = rows * cols;
        let idx = |r: usize, c: usize| r * cols + c;
        let mut terms = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    terms.push(term(&[idx(r, c), idx(r, c + 1)], j, "ZZ"));
                }
                if r + 1 < rows {
                    terms.push(term(&[idx(r, c), idx(r + 1, c)], j, "ZZ"));
                }
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                terms.push(term(&[idx(r, c)], g, "X"));
            }
        }
        let coords = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| vec![c as i64, r as i64]))
            .collect();
        EvolutionPlan {
            n,
            dimension: 2,
            coords: Some(coords),
            steps: vec![Step {
                time: t,
                ham: HamiltonianSpec { n, terms },
            }],
        }
    }

    /// Two-step plan: ZZ bonds for time t1, then transverse fields for t2.
    pub fn tfim_layered(n: usize, j: f64, g: f64, t1: f64, t2: f64) -> EvolutionPlan {
        let bonds = (0..n - 1).map(|i| term(&[i, i + 1], j, "ZZ")).collect();
        let fields = (0..n).map(|i| term(&[i], g, "X")).collect();
        EvolutionPlan {
            n,
            dimension: 1,
            coords: Some((0..n).map(|i| vec![i as i64]).collect()),
            steps: vec![
                Step {
                    time: t1,
                    ham: HamiltonianSpec { n, terms: bonds },
                },
                Step {
                    time: t2,
                    ham: HamiltonianSpec { n, terms: fields },
                },
            ],
        }
    }

    /// Single-qubit plan H = coeff * axis for time t.
    pub fn single_qubit(axis: Axis, coeff: f64, t: f64) -> EvolutionPlan {
        EvolutionPlan {
            n: 1,
            dimension: 1,
            coords: Some(vec![vec![0]]),
            steps: vec![Step {
                time: t,
                ham: HamiltonianSpec {
                    n: 1,
                    terms: vec![HamTerm {
                        qubits: vec![0],
                        coeff,
                        word: vec![axis],
                    }],
                },
            }],
        }
    }

    /// XX + YY exchange on two qubits.
    pub fn xy_pair(t: f64) -> EvolutionPlan {
        EvolutionPlan {
            n: 2,
            dimension: 1,
            coords: Some(vec![vec![0], vec![1]]),
            steps: vec![Step {
                time: t,
                ham: HamiltonianSpec {
                    n: 2,
                    terms: vec![term(&[0, 1], 1.0, "XX"), term(&[0, 1], 1.0, "YY")],
                },
            }],
        }
    }
}
