//! Coefficient estimation from randomized product-state measurements.
//!
//! Each conjugated single-qubit observable U†O_iU is expanded in the Pauli
//! candidate basis fixed by the cluster expansion; every coefficient has an
//! unbiased single-shot estimator built from the dataset records, so one
//! dataset serves all 3n local operators at once.

use crate::cluster::{connected_regions, term_count_bound, ClusterConfig, TruncationPlan};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hamiltonian::{digest_hex, interaction_graph, EvolutionPlan, InteractionGraph};
use crate::pauli::{Axis, PauliSum, PauliTerm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Exponent constant in the sample-size bound.
    pub c: f64,
    /// Zero out estimates smaller than twice their standard error.
    pub threshold: bool,
    /// Use this many records instead of the sample-size bound.
    pub shots_override: Option<u64>,
    /// Use this expansion order instead of the computed one.
    pub m_override: Option<u32>,
    pub cluster: ClusterConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            epsilon: 0.1,
            delta: 0.05,
            c: 1.0,
            threshold: true,
            shots_override: None,
            m_override: None,
            cluster: ClusterConfig::default(),
        }
    }
}

/// N(n, K, Lambda, d, M; eps, delta) before rounding.
pub fn sample_size_raw(
    n: usize,
    k: usize,
    locality: usize,
    degree: usize,
    m: u32,
    epsilon: f64,
    delta: f64,
    c: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Invalid {
            what: "epsilon",
            message: format!("{epsilon} must be positive and finite"),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid {
            what: "delta",
            message: format!("{delta} outside (0, 1)"),
        });
    }
    let base = 4f64.powi((k * locality) as i32) * 3.0 * std::f64::consts::E * degree.max(1) as f64;
    let nn = n as f64;
    Ok(nn * nn * base.powf(c * m as f64) * (1.0 / delta).ln() / (epsilon * epsilon))
}

/// Records sufficient for uniform epsilon-accuracy over all candidate
/// coefficients with failure probability delta.
pub fn sample_size(
    n: usize,
    k: usize,
    locality: usize,
    degree: usize,
    m: u32,
    epsilon: f64,
    delta: f64,
    c: f64,
) -> Result<u64> {
    let raw = sample_size_raw(n, k, locality, degree, m, epsilon, delta, c)?;
    if raw >= u64::MAX as f64 {
        return Err(Error::Capacity {
            what: "sample size",
            predicted: u64::MAX,
            cap: u64::MAX,
        });
    }
    Ok((raw.ceil() as u64).max(1))
}

/// Single-shot estimator of <U†O_iU> from one record: 3 times the outcome
/// sign when the measured basis at qubit i matches O, else 0.
pub fn estimate_u(record: crate::dataset::RecordView<'_>, qubit: usize, axis: Axis) -> f64 {
    if record.bases[qubit] == axis.code() {
        3.0 * record.sign(qubit)
    } else {
        0.0
    }
}

/// Candidate Pauli strings for U†O_iU at truncation order m: strings whose
/// support contains `qubit` and fits inside the union of supports of some
/// connected cluster region touching it.
pub fn candidate_paulis(
    graph: &InteractionGraph,
    n: usize,
    qubit: usize,
    trunc: &TruncationPlan,
    k: usize,
    locality: usize,
    degree: usize,
    cfg: &ClusterConfig,
) -> Result<Vec<PauliTerm>> {
    if qubit >= n {
        return Err(Error::QubitOutOfRange { qubit, n });
    }
    let o_support = 1u64 << qubit;
    let regions = connected_regions(graph, o_support, trunc.m, cfg)?;
    let weight_cap = (k * locality * trunc.m as usize + 1).min(n);
    let mut keys = std::collections::BTreeSet::new();
    for &region in &regions {
        let qubits: Vec<usize> = (0..n).filter(|&q| region >> q & 1 == 1).collect();
        if qubits.len() > 16 {
            return Err(Error::Capacity {
                what: "candidate region",
                predicted: qubits.len() as u64,
                cap: 16,
            });
        }
        // Axis code 0..=3 per region qubit, 3 meaning identity; the anchor
        // qubit must be non-identity.
        let others: Vec<usize> = qubits.iter().copied().filter(|&q| q != qubit).collect();
        let combos = 4u64.pow(others.len() as u32);
        for anchor in 0..3u8 {
            for combo in 0..combos {
                let mut x = 0u64;
                let mut z = 0u64;
                let mut weight = 1usize;
                set_axis(&mut x, &mut z, qubit, anchor);
                let mut c = combo;
                for &q in &others {
                    let code = (c % 4) as u8;
                    c /= 4;
                    if code < 3 {
                        set_axis(&mut x, &mut z, q, code);
                        weight += 1;
                    }
                }
                if weight <= weight_cap {
                    keys.insert((x, z));
                }
            }
        }
    }
    let bound = term_count_bound(trunc, k, locality, degree);
    if keys.len() as u64 > bound {
        return Err(Error::Capacity {
            what: "candidate paulis",
            predicted: keys.len() as u64,
            cap: bound,
        });
    }
    let mut terms: Vec<PauliTerm> = keys
        .into_iter()
        .map(|(x, z)| crate::dense::pauli_term_from_masks(n, x, z))
        .collect();
    terms.sort_by_key(|t| t.order_key());
    Ok(terms)
}

fn set_axis(x: &mut u64, z: &mut u64, qubit: usize, code: u8) {
    let bit = 1u64 << qubit;
    match code {
        0 => *x |= bit,
        1 => {
            *x |= bit;
            *z |= bit;
        }
        2 => *z |= bit,
        _ => unreachable!(),
    }
}

/// Per-record tables the estimators read: outcome signs, measured bases,
/// and the three Pauli expectations of each input stabilizer label.
struct RecordTables {
    n: usize,
    signs: Vec<i8>,
    bases: Vec<u8>,
    /// exp[3 * (record * n + q) + axis] in {-1, 0, 1}.
    exps: Vec<i8>,
}

impl RecordTables {
    fn build(ds: &Dataset) -> RecordTables {
        let n = ds.n();
        let len = ds.len() as usize;
        let mut signs = Vec::with_capacity(len * n);
        let mut bases = Vec::with_capacity(len * n);
        let mut exps = Vec::with_capacity(len * n * 3);
        for rec in ds.records() {
            for q in 0..n {
                signs.push(if rec.outcomes[q] == 0 { 1 } else { -1 });
                bases.push(rec.bases[q]);
                let label = rec.label(q);
                for axis in Axis::ALL {
                    exps.push(label.pauli_expectation(axis) as i8);
                }
            }
        }
        RecordTables {
            n,
            signs,
            bases,
            exps,
        }
    }

    fn records(&self) -> usize {
        self.signs.len() / self.n
    }
}

fn accumulate(
    tables: &RecordTables,
    qubit: usize,
    axis: Axis,
    term: &PauliTerm,
) -> (f64, f64, u64) {
    let n = tables.n;
    let n_records = tables.records();
    let support: Vec<(usize, u8)> = term
        .support_qubits()
        .into_iter()
        .map(|q| (q, term.axis_at(q).expect("support qubit").code()))
        .collect();
    let scale = 3f64.powi(support.len() as i32);
    let axis_code = axis.code();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for l in 0..n_records {
        let off = l * n;
        if tables.bases[off + qubit] != axis_code {
            continue;
        }
        let u = 3.0 * tables.signs[off + qubit] as f64;
        let mut prod = 1i32;
        for &(q, code) in &support {
            prod *= tables.exps[3 * (off + q) + code as usize] as i32;
            if prod == 0 {
                break;
            }
        }
        if prod == 0 {
            continue;
        }
        let v = scale * u * prod as f64;
        sum += v;
        sumsq += v * v;
    }
    (sum, sumsq, n_records as u64)
}

fn mean_stderr(sum: f64, sumsq: f64, count: u64) -> (f64, f64) {
    let nf = count as f64;
    let mean = sum / nf;
    if count < 2 {
        return (mean, f64::INFINITY);
    }
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// One candidate coefficient of U†O_iU, straight off the dataset.
pub fn estimate_coefficient(
    ds: &Dataset,
    qubit: usize,
    axis: Axis,
    term: &PauliTerm,
) -> Result<(f64, f64)> {
    if term.n() != ds.n() {
        return Err(Error::DimensionMismatch {
            left: term.n(),
            right: ds.n(),
        });
    }
    if qubit >= ds.n() {
        return Err(Error::QubitOutOfRange {
            qubit,
            n: ds.n(),
        });
    }
    let tables = RecordTables::build(ds);
    let (sum, sumsq, count) = accumulate(&tables, qubit, axis, term);
    Ok(mean_stderr(sum, sumsq, count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEstimate {
    pub term: PauliTerm,
    pub alpha: f64,
    pub stderr: f64,
    /// False when the threshold zeroed this coefficient.
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedLocal {
    pub qubit: usize,
    pub axis: Axis,
    pub estimates: Vec<CandidateEstimate>,
    /// Thresholded estimates assembled into an operator.
    pub operator: PauliSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub n: usize,
    pub k: usize,
    pub m: u32,
    pub shots: u64,
    pub seed: u64,
    pub gamma: f64,
    pub plan_digest: [u8; 32],
    /// 3n entries, indexed by 3 * qubit + axis code.
    pub locals: Vec<LearnedLocal>,
}

impl LearnedModel {
    pub fn local(&self, qubit: usize, axis: Axis) -> Result<&LearnedLocal> {
        self.locals
            .get(3 * qubit + axis.code() as usize)
            .ok_or(Error::QubitOutOfRange {
                qubit,
                n: self.n,
            })
    }
}

/// Estimate all 3n local Heisenberg operators from one dataset.
pub fn learn_local_operators(
    plan: &EvolutionPlan,
    ds: &Dataset,
    trunc: &TruncationPlan,
    cfg: &LearnConfig,
) -> Result<LearnedModel> {
    if ds.n() != plan.n {
        return Err(Error::DimensionMismatch {
            left: ds.n(),
            right: plan.n,
        });
    }
    if *ds.plan_digest() != crate::hamiltonian::plan_digest(plan) {
        return Err(Error::Invalid {
            what: "dataset",
            message: "dataset was sampled from a different plan".into(),
        });
    }
    if ds.len() < 2 {
        return Err(Error::Invalid {
            what: "dataset",
            message: "need at least two records".into(),
        });
    }
    let graph = interaction_graph(plan);
    let degree = graph.max_degree;
    let locality = plan.locality();
    let k = plan.k();
    let tables = RecordTables::build(ds);
    let mut locals = Vec::with_capacity(3 * plan.n);
    for qubit in 0..plan.n {
        let candidates = candidate_paulis(
            &graph,
            plan.n,
            qubit,
            trunc,
            k,
            locality,
            degree,
            &cfg.cluster,
        )?;
        for axis in Axis::ALL {
            let mut estimates = Vec::with_capacity(candidates.len());
            let mut operator = PauliSum::zero(plan.n);
            for term in &candidates {
                let (sum, sumsq, count) = accumulate(&tables, qubit, axis, term);
                let (alpha, stderr) = mean_stderr(sum, sumsq, count);
                let kept = !cfg.threshold || alpha.abs() >= 2.0 * stderr;
                if kept && alpha != 0.0 {
                    operator.add_term(term, Complex64::new(alpha, 0.0))?;
                }
                estimates.push(CandidateEstimate {
                    term: term.clone(),
                    alpha,
                    stderr,
                    kept,
                });
            }
            locals.push(LearnedLocal {
                qubit,
                axis,
                estimates,
                operator,
            });
        }
    }
    Ok(LearnedModel {
        n: plan.n,
        k,
        m: trunc.m,
        shots: ds.len() as u64,
        seed: ds.seed(),
        gamma: ds.gamma(),
        plan_digest: *ds.plan_digest(),
        locals,
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub n: usize,
    pub k: usize,
    pub m: u32,
    pub shots: u64,
    pub seed: u64,
    pub gamma: f64,
    pub plan_digest: String,
    pub operators: Vec<OperatorDoc>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    pub qubit: usize,
    pub axis: char,
    pub terms: Vec<TermEstimateDoc>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermEstimateDoc {
    /// Full word over the register, qubit 0 leftmost, identity as 'I'.
    pub word: String,
    pub alpha: f64,
    pub stderr: f64,
    pub kept: bool,
}

fn term_word(term: &PauliTerm) -> String {
    (0..term.n())
        .map(|q| term.axis_at(q).map_or('I', |a| a.symbol()))
        .collect()
}

fn word_term(n: usize, word: &str) -> Result<PauliTerm> {
    if word.chars().count() != n {
        return Err(Error::Invalid {
            what: "model term",
            message: format!("word '{word}' does not cover {n} qubits"),
        });
    }
    let mut qubits = Vec::new();
    let mut axes = Vec::new();
    for (q, ch) in word.chars().enumerate() {
        if ch == 'I' {
            continue;
        }
        qubits.push(q);
        axes.push(Axis::from_symbol(ch).ok_or_else(|| Error::Invalid {
            what: "model term",
            message: format!("unknown symbol '{ch}'"),
        })?);
    }
    PauliTerm::from_word(n, &qubits, &axes)
}

pub fn model_to_doc(model: &LearnedModel) -> ModelDoc {
    let operators = model
        .locals
        .iter()
        .map(|l| OperatorDoc {
            qubit: l.qubit,
            axis: l.axis.symbol(),
            terms: l
                .estimates
                .iter()
                .map(|e| TermEstimateDoc {
                    word: term_word(&e.term),
                    alpha: e.alpha,
                    stderr: e.stderr,
                    kept: e.kept,
                })
                .collect(),
        })
        .collect();
    ModelDoc {
        n: model.n,
        k: model.k,
        m: model.m,
        shots: model.shots,
        seed: model.seed,
        gamma: model.gamma,
        plan_digest: digest_hex(&model.plan_digest),
        operators,
    }
}

pub fn model_from_doc(doc: &ModelDoc) -> Result<LearnedModel> {
    if doc.operators.len() != 3 * doc.n {
        return Err(Error::Invalid {
            what: "model",
            message: format!(
                "{} operators for {} qubits, expected {}",
                doc.operators.len(),
                doc.n,
                3 * doc.n
            ),
        });
    }
    let mut digest = [0u8; 32];
    parse_hex(&doc.plan_digest, &mut digest)?;
    let mut locals = Vec::with_capacity(doc.operators.len());
    for (idx, op) in doc.operators.iter().enumerate() {
        let axis = Axis::from_symbol(op.axis).ok_or_else(|| Error::Invalid {
            what: "model",
            message: format!("unknown axis '{}'", op.axis),
        })?;
        if idx != 3 * op.qubit + axis.code() as usize {
            return Err(Error::Invalid {
                what: "model",
                message: format!("operator {idx} out of order"),
            });
        }
        let mut estimates = Vec::with_capacity(op.terms.len());
        let mut operator = PauliSum::zero(doc.n);
        for t in &op.terms {
            let term = word_term(doc.n, &t.word)?;
            if t.kept && t.alpha != 0.0 {
                operator.add_term(&term, Complex64::new(t.alpha, 0.0))?;
            }
            estimates.push(CandidateEstimate {
                term,
                alpha: t.alpha,
                stderr: t.stderr,
                kept: t.kept,
            });
        }
        locals.push(LearnedLocal {
            qubit: op.qubit,
            axis,
            estimates,
            operator,
        });
    }
    Ok(LearnedModel {
        n: doc.n,
        k: doc.k,
        m: doc.m,
        shots: doc.shots,
        seed: doc.seed,
        gamma: doc.gamma,
        plan_digest: digest,
        locals,
    })
}

fn parse_hex(s: &str, out: &mut [u8; 32]) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() != 64 {
        return Err(Error::Invalid {
            what: "model",
            message: "plan digest must be 64 hex characters".into(),
        });
    }
    for (i, chunk) in bytes.chunks(2).enumerate() {
        let hi = hex_val(chunk[0])?;
        let lo = hex_val(chunk[1])?;
        out[i] = hi << 4 | lo;
    }
    Ok(())
}

fn hex_val(b: u8) -> Result<u8> {
    match b {
        b'0'..=b'9' => Ok(b - b'0'),
        b'a'..=b'f' => Ok(b - b'a' + 10),
        _ => Err(Error::Invalid {
            what: "model",
            message: "plan digest has non-hex characters".into(),
        }),
    }
}

pub fn model_to_json(model: &LearnedModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&model_to_doc(model))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<LearnedModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    model_from_doc(&doc)
}
