//! Downstream uses of a learned model: mean-value prediction for classically
//! described states, Monte-Carlo sewing for global observables on 2D grids,
//! surrogate classifier training, and noisy-device benchmarking.

use crate::cluster::{truncation_order, TruncationPlan};
use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::hamiltonian::{interaction_graph, EvolutionPlan, InteractionGraph};
use crate::learner::{candidate_paulis, learn_local_operators, LearnConfig};
use crate::pauli::{Axis, PauliSum, PauliTerm, StabilizerLabel};
use crate::reconstruct::{apply_channel, sew_channel, LocalOperators};
use crate::rng::{substream, Domain};
use crate::simulator::{
    noisy_evolve, sample_dataset, DensityMatrix, NoiseModel, StateVector, DENSITY_QUBIT_LIMIT,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn cone() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// A sparse, explicitly listed superposition of basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    n: usize,
    /// Sorted by basis index, unit norm.
    configurations: Vec<(u64, Complex64)>,
}

impl ClassicalState {
    pub fn new(n: usize, configurations: Vec<(u64, Complex64)>) -> Result<ClassicalState> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::DenseLimit {
                qubits: n,
                limit: crate::pauli::MAX_QUBITS,
            });
        }
        if configurations.is_empty() {
            return Err(Error::Invalid {
                what: "classical state",
                message: "at least one configuration is required".into(),
            });
        }
        let mut sorted = configurations;
        sorted.sort_by_key(|&(idx, _)| idx);
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Invalid {
                    what: "classical state",
                    message: format!("duplicate configuration {}", pair[0].0),
                });
            }
        }
        if n < 64 {
            if let Some(&(idx, _)) = sorted.last() {
                if idx >> n != 0 {
                    return Err(Error::QubitOutOfRange {
                        qubit: 64 - idx.leading_zeros() as usize,
                        n,
                    });
                }
            }
        }
        let norm2: f64 = sorted.iter().map(|(_, a)| a.norm_sqr()).sum();
        if norm2 <= 1e-12 {
            return Err(Error::Degenerate("zero-norm classical state".into()));
        }
        let scale = Complex64::new(1.0 / norm2.sqrt(), 0.0);
        for (_, a) in sorted.iter_mut() {
            *a *= scale;
        }
        Ok(ClassicalState {
            n,
            configurations: sorted,
        })
    }

    pub fn basis_state(n: usize, index: u64) -> Result<ClassicalState> {
        ClassicalState::new(n, vec![(index, cone())])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn configurations(&self) -> &[(u64, Complex64)] {
        &self.configurations
    }

    fn amplitude_at(&self, idx: u64) -> Complex64 {
        match self
            .configurations
            .binary_search_by_key(&idx, |&(i, _)| i)
        {
            Ok(pos) => self.configurations[pos].1,
            Err(_) => czero(),
        }
    }

    /// <phi| sum |phi> without densifying.
    pub fn expect(&self, sum: &PauliSum) -> Result<Complex64> {
        if sum.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: sum.n(),
                right: self.n,
            });
        }
        let mut acc = czero();
        for (&(x, z), &coeff) in sum.iter() {
            let term = crate::dense::pauli_term_from_masks(self.n, x, z);
            let tsum = PauliSum::from_term(&term, cone());
            let mut t = czero();
            for &(idx, amp) in &self.configurations {
                let target = idx ^ x;
                let other = self.amplitude_at(target);
                if other == czero() {
                    continue;
                }
                t += other.conj() * tsum.basis_matrix_element(target, idx) * amp;
            }
            acc += coeff * t;
        }
        Ok(acc)
    }

    pub fn to_state_vector(&self) -> Result<StateVector> {
        let mut psi = StateVector::zero_state(self.n)?;
        psi.amps.fill(czero());
        for &(idx, amp) in &self.configurations {
            psi.amps[idx as usize] = amp;
        }
        Ok(psi)
    }
}

/// Predicted mean value of a local observable on a classically described
/// input: each Pauli term of `o` is conjugated by multiplying the learned
/// per-qubit factors over its support.
pub fn predict_mean_value(
    locals: &LocalOperators,
    phi: &ClassicalState,
    o: &PauliSum,
) -> Result<f64> {
    let n = locals.n();
    if phi.n() != n || o.n() != n {
        return Err(Error::DimensionMismatch {
            left: o.n(),
            right: n,
        });
    }
    let mut total = 0.0;
    for (&(x, z), &coeff) in o.iter() {
        let term = crate::dense::pauli_term_from_masks(n, x, z);
        let conjugated = conjugate_term(locals, &term)?;
        let value = phi.expect(&conjugated)?;
        total += (coeff * value).re;
    }
    Ok(total)
}

/// Heisenberg image of one Pauli string under the learned locals: the
/// ascending product of the per-qubit factors, times the string's phase.
fn conjugate_term(locals: &LocalOperators, term: &PauliTerm) -> Result<PauliSum> {
    let n = locals.n();
    if term.is_identity_string() {
        let mut id = PauliSum::identity(n);
        id.scale(term.phase());
        return Ok(id);
    }
    let mut acc: Option<PauliSum> = None;
    for qubit in term.support_qubits() {
        let axis = term.axis_at(qubit).expect("support qubit has an axis");
        let factor = locals.get(qubit, axis)?;
        acc = Some(match acc {
            None => factor.clone(),
            Some(prev) => {
                let next = prev.mul(factor)?;
                if next.len() as u64 > 1_000_000 {
                    return Err(Error::Capacity {
                        what: "conjugated product",
                        predicted: next.len() as u64,
                        cap: 1_000_000,
                    });
                }
                next
            }
        });
    }
    let mut out = acc.expect("non-identity string has support");
    out.scale(term.phase());
    Ok(out)
}

/// Partition of the per-qubit factors into two groups of axis-aligned
/// strips; within one group, strips sit at least 2M columns apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region2D {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    /// Strip width the partition was built with, when known.
    pub strip_width: Option<u32>,
}

impl Region2D {
    /// Alternating strips of width 2m along the first coordinate axis.
    pub fn strips(plan: &EvolutionPlan, m: u32) -> Result<Region2D> {
        let coords = plan.coords.as_ref().ok_or(Error::Invalid {
            what: "region partition",
            message: "plan carries no coordinates".into(),
        })?;
        if m == 0 {
            return Err(Error::Invalid {
                what: "region partition",
                message: "strip width must be positive".into(),
            });
        }
        let width = 2 * m as i64;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (q, xy) in coords.iter().enumerate() {
            let x = *xy.first().ok_or(Error::Invalid {
                what: "region partition",
                message: format!("qubit {q} has an empty coordinate"),
            })?;
            let strip = x.div_euclid(width);
            if strip % 2 == 0 {
                first.push(q);
            } else {
                second.push(q);
            }
        }
        let region = Region2D {
            first,
            second,
            strip_width: Some(2 * m),
        };
        region.validate(plan.n)?;
        Ok(region)
    }

    pub fn manual(first: Vec<usize>, second: Vec<usize>, n: usize) -> Result<Region2D> {
        let region = Region2D {
            first,
            second,
            strip_width: None,
        };
        region.validate(n)?;
        Ok(region)
    }

    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &q in self.first.iter().chain(&self.second) {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            if seen[q] {
                return Err(Error::Invalid {
                    what: "region partition",
                    message: format!("qubit {q} assigned twice"),
                });
            }
            seen[q] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Invalid {
                what: "region partition",
                message: "every qubit must be assigned to a region".into(),
            });
        }
        Ok(())
    }
}

/// The n per-qubit factors of a global product observable Prod_i O_i.
pub fn global_factors(locals: &LocalOperators, axes: &[Axis]) -> Result<Vec<PauliSum>> {
    if axes.len() != locals.n() {
        return Err(Error::DimensionMismatch {
            left: axes.len(),
            right: locals.n(),
        });
    }
    axes.iter()
        .enumerate()
        .map(|(q, &axis)| locals.get(q, axis).cloned())
        .collect()
}

fn apply_sum(sum: &PauliSum, v: &DVector<Complex64>) -> DVector<Complex64> {
    let n = sum.n();
    let dim = 1usize << n;
    let mut out = DVector::from_element(dim, czero());
    for (&(x, z), &coeff) in sum.iter() {
        let term = crate::dense::pauli_term_from_masks(n, x, z);
        let tsum = PauliSum::from_term(&term, cone());
        for j in 0..dim {
            let amp = v[j];
            if amp == czero() {
                continue;
            }
            let a = j ^ (x as usize);
            out[a] += coeff * tsum.basis_matrix_element(a as u64, j as u64) * amp;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    pub stderr: f64,
    /// Norm of the first region's amplitude row; the proposal normalizer.
    pub gamma1: f64,
    pub gamma2: f64,
    /// Exact sum over all basis states, for cross-checking on tiny grids.
    pub exact: f64,
    /// Population variance of F under p, from enumeration.
    pub variance: f64,
    pub shots: u64,
}

/// Monte-Carlo estimate of <0|V(R1) V(R2)|0> where V(R) multiplies the
/// region's factors in ascending qubit order. Importance-samples the middle
/// index from p(x) = |<0|V(R1)|x>|^2 / gamma1.
pub fn mc_sew_2d(
    factors: &[PauliSum],
    partition: &Region2D,
    shots: u64,
    seed: u64,
) -> Result<McReport> {
    let n = factors.len();
    if n == 0 || n > 20 {
        return Err(Error::DenseLimit {
            qubits: n,
            limit: 20,
        });
    }
    for f in factors {
        if f.n() != n {
            return Err(Error::DimensionMismatch {
                left: f.n(),
                right: n,
            });
        }
    }
    partition.validate(n)?;
    if shots == 0 {
        return Err(Error::Invalid {
            what: "shots",
            message: "at least one shot is required".into(),
        });
    }
    for f in factors {
        if f.max_imag() > 1e-9 {
            return Err(Error::Invalid {
                what: "sewing factor",
                message: "factors must be Hermitian (real Pauli coefficients)".into(),
            });
        }
    }
    let dim = 1usize << n;
    // a(x) = <0|V(R1)|x> = conj( (V(R1)† |0>)[x] ). Adjoint of the
    // ascending product applies the Hermitian factors ascending.
    let mut first = partition.first.clone();
    first.sort_unstable();
    let mut second = partition.second.clone();
    second.sort_unstable();
    let mut av = DVector::from_element(dim, czero());
    av[0] = cone();
    for &q in &first {
        av = apply_sum(&factors[q], &av);
    }
    let a: Vec<Complex64> = av.iter().map(|c| c.conj()).collect();
    // b = V(R2)|0>; the rightmost (largest-qubit) factor acts first.
    let mut bv = DVector::from_element(dim, czero());
    bv[0] = cone();
    for &q in second.iter().rev() {
        bv = apply_sum(&factors[q], &bv);
    }
    let gamma1: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let gamma2: f64 = bv.iter().map(|c| c.norm_sqr()).sum();
    if gamma1 <= 1e-15 {
        return Err(Error::Degenerate(
            "first region annihilates the reference state".into(),
        ));
    }
    // Exact enumeration of mu and Var(F) for the report.
    let mut mu = czero();
    for x in 0..dim {
        mu += a[x] * bv[x];
    }
    let variance = gamma1 * gamma2 - mu.norm_sqr();

    let support: Vec<usize> = (0..dim).filter(|&x| a[x].norm_sqr() > 0.0).collect();
    let mut cumulative = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for &x in &support {
        acc += a[x].norm_sqr() / gamma1;
        cumulative.push(acc);
    }
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for shot in 0..shots {
        let mut rng = substream(seed, Domain::McShot, shot);
        let u: f64 = rng.random();
        let pos = cumulative
            .partition_point(|&c| c < u)
            .min(support.len() - 1);
        let x = support[pos];
        let f = (Complex64::new(gamma1, 0.0) * bv[x] / a[x].conj()).re;
        sum += f;
        sumsq += f * f;
    }
    let shots_f = shots as f64;
    let estimate = sum / shots_f;
    let stderr = if shots > 1 {
        (((sumsq - shots_f * estimate * estimate) / (shots_f - 1.0)).max(0.0) / shots_f).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McReport {
        estimate,
        stderr,
        gamma1,
        gamma2,
        exact: mu.re,
        variance,
        shots,
    })
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub n: usize,
    pub basis: Vec<PauliTerm>,
    pub weights: Vec<f64>,
    /// True when rank deficiency forced the ridge fallback.
    pub ridged: bool,
    /// Root-mean-square training residual.
    pub residual: f64,
}

impl ClassifierModel {
    pub fn predict(&self, phi: &ClassicalState) -> Result<f64> {
        if phi.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: phi.n(),
                right: self.n,
            });
        }
        let mut value = 0.0;
        for (term, &w) in self.basis.iter().zip(&self.weights) {
            let sum = PauliSum::from_term(term, cone());
            value += w * phi.expect(&sum)?.re;
        }
        Ok(value)
    }
}

/// Candidate basis for a fixed observable: union of the per-qubit candidate
/// sets over its support.
pub fn observable_basis(
    graph: &InteractionGraph,
    n: usize,
    o: &PauliSum,
    trunc: &TruncationPlan,
    k: usize,
    locality: usize,
    degree: usize,
    cfg: &crate::cluster::ClusterConfig,
) -> Result<Vec<PauliTerm>> {
    let mut keys = std::collections::BTreeSet::new();
    let mut terms = Vec::new();
    let mut support = o.support();
    while support != 0 {
        let q = support.trailing_zeros() as usize;
        support &= support - 1;
        for t in candidate_paulis(graph, n, q, trunc, k, locality, degree, cfg)? {
            if keys.insert(t.key()) {
                terms.push(t);
            }
        }
    }
    terms.sort_by_key(|t| t.order_key());
    Ok(terms)
}

/// Least-squares fit of labels against Pauli features of the training
/// states. Full-rank systems go through the pseudoinverse; rank-deficient
/// ones fall back to a ridge solve and set the warning flag.
pub fn train_classifier(
    features: &[ClassicalState],
    labels: &[f64],
    basis: Vec<PauliTerm>,
) -> Result<ClassifierModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Invalid {
            what: "training set",
            message: format!(
                "{} states vs {} labels",
                features.len(),
                labels.len()
            ),
        });
    }
    if basis.is_empty() {
        return Err(Error::Invalid {
            what: "candidate basis",
            message: "at least one basis term is required".into(),
        });
    }
    let n = features[0].n();
    for phi in features {
        if phi.n() != n {
            return Err(Error::DimensionMismatch {
                left: phi.n(),
                right: n,
            });
        }
    }
    let rows = features.len();
    let cols = basis.len();
    let mut phi_mat = DMatrix::zeros(rows, cols);
    for (j, term) in basis.iter().enumerate() {
        let sum = PauliSum::from_term(term, cone());
        for (i, state) in features.iter().enumerate() {
            phi_mat[(i, j)] = state.expect(&sum)?.re;
        }
    }
    let y = DVector::from_column_slice(labels);
    let svd = phi_mat.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rank_ok = max_sv > 0.0
        && svd.singular_values.len() == cols.min(rows)
        && min_sv > 1e-10 * max_sv
        && cols <= rows;
    let (weights, ridged) = if rank_ok {
        let sol = svd.solve(&y, 1e-12 * max_sv).map_err(|e| Error::Degenerate(e.to_string()))?;
        (sol, false)
    } else {
        // (Phi^T Phi + lambda I) w = Phi^T y with lambda = 1e-8 |Phi|^2.
        let lambda = 1e-8 * max_sv * max_sv;
        let gram = phi_mat.transpose() * &phi_mat
            + DMatrix::identity(cols, cols) * lambda.max(1e-300);
        let rhs = phi_mat.transpose() * &y;
        let sol = gram.lu().solve(&rhs).ok_or_else(|| {
            Error::Degenerate("ridge system is singular".into())
        })?;
        (sol, true)
    };
    let residual = (&phi_mat * &weights - &y).norm() / (rows as f64).sqrt();
    Ok(ClassifierModel {
        n,
        basis,
        weights: weights.iter().cloned().collect(),
        ridged,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub gamma: f64,
    /// Gap per (panel state, observable): learned prediction vs the noisy
    /// density-matrix truth.
    pub gaps: Vec<f64>,
    /// Same predictions differenced against a zero-noise run with shared
    /// randomness; isolates the noise response from sampling error.
    pub crn_gaps: Vec<f64>,
    pub max_gap: f64,
    /// gamma n^2 |O| with unit-norm Pauli observables.
    pub reference: f64,
    pub ratio: Option<f64>,
    pub verdict: String,
}

fn panel_states(n: usize, seed: u64, count: usize) -> Vec<Vec<StabilizerLabel>> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed, Domain::Panel, i as u64);
            (0..n)
                .map(|_| StabilizerLabel::from_code(rng.random_range(0..6u8)).expect("code < 6"))
                .collect()
        })
        .collect()
}

fn learned_panel_predictions(
    plan: &EvolutionPlan,
    noise: Option<NoiseModel>,
    cfg: &LearnConfig,
    seed: u64,
    panel: &[Vec<StabilizerLabel>],
) -> Result<(Vec<f64>, crate::reconstruct::SewedChannel)> {
    let shots = cfg.shots_override.unwrap_or(20_000);
    let graph = interaction_graph(plan);
    let trunc = match cfg.m_override {
        Some(m) => TruncationPlan::manual(m),
        None => truncation_order(plan, &graph, default_eps_prime(cfg.epsilon, plan.n), &cfg.cluster)?,
    };
    let ds = sample_dataset(plan, shots, seed, noise)?;
    let model = learn_local_operators(plan, &ds, &trunc, cfg)?;
    let locals = LocalOperators::from_model(&model);
    let sewed = sew_channel(&locals)?;
    let mut predictions = Vec::new();
    for labels in panel {
        let psi = StateVector::product_state(labels)?;
        let rho = DenseOperator::new(plan.n, &psi.amps * psi.amps.adjoint());
        let out = apply_channel(&sewed, &rho)?;
        for q in 0..plan.n {
            for axis in Axis::ALL {
                let obs = PauliSum::from_term(&PauliTerm::single(plan.n, q, axis)?, cone());
                let dense_obs = crate::dense::sum_to_dense(&obs, DENSITY_QUBIT_LIMIT)?;
                predictions.push(out.mul(&dense_obs)?.trace().re);
            }
        }
    }
    Ok((predictions, sewed))
}

/// Shared default: the per-coefficient truncation budget is a twelfth of the
/// target accuracy per qubit.
pub fn default_eps_prime(epsilon: f64, n: usize) -> f64 {
    (epsilon / (12.0 * n as f64)).min(0.5)
}

/// Learn from noisy data, then compare channel predictions against the
/// noisy density-matrix evolution on a small panel of product states.
pub fn noise_benchmark(
    plan: &EvolutionPlan,
    noise: NoiseModel,
    cfg: &LearnConfig,
    seed: u64,
) -> Result<BenchReport> {
    if plan.n > DENSITY_QUBIT_LIMIT {
        return Err(Error::DenseLimit {
            qubits: plan.n,
            limit: DENSITY_QUBIT_LIMIT,
        });
    }
    let panel = panel_states(plan.n, seed, 4);
    let (noisy_pred, _) =
        learned_panel_predictions(plan, Some(noise), cfg, seed, &panel)?;
    let (clean_pred, _) = learned_panel_predictions(
        plan,
        Some(NoiseModel::new(0.0).expect("gamma 0 is valid")),
        cfg,
        seed,
        &panel,
    )?;

    let mut gaps = Vec::with_capacity(noisy_pred.len());
    let mut idx = 0;
    for labels in &panel {
        let psi = StateVector::product_state(labels)?;
        let rho = DensityMatrix::from_state(&psi)?;
        let truth_rho = noisy_evolve(plan, noise, &rho)?;
        for q in 0..plan.n {
            for axis in Axis::ALL {
                let obs = PauliSum::from_term(&PauliTerm::single(plan.n, q, axis)?, cone());
                let truth = truth_rho.expect(&obs)?.re;
                gaps.push((noisy_pred[idx] - truth).abs());
                idx += 1;
            }
        }
    }
    let crn_gaps: Vec<f64> = noisy_pred
        .iter()
        .zip(&clean_pred)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let max_gap = gaps.iter().cloned().fold(0.0f64, f64::max);
    let reference = noise.gamma * (plan.n * plan.n) as f64;
    let ratio = if reference > 0.0 {
        Some(max_gap / reference)
    } else {
        None
    };
    let verdict = match ratio {
        None => "baseline".to_string(),
        Some(r) if r <= 1.0 => "within reference".to_string(),
        Some(_) => "exceeds reference".to_string(),
    };
    Ok(BenchReport {
        gamma: noise.gamma,
        gaps,
        crn_gaps,
        max_gap,
        reference,
        ratio,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::builders;
    use crate::simulator::{exact_local_operators, plan_unitary};
    use approx::assert_abs_diff_eq;

    fn exact_locals_for(plan: &EvolutionPlan) -> LocalOperators {
        let exact = exact_local_operators(plan).unwrap();
        LocalOperators::from_exact(plan.n, &exact).unwrap()
    }

    fn plus_state(n: usize) -> ClassicalState {
        let amp = Complex64::new(1.0, 0.0);
        let configs = (0..(1u64 << n)).map(|i| (i, amp)).collect();
        ClassicalState::new(n, configs).unwrap()
    }

    #[test]
    fn classical_state_normalizes_and_rejects_duplicates() {
        let s = ClassicalState::new(
            2,
            vec![
                (0, Complex64::new(3.0, 0.0)),
                (3, Complex64::new(4.0, 0.0)),
            ],
        )
        .unwrap();
        let norm2: f64 = s.configurations().iter().map(|(_, a)| a.norm_sqr()).sum();
        assert_abs_diff_eq!(norm2, 1.0, epsilon = 1e-12);
        assert!(ClassicalState::new(2, vec![(1, cone()), (1, cone())]).is_err());
        assert!(ClassicalState::new(2, vec![(4, cone())]).is_err());
        assert!(ClassicalState::new(2, vec![]).is_err());
    }

    #[test]
    fn identity_plan_predicts_z_exactly() {
        let plan = builders::tfim_chain(2, 1.0, 0.5, 0.0);
        let locals = exact_locals_for(&plan);
        let phi = ClassicalState::basis_state(2, 0).unwrap();
        let o = PauliSum::from_term(&PauliTerm::single(2, 1, Axis::Z).unwrap(), cone());
        let value = predict_mean_value(&locals, &phi, &o).unwrap();
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_qubit_rotation_mean_value() {
        // H = Z, t = 0.1, phi = |+>, o = X: <+|U†XU|+> = cos(0.2).
        let plan = builders::single_qubit(Axis::Z, 1.0, 0.1);
        let locals = exact_locals_for(&plan);
        let phi = plus_state(1);
        let o = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::X).unwrap(), cone());
        let value = predict_mean_value(&locals, &phi, &o).unwrap();
        assert_abs_diff_eq!(value, 0.2f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn exact_locals_match_dense_mean_values() {
        let plan = builders::tfim_chain(3, 1.0, 0.7, 0.06);
        let locals = exact_locals_for(&plan);
        let phi = ClassicalState::new(
            3,
            vec![
                (0b000, Complex64::new(0.6, 0.0)),
                (0b101, Complex64::new(0.0, 0.8)),
            ],
        )
        .unwrap();
        // Two-qubit observable exercises the product-of-factors path.
        let mut o = PauliSum::zero(3);
        o.add_term(
            &PauliTerm::from_word(3, &[0, 1], &[Axis::Z, Axis::Z]).unwrap(),
            Complex64::new(0.7, 0.0),
        )
        .unwrap();
        o.add_term(
            &PauliTerm::single(3, 2, Axis::X).unwrap(),
            Complex64::new(-0.4, 0.0),
        )
        .unwrap();
        let predicted = predict_mean_value(&locals, &phi, &o).unwrap();
        let psi = phi.to_state_vector().unwrap();
        let heis = crate::simulator::exact_heisenberg_of_sum(&plan, &o).unwrap();
        let amps = &psi.amps;
        let truth = (amps.adjoint() * &heis.mat * amps)[(0, 0)].re;
        assert_abs_diff_eq!(predicted, truth, epsilon = 1e-9);
    }

    #[test]
    fn mc_sewing_identity_plan_is_exact() {
        let plan = builders::tfim_chain(4, 1.0, 0.5, 0.0);
        let locals = exact_locals_for(&plan);
        let factors = global_factors(&locals, &[Axis::Z; 4]).unwrap();
        let partition = Region2D::manual(vec![0, 1], vec![2, 3], 4).unwrap();
        let report = mc_sew_2d(&factors, &partition, 64, 5).unwrap();
        assert_abs_diff_eq!(report.estimate, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.stderr, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.exact, 1.0, epsilon = 1e-12);
        assert!(report.variance.abs() < 1e-12);
    }

    #[test]
    fn mc_sewing_matches_full_enumeration() {
        let plan = builders::tfim_grid(2, 2, 1.0, 0.6, 0.1);
        let locals = exact_locals_for(&plan);
        let factors = global_factors(&locals, &[Axis::Z; 4]).unwrap();
        let partition = Region2D::manual(vec![0, 2], vec![1, 3], 4).unwrap();
        let report = mc_sew_2d(&factors, &partition, 400, 7).unwrap();

        // Independent enumeration through dense restricted products.
        let v1 = factors[0].mul(&factors[2]).unwrap();
        let v2 = factors[1].mul(&factors[3]).unwrap();
        let m1 = crate::dense::sum_to_dense(&v1, 10).unwrap();
        let m2 = crate::dense::sum_to_dense(&v2, 10).unwrap();
        let dim = 16usize;
        let a: Vec<Complex64> = (0..dim).map(|x| m1.mat[(0, x)]).collect();
        let b: Vec<Complex64> = (0..dim).map(|x| m2.mat[(x, 0)]).collect();
        let gamma1: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        let gamma2: f64 = b.iter().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(report.gamma1, gamma1, epsilon = 1e-9);
        assert_abs_diff_eq!(report.gamma2, gamma2, epsilon = 1e-9);

        // The proposal is a bona fide distribution.
        let p_total: f64 = a.iter().map(|c| c.norm_sqr() / gamma1).sum();
        assert_abs_diff_eq!(p_total, 1.0, epsilon = 1e-10);

        // Second moment identity: E|F|^2 = gamma1 gamma2.
        let mut second_moment = 0.0;
        let mut mean = czero();
        for x in 0..dim {
            let p = a[x].norm_sqr() / gamma1;
            if p == 0.0 {
                continue;
            }
            let f = Complex64::new(gamma1, 0.0) * b[x] / a[x].conj();
            second_moment += p * f.norm_sqr();
            mean += Complex64::new(p, 0.0) * f;
        }
        assert_abs_diff_eq!(second_moment, gamma1 * gamma2, epsilon = 1e-6);
        assert_abs_diff_eq!(
            report.variance,
            second_moment - mean.norm_sqr(),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(report.exact, mean.re, epsilon = 1e-9);
        assert!(
            (report.estimate - report.exact).abs() <= 4.0 * report.stderr + 1e-12,
            "estimate {} exact {} stderr {}",
            report.estimate,
            report.exact,
            report.stderr
        );
    }

    #[test]
    fn mc_sewing_strip_partition_from_coordinates() {
        let plan = builders::tfim_grid(2, 3, 1.0, 0.6, 0.05);
        let partition = Region2D::strips(&plan, 1).unwrap();
        // Columns 0,1 land in the first strip, column 2 in the second.
        assert_eq!(partition.first, vec![0, 1, 3, 4]);
        assert_eq!(partition.second, vec![2, 5]);
        let locals = exact_locals_for(&plan);
        let factors = global_factors(&locals, &[Axis::Z; 6]).unwrap();
        let report = mc_sew_2d(&factors, &partition, 500, 11).unwrap();
        let u = plan_unitary(&plan, 10).unwrap();
        let o = PauliTerm::from_word(6, &[0, 1, 2, 3, 4, 5], &[Axis::Z; 6]).unwrap();
        let heis = crate::dense::term_to_dense(&o, 10)
            .unwrap()
            .conjugated_by(&u.adjoint())
            .unwrap();
        let truth = heis.mat[(0, 0)].re;
        assert_abs_diff_eq!(report.exact, truth, epsilon = 1e-9);
        assert!((report.estimate - truth).abs() <= 4.0 * report.stderr + 1e-9);
    }

    fn random_state(n: usize, seed_index: u64) -> ClassicalState {
        let mut rng = substream(13, Domain::Panel, seed_index);
        let configs: Vec<(u64, Complex64)> = (0..(1u64 << n))
            .map(|idx| {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = rng.random::<f64>() - 0.5;
                (idx, Complex64::new(re, im))
            })
            .collect();
        ClassicalState::new(n, configs).unwrap()
    }

    #[test]
    fn classifier_interpolates_its_own_basis() {
        let plan = builders::zz_chain(2, 0.9, 0.1);
        let graph = interaction_graph(&plan);
        let trunc = TruncationPlan::manual(1);
        let o = PauliSum::from_term(&PauliTerm::single(2, 0, Axis::X).unwrap(), cone());
        let basis = observable_basis(
            &graph,
            2,
            &o,
            &trunc,
            plan.k(),
            plan.locality(),
            graph.max_degree,
            &crate::cluster::ClusterConfig::default(),
        )
        .unwrap();
        let q1 = PauliSum::from_term(&basis[0], cone());
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..3 * basis.len() {
            let phi = random_state(2, i as u64);
            labels.push(phi.expect(&q1).unwrap().re);
            features.push(phi);
        }
        let model = train_classifier(&features, &labels, basis).unwrap();
        assert!(!model.ridged);
        assert!(model.residual < 1e-8, "residual {}", model.residual);
        for (phi, &y) in features.iter().zip(&labels) {
            assert_abs_diff_eq!(model.predict(phi).unwrap(), y, epsilon = 1e-7);
        }
    }

    #[test]
    fn classifier_is_permutation_invariant() {
        let n = 2;
        let basis = vec![
            PauliTerm::single(n, 0, Axis::Z).unwrap(),
            PauliTerm::single(n, 1, Axis::Z).unwrap(),
            PauliTerm::from_word(n, &[0, 1], &[Axis::Z, Axis::Z]).unwrap(),
        ];
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6u64 {
            let phi = ClassicalState::new(
                n,
                vec![
                    (i % 4, Complex64::new(0.8, 0.1)),
                    ((i + 1) % 4, Complex64::new(0.3, -0.2 * i as f64)),
                ],
            )
            .unwrap();
            labels.push((i as f64 * 0.37).sin());
            features.push(phi);
        }
        let model = train_classifier(&features, &labels, basis.clone()).unwrap();
        let mut rev_features: Vec<ClassicalState> = features.clone();
        rev_features.reverse();
        let mut rev_labels = labels.clone();
        rev_labels.reverse();
        let model_rev = train_classifier(&rev_features, &rev_labels, basis).unwrap();
        for phi in &features {
            assert_abs_diff_eq!(
                model.predict(phi).unwrap(),
                model_rev.predict(phi).unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn classifier_residual_shrinks_with_a_larger_basis() {
        let n = 2;
        let small = vec![PauliTerm::single(n, 0, Axis::Z).unwrap()];
        let large = vec![
            PauliTerm::single(n, 0, Axis::Z).unwrap(),
            PauliTerm::single(n, 1, Axis::Z).unwrap(),
            PauliTerm::from_word(n, &[0, 1], &[Axis::Z, Axis::Z]).unwrap(),
        ];
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..8u64 {
            features.push(random_state(n, 100 + i));
            labels.push(((i * i) as f64 * 0.21).cos());
        }
        let m_small = train_classifier(&features, &labels, small).unwrap();
        let m_large = train_classifier(&features, &labels, large).unwrap();
        assert!(m_large.residual <= m_small.residual + 1e-12);
    }

    #[test]
    fn rank_deficient_training_rides_the_ridge() {
        let n = 1;
        let basis = vec![
            PauliTerm::single(n, 0, Axis::Z).unwrap(),
            PauliTerm::single(n, 0, Axis::X).unwrap(),
        ];
        // One training point cannot pin two weights.
        let features = vec![ClassicalState::basis_state(1, 0).unwrap()];
        let labels = vec![1.0];
        let model = train_classifier(&features, &labels, basis).unwrap();
        assert!(model.ridged);
        assert!(model.residual < 1e-3);
    }

    #[test]
    fn noiseless_benchmark_has_small_gaps() {
        let plan = builders::zz_chain(2, 0.9, 0.08);
        let cfg = LearnConfig {
            shots_override: Some(20_000),
            m_override: Some(2),
            ..LearnConfig::default()
        };
        let report =
            noise_benchmark(&plan, NoiseModel::new(0.0).unwrap(), &cfg, 19).unwrap();
        assert_eq!(report.gamma, 0.0);
        assert!(report.ratio.is_none());
        assert_eq!(report.verdict, "baseline");
        // CRN differencing against itself: identical runs, zero gaps.
        assert!(report.crn_gaps.iter().all(|&g| g < 1e-12));
        // Statistical gaps only; generous bound.
        assert!(report.max_gap < 0.25, "max gap {}", report.max_gap);
    }

    #[test]
    fn depolarizing_shrinkage_is_learned() {
        // Single qubit, K=1, O=Z, gamma: the noisy Heisenberg coefficient
        // of Z shrinks by exactly (1-gamma).
        let gamma = 0.3;
        let plan = builders::single_qubit(Axis::X, 0.9, 0.2);
        let cfg = LearnConfig {
            shots_override: Some(60_000),
            m_override: Some(3),
            ..LearnConfig::default()
        };
        let ds = sample_dataset(&plan, 60_000, 29, Some(NoiseModel::new(gamma).unwrap()))
            .unwrap();
        let trunc = TruncationPlan::manual(3);
        let model = learn_local_operators(&plan, &ds, &trunc, &cfg).unwrap();
        let exact = exact_local_operators(&plan).unwrap();
        let truth = &exact
            .iter()
            .find(|(q, a, _)| *q == 0 && *a == Axis::Z)
            .unwrap()
            .2;
        let local = model.local(0, Axis::Z).unwrap();
        for e in &local.estimates {
            let expected = (1.0 - gamma) * truth.coeff(e.term.key()).re;
            assert!(
                (e.alpha - expected).abs() <= 4.0 * e.stderr + 1e-9,
                "{:?}: {} vs {}",
                e.term,
                e.alpha,
                expected
            );
        }
    }
}
