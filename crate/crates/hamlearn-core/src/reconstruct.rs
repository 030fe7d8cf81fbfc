//! Sewing learned local operators into a channel on a doubled register,
//! error accounting against the dense oracle, and compilation of the sewed
//! factors back into exact unitaries.
//!
//! With exact locals V_Oi = U†O_iU the per-qubit factor
//! (1/2)(I + sum_O V_Oi x O_{i+n}) equals (U† x I) SWAP_i (U x I), so the
//! swap times the ascending product collapses to U x U†. Learned locals
//! inherit that identity up to estimation error.

use crate::cluster::{truncation_bound, TruncationPlan};
use crate::dense::{
    check_dense_limit, phase_min_distance, register_swap, sum_to_dense, trace_distance,
    DenseOperator, DENSE_QUBIT_LIMIT,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{interaction_graph, EvolutionPlan};
use crate::learner::LearnedModel;
use crate::pauli::{Axis, PauliSum, StabilizerLabel};
use crate::rng::{substream, Domain};
use crate::simulator::{exact_local_operators, plan_unitary, StateVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The 3n per-qubit Heisenberg operators, indexed 3 * qubit + axis code.
#[derive(Debug, Clone)]
pub struct LocalOperators {
    n: usize,
    ops: Vec<PauliSum>,
}

impl LocalOperators {
    pub fn new(n: usize, ops: Vec<PauliSum>) -> Result<LocalOperators> {
        if ops.len() != 3 * n {
            return Err(Error::Invalid {
                what: "local operators",
                message: format!("{} operators for {n} qubits", ops.len()),
            });
        }
        for op in &ops {
            if op.n() != n {
                return Err(Error::DimensionMismatch {
                    left: op.n(),
                    right: n,
                });
            }
        }
        Ok(LocalOperators { n, ops })
    }

    pub fn from_model(model: &LearnedModel) -> LocalOperators {
        LocalOperators {
            n: model.n,
            ops: model.locals.iter().map(|l| l.operator.clone()).collect(),
        }
    }

    pub fn from_exact(n: usize, exact: &[(usize, Axis, PauliSum)]) -> Result<LocalOperators> {
        let mut ops = vec![PauliSum::zero(n); 3 * n];
        for (qubit, axis, sum) in exact {
            ops[3 * qubit + axis.code() as usize] = sum.clone();
        }
        LocalOperators::new(n, ops)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, qubit: usize, axis: Axis) -> Result<&PauliSum> {
        self.ops
            .get(3 * qubit + axis.code() as usize)
            .ok_or(Error::QubitOutOfRange { qubit, n: self.n })
    }
}

/// The sewed operator on 2n qubits and its per-qubit factors.
#[derive(Debug, Clone)]
pub struct SewedChannel {
    pub n: usize,
    /// S . prod_i v_i, built with qubit 0's factor innermost.
    pub v: DenseOperator,
    pub factors: Vec<DenseOperator>,
}

/// Per-qubit sewing factor (1/2)(I + sum_O V_Oi x O_{i+n}) as a Pauli sum
/// on the doubled register.
fn sew_factor(locals: &LocalOperators, qubit: usize) -> Result<PauliSum> {
    let n = locals.n;
    let mut sum = PauliSum::identity(2 * n);
    for axis in Axis::ALL {
        let lifted = locals.get(qubit, axis)?.embedded(2 * n)?.attached(n + qubit, axis)?;
        sum.add_assign(&lifted, Complex64::new(1.0, 0.0))?;
    }
    sum.scale(Complex64::new(0.5, 0.0));
    Ok(sum)
}

pub fn sew_channel(locals: &LocalOperators) -> Result<SewedChannel> {
    let n = locals.n;
    check_dense_limit(2 * n, DENSE_QUBIT_LIMIT)?;
    let mut factors = Vec::with_capacity(n);
    let mut acc = register_swap(n)?;
    // v = S . v_0 v_1 ... v_{n-1}; ascending qubit order, qubit 0 outermost
    // after the swap.
    for qubit in 0..n {
        let factor = sum_to_dense(&sew_factor(locals, qubit)?, DENSE_QUBIT_LIMIT)?;
        acc = acc.mul(&factor)?;
        factors.push(factor);
    }
    Ok(SewedChannel {
        n,
        v: acc,
        factors,
    })
}

/// rho -> Tr_top[ V (rho x I/2^n) V† ].
pub fn apply_channel(chan: &SewedChannel, rho: &DenseOperator) -> Result<DenseOperator> {
    if rho.n() != chan.n {
        return Err(Error::DimensionMismatch {
            left: rho.n(),
            right: chan.n,
        });
    }
    let doubled = rho.with_mixed_top(chan.n)?;
    let conjugated = doubled.conjugated_by(&chan.v)?;
    conjugated.partial_trace_top(chan.n)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorReport {
    /// Twice the phase-minimized operator distance between the sewed
    /// operator and the exact doubled unitary; a diamond-norm stand-in.
    pub surrogate_diamond: f64,
    /// Worst trace distance between channel output and exact output over
    /// the sampled trial states.
    pub max_trace_distance: f64,
    /// Operator-norm error of each learned local, indexed 3 qubit + axis.
    pub per_local_inf_norms: Vec<f64>,
    /// Cluster truncation contribution at the model's expansion order.
    pub truncation_bound: f64,
    /// Statistical budget: worst-case sum of twice the standard error over
    /// one local's candidates.
    pub sample_stderr_budget: f64,
}

/// Compare a learned model against the dense oracle for its plan.
pub fn reconstruction_error(
    plan: &EvolutionPlan,
    model: &LearnedModel,
    trunc: &TruncationPlan,
    trials: usize,
    seed: u64,
) -> Result<ErrorReport> {
    if model.n != plan.n {
        return Err(Error::DimensionMismatch {
            left: model.n,
            right: plan.n,
        });
    }
    let n = plan.n;
    let exact = exact_local_operators(plan)?;
    let exact_locals = LocalOperators::from_exact(n, &exact)?;
    let learned_locals = LocalOperators::from_model(model);

    let mut per_local_inf_norms = Vec::with_capacity(3 * n);
    for qubit in 0..n {
        for axis in Axis::ALL {
            let mut diff = learned_locals.get(qubit, axis)?.clone();
            diff.add_assign(exact_locals.get(qubit, axis)?, Complex64::new(-1.0, 0.0))?;
            per_local_inf_norms.push(sum_to_dense(&diff, DENSE_QUBIT_LIMIT)?.spectral_norm());
        }
    }

    let sewed = sew_channel(&learned_locals)?;
    let u = plan_unitary(plan, DENSE_QUBIT_LIMIT)?;
    let doubled = crate::dense::doubled_unitary(&u)?;
    let surrogate_diamond = 2.0 * phase_min_distance(&sewed.v, &doubled)?;

    let mut max_trace_distance: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = substream(seed, Domain::TrialState, trial as u64);
        let labels: Vec<StabilizerLabel> = (0..n)
            .map(|_| StabilizerLabel::from_code(rng.random_range(0..6u8)).expect("code < 6"))
            .collect();
        let psi = StateVector::product_state(&labels)?;
        let rho = DenseOperator::new(n, &psi.amps * psi.amps.adjoint());
        let out = apply_channel(&sewed, &rho)?;
        let truth = rho.conjugated_by(&u)?;
        max_trace_distance = max_trace_distance.max(trace_distance(&out, &truth)?);
    }

    let graph = interaction_graph(plan);
    let truncation = truncation_bound(trunc, plan, &graph);
    let sample_stderr_budget = model
        .locals
        .iter()
        .map(|l| l.estimates.iter().map(|e| 2.0 * e.stderr).sum::<f64>())
        .fold(0.0f64, f64::max);

    Ok(ErrorReport {
        surrogate_diamond,
        max_trace_distance,
        per_local_inf_norms,
        truncation_bound: truncation,
        sample_stderr_budget,
    })
}

/// The sewing factors rebuilt as exact unitaries: W_i = exp(-i pi/2 (v_i - I)).
/// On a +-1 spectrum W_i = v_i; a Hermitian perturbation of size eps moves
/// W_i by at most pi e^{pi/2} eps.
#[derive(Debug, Clone)]
pub struct CompiledUnitary {
    pub n: usize,
    pub factors: Vec<DenseOperator>,
    /// S . prod_i W_i, same ordering as the sewed channel.
    pub product: DenseOperator,
    pub unitarity_residual: f64,
}

pub fn compile_unitary(locals: &LocalOperators) -> Result<CompiledUnitary> {
    let n = locals.n;
    check_dense_limit(2 * n, DENSE_QUBIT_LIMIT)?;
    let mut factors = Vec::with_capacity(n);
    let mut product = register_swap(n)?;
    for qubit in 0..n {
        let v = sum_to_dense(&sew_factor(locals, qubit)?, DENSE_QUBIT_LIMIT)?;
        // exp(-i pi/2 (v - 1)) on each eigenvalue v of the Hermitian factor.
        let w = v.hermitian_map(|e| {
            let phase = -std::f64::consts::FRAC_PI_2 * (e - 1.0);
            Complex64::new(phase.cos(), phase.sin())
        })?;
        product = product.mul(&w)?;
        factors.push(w);
    }
    let unitarity_residual = product.unitarity_residual();
    Ok(CompiledUnitary {
        n,
        factors,
        product,
        unitarity_residual,
    })
}

/// Greedy packing of the per-qubit factors into layers of disjoint support.
/// Factor i touches qubit i, qubit n + i, and the support of its locals.
pub fn pack_layers(locals: &LocalOperators) -> Result<Vec<Vec<usize>>> {
    let n = locals.n;
    let mut supports = Vec::with_capacity(n);
    for qubit in 0..n {
        let mut mask = 1u128 << qubit | 1u128 << (n + qubit);
        for axis in Axis::ALL {
            mask |= locals.get(qubit, axis)?.support() as u128;
        }
        supports.push(mask);
    }
    let mut layers: Vec<(u128, Vec<usize>)> = Vec::new();
    for (i, &mask) in supports.iter().enumerate() {
        match layers.iter_mut().find(|(used, _)| used & mask == 0) {
            Some((used, members)) => {
                *used |= mask;
                members.push(i);
            }
            None => layers.push((mask, vec![i])),
        }
    }
    Ok(layers.into_iter().map(|(_, members)| members).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompilePlan {
    /// Product-formula order.
    pub p: u32,
    /// Repetitions of the layered circuit.
    pub depth: u64,
    pub layers: Vec<Vec<usize>>,
}

/// Circuit depth for a p-th order product formula over L layers at target
/// accuracy epsilon: ceil[(pi/2) ((3L)^p 2^p)^{1/p} / eps^{1/p}].
pub fn trotter_depth(layers: usize, p: u32, epsilon: f64) -> Result<u64> {
    if !matches!(p, 1 | 2 | 4) {
        return Err(Error::Invalid {
            what: "product formula order",
            message: format!("p = {p}, expected 1, 2, or 4"),
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Invalid {
            what: "epsilon",
            message: format!("{epsilon} must be positive and finite"),
        });
    }
    if layers == 0 {
        return Err(Error::Invalid {
            what: "layers",
            message: "at least one layer is required".into(),
        });
    }
    let l = layers as f64;
    let pf = p as f64;
    let base = ((3.0 * l).powf(pf) * 2f64.powf(pf)).powf(1.0 / pf);
    let raw = std::f64::consts::FRAC_PI_2 * base / epsilon.powf(1.0 / pf);
    if raw >= u64::MAX as f64 {
        return Err(Error::Capacity {
            what: "trotter depth",
            predicted: u64::MAX,
            cap: u64::MAX,
        });
    }
    Ok((raw.ceil() as u64).max(1))
}

pub fn compile_plan(locals: &LocalOperators, p: u32, epsilon: f64) -> Result<CompilePlan> {
    let layers = pack_layers(locals)?;
    let depth = trotter_depth(layers.len(), p, epsilon)?;
    Ok(CompilePlan { p, depth, layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{truncation_order, ClusterConfig};
    use crate::hamiltonian::builders;
    use crate::learner::{learn_local_operators, LearnConfig};
    use crate::pauli::PauliTerm;
    use crate::simulator::sample_dataset;
    use approx::assert_abs_diff_eq;

    fn exact_locals_for(plan: &EvolutionPlan) -> LocalOperators {
        let exact = exact_local_operators(plan).unwrap();
        LocalOperators::from_exact(plan.n, &exact).unwrap()
    }

    #[test]
    fn sewing_identity_locals_gives_the_identity() {
        let plan = builders::tfim_chain(2, 1.0, 0.5, 0.0);
        let sewed = sew_channel(&exact_locals_for(&plan)).unwrap();
        let id = DenseOperator::identity(4).unwrap();
        assert!(sewed.v.sub(&id).unwrap().max_abs_entry() < 1e-12);
    }

    #[test]
    fn sewing_exact_locals_reproduces_the_doubled_unitary() {
        let plan = builders::tfim_layered(2, 0.9, 0.7, 0.25, 0.15);
        let sewed = sew_channel(&exact_locals_for(&plan)).unwrap();
        let u = plan_unitary(&plan, 10).unwrap();
        let doubled = crate::dense::doubled_unitary(&u).unwrap();
        let err = sewed.v.sub(&doubled).unwrap().spectral_norm();
        assert!(err < 1e-9, "sewing identity violated: {err}");
    }

    #[test]
    fn channel_from_exact_locals_is_conjugation() {
        let plan = builders::zz_chain(3, 0.8, 0.2);
        let sewed = sew_channel(&exact_locals_for(&plan)).unwrap();
        let u = plan_unitary(&plan, 10).unwrap();
        for code in [0u8, 2, 4] {
            let labels = vec![StabilizerLabel::from_code(code).unwrap(); 3];
            let psi = StateVector::product_state(&labels).unwrap();
            let rho = DenseOperator::new(3, &psi.amps * psi.amps.adjoint());
            let out = apply_channel(&sewed, &rho).unwrap();
            let truth = rho.conjugated_by(&u).unwrap();
            assert!(trace_distance(&out, &truth).unwrap() < 1e-9);
            assert_abs_diff_eq!(out.trace().re, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn channel_trace_deviation_is_second_order_in_local_error() {
        // Perturbing one local breaks the unitarity of the sewed product,
        // so the trace drifts, but only quadratically: the mixed top
        // register wipes the linear cross term for this input, leaving
        // exactly eps^2/4 from the perturbation's square.
        let eps = 0.05;
        let plan = builders::zz_chain(2, 0.8, 0.15);
        let exact = exact_local_operators(&plan).unwrap();
        let mut ops: Vec<PauliSum> = Vec::new();
        for (_, _, sum) in &exact {
            ops.push(sum.clone());
        }
        let bump = PauliTerm::single(2, 1, Axis::Y).unwrap();
        ops[0].add_term(&bump, Complex64::new(eps, 0.0)).unwrap();
        let locals = LocalOperators::new(2, ops).unwrap();
        let sewed = sew_channel(&locals).unwrap();
        let labels = vec![
            StabilizerLabel::from_code(2).unwrap(),
            StabilizerLabel::from_code(5).unwrap(),
        ];
        let psi = StateVector::product_state(&labels).unwrap();
        let rho = DenseOperator::new(2, &psi.amps * psi.amps.adjoint());
        let out = apply_channel(&sewed, &rho).unwrap();
        assert_abs_diff_eq!(out.trace().re, 1.0 + eps * eps / 4.0, epsilon = 1e-9);
        assert!((out.trace().re - 1.0).abs() <= eps * eps);
        assert!(out.sub(&out.adjoint()).unwrap().max_abs_entry() < 1e-10);
    }

    #[test]
    fn error_report_vanishes_on_the_exact_model() {
        let plan = builders::zz_chain(2, 0.9, 0.1);
        let graph = interaction_graph(&plan);
        let cfg = ClusterConfig::default();
        let trunc = truncation_order(&plan, &graph, 1e-3, &cfg).unwrap();
        let ds = sample_dataset(&plan, 30_000, 7, None).unwrap();
        let model = learn_local_operators(&plan, &ds, &trunc, &LearnConfig::default()).unwrap();
        // Swap the estimated coefficients for the exact ones, keeping the
        // model wrapper; every error field except the statistical budget
        // should collapse.
        let mut exact_model = model.clone();
        let exact = exact_local_operators(&plan).unwrap();
        for (idx, (_, _, sum)) in exact.iter().enumerate() {
            exact_model.locals[idx].operator = sum.clone();
        }
        let report = reconstruction_error(&plan, &exact_model, &trunc, 4, 11).unwrap();
        assert!(report.surrogate_diamond < 1e-8);
        assert!(report.max_trace_distance < 1e-8);
        assert!(report
            .per_local_inf_norms
            .iter()
            .all(|&x| x < 1e-8));
        assert!(report.truncation_bound > 0.0);
        assert!(report.sample_stderr_budget > 0.0);
        assert_eq!(report.per_local_inf_norms.len(), 6);
    }

    #[test]
    fn compiled_factors_match_exact_involutions() {
        let plan = builders::tfim_chain(2, 1.0, 0.6, 0.12);
        let locals = exact_locals_for(&plan);
        let sewed = sew_channel(&locals).unwrap();
        let compiled = compile_unitary(&locals).unwrap();
        assert!(compiled.unitarity_residual < 1e-9);
        for (w, v) in compiled.factors.iter().zip(&sewed.factors) {
            assert!(w.sub(v).unwrap().spectral_norm() < 1e-9);
        }
        assert!(compiled.product.sub(&sewed.v).unwrap().spectral_norm() < 1e-9);
    }

    #[test]
    fn compiled_factors_absorb_small_perturbations() {
        let plan = builders::zz_chain(2, 0.8, 0.15);
        let exact = exact_local_operators(&plan).unwrap();
        let mut ops: Vec<PauliSum> = exact.iter().map(|(_, _, s)| s.clone()).collect();
        let bump = PauliTerm::single(2, 1, Axis::Z).unwrap();
        let eps = 0.01;
        ops[1].add_term(&bump, Complex64::new(eps, 0.0)).unwrap();
        let locals = LocalOperators::new(2, ops).unwrap();
        let sewed = sew_channel(&locals).unwrap();
        let compiled = compile_unitary(&locals).unwrap();
        assert!(compiled.unitarity_residual < 1e-9);
        // pi e^{pi/2} = 15.12 is the Lipschitz constant of the spectral
        // calculus step.
        let bound = std::f64::consts::PI * (std::f64::consts::FRAC_PI_2).exp() * eps;
        for (w, v) in compiled.factors.iter().zip(&sewed.factors) {
            assert!(w.sub(v).unwrap().spectral_norm() <= bound + 1e-9);
        }
    }

    #[test]
    fn depth_formula_values_and_monotonicity() {
        assert_eq!(trotter_depth(1, 1, 1.0).unwrap(), 10);
        // Tighter accuracy never shrinks the depth.
        let mut last = 0;
        for eps in [1.0, 0.5, 0.1, 0.01] {
            let d = trotter_depth(2, 2, eps).unwrap();
            assert!(d >= last);
            last = d;
        }
        // Higher order wins at small epsilon.
        assert!(trotter_depth(2, 4, 1e-4).unwrap() < trotter_depth(2, 1, 1e-4).unwrap());
        // Linear in the layer count at p = 1 (up to rounding).
        let d1 = trotter_depth(3, 1, 0.25).unwrap();
        let d2 = trotter_depth(6, 1, 0.25).unwrap();
        assert!((d2 as f64 - 2.0 * d1 as f64).abs() <= 1.0);
        assert!(trotter_depth(1, 3, 1.0).is_err());
        assert!(trotter_depth(1, 1, 0.0).is_err());
        assert!(trotter_depth(0, 1, 1.0).is_err());
    }

    #[test]
    fn layer_packing_covers_every_factor_once() {
        let plan = builders::tfim_chain(3, 1.0, 0.5, 0.08);
        let locals = exact_locals_for(&plan);
        let layers = pack_layers(&locals).unwrap();
        let mut seen: Vec<usize> = layers.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
        // Neighbouring locals overlap on the chain, so they cannot share a
        // layer.
        assert!(layers.len() >= 2);
        let plan0 = builders::tfim_chain(3, 1.0, 0.5, 0.0);
        let locals0 = exact_locals_for(&plan0);
        // Identity evolution: supports are single qubits, one layer.
        assert_eq!(pack_layers(&locals0).unwrap().len(), 1);
    }
}
