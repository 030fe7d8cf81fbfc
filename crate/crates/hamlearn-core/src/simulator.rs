//! Dense oracle for the unknown dynamics: exact evolution, projective
//! sampling, and depolarizing-noise evolution.
//!
//! Everything here is brute force by design; the learner and reconstructor
//! are tested against these operators, so none of the cluster machinery is
//! allowed to leak in.

use crate::dataset::Dataset;
use crate::dense::{pauli_decompose, sum_to_dense, term_to_dense, DenseOperator};
use crate::error::{Error, Result};
use crate::hamiltonian::{plan_digest, EvolutionPlan};
use crate::pauli::{Axis, PauliSum, PauliTerm, StabilizerLabel};
use crate::rng::{substream, Domain};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

/// State vectors stay affordable through 2^10 amplitudes.
pub const STATE_QUBIT_LIMIT: usize = 10;
/// Density matrices through 2^6 x 2^6.
pub const DENSITY_QUBIT_LIMIT: usize = 6;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn cone() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Single-qubit Pauli as a bit action: P|j> = c_j |j XOR flip>.
fn pauli_action(axis: Axis) -> (bool, Complex64, Complex64) {
    match axis {
        Axis::X => (true, cone(), cone()),
        Axis::Y => (true, Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)),
        Axis::Z => (false, cone(), -cone()),
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    n: usize,
    pub amps: DVector<Complex64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Result<StateVector> {
        check_state_limit(n)?;
        let mut amps = DVector::from_element(1 << n, czero());
        amps[0] = cone();
        Ok(StateVector { n, amps })
    }

    /// Tensor product of single-qubit stabilizer states; qubit q is bit q.
    pub fn product_state(labels: &[StabilizerLabel]) -> Result<StateVector> {
        let n = labels.len();
        check_state_limit(n)?;
        let tables: Vec<[Complex64; 2]> = labels.iter().map(|l| l.amplitudes()).collect();
        let amps = DVector::from_fn(1 << n, |idx, _| {
            let mut a = cone();
            for (q, t) in tables.iter().enumerate() {
                a *= t[(idx >> q) & 1];
            }
            a
        });
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn apply(&mut self, u: &DenseOperator) -> Result<()> {
        if u.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: u.n(),
                right: self.n,
            });
        }
        self.amps = &u.mat * &self.amps;
        Ok(())
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    /// <psi| sum |psi>.
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
            for b in 0..(1usize << self.n) {
                let amp = self.amps[b];
                if amp == czero() {
                    continue;
                }
                let a = b ^ (x as usize);
                t += self.amps[a].conj() * tsum.basis_matrix_element(a as u64, b as u64) * amp;
            }
            acc += coeff * t;
        }
        Ok(acc)
    }

    /// Projective measurement of the Pauli `axis` at `qubit`; collapses the
    /// state and returns the sign.
    pub fn measure_qubit(&mut self, qubit: usize, axis: Axis, rng: &mut impl Rng) -> Result<f64> {
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange { qubit, n: self.n });
        }
        let (flip, c0, c1) = pauli_action(axis);
        let bit = 1usize << qubit;
        let dim = 1usize << self.n;
        // p_+ = (1 + Re<psi|P|psi>)/2.
        let mut expect = czero();
        for a in 0..dim {
            let src = if flip { a ^ bit } else { a };
            let c = if src & bit == 0 { c0 } else { c1 };
            expect += self.amps[a].conj() * c * self.amps[src];
        }
        let p_plus = ((1.0 + expect.re) / 2.0).clamp(0.0, 1.0);
        let s = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
        let p = if s > 0.0 { p_plus } else { 1.0 - p_plus };
        if p <= 1e-15 {
            return Err(Error::Degenerate(
                "measurement collapsed onto a zero-probability branch".into(),
            ));
        }
        // psi <- (psi + s P psi) / (2 sqrt(p)).
        let old = self.amps.clone();
        let scale = 1.0 / (2.0 * p.sqrt());
        for a in 0..dim {
            let src = if flip { a ^ bit } else { a };
            let c = if src & bit == 0 { c0 } else { c1 };
            self.amps[a] = (old[a] + c * old[src] * s) * scale;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    pub mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_state(psi: &StateVector) -> Result<DensityMatrix> {
        check_density_limit(psi.n)?;
        let mat = &psi.amps * psi.amps.adjoint();
        Ok(DensityMatrix { n: psi.n, mat })
    }

    pub fn maximally_mixed(n: usize) -> Result<DensityMatrix> {
        check_density_limit(n)?;
        let dim = 1usize << n;
        let mat = DMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        Ok(DensityMatrix { n, mat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().sum()
    }

    pub fn conjugate(&mut self, u: &DenseOperator) -> Result<()> {
        if u.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: u.n(),
                right: self.n,
            });
        }
        self.mat = &u.mat * &self.mat * u.mat.adjoint();
        Ok(())
    }

    /// Local depolarizing channel on one qubit:
    /// rho -> (1-gamma) rho + gamma (I/2 tensor Tr_q rho).
    pub fn depolarize_qubit(&mut self, qubit: usize, gamma: f64) -> Result<()> {
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange { qubit, n: self.n });
        }
        let bit = 1usize << qubit;
        let dim = 1usize << self.n;
        let keep = 1.0 - gamma;
        let half = gamma / 2.0;
        for a in 0..dim {
            for b in 0..dim {
                if a & bit != 0 || b & bit != 0 {
                    continue;
                }
                let (a1, b1) = (a | bit, b | bit);
                let d0 = self.mat[(a, b)];
                let d1 = self.mat[(a1, b1)];
                let mixed = (d0 + d1) * half;
                self.mat[(a, b)] = d0 * keep + mixed;
                self.mat[(a1, b1)] = d1 * keep + mixed;
                self.mat[(a, b1)] *= keep;
                self.mat[(a1, b)] *= keep;
                // Off-diagonal blocks in the other index pattern:
                // entries with a_q != b_q all shrink by (1-gamma).
            }
        }
        // Entries with a_q != b_q and the untouched combinations above are
        // covered by the two *= lines; entries with a_q = b_q = 1 were
        // updated alongside their partners.
        Ok(())
    }

    /// Tr[sum . rho].
    pub fn expect(&self, sum: &PauliSum) -> Result<Complex64> {
        if sum.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: sum.n(),
                right: self.n,
            });
        }
        let dim = 1u64 << self.n;
        let mut acc = czero();
        for (&(x, z), &coeff) in sum.iter() {
            let term = crate::dense::pauli_term_from_masks(self.n, x, z);
            let tsum = PauliSum::from_term(&term, cone());
            let mut t = czero();
            for a in 0..dim {
                let b = a ^ x;
                t += tsum.basis_matrix_element(a, b) * self.mat[(b as usize, a as usize)];
            }
            acc += coeff * t;
        }
        Ok(acc)
    }

    /// Projective single-qubit measurement, collapsing in place.
    pub fn measure_qubit(&mut self, qubit: usize, axis: Axis, rng: &mut impl Rng) -> Result<f64> {
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange { qubit, n: self.n });
        }
        let (flip, c0, c1) = pauli_action(axis);
        let bit = 1usize << qubit;
        let dim = 1usize << self.n;
        let mut tr = czero();
        for a in 0..dim {
            let src = if flip { a ^ bit } else { a };
            let c = if src & bit == 0 { c0 } else { c1 };
            tr += c * self.mat[(src, a)];
        }
        let p_plus = ((1.0 + tr.re) / 2.0).clamp(0.0, 1.0);
        let s = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
        let p = if s > 0.0 { p_plus } else { 1.0 - p_plus };
        if p <= 1e-15 {
            return Err(Error::Degenerate(
                "measurement collapsed onto a zero-probability branch".into(),
            ));
        }
        // rho <- Pi rho Pi / p with Pi = (I + s P)/2, via two one-sided passes.
        let sc = Complex64::new(s, 0.0);
        let mut tmp = self.mat.clone();
        for a in 0..dim {
            let src = if flip { a ^ bit } else { a };
            let c = if src & bit == 0 { c0 } else { c1 };
            for b in 0..dim {
                tmp[(a, b)] = self.mat[(a, b)] + sc * c * self.mat[(src, b)];
            }
        }
        for b in 0..dim {
            let src = if flip { b ^ bit } else { b };
            let c = if src & bit == 0 { c0 } else { c1 };
            for a in 0..dim {
                self.mat[(a, b)] = (tmp[(a, b)] + sc * c.conj() * tmp[(a, src)])
                    * Complex64::new(0.25 / p, 0.0);
            }
        }
        Ok(s)
    }

    pub fn validity_residual(&self) -> f64 {
        let herm = (&self.mat - self.mat.adjoint()).norm();
        let tr = (self.trace() - cone()).norm();
        let min_eig = self
            .mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        herm.max(tr).max((-min_eig).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub gamma: f64,
}

impl NoiseModel {
    pub fn new(gamma: f64) -> Result<NoiseModel> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Invalid {
                what: "gamma",
                message: format!("{gamma} outside [0, 1]"),
            });
        }
        Ok(NoiseModel { gamma })
    }
}

fn check_state_limit(n: usize) -> Result<()> {
    if n == 0 || n > STATE_QUBIT_LIMIT {
        return Err(Error::DenseLimit {
            qubits: n,
            limit: STATE_QUBIT_LIMIT,
        });
    }
    Ok(())
}

fn check_density_limit(n: usize) -> Result<()> {
    if n == 0 || n > DENSITY_QUBIT_LIMIT {
        return Err(Error::DenseLimit {
            qubits: n,
            limit: DENSITY_QUBIT_LIMIT,
        });
    }
    Ok(())
}

/// One unitary e^{-i t_k H_k} per step, in plan order.
pub fn step_unitaries(plan: &EvolutionPlan, limit: usize) -> Result<Vec<DenseOperator>> {
    plan.steps
        .iter()
        .map(|s| s.ham.dense(limit)?.evolution(s.time))
        .collect()
}

/// Full unitary U = U_K ... U_1 (step 1 applied to the state first).
pub fn plan_unitary(plan: &EvolutionPlan, limit: usize) -> Result<DenseOperator> {
    let us = step_unitaries(plan, limit)?;
    let mut acc = DenseOperator::identity(plan.n)?;
    for u in &us {
        acc = u.mul(&acc)?;
    }
    Ok(acc)
}

pub fn evolve(plan: &EvolutionPlan, psi: &StateVector) -> Result<StateVector> {
    let mut out = psi.clone();
    for u in &step_unitaries(plan, STATE_QUBIT_LIMIT)? {
        out.apply(u)?;
    }
    Ok(out)
}

/// Noisy evolution: after each step's unitary, every qubit passes through
/// the depolarizing channel.
pub fn noisy_evolve(
    plan: &EvolutionPlan,
    noise: NoiseModel,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    for u in &step_unitaries(plan, DENSITY_QUBIT_LIMIT)? {
        out.conjugate(u)?;
        for q in 0..plan.n {
            out.depolarize_qubit(q, noise.gamma)?;
        }
    }
    Ok(out)
}

/// U†(t) O U(t), densely.
pub fn exact_heisenberg(plan: &EvolutionPlan, o: &PauliTerm) -> Result<DenseOperator> {
    let u = plan_unitary(plan, STATE_QUBIT_LIMIT)?;
    let dense_o = term_to_dense(o, STATE_QUBIT_LIMIT)?;
    dense_o.conjugated_by(&u.adjoint())
}

/// U†(t) O U(t) for a general Pauli sum.
pub fn exact_heisenberg_of_sum(plan: &EvolutionPlan, o: &PauliSum) -> Result<DenseOperator> {
    let u = plan_unitary(plan, STATE_QUBIT_LIMIT)?;
    let dense_o = sum_to_dense(o, STATE_QUBIT_LIMIT)?;
    dense_o.conjugated_by(&u.adjoint())
}

/// The 3n exact local Heisenberg operators as Pauli sums; the ground truth
/// the learner is judged against.
pub fn exact_local_operators(plan: &EvolutionPlan) -> Result<Vec<(usize, Axis, PauliSum)>> {
    let u = plan_unitary(plan, STATE_QUBIT_LIMIT)?;
    let ua = u.adjoint();
    let mut out = Vec::with_capacity(3 * plan.n);
    for i in 0..plan.n {
        for axis in Axis::ALL {
            let o = PauliTerm::single(plan.n, i, axis)?;
            let dense = term_to_dense(&o, STATE_QUBIT_LIMIT)?.conjugated_by(&ua)?;
            out.push((i, axis, pauli_decompose(&dense, 1e-12)));
        }
    }
    Ok(out)
}

struct RecordDraw {
    labels: Vec<u8>,
    bases: Vec<u8>,
    outcomes: Vec<u8>,
}

fn draw_record(
    plan: &EvolutionPlan,
    unitaries: &[DenseOperator],
    noise: Option<NoiseModel>,
    seed: u64,
    index: u64,
) -> Result<RecordDraw> {
    let n = plan.n;
    let mut rng = substream(seed, Domain::DatasetRecord, index);
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..6u8)).collect();
    let bases: Vec<u8> = (0..n).map(|_| rng.random_range(0..3u8)).collect();
    let stabilizers: Vec<StabilizerLabel> = labels
        .iter()
        .map(|&c| StabilizerLabel::from_code(c).expect("code < 6"))
        .collect();
    let mut outcomes = vec![0u8; n];
    match noise {
        None => {
            let mut psi = StateVector::product_state(&stabilizers)?;
            for u in unitaries {
                psi.apply(u)?;
            }
            for q in 0..n {
                let axis = Axis::from_code(bases[q]).expect("code < 3");
                let s = psi.measure_qubit(q, axis, &mut rng)?;
                outcomes[q] = if s > 0.0 { 0 } else { 1 };
            }
        }
        Some(nm) => {
            let psi = StateVector::product_state(&stabilizers)?;
            let mut rho = DensityMatrix::from_state(&psi)?;
            for u in unitaries {
                rho.conjugate(u)?;
                for q in 0..n {
                    rho.depolarize_qubit(q, nm.gamma)?;
                }
            }
            for q in 0..n {
                let axis = Axis::from_code(bases[q]).expect("code < 3");
                let s = rho.measure_qubit(q, axis, &mut rng)?;
                outcomes[q] = if s > 0.0 { 0 } else { 1 };
            }
        }
    }
    Ok(RecordDraw {
        labels,
        bases,
        outcomes,
    })
}

/// Randomized-measurement dataset: uniformly random stabilizer product
/// inputs, evolution (noisy if requested), uniformly random single-qubit
/// Pauli bases, projective outcomes. Record l is reproducible on its own
/// from (seed, l).
pub fn sample_dataset(
    plan: &EvolutionPlan,
    n_records: u64,
    seed: u64,
    noise: Option<NoiseModel>,
) -> Result<Dataset> {
    if n_records == 0 {
        return Err(Error::Invalid {
            what: "n_records",
            message: "at least one record is required".into(),
        });
    }
    let limit = if noise.is_some() {
        DENSITY_QUBIT_LIMIT
    } else {
        STATE_QUBIT_LIMIT
    };
    let unitaries = step_unitaries(plan, limit)?;
    let gamma = noise.map_or(0.0, |nm| nm.gamma);
    let draws: Result<Vec<RecordDraw>> = (0..n_records)
        .into_par_iter()
        .map(|l| draw_record(plan, &unitaries, noise, seed, l))
        .collect();
    let draws = draws?;
    let mut ds = Dataset::new(plan.n, plan.k(), seed, gamma, plan_digest(plan));
    for d in &draws {
        ds.push_record(&d.labels, &d.bases, &d.outcomes);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::trace_distance;
    use crate::hamiltonian::builders;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_time_plan_is_identity() {
        let plan = builders::tfim_chain(3, 1.0, 0.5, 0.0);
        let u = plan_unitary(&plan, 10).unwrap();
        let id = DenseOperator::identity(3).unwrap();
        assert!(u.sub(&id).unwrap().max_abs_entry() < 1e-12);
    }

    #[test]
    fn z_eigenstate_picks_up_global_phase() {
        // H = Z, t = pi/2 on |0>: e^{-i pi/2}|0> = -i|0>.
        let plan = builders::single_qubit(Axis::Z, 1.0, std::f64::consts::FRAC_PI_2);
        let psi = StateVector::zero_state(1).unwrap();
        let out = evolve(&plan, &psi).unwrap();
        assert_abs_diff_eq!(out.amps[0].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps[0].im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps[1].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn x_rotation_of_zero_state() {
        // H = X, t = 0.3: cos(0.3)|0> - i sin(0.3)|1>.
        let plan = builders::single_qubit(Axis::X, 1.0, 0.3);
        let out = evolve(&plan, &StateVector::zero_state(1).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amps[0].re, 0.3f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.amps[1].im, -(0.3f64.sin()), epsilon = 1e-12);
    }

    #[test]
    fn evolve_then_reverse_is_identity() {
        let plan = builders::tfim_layered(3, 0.8, 0.6, 0.3, 0.2);
        let mut reversed = plan.clone();
        reversed.steps.reverse();
        for s in reversed.steps.iter_mut() {
            s.time = -s.time;
        }
        let labels = [
            StabilizerLabel::from_code(2).unwrap(),
            StabilizerLabel::from_code(4).unwrap(),
            StabilizerLabel::from_code(1).unwrap(),
        ];
        let psi = StateVector::product_state(&labels).unwrap();
        let back = evolve(&reversed, &evolve(&plan, &psi).unwrap()).unwrap();
        let diff: f64 = (&back.amps - &psi.amps).norm();
        assert!(diff < 1e-9, "round trip residual {diff}");
    }

    #[test]
    fn heisenberg_rotation_closed_form() {
        // H = Z, t = 0.1: U†XU = cos(0.2) X - sin(0.2) Y.
        let plan = builders::single_qubit(Axis::Z, 1.0, 0.1);
        let o = PauliTerm::single(1, 0, Axis::X).unwrap();
        let h = exact_heisenberg(&plan, &o).unwrap();
        let sum = pauli_decompose(&h, 1e-12);
        let x = PauliTerm::single(1, 0, Axis::X).unwrap();
        let y = PauliTerm::single(1, 0, Axis::Y).unwrap();
        assert_abs_diff_eq!(sum.coeff(x.key()).re, 0.2f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(sum.coeff(y.key()).re, -(0.2f64.sin()), epsilon = 1e-12);
        // Unitary conjugation preserves the +-1 spectrum.
        let eigs = h.hermitian_eigenvalues().unwrap();
        assert!(eigs.iter().all(|e| (e.abs() - 1.0).abs() < 1e-10));
        assert_eq!(eigs.iter().filter(|&&e| e > 0.0).count(), 1);
    }

    #[test]
    fn zero_time_heisenberg_is_the_observable() {
        let plan = builders::tfim_chain(3, 1.0, 0.4, 0.0);
        let o = PauliTerm::single(3, 1, Axis::Y).unwrap();
        let h = exact_heisenberg(&plan, &o).unwrap();
        let direct = term_to_dense(&o, 10).unwrap();
        assert!(h.sub(&direct).unwrap().max_abs_entry() < 1e-12);
    }

    #[test]
    fn depolarizing_shrinks_traceless_part() {
        // Single qubit: Tr[P N(rho)] = (1-gamma) Tr[P rho] for traceless P.
        let labels = [StabilizerLabel::from_code(2).unwrap()]; // |+>
        let psi = StateVector::product_state(&labels).unwrap();
        let mut rho = DensityMatrix::from_state(&psi).unwrap();
        let x = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::X).unwrap(), cone());
        let before = rho.expect(&x).unwrap().re;
        rho.depolarize_qubit(0, 0.3).unwrap();
        let after = rho.expect(&x).unwrap().re;
        assert_abs_diff_eq!(after, 0.7 * before, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_depolarization_is_maximally_mixed() {
        let plan = builders::tfim_chain(2, 1.0, 0.7, 0.2);
        let labels = [
            StabilizerLabel::from_code(3).unwrap(),
            StabilizerLabel::from_code(0).unwrap(),
        ];
        let rho = DensityMatrix::from_state(&StateVector::product_state(&labels).unwrap()).unwrap();
        let out = noisy_evolve(&plan, NoiseModel::new(1.0).unwrap(), &rho).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((out.mat - mixed.mat).norm() < 1e-12);
    }

    #[test]
    fn zero_noise_matches_pure_evolution() {
        let plan = builders::tfim_layered(2, 0.9, 0.5, 0.15, 0.1);
        let labels = [
            StabilizerLabel::from_code(4).unwrap(),
            StabilizerLabel::from_code(1).unwrap(),
        ];
        let psi = StateVector::product_state(&labels).unwrap();
        let rho = DensityMatrix::from_state(&psi).unwrap();
        let noisy = noisy_evolve(&plan, NoiseModel::new(0.0).unwrap(), &rho).unwrap();
        let pure = evolve(&plan, &psi).unwrap();
        let pure_rho = DensityMatrix::from_state(&pure).unwrap();
        let d = trace_distance(
            &DenseOperator::new(2, noisy.mat.clone()),
            &DenseOperator::new(2, pure_rho.mat.clone()),
        )
        .unwrap();
        assert!(d < 1e-10);
    }

    #[test]
    fn measurement_collapse_keeps_density_valid() {
        let plan = builders::tfim_chain(2, 1.0, 0.6, 0.12);
        let labels = [
            StabilizerLabel::from_code(2).unwrap(),
            StabilizerLabel::from_code(5).unwrap(),
        ];
        let psi = StateVector::product_state(&labels).unwrap();
        let mut rho = DensityMatrix::from_state(&psi).unwrap();
        let u = plan_unitary(&plan, 6).unwrap();
        rho.conjugate(&u).unwrap();
        rho.depolarize_qubit(0, 0.2).unwrap();
        let mut rng = substream(7, Domain::TrialState, 0);
        for q in 0..2 {
            rho.measure_qubit(q, Axis::X, &mut rng).unwrap();
            assert!(rho.validity_residual() < 1e-8);
        }
    }

    #[test]
    fn same_seed_gives_identical_datasets() {
        let plan = builders::tfim_chain(3, 1.0, 0.8, 0.05);
        let a = sample_dataset(&plan, 200, 11, None).unwrap();
        let b = sample_dataset(&plan, 200, 11, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = sample_dataset(&plan, 200, 12, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_state_in_z_basis_is_deterministic() {
        // Identity plan: a qubit prepared |0> and measured in Z gives +1.
        let plan = builders::tfim_chain(2, 1.0, 0.5, 0.0);
        let ds = sample_dataset(&plan, 500, 3, None).unwrap();
        let mut seen = 0;
        for rec in ds.records() {
            for q in 0..2 {
                if rec.labels[q] == 0 && rec.bases[q] == Axis::Z.code() {
                    assert_eq!(rec.sign(q), 1.0);
                    seen += 1;
                }
            }
        }
        assert!(seen > 10, "conditioning event too rare: {seen}");
    }

    #[test]
    fn dataset_marginals_are_uniform() {
        let plan = builders::tfim_chain(2, 1.0, 0.5, 0.0);
        let n_records = 100_000u64;
        let ds = sample_dataset(&plan, n_records, 5, None).unwrap();
        let draws = (n_records * 2) as f64;
        let mut label_counts = [0u64; 6];
        let mut basis_counts = [0u64; 3];
        for rec in ds.records() {
            for q in 0..2 {
                label_counts[rec.labels[q] as usize] += 1;
                basis_counts[rec.bases[q] as usize] += 1;
            }
        }
        let sigma_label = (1.0 / 6.0 * (5.0 / 6.0) / draws).sqrt();
        for &c in &label_counts {
            let freq = c as f64 / draws;
            assert!(
                (freq - 1.0 / 6.0).abs() <= 5.0 * sigma_label,
                "label frequency {freq}"
            );
        }
        let sigma_basis = (1.0 / 3.0 * (2.0 / 3.0) / draws).sqrt();
        for &c in &basis_counts {
            let freq = c as f64 / draws;
            assert!(
                (freq - 1.0 / 3.0).abs() <= 5.0 * sigma_basis,
                "basis frequency {freq}"
            );
        }
    }

    #[test]
    fn noisy_dataset_is_reproducible_and_shares_draws() {
        let plan = builders::tfim_chain(2, 1.0, 0.7, 0.05);
        let nm = NoiseModel::new(0.1).unwrap();
        let a = sample_dataset(&plan, 100, 21, Some(nm)).unwrap();
        let b = sample_dataset(&plan, 100, 21, Some(nm)).unwrap();
        assert_eq!(a, b);
        // Same seed, different gamma: inputs and bases coincide record by
        // record (common random numbers), only outcomes may differ.
        let c = sample_dataset(&plan, 100, 21, Some(NoiseModel::new(0.3).unwrap())).unwrap();
        for l in 0..100 {
            assert_eq!(a.record(l).labels, c.record(l).labels);
            assert_eq!(a.record(l).bases, c.record(l).bases);
        }
    }

    #[test]
    fn rejects_empty_and_oversized_requests() {
        let plan = builders::tfim_chain(2, 1.0, 0.5, 0.05);
        assert!(sample_dataset(&plan, 0, 1, None).is_err());
        let big = builders::tfim_chain(11, 1.0, 0.5, 0.05);
        assert!(matches!(
            sample_dataset(&big, 1, 1, None),
            Err(Error::DenseLimit { .. })
        ));
        let big_noisy = builders::tfim_chain(7, 1.0, 0.5, 0.05);
        assert!(sample_dataset(&big_noisy, 1, 1, Some(NoiseModel::new(0.1).unwrap())).is_err());
    }
}
