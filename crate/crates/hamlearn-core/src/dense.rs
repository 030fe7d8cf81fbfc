//! Dense operators for the brute-force oracle path.
//!
//! Basis-index convention: qubit `q` is bit `q` of the computational-basis
//! index. Everything here is meant for desk-scale checks; capacity guards
//! keep accidental exponential blowups loud.

use crate::error::{Error, Result};
use crate::pauli::{quarter_phase, PauliSum, PauliTerm};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Hard ceiling on dense operator size (matrices of dim 2^12 = 4096).
pub const DENSE_QUBIT_LIMIT: usize = 12;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    pub mat: CMat,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn check_dense_limit(n: usize, limit: usize) -> Result<()> {
    let cap = limit.min(DENSE_QUBIT_LIMIT);
    if n > cap {
        return Err(Error::DenseLimit { qubits: n, limit: cap });
    }
    Ok(())
}

impl DenseOperator {
    pub fn new(n: usize, mat: CMat) -> DenseOperator {
        assert_eq!(mat.nrows(), 1 << n);
        assert_eq!(mat.ncols(), 1 << n);
        DenseOperator { n, mat }
    }

    pub fn zeros(n: usize) -> Result<DenseOperator> {
        check_dense_limit(n, DENSE_QUBIT_LIMIT)?;
        let dim = 1usize << n;
        Ok(DenseOperator {
            n,
            mat: CMat::zeros(dim, dim),
        })
    }

    pub fn identity(n: usize) -> Result<DenseOperator> {
        check_dense_limit(n, DENSE_QUBIT_LIMIT)?;
        let dim = 1usize << n;
        Ok(DenseOperator {
            n,
            mat: CMat::identity(dim, dim),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn mul(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(DenseOperator {
            n: self.n,
            mat: &self.mat * &other.mat,
        })
    }

    pub fn add_scaled(&mut self, other: &DenseOperator, factor: Complex64) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        self.mat += &other.mat * factor;
        Ok(())
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<DenseOperator> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(DenseOperator {
            n: self.n,
            mat: &self.mat - &other.mat,
        })
    }

    pub fn scaled(&self, factor: Complex64) -> DenseOperator {
        DenseOperator {
            n: self.n,
            mat: &self.mat * factor,
        }
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            n: self.n,
            mat: self.mat.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Conjugation u * self * u^dagger.
    pub fn conjugated_by(&self, u: &DenseOperator) -> Result<DenseOperator> {
        u.mul(self)?.mul(&u.adjoint())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.mat.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value) via the Hermitian
    /// eigendecomposition of A^dagger A.
    pub fn spectral_norm(&self) -> f64 {
        if self.mat.iter().all(|c| c.norm_sqr() == 0.0) {
            return 0.0;
        }
        let gram = self.mat.adjoint() * &self.mat;
        let eig = gram.symmetric_eigenvalues();
        eig.iter().fold(0.0f64, |acc, &l| acc.max(l.max(0.0))).sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = &self.mat - self.mat.adjoint();
        diff.iter().all(|c| c.norm() <= tol)
    }

    /// || self^dagger self - I ||_inf-entrywise, a cheap unitarity residual.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self.mat.adjoint() * &self.mat;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let expect = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Applies a spectral function to a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> Complex64) -> Result<DenseOperator> {
        if !self.is_hermitian(1e-9) {
            return Err(Error::Invalid {
                what: "hermitian_map input",
                message: "matrix is not Hermitian".into(),
            });
        }
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let dim = self.dim();
        let mut diag = CMat::zeros(dim, dim);
        for i in 0..dim {
            diag[(i, i)] = f(eig.eigenvalues[i]);
        }
        let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
        Ok(DenseOperator { n: self.n, mat })
    }

    /// exp(-i t H) for Hermitian H = self.
    pub fn evolution(&self, t: f64) -> Result<DenseOperator> {
        self.hermitian_map(|l| Complex64::new(0.0, -l * t).exp())
    }

    /// Real eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_hermitian(1e-9) {
            return Err(Error::Invalid {
                what: "eigenvalue input",
                message: "matrix is not Hermitian".into(),
            });
        }
        let mut vals: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    /// Partial trace over the top `k` qubits (highest index bits), returning
    /// an operator on the remaining low qubits.
    pub fn partial_trace_top(&self, k: usize) -> Result<DenseOperator> {
        if k > self.n {
            return Err(Error::QubitOutOfRange { qubit: k, n: self.n });
        }
        let keep = self.n - k;
        let low = 1usize << keep;
        let high = 1usize << k;
        let mut out = CMat::zeros(low, low);
        for b in 0..high {
            let off = b << keep;
            for r in 0..low {
                for c in 0..low {
                    out[(r, c)] += self.mat[(off | r, off | c)];
                }
            }
        }
        Ok(DenseOperator { n: keep, mat: out })
    }

    /// Tensor with the maximally mixed state on `k` extra top qubits:
    /// returns (I/2^k) (x) self on n + k qubits.
    pub fn with_mixed_top(&self, k: usize) -> Result<DenseOperator> {
        let total = self.n + k;
        check_dense_limit(total, DENSE_QUBIT_LIMIT)?;
        let low = self.dim();
        let high = 1usize << k;
        let dim = low * high;
        let w = 1.0 / high as f64;
        let mut out = CMat::zeros(dim, dim);
        for b in 0..high {
            let off = b << self.n;
            for r in 0..low {
                for c in 0..low {
                    out[(off | r, off | c)] = self.mat[(r, c)] * w;
                }
            }
        }
        Ok(DenseOperator { n: total, mat: out })
    }

    /// Embeds an operator on `sub` qubits into `total` qubits; `map[q]` is
    /// the target wire of sub-operator qubit q. Identity elsewhere.
    pub fn embedded(&self, total: usize, map: &[usize]) -> Result<DenseOperator> {
        check_dense_limit(total, DENSE_QUBIT_LIMIT)?;
        if map.len() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: map.len(),
            });
        }
        let mut seen = 0u64;
        for &t in map {
            if t >= total || seen & (1 << t) != 0 {
                return Err(Error::QubitOutOfRange { qubit: t, n: total });
            }
            seen |= 1 << t;
        }
        let sub_dim = self.dim();
        let rest_qubits: Vec<usize> = (0..total).filter(|q| seen & (1 << q) == 0).collect();
        let rest_dim = 1usize << rest_qubits.len();
        let dim = 1usize << total;
        let mut out = CMat::zeros(dim, dim);
        let compose = |sub_idx: usize, rest_idx: usize| -> usize {
            let mut full = 0usize;
            for (q, &t) in map.iter().enumerate() {
                if sub_idx >> q & 1 == 1 {
                    full |= 1 << t;
                }
            }
            for (j, &t) in rest_qubits.iter().enumerate() {
                if rest_idx >> j & 1 == 1 {
                    full |= 1 << t;
                }
            }
            full
        };
        for rest in 0..rest_dim {
            for r in 0..sub_dim {
                let fr = compose(r, rest);
                for c in 0..sub_dim {
                    out[(fr, compose(c, rest))] = self.mat[(r, c)];
                }
            }
        }
        Ok(DenseOperator { n: total, mat: out })
    }
}

/// Dense form of a Pauli string sum, built matrix-free from the mask action
/// P(x,z)|b> = i^{|x&z|} (-1)^{|z&b|} |b^x>.
pub fn sum_to_dense(sum: &PauliSum, limit: usize) -> Result<DenseOperator> {
    check_dense_limit(sum.n(), limit)?;
    let n = sum.n();
    let dim = 1usize << n;
    let mut mat = CMat::zeros(dim, dim);
    for (&(x, z), &c) in sum.iter() {
        let base = ((x & z).count_ones() % 4) as u8;
        for b in 0..dim as u64 {
            let k = (base as u32 + 2 * (z & b).count_ones()) % 4;
            mat[((b ^ x) as usize, b as usize)] += c * quarter_phase(k as u8);
        }
    }
    Ok(DenseOperator { n, mat })
}

pub fn term_to_dense(term: &PauliTerm, limit: usize) -> Result<DenseOperator> {
    sum_to_dense(
        &PauliSum::from_term(term, Complex64::new(1.0, 0.0)),
        limit,
    )
}

/// Projects a dense operator onto the Pauli basis: coefficient of P(x,z) is
/// Tr[P A] / 2^n, evaluated matrix-free per string.
pub fn pauli_decompose(op: &DenseOperator, prune: f64) -> PauliSum {
    // c(x, z) = i^{|x & z|} 2^{-n} sum_b (-1)^{z.b} op[b, b ^ x]; the inner
    // sum over b is a Walsh-Hadamard transform, one per x.
    let n = op.n();
    let dim = 1usize << n;
    let norm = 1.0 / dim as f64;
    let mut out = PauliSum::zero(n);
    let mut g = vec![czero(); dim];
    for x in 0..dim {
        for (b, slot) in g.iter_mut().enumerate() {
            *slot = op.mat[(b, b ^ x)];
        }
        let mut h = 1;
        while h < dim {
            for i in (0..dim).step_by(2 * h) {
                for j in i..i + h {
                    let u = g[j];
                    let v = g[j + h];
                    g[j] = u + v;
                    g[j + h] = u - v;
                }
            }
            h *= 2;
        }
        for z in 0..dim {
            let base = ((x as u64 & z as u64).count_ones() % 4) as u8;
            let coeff = g[z] * quarter_phase(base) * norm;
            if coeff.norm() > prune {
                let term = pauli_term_from_masks(n, x as u64, z as u64);
                let _ = out.add_term(&term, coeff);
            }
        }
    }
    out
}

pub fn pauli_term_from_masks(n: usize, x: u64, z: u64) -> PauliTerm {
    let mut qubits = Vec::new();
    let mut word = Vec::new();
    for q in 0..n {
        let bit = 1u64 << q;
        let axis = match ((x & bit) != 0, (z & bit) != 0) {
            (true, false) => Some(crate::pauli::Axis::X),
            (true, true) => Some(crate::pauli::Axis::Y),
            (false, true) => Some(crate::pauli::Axis::Z),
            (false, false) => None,
        };
        if let Some(a) = axis {
            qubits.push(q);
            word.push(a);
        }
    }
    PauliTerm::from_word(n, &qubits, &word).expect("masks in range")
}

/// Swap of the low register (qubits 0..n) with the top register (n..2n).
pub fn register_swap(n: usize) -> Result<DenseOperator> {
    check_dense_limit(2 * n, DENSE_QUBIT_LIMIT)?;
    let dim = 1usize << (2 * n);
    let half = 1usize << n;
    let mut mat = CMat::zeros(dim, dim);
    for a in 0..half {
        for b in 0..half {
            mat[((a << n) | b, (b << n) | a)] = Complex64::new(1.0, 0.0);
        }
    }
    Ok(DenseOperator { n: 2 * n, mat })
}

/// u acting on the low register and conj(u)-transpose on the top register:
/// the doubled operator u (x) u^dagger on 2n qubits.
pub fn doubled_unitary(u: &DenseOperator) -> Result<DenseOperator> {
    let n = u.n();
    check_dense_limit(2 * n, DENSE_QUBIT_LIMIT)?;
    let ud = u.adjoint();
    let mat = ud.mat.kronecker(&u.mat);
    Ok(DenseOperator { n: 2 * n, mat })
}

/// Embeds an operator acting on the low register into the doubled register.
pub fn on_low_register(op: &DenseOperator, total_n: usize) -> Result<DenseOperator> {
    check_dense_limit(total_n, DENSE_QUBIT_LIMIT)?;
    let extra = total_n - op.n();
    let eye = CMat::identity(1 << extra, 1 << extra);
    let mat = eye.kronecker(&op.mat);
    Ok(DenseOperator { n: total_n, mat })
}

/// min over a global phase of || e^{i phi} u - v ||_inf.
///
/// Coarse 64-point grid over [0, 2pi) followed by golden-section refinement
/// of the bracketing interval down to a phase width of 1e-10.
pub fn phase_min_distance(u: &DenseOperator, v: &DenseOperator) -> Result<f64> {
    if u.n() != v.n() {
        return Err(Error::DimensionMismatch {
            left: u.n(),
            right: v.n(),
        });
    }
    let f = |phi: f64| -> f64 {
        let rot = u.scaled(Complex64::new(0.0, phi).exp());
        rot.sub(v).expect("same size").spectral_norm()
    };
    const GRID: usize = 64;
    let tau = std::f64::consts::TAU;
    let mut best_idx = 0;
    let mut best = f64::INFINITY;
    let values: Vec<f64> = (0..GRID).map(|i| f(tau * i as f64 / GRID as f64)).collect();
    for (i, &val) in values.iter().enumerate() {
        if val < best {
            best = val;
            best_idx = i;
        }
    }
    // Bracket around the grid minimum (wrapping), then golden-section.
    let step = tau / GRID as f64;
    let mut lo = step * (best_idx as f64 - 1.0);
    let mut hi = step * (best_idx as f64 + 1.0);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(best.min(f1).min(f2))
}

/// Trace distance (1/2)||rho - sigma||_1 between Hermitian matrices.
pub fn trace_distance(rho: &DenseOperator, sigma: &DenseOperator) -> Result<f64> {
    let diff = rho.sub(sigma)?;
    let vals = diff.hermitian_eigenvalues()?;
    Ok(0.5 * vals.iter().map(|l| l.abs()).sum::<f64>())
}
