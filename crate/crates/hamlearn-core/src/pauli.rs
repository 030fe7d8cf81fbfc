//! Sparse Pauli algebra on bit masks.
//!
//! A Pauli string on `n` qubits is encoded by two `u64` masks: bit `q` of
//! `x` / `z` marks an X / Z factor on qubit `q`, a qubit with both bits set
//! carries Y. Qubit `q` is bit `q` of a computational-basis index. The
//! encoded operator is `i^phase * P(x, z)` where `P(x, z)` is the Hermitian
//! string with symbols {I, X, Y, Z}; products reduce to XOR on the masks
//! plus popcount bookkeeping on the phase.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

/// Coefficients with modulus at or below this are dropped from sums.
pub const PRUNE_EPS: f64 = 1e-12;

pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Axis> {
        match c {
            'X' => Some(Axis::X),
            'Y' => Some(Axis::Y),
            'Z' => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Axis> {
        match c {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One of the six single-qubit stabilizer states (axis eigenstates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StabilizerLabel {
    pub axis: Axis,
    pub positive: bool,
}

impl StabilizerLabel {
    pub const COUNT: u8 = 6;

    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    /// Packs into 0..6: Z+, Z-, X+, X-, Y+, Y-.
    pub fn code(self) -> u8 {
        let base = match self.axis {
            Axis::Z => 0,
            Axis::X => 2,
            Axis::Y => 4,
        };
        base + if self.positive { 0 } else { 1 }
    }

    pub fn from_code(code: u8) -> Option<StabilizerLabel> {
        let positive = code % 2 == 0;
        let axis = match code / 2 {
            0 => Axis::Z,
            1 => Axis::X,
            2 => Axis::Y,
            _ => return None,
        };
        Some(StabilizerLabel { axis, positive })
    }

    /// Amplitudes on |0>, |1>.
    pub fn amplitudes(self) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let one = Complex64::new(1.0, 0.0);
        match (self.axis, self.positive) {
            (Axis::Z, true) => [one, Complex64::new(0.0, 0.0)],
            (Axis::Z, false) => [Complex64::new(0.0, 0.0), one],
            (Axis::X, true) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            (Axis::X, false) => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
            (Axis::Y, true) => [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
            (Axis::Y, false) => [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        }
    }

    /// <label| sigma_axis |label>: the eigenvalue on a matching axis, else 0.
    pub fn pauli_expectation(self, axis: Axis) -> f64 {
        if self.axis == axis {
            self.sign()
        } else {
            0.0
        }
    }
}

fn check_qubit(qubit: usize, n: usize) -> Result<()> {
    if qubit >= n {
        return Err(Error::QubitOutOfRange { qubit, n });
    }
    Ok(())
}

/// Single Pauli string with a quarter-turn phase: `i^phase * P(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    n: u32,
    x: u64,
    z: u64,
    /// Exponent of i, always reduced mod 4.
    phase: u8,
}

/// Product of the Hermitian strings keyed by `(x, z)`:
/// returns the product key and the exponent k with P_a P_b = i^k P_c.
fn canonical_product(a: (u64, u64), b: (u64, u64)) -> ((u64, u64), u8) {
    let (xa, za) = a;
    let (xb, zb) = b;
    let xc = xa ^ xb;
    let zc = za ^ zb;
    let pa = (xa & za).count_ones();
    let pb = (xb & zb).count_ones();
    let pc = (xc & zc).count_ones();
    // Y = iXZ on each qubit; commuting Z past X contributes (-1) per crossing.
    let k = pa + pb + 2 * (za & xb).count_ones() + 4 * 64 - pc;
    ((xc, zc), (k % 4) as u8)
}

fn symplectic_commutes(a: (u64, u64), b: (u64, u64)) -> bool {
    ((a.0 & b.1).count_ones() + (a.1 & b.0).count_ones()) % 2 == 0
}

pub fn quarter_phase(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl PauliTerm {
    pub fn identity(n: usize) -> PauliTerm {
        assert!(n >= 1 && n <= MAX_QUBITS);
        PauliTerm {
            n: n as u32,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    pub fn single(n: usize, qubit: usize, axis: Axis) -> Result<PauliTerm> {
        check_qubit(qubit, n)?;
        let bit = 1u64 << qubit;
        let (x, z) = match axis {
            Axis::X => (bit, 0),
            Axis::Y => (bit, bit),
            Axis::Z => (0, bit),
        };
        Ok(PauliTerm {
            n: n as u32,
            x,
            z,
            phase: 0,
        })
    }

    /// Builds a string from a word over distinct qubits, e.g. "XZ" on [0, 2].
    pub fn from_word(n: usize, qubits: &[usize], word: &[Axis]) -> Result<PauliTerm> {
        if qubits.len() != word.len() {
            return Err(Error::Invalid {
                what: "pauli word",
                message: format!(
                    "word length {} does not match {} qubits",
                    word.len(),
                    qubits.len()
                ),
            });
        }
        let mut term = PauliTerm::identity(n);
        for (&q, &a) in qubits.iter().zip(word) {
            check_qubit(q, n)?;
            let bit = 1u64 << q;
            if (term.x | term.z) & bit != 0 {
                return Err(Error::Invalid {
                    what: "pauli word",
                    message: format!("qubit {q} listed twice"),
                });
            }
            match a {
                Axis::X => term.x |= bit,
                Axis::Y => {
                    term.x |= bit;
                    term.z |= bit;
                }
                Axis::Z => term.z |= bit,
            }
        }
        Ok(term)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn key(&self) -> (u64, u64) {
        (self.x, self.z)
    }

    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        quarter_phase(self.phase)
    }

    pub fn is_identity_string(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn support_qubits(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut mask = self.support();
        while mask != 0 {
            let q = mask.trailing_zeros() as usize;
            out.push(q);
            mask &= mask - 1;
        }
        out
    }

    pub fn axis_at(&self, qubit: usize) -> Option<Axis> {
        let bit = 1u64 << qubit;
        match ((self.x & bit) != 0, (self.z & bit) != 0) {
            (true, false) => Some(Axis::X),
            (true, true) => Some(Axis::Y),
            (false, true) => Some(Axis::Z),
            (false, false) => None,
        }
    }

    pub fn scaled(mut self, extra_quarter: u8) -> PauliTerm {
        self.phase = (self.phase + extra_quarter) % 4;
        self
    }

    pub fn mul(&self, other: &PauliTerm) -> Result<PauliTerm> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let ((x, z), k) = canonical_product(self.key(), other.key());
        Ok(PauliTerm {
            n: self.n,
            x,
            z,
            phase: (self.phase + other.phase + k) % 4,
        })
    }

    pub fn commutes(&self, other: &PauliTerm) -> bool {
        symplectic_commutes(self.key(), other.key())
    }

    pub fn adjoint(&self) -> PauliTerm {
        PauliTerm {
            phase: (4 - self.phase % 4) % 4,
            ..*self
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    /// Relabels qubits: qubit `q` of `self` becomes `map[q]` on `new_n` qubits.
    pub fn relabeled(&self, new_n: usize, map: &[usize]) -> Result<PauliTerm> {
        assert!(new_n <= MAX_QUBITS);
        let mut x = 0u64;
        let mut z = 0u64;
        for q in 0..self.n() {
            let bit = 1u64 << q;
            if (self.x | self.z) & bit == 0 {
                continue;
            }
            let target = *map.get(q).ok_or(Error::QubitOutOfRange { qubit: q, n: map.len() })?;
            check_qubit(target, new_n)?;
            if self.x & bit != 0 {
                x |= 1u64 << target;
            }
            if self.z & bit != 0 {
                z |= 1u64 << target;
            }
        }
        Ok(PauliTerm {
            n: new_n as u32,
            x,
            z,
            phase: self.phase,
        })
    }

    /// Deterministic candidate order: weight, then support as an index
    /// sequence, then the per-qubit symbols along the support.
    pub fn order_key(&self) -> (u32, Vec<usize>, Vec<u8>) {
        let support = self.support_qubits();
        let axes = support
            .iter()
            .map(|&q| self.axis_at(q).expect("support qubit").code())
            .collect();
        (self.weight(), support, axes)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase % 4 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        if self.is_identity_string() {
            return write!(f, "I");
        }
        for q in self.support_qubits() {
            write!(f, "{}{}", self.axis_at(q).unwrap().symbol(), q)?;
        }
        Ok(())
    }
}

/// Linear combination of Hermitian Pauli strings with complex coefficients,
/// keyed by `(x, z)`. The map order makes iteration deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: u32,
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl PauliSum {
    pub fn zero(n: usize) -> PauliSum {
        assert!(n >= 1 && n <= MAX_QUBITS);
        PauliSum {
            n: n as u32,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> PauliSum {
        let mut s = PauliSum::zero(n);
        s.terms.insert((0, 0), Complex64::new(1.0, 0.0));
        s
    }

    pub fn from_term(term: &PauliTerm, coeff: Complex64) -> PauliSum {
        let mut s = PauliSum::zero(term.n());
        s.accumulate(term.key(), coeff * term.phase());
        s
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the Hermitian string with the given masks.
    pub fn coeff(&self, key: (u64, u64)) -> Complex64 {
        self.terms
            .get(&key)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u64, u64), &Complex64)> {
        self.terms.iter()
    }

    fn accumulate(&mut self, key: (u64, u64), coeff: Complex64) {
        let entry = self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() <= PRUNE_EPS {
            self.terms.remove(&key);
        }
    }

    pub fn add_term(&mut self, term: &PauliTerm, coeff: Complex64) -> Result<()> {
        if term.n() != self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: term.n(),
            });
        }
        self.accumulate(term.key(), coeff * term.phase());
        Ok(())
    }

    pub fn add_assign(&mut self, other: &PauliSum, factor: Complex64) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        for (&key, &c) in &other.terms {
            self.accumulate(key, c * factor);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Complex64) {
        if factor.norm() <= PRUNE_EPS {
            self.terms.clear();
            return;
        }
        for c in self.terms.values_mut() {
            *c *= factor;
        }
        self.terms.retain(|_, c| c.norm() > PRUNE_EPS);
    }

    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let mut out = PauliSum::zero(self.n());
        for (&ka, &ca) in &self.terms {
            for (&kb, &cb) in &other.terms {
                let (kc, k) = canonical_product(ka, kb);
                out.accumulate(kc, ca * cb * quarter_phase(k));
            }
        }
        Ok(out)
    }

    /// [self, other] = self*other - other*self. Pauli strings either commute
    /// or anticommute, so each surviving pair contributes twice its product.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let mut out = PauliSum::zero(self.n());
        for (&ka, &ca) in &self.terms {
            for (&kb, &cb) in &other.terms {
                if symplectic_commutes(ka, kb) {
                    continue;
                }
                let (kc, k) = canonical_product(ka, kb);
                out.accumulate(kc, 2.0 * ca * cb * quarter_phase(k));
            }
        }
        Ok(out)
    }

    pub fn support(&self) -> u64 {
        self.terms.keys().fold(0, |acc, &(x, z)| acc | x | z)
    }

    /// Largest imaginary part over coefficients; 0 marks a Hermitian sum.
    pub fn max_imag(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// Drops imaginary parts (valid after operations that are Hermitian by
    /// construction but accumulate floating-point residue).
    pub fn hermitianize(&mut self) {
        for c in self.terms.values_mut() {
            c.im = 0.0;
        }
        self.terms.retain(|_, c| c.norm() > PRUNE_EPS);
    }

    pub fn coeff_l1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn coeff_l2(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// <psi| self |psi> for a product of stabilizer states; exact, no dense
    /// matrices involved. Real part of the sum (exactly real for Hermitian
    /// sums since each string factorizes into {0, +-1}).
    pub fn expect_product_state(&self, labels: &[StabilizerLabel]) -> Result<f64> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: labels.len(),
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        'terms: for (&(x, z), &c) in &self.terms {
            let mut factor = 1.0;
            let mut mask = x | z;
            while mask != 0 {
                let q = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                let bit = 1u64 << q;
                let axis = match ((x & bit) != 0, (z & bit) != 0) {
                    (true, false) => Axis::X,
                    (true, true) => Axis::Y,
                    _ => Axis::Z,
                };
                let f = labels[q].pauli_expectation(axis);
                if f == 0.0 {
                    continue 'terms;
                }
                factor *= f;
            }
            total += c * factor;
        }
        Ok(total.re)
    }

    /// Matrix element <a| self |b> between computational basis states given
    /// as bit masks (bit q = qubit q).
    pub fn basis_matrix_element(&self, a: u64, b: u64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (&(x, z), &c) in &self.terms {
            if a != b ^ x {
                continue;
            }
            let k = (x & z).count_ones() + 2 * (z & b).count_ones();
            total += c * quarter_phase((k % 4) as u8);
        }
        total
    }

    /// Relabels qubits through `map` onto `new_n` qubits.
    pub fn relabeled(&self, new_n: usize, map: &[usize]) -> Result<PauliSum> {
        let mut out = PauliSum::zero(new_n);
        for (&(x, z), &c) in &self.terms {
            let mut nx = 0u64;
            let mut nz = 0u64;
            let mut mask = x | z;
            while mask != 0 {
                let q = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                let target = *map.get(q).ok_or(Error::QubitOutOfRange {
                    qubit: q,
                    n: map.len(),
                })?;
                check_qubit(target, new_n)?;
                if x & (1u64 << q) != 0 {
                    nx |= 1u64 << target;
                }
                if z & (1u64 << q) != 0 {
                    nz |= 1u64 << target;
                }
            }
            out.accumulate((nx, nz), c);
        }
        Ok(out)
    }

    /// Widens to `new_n` qubits keeping qubit indices (identity elsewhere).
    pub fn embedded(&self, new_n: usize) -> Result<PauliSum> {
        if new_n < self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: new_n,
            });
        }
        let map: Vec<usize> = (0..self.n()).collect();
        self.relabeled(new_n, &map)
    }

    /// Multiplies every term by a single-qubit Pauli on a qubit outside the
    /// sum's support (used to attach the copy-register symbol).
    pub fn attached(&self, qubit: usize, axis: Axis) -> Result<PauliSum> {
        let single = PauliTerm::single(self.n(), qubit, axis)?;
        if self.support() & single.support() != 0 {
            return Err(Error::Invalid {
                what: "attach qubit",
                message: format!("qubit {qubit} already in support"),
            });
        }
        self.mul(&PauliSum::from_term(&single, Complex64::new(1.0, 0.0)))
    }

    pub fn terms_sorted_for_output(&self) -> Vec<(PauliTerm, Complex64)> {
        let mut out: Vec<(PauliTerm, Complex64)> = self
            .terms
            .iter()
            .map(|(&(x, z), &c)| {
                (
                    PauliTerm {
                        n: self.n,
                        x,
                        z,
                        phase: 0,
                    },
                    c,
                )
            })
            .collect();
        out.sort_by(|a, b| a.0.order_key().cmp(&b.0.order_key()));
        out
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (term, c) in self.terms_sorted_for_output() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)*{}", c.re, c.im, term.scaled(0))?;
        }
        Ok(())
    }
}

/// Right-to-left fold [c_1, [c_2, ... [c_m, o]]].
pub fn nested_commutator(chain: &[&PauliSum], o: &PauliSum) -> Result<PauliSum> {
    let mut acc = o.clone();
    for c in chain.iter().rev() {
        acc = c.commutator(&acc)?;
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_qubit_products() {
        let n = 1;
        let x = PauliTerm::single(n, 0, Axis::X).unwrap();
        let y = PauliTerm::single(n, 0, Axis::Y).unwrap();
        let z = PauliTerm::single(n, 0, Axis::Z).unwrap();

        // X*Y = iZ
        let xy = x.mul(&y).unwrap();
        assert_eq!(xy.key(), z.key());
        assert_eq!(xy.phase(), c(0.0, 1.0));

        // Y*X = -iZ
        let yx = y.mul(&x).unwrap();
        assert_eq!(yx.key(), z.key());
        assert_eq!(yx.phase(), c(0.0, -1.0));

        // Y*Z = iX, Z*X = iY
        assert_eq!(y.mul(&z).unwrap().phase(), c(0.0, 1.0));
        assert_eq!(y.mul(&z).unwrap().key(), x.key());
        assert_eq!(z.mul(&x).unwrap().phase(), c(0.0, 1.0));
        assert_eq!(z.mul(&x).unwrap().key(), y.key());

        // Squares are +I.
        for p in [x, y, z] {
            let sq = p.mul(&p).unwrap();
            assert!(sq.is_identity_string());
            assert_eq!(sq.phase(), c(1.0, 0.0));
        }
    }

    #[test]
    fn two_qubit_product_with_phase() {
        // (X (x) Z) * (Z (x) Z) = -i (Y (x) I): word qubit order [0, 1].
        let a = PauliTerm::from_word(2, &[0, 1], &[Axis::X, Axis::Z]).unwrap();
        let b = PauliTerm::from_word(2, &[0, 1], &[Axis::Z, Axis::Z]).unwrap();
        let prod = a.mul(&b).unwrap();
        let y0 = PauliTerm::single(2, 0, Axis::Y).unwrap();
        assert_eq!(prod.key(), y0.key());
        assert_eq!(prod.phase(), c(0.0, -1.0));
    }

    #[test]
    fn commutator_z_x_gives_2i_y() {
        let z = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::Z).unwrap(), c(1.0, 0.0));
        let x = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::X).unwrap(), c(1.0, 0.0));
        let comm = z.commutator(&x).unwrap();
        let y = PauliTerm::single(1, 0, Axis::Y).unwrap();
        assert_eq!(comm.len(), 1);
        assert_eq!(comm.coeff(y.key()), c(0.0, 2.0));
    }

    #[test]
    fn nested_commutator_folds_right_to_left() {
        // [Z, [Z, X]] = [Z, 2iY] = 2i * (-2i X) = 4X.
        let z = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::Z).unwrap(), c(1.0, 0.0));
        let x = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::X).unwrap(), c(1.0, 0.0));
        let out = nested_commutator(&[&z, &z], &x).unwrap();
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(
            out.coeff(PauliTerm::single(1, 0, Axis::X).unwrap().key()).re,
            4.0
        );
    }

    #[test]
    fn commuting_pairs_vanish() {
        let zz = PauliSum::from_term(
            &PauliTerm::from_word(2, &[0, 1], &[Axis::Z, Axis::Z]).unwrap(),
            c(1.0, 0.0),
        );
        let z0 = PauliSum::from_term(&PauliTerm::single(2, 0, Axis::Z).unwrap(), c(1.0, 0.0));
        assert!(zz.commutator(&z0).unwrap().is_empty());
    }

    #[test]
    fn expect_product_state_matches_labels() {
        // <+|X|+> = 1, <0|Z|0> = 1, <0|X|0> = 0, Y- gives -1 on Y.
        let plus = StabilizerLabel {
            axis: Axis::X,
            positive: true,
        };
        let zero = StabilizerLabel {
            axis: Axis::Z,
            positive: true,
        };
        let yminus = StabilizerLabel {
            axis: Axis::Y,
            positive: false,
        };

        let x0 = PauliSum::from_term(&PauliTerm::single(3, 0, Axis::X).unwrap(), c(1.0, 0.0));
        let labels = [plus, zero, yminus];
        assert_abs_diff_eq!(x0.expect_product_state(&labels).unwrap(), 1.0);

        let z1 = PauliSum::from_term(&PauliTerm::single(3, 1, Axis::Z).unwrap(), c(1.0, 0.0));
        assert_abs_diff_eq!(z1.expect_product_state(&labels).unwrap(), 1.0);

        let x1 = PauliSum::from_term(&PauliTerm::single(3, 1, Axis::X).unwrap(), c(1.0, 0.0));
        assert_abs_diff_eq!(x1.expect_product_state(&labels).unwrap(), 0.0);

        let y2 = PauliSum::from_term(&PauliTerm::single(3, 2, Axis::Y).unwrap(), c(1.0, 0.0));
        assert_abs_diff_eq!(y2.expect_product_state(&labels).unwrap(), -1.0);

        // Product across qubits: X0 * Y2 -> 1 * (-1).
        let x0y2 = PauliSum::from_term(
            &PauliTerm::from_word(3, &[0, 2], &[Axis::X, Axis::Y]).unwrap(),
            c(1.0, 0.0),
        );
        assert_abs_diff_eq!(x0y2.expect_product_state(&labels).unwrap(), -1.0);
    }

    #[test]
    fn prune_removes_cancelled_terms() {
        let x = PauliTerm::single(1, 0, Axis::X).unwrap();
        let mut s = PauliSum::from_term(&x, c(1.0, 0.0));
        s.add_term(&x, c(-1.0, 0.0)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn attach_copies_register_symbol() {
        let v = PauliSum::from_term(&PauliTerm::single(4, 0, Axis::X).unwrap(), c(0.5, 0.0));
        let attached = v.attached(2, Axis::Z).unwrap();
        let expect = PauliTerm::from_word(4, &[0, 2], &[Axis::X, Axis::Z]).unwrap();
        assert_eq!(attached.coeff(expect.key()), c(0.5, 0.0));
    }

    #[test]
    fn basis_matrix_elements() {
        // Y|0> = i|1>.
        let y = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::Y).unwrap(), c(1.0, 0.0));
        assert_eq!(y.basis_matrix_element(1, 0), c(0.0, 1.0));
        assert_eq!(y.basis_matrix_element(0, 1), c(0.0, -1.0));
        assert_eq!(y.basis_matrix_element(0, 0), c(0.0, 0.0));

        // Z|1> = -|1>.
        let z = PauliSum::from_term(&PauliTerm::single(1, 0, Axis::Z).unwrap(), c(1.0, 0.0));
        assert_eq!(z.basis_matrix_element(1, 1), c(-1.0, 0.0));
    }
}
