//! Dense pure states over a handful of qubits and the unitary gates acting on them.
//!
//! Basis index `i` names the ket whose bit string is the binary expansion of
//! `i` with the most significant bit first, so qubit 0 is the top wire of a
//! circuit diagram and `|abc⟩` prints in wire order.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One complex amplitude.
pub type Amplitude = Complex64;

/// Largest register this crate will build.
pub const MAX_QUBITS: usize = 8;

/// Tolerance for accepting caller-supplied amplitude vectors.
pub const CONSTRUCTION_TOL: f64 = 1e-6;
/// Tolerance for state and matrix comparisons.
pub const COMPARE_TOL: f64 = 1e-9;
/// Threshold below which an amplitude or probability is treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Bit mask selecting `qubit` inside a basis index of an `n`-qubit register.
#[inline]
pub(crate) fn mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// A normalized state vector of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<Amplitude>,
}

impl PureState {
    /// Validates and renormalizes `amps` to exact unit norm.
    ///
    /// The input norm must already be within [`CONSTRUCTION_TOL`] of one; use
    /// [`PureState::normalize`] to accept arbitrary nonzero vectors.
    pub fn new(n_qubits: usize, amps: Vec<Amplitude>) -> Result<Self> {
        let (state, norm) = Self::normalize(n_qubits, amps)?;
        if (norm - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::NotNormalized {
                norm,
                tol: CONSTRUCTION_TOL,
            });
        }
        Ok(state)
    }

    /// Scales any finite nonzero vector to unit norm, returning the original norm.
    pub fn normalize(n_qubits: usize, amps: Vec<Amplitude>) -> Result<(Self, f64)> {
        check_register(n_qubits)?;
        let expected = 1 << n_qubits;
        if amps.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < ZERO_TOL {
            return Err(Error::ZeroVector);
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok((Self { n_qubits, amps }, norm))
    }

    /// Builds a state from amplitudes that are already normalized, without rescaling.
    ///
    /// Used where bit-exact reproduction of an upstream computation matters.
    pub(crate) fn from_normalized(n_qubits: usize, amps: Vec<Amplitude>) -> Result<Self> {
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() {
            return Err(Error::NonFinite);
        }
        if (norm_sqr - 1.0).abs() > COMPARE_TOL {
            return Err(Error::NotNormalized {
                norm: norm_sqr.sqrt(),
                tol: COMPARE_TOL,
            });
        }
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: index + 1,
            });
        }
        let mut amps = vec![Amplitude::new(0.0, 0.0); dim];
        amps[index] = Amplitude::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Basis state named by a bit string such as `"010"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut index = 0usize;
        for ch in bits.chars() {
            let bit = match ch {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::BadBit(ch as u8)),
            };
            index = (index << 1) | bit;
        }
        Self::basis(n, index)
    }

    /// Single qubit `alpha|0⟩ + beta|1⟩`.
    pub fn qubit(alpha: Amplitude, beta: Amplitude) -> Result<Self> {
        Self::new(1, vec![alpha, beta])
    }

    /// `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        let h = Amplitude::new(FRAC_1_SQRT_2, 0.0);
        Self {
            n_qubits: 1,
            amps: vec![h, h],
        }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        let h = Amplitude::new(FRAC_1_SQRT_2, 0.0);
        let z = Amplitude::new(0.0, 0.0);
        Self {
            n_qubits: 2,
            amps: vec![h, z, z, h],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies every amplitude by a unit-modulus phase.
    pub fn with_global_phase(&self, phase: Amplitude) -> Self {
        Self {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }

    /// Kronecker product; `self` supplies the high-order (upper) wires.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self { n_qubits: n, amps })
    }

    /// Applies a one-qubit gate to wire `qubit`.
    pub fn apply_1q(&self, qubit: usize, gate: &Gate1) -> Result<Self> {
        self.check_qubit(qubit)?;
        let bit = mask(self.n_qubits, qubit);
        let m = &gate.m;
        let mut out = self.amps.clone();
        for i in (0..self.dim()).filter(|i| i & bit == 0) {
            let j = i | bit;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            out[i] = m[0][0] * a0 + m[0][1] * a1;
            out[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }

    /// Applies a two-qubit gate; `q_hi` supplies the high-order bit of the gate's index.
    pub fn apply_2q(&self, q_hi: usize, q_lo: usize, gate: &Gate2) -> Result<Self> {
        self.check_qubit(q_hi)?;
        self.check_qubit(q_lo)?;
        if q_hi == q_lo {
            return Err(Error::DuplicateQubit(q_hi));
        }
        let hi = mask(self.n_qubits, q_hi);
        let lo = mask(self.n_qubits, q_lo);
        let m = &gate.m;
        let mut out = self.amps.clone();
        for base in (0..self.dim()).filter(|i| i & (hi | lo) == 0) {
            let idx = [base, base | lo, base | hi, base | hi | lo];
            let v = idx.map(|i| self.amps[i]);
            for (row, &target) in idx.iter().enumerate() {
                out[target] = m[row]
                    .iter()
                    .zip(v.iter())
                    .fold(Amplitude::new(0.0, 0.0), |acc, (g, a)| acc + g * a);
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            amps: out,
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Amplitude> {
        self.check_same_size(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, clamped into `[0, 1]`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    pub fn equal_up_to_global_phase(&self, other: &PureState, tol: f64) -> Result<bool> {
        Ok(self.fidelity(other)? >= 1.0 - tol)
    }

    /// Born probability that measuring `qubit` yields `outcome`.
    pub fn prob_outcome(&self, qubit: usize, outcome: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        check_bit(outcome)?;
        let bit = mask(self.n_qubits, qubit);
        let want = if outcome == 0 { 0 } else { bit };
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `qubit` onto `outcome` and renormalizes; returns the branch probability too.
    pub fn collapse(&self, qubit: usize, outcome: u8) -> Result<(f64, Self)> {
        let p = self.prob_outcome(qubit, outcome)?;
        if p < ZERO_TOL {
            return Err(Error::ZeroProbabilityBranch { qubit, outcome });
        }
        let bit = mask(self.n_qubits, qubit);
        let want = if outcome == 0 { 0 } else { bit };
        let scale = p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & bit == want {
                    a / scale
                } else {
                    Amplitude::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            p,
            Self {
                n_qubits: self.n_qubits,
                amps,
            },
        ))
    }

    /// Splits off wires known to sit in basis states and returns the state of
    /// the remaining wires, in ascending wire order.
    ///
    /// Amplitudes are copied verbatim (no renormalization); fails with
    /// [`Error::NotSeparable`] if the fixed wires carry less than all the weight.
    pub fn factor_out(&self, fixed: &[(usize, u8)]) -> Result<Self> {
        let mut fixed_mask = 0;
        let mut fixed_value = 0;
        for &(q, b) in fixed {
            self.check_qubit(q)?;
            check_bit(b)?;
            let m = mask(self.n_qubits, q);
            if fixed_mask & m != 0 {
                return Err(Error::DuplicateQubit(q));
            }
            fixed_mask |= m;
            if b == 1 {
                fixed_value |= m;
            }
        }
        let rest: Vec<usize> = (0..self.n_qubits)
            .filter(|&q| fixed_mask & mask(self.n_qubits, q) == 0)
            .collect();
        if rest.is_empty() {
            return Err(Error::EmptyOrFullSubset);
        }
        let amps: Vec<Amplitude> = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & fixed_mask == fixed_value)
            .map(|(_, a)| *a)
            .collect();
        Self::from_normalized(rest.len(), amps).map_err(|_| Error::NotSeparable(rest))
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            Err(Error::BadQubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_same_size(&self, other: &PureState) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            })
        } else {
            Ok(())
        }
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        Err(Error::LengthMismatch {
            expected: 2,
            got: 1,
        })
    } else if n_qubits > MAX_QUBITS {
        Err(Error::TooManyQubits(n_qubits))
    } else {
        Ok(())
    }
}

pub(crate) fn check_bit(bit: u8) -> Result<()> {
    if bit > 1 {
        Err(Error::BadBit(bit))
    } else {
        Ok(())
    }
}

/// Formats one amplitude as `(re±im·i)`.
pub fn format_amplitude(a: Amplitude) -> String {
    let sign = if a.im.is_sign_negative() { '-' } else { '+' };
    format!("({}{}{}i)", a.re, sign, a.im.abs())
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < ZERO_TOL {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(
                f,
                "{}|{:0width$b}⟩",
                format_amplitude(*a),
                i,
                width = self.n_qubits
            )?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// A 2×2 unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate1 {
    pub(crate) m: [[Amplitude; 2]; 2],
}

/// A 4×4 unitary over an ordered qubit pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2 {
    pub(crate) m: [[Amplitude; 4]; 4],
}

impl Gate1 {
    pub fn new(m: [[Amplitude; 2]; 2]) -> Result<Self> {
        let dev = unitarity_deviation(&m.map(|r| r.to_vec()));
        if dev > COMPARE_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &[[Amplitude; 2]; 2] {
        &self.m
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Gate1) -> Gate1 {
        let mut m = [[Amplitude::new(0.0, 0.0); 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..2).map(|k| self.m[r][k] * rhs.m[k][c]).sum();
            }
        }
        Gate1 { m }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.m.map(|r| r.to_vec()))
    }
}

impl Gate2 {
    pub fn new(m: [[Amplitude; 4]; 4]) -> Result<Self> {
        let dev = unitarity_deviation(&m.map(|r| r.to_vec()));
        if dev > COMPARE_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &[[Amplitude; 4]; 4] {
        &self.m
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.m.map(|r| r.to_vec()))
    }
}

/// Largest entry of `|m†m − I|`.
pub fn unitarity_deviation<R: AsRef<[Amplitude]>>(m: &[R]) -> f64 {
    let n = m.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: Amplitude = (0..n).map(|k| m[k].as_ref()[i].conj() * m[k].as_ref()[j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    worst
}
