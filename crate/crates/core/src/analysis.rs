//! Density matrices, partial traces and purity.
//!
//! Entanglement across a cut is witnessed by the purity deficit of the
//! reduced state: a pure global state is a product across the cut iff either
//! side's marginal is pure.

use crate::error::{Error, Result};
use crate::state::{mask, Amplitude, PureState, COMPARE_TOL};

/// Purity deficit above which a cut counts as entangled.
pub const ENTANGLEMENT_TOL: f64 = 1e-6;

/// Hermitian, trace-one, positive semidefinite matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: Vec<Amplitude>,
}

impl DensityMatrix {
    /// Validates a row-major matrix.
    pub fn new(n_qubits: usize, m: Vec<Amplitude>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if m.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                got: m.len(),
            });
        }
        if m.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let d = Self { n_qubits, m };
        d.validate()?;
        Ok(d)
    }

    /// `|s⟩⟨s|`.
    pub fn of(state: &PureState) -> Self {
        let amps = state.amplitudes();
        let m = amps
            .iter()
            .flat_map(|a| amps.iter().map(move |b| a * b.conj()))
            .collect();
        Self {
            n_qubits: state.n_qubits(),
            m,
        }
    }

    /// `I / 2ⁿ`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut m = vec![Amplitude::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = Amplitude::new(1.0 / dim as f64, 0.0);
        }
        Self { n_qubits, m }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.m[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Amplitude] {
        &self.m
    }

    pub fn trace(&self) -> Amplitude {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `tr(ρ²)`; for Hermitian ρ this is the sum of `|ρᵢⱼ|²`.
    pub fn purity(&self) -> f64 {
        self.m.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`: the fidelity of this state with the pure state `psi`.
    pub fn expectation(&self, psi: &PureState) -> Result<f64> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: psi.n_qubits(),
            });
        }
        let a = psi.amplitudes();
        let dim = self.dim();
        let mut acc = Amplitude::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += a[i].conj() * self.m[i * dim + j] * a[j];
            }
        }
        Ok(acc.re)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self
            .m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Reduced matrix on `keep`; the first listed qubit becomes the high-order wire.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits;
        let mut kept_mask = 0usize;
        for &q in keep {
            if q >= n {
                return Err(Error::BadQubitIndex {
                    index: q,
                    n_qubits: n,
                });
            }
            if kept_mask & mask(n, q) != 0 {
                return Err(Error::DuplicateQubit(q));
            }
            kept_mask |= mask(n, q);
        }
        if keep.is_empty() {
            return Err(Error::EmptyOrFullSubset);
        }
        let k = keep.len();
        let reduced_index = |i: usize| {
            keep.iter()
                .fold(0usize, |acc, &q| (acc << 1) | usize::from(i & mask(n, q) != 0))
        };
        let dim = self.dim();
        let rdim = 1usize << k;
        let mut out = vec![Amplitude::new(0.0, 0.0); rdim * rdim];
        for i in 0..dim {
            let ri = reduced_index(i);
            for j in (0..dim).filter(|j| (i ^ j) & !kept_mask == 0) {
                out[ri * rdim + reduced_index(j)] += self.m[i * dim + j];
            }
        }
        Ok(DensityMatrix {
            n_qubits: k,
            m: out,
        })
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness, all within `1e-9`.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for i in 0..dim {
            for j in i..dim {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > COMPARE_TOL {
                    return Err(Error::InvalidDensity("not Hermitian"));
                }
            }
        }
        if (self.trace() - Amplitude::new(1.0, 0.0)).norm() > COMPARE_TOL {
            return Err(Error::InvalidDensity("trace is not 1"));
        }
        if !self.is_psd(COMPARE_TOL) {
            return Err(Error::InvalidDensity("not positive semidefinite"));
        }
        Ok(())
    }

    /// Cholesky factorization of `ρ + tol·I`; succeeds iff the smallest
    /// eigenvalue of ρ is at least about `−tol`.
    fn is_psd(&self, tol: f64) -> bool {
        let n = self.dim();
        let mut l = vec![Amplitude::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = self.get(j, j).re + tol;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= 0.0 {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = Amplitude::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

pub fn density_of(state: &PureState) -> DensityMatrix {
    DensityMatrix::of(state)
}

/// Reduced density matrix of `state` on `keep`.
pub fn marginal(state: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    DensityMatrix::of(state).partial_trace(keep)
}

/// True iff the marginal on `subset` has purity below `1 − tol`.
pub fn entangled_across(state: &PureState, subset: &[usize], tol: f64) -> Result<bool> {
    if subset.is_empty() || subset.len() >= state.n_qubits() {
        return Err(Error::EmptyOrFullSubset);
    }
    Ok(marginal(state, subset)?.purity() < 1.0 - tol)
}
