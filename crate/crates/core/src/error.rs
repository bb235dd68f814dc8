use thiserror::Error;

/// Errors raised by the state, circuit, analysis and protocol layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("amplitude vector has zero norm")]
    ZeroVector,
    #[error("amplitude vector contains NaN or infinite entries")]
    NonFinite,
    #[error("state norm {norm} is not within {tol} of 1")]
    NotNormalized { norm: f64, tol: f64 },
    #[error("register of {0} qubits exceeds the supported maximum of {max}", max = crate::state::MAX_QUBITS)]
    TooManyQubits(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    BadQubitIndex { index: usize, n_qubits: usize },
    #[error("qubit {0} used twice in one operation")]
    DuplicateQubit(usize),
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("gate {gate} acts on {expected} wire(s), got {got}")]
    WireCount {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("both outcomes of qubit {0} have vanishing probability")]
    DegenerateState(usize),
    #[error("outcome {outcome} of qubit {qubit} has vanishing probability")]
    ZeroProbabilityBranch { qubit: usize, outcome: u8 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(&'static str),
    #[error("subset must be a proper, nonempty set of qubits")]
    EmptyOrFullSubset,
    #[error("check bit on qubit {qubit} is not deterministic (p0 = {p0})")]
    NondeterministicCheckBits { qubit: usize, p0: f64 },
    #[error("check bits ({x},{y}) do not match received bits ({u},{v})")]
    CheckBitMismatch { u: u8, v: u8, x: u8, y: u8 },
    #[error("wires outside {0:?} are not in a basis state")]
    NotSeparable(Vec<usize>),
    #[error("bit value {0} is not 0 or 1")]
    BadBit(u8),
    #[error("unknown gate name `{0}`")]
    UnknownGate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
