//! The gate set of the teleportation circuit.
//!
//! `L`, `R`, `S`, `T` and `XOR` are the circuit's own gates. `X` and `Z` are
//! only used by the classically-controlled decoder, where Bob applies one of
//! four fixed Pauli products.
//!
//! Matrices act on column vectors `(α, β)ᵀ` for `α|0⟩ + β|1⟩`, and on
//! `(α, β, γ, δ)ᵀ` for `α|00⟩ + β|01⟩ + γ|10⟩ + δ|11⟩`.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::state::{Amplitude, Gate1, Gate2};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

const fn c(re: f64, im: f64) -> Amplitude {
    Amplitude::new(re, im)
}

const ZERO: Amplitude = c(0.0, 0.0);
const ONE: Amplitude = c(1.0, 0.0);

/// `|0⟩ → (|0⟩+|1⟩)/√2`, `|1⟩ → (−|0⟩+|1⟩)/√2`.
pub fn gate_l() -> Gate1 {
    Gate1 {
        m: [[c(H, 0.0), c(-H, 0.0)], [c(H, 0.0), c(H, 0.0)]],
    }
}

/// Inverse of [`gate_l`]: `|0⟩ → (|0⟩−|1⟩)/√2`, `|1⟩ → (|0⟩+|1⟩)/√2`.
pub fn gate_r() -> Gate1 {
    Gate1 {
        m: [[c(H, 0.0), c(H, 0.0)], [c(-H, 0.0), c(H, 0.0)]],
    }
}

/// `|0⟩ → i|0⟩`, `|1⟩` unchanged.
pub fn gate_s() -> Gate1 {
    Gate1 {
        m: [[c(0.0, 1.0), ZERO], [ZERO, ONE]],
    }
}

/// `|0⟩ → −|0⟩`, `|1⟩ → −i|1⟩`.
pub fn gate_t() -> Gate1 {
    Gate1 {
        m: [[c(-1.0, 0.0), ZERO], [ZERO, c(0.0, -1.0)]],
    }
}

/// Controlled-not; the high-order qubit of the pair is the control.
pub fn gate_xor() -> Gate2 {
    Gate2 {
        m: [
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ONE],
            [ZERO, ZERO, ONE, ZERO],
        ],
    }
}

pub fn gate_x() -> Gate1 {
    Gate1 {
        m: [[ZERO, ONE], [ONE, ZERO]],
    }
}

pub fn gate_z() -> Gate1 {
    Gate1 {
        m: [[ONE, ZERO], [ZERO, c(-1.0, 0.0)]],
    }
}

pub fn identity() -> Gate1 {
    Gate1 {
        m: [[ONE, ZERO], [ZERO, ONE]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedGate {
    L,
    R,
    S,
    T,
    Xor,
    X,
    Z,
}

/// Matrix behind a [`NamedGate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GatePayload {
    One(Gate1),
    Two(Gate2),
}

impl NamedGate {
    pub const ALL: [NamedGate; 7] = [
        NamedGate::L,
        NamedGate::R,
        NamedGate::S,
        NamedGate::T,
        NamedGate::Xor,
        NamedGate::X,
        NamedGate::Z,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedGate::L => "L",
            NamedGate::R => "R",
            NamedGate::S => "S",
            NamedGate::T => "T",
            NamedGate::Xor => "XOR",
            NamedGate::X => "X",
            NamedGate::Z => "Z",
        }
    }

    /// Number of wires the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            NamedGate::Xor => 2,
            _ => 1,
        }
    }

    pub fn payload(self) -> GatePayload {
        match self {
            NamedGate::L => GatePayload::One(gate_l()),
            NamedGate::R => GatePayload::One(gate_r()),
            NamedGate::S => GatePayload::One(gate_s()),
            NamedGate::T => GatePayload::One(gate_t()),
            NamedGate::Xor => GatePayload::Two(gate_xor()),
            NamedGate::X => GatePayload::One(gate_x()),
            NamedGate::Z => GatePayload::One(gate_z()),
        }
    }
}

impl fmt::Display for NamedGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NamedGate::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}
