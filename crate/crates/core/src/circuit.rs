//! The three-wire teleportation circuit as explicit gate programs, plus
//! projective measurement in the standard basis.
//!
//! Wires are `a` (0), `b` (1) and `c` (2), top to bottom. Alice's half of the
//! circuit ends at the dashed line after four gates; Bob's half is the
//! remaining six. Outputs `x`, `y`, `z` are the ends of `a`, `b`, `c`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::{GatePayload, NamedGate};
use crate::state::{mask, Amplitude, PureState, ZERO_TOL};

pub const WIRE_A: usize = 0;
pub const WIRE_B: usize = 1;
pub const WIRE_C: usize = 2;

/// Letter naming wire `index` in printed programs (`a`, `b`, `c`, ...).
pub fn wire_name(index: usize) -> String {
    if index < 26 {
        char::from(b'a' + index as u8).to_string()
    } else {
        format!("q{index}")
    }
}

/// One gate placed on concrete wires; `XOR` wires are `(control, target)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateStep {
    pub gate: NamedGate,
    pub wires: Vec<usize>,
}

impl GateStep {
    pub fn new(gate: NamedGate, wires: Vec<usize>) -> Result<Self> {
        if wires.len() != gate.arity() {
            return Err(Error::WireCount {
                gate: gate.name(),
                expected: gate.arity(),
                got: wires.len(),
            });
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(Error::DuplicateQubit(wires[0]));
        }
        Ok(Self { gate, wires })
    }

    pub fn single(gate: NamedGate, wire: usize) -> Self {
        debug_assert_eq!(gate.arity(), 1);
        Self {
            gate,
            wires: vec![wire],
        }
    }

    pub fn xor(control: usize, target: usize) -> Self {
        debug_assert_ne!(control, target);
        Self {
            gate: NamedGate::Xor,
            wires: vec![control, target],
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        match (self.gate.payload(), self.wires.as_slice()) {
            (GatePayload::One(g), &[q]) => state.apply_1q(q, &g),
            (GatePayload::Two(g), &[hi, lo]) => state.apply_2q(hi, lo, &g),
            _ => Err(Error::WireCount {
                gate: self.gate.name(),
                expected: self.gate.arity(),
                got: self.wires.len(),
            }),
        }
    }
}

impl fmt::Display for GateStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.wires.as_slice() {
            [c, t] => write!(f, "{} c={} t={}", self.gate, wire_name(*c), wire_name(*t)),
            wires => {
                write!(f, "{}", self.gate)?;
                for w in wires {
                    write!(f, " {}", wire_name(*w))?;
                }
                Ok(())
            }
        }
    }
}

/// An ordered list of gate steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitProgram {
    pub label: String,
    pub steps: Vec<GateStep>,
}

impl CircuitProgram {
    pub fn new(label: impl Into<String>, steps: Vec<GateStep>) -> Self {
        Self {
            label: label.into(),
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Smallest register the program fits in.
    pub fn width(&self) -> usize {
        self.steps
            .iter()
            .flat_map(|s| s.wires.iter())
            .map(|w| w + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn two_qubit_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.wires.len() == 2).count()
    }

    /// Relabels wire `w` as `map[w]`.
    pub fn remap(&self, map: &[usize]) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| GateStep {
                gate: s.gate,
                wires: s.wires.iter().map(|&w| map[w]).collect(),
            })
            .collect();
        Self::new(self.label.clone(), steps)
    }

    pub fn then(&self, next: &CircuitProgram, label: impl Into<String>) -> Self {
        let steps = self.steps.iter().chain(&next.steps).cloned().collect();
        Self::new(label, steps)
    }

    pub fn run(&self, state: &PureState) -> Result<PureState> {
        self.steps
            .iter()
            .try_fold(state.clone(), |s, step| step.apply(&s))
    }

    /// Dense matrix of the program on `n_qubits` wires; column `j` is the image of `|j⟩`.
    pub fn matrix(&self, n_qubits: usize) -> Result<Vec<Vec<Amplitude>>> {
        let dim = 1usize << n_qubits;
        let columns = (0..dim)
            .map(|j| Ok(self.run(&PureState::basis(n_qubits, j)?)?.amplitudes().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..dim)
            .map(|i| (0..dim).map(|j| columns[j][i]).collect())
            .collect())
    }
}

impl fmt::Display for CircuitProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

/// EPR preparation on a two-wire register: `L` on wire 0, then `XOR` 0→1.
pub fn epr_program() -> CircuitProgram {
    CircuitProgram::new(
        "epr",
        vec![GateStep::single(NamedGate::L, 0), GateStep::xor(0, 1)],
    )
}

/// Alice's encoding of the mystery qubit `a` against her half `b` of the pair.
pub fn encode_program() -> CircuitProgram {
    CircuitProgram::new(
        "encode",
        vec![
            GateStep::xor(WIRE_A, WIRE_B),
            GateStep::single(NamedGate::R, WIRE_A),
        ],
    )
}

/// Everything left of the dashed line: EPR preparation on `b`,`c` followed by the encoding.
pub fn alice_program() -> CircuitProgram {
    epr_program()
        .remap(&[WIRE_B, WIRE_C])
        .then(&encode_program(), "alice")
}

/// Everything right of the dashed line.
pub fn bob_program() -> CircuitProgram {
    use NamedGate::{S, T};
    CircuitProgram::new(
        "bob",
        vec![
            GateStep::single(S, WIRE_A),
            GateStep::xor(WIRE_B, WIRE_C),
            GateStep::xor(WIRE_C, WIRE_A),
            GateStep::single(S, WIRE_A),
            GateStep::single(T, WIRE_C),
            GateStep::xor(WIRE_C, WIRE_A),
        ],
    )
}

pub fn full_program() -> CircuitProgram {
    alice_program().then(&bob_program(), "teleport")
}

/// `|ψ00⟩`.
pub fn circuit_input(psi: &PureState) -> Result<PureState> {
    psi.tensor(&PureState::from_bits("00")?)
}

/// The state carried at the dashed line for input `|ψ00⟩`.
pub fn dashed_line_state(psi: &PureState) -> Result<PureState> {
    alice_program().run(&circuit_input(psi)?)
}

/// Outcome of measuring one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub qubit: usize,
    pub outcome: u8,
    pub probability: f64,
    pub post_state: PureState,
}

/// Projective standard-basis measurement of `qubit`.
///
/// Draws one uniform `r ∈ [0,1)` and reports 0 iff `r < p₀`. When one outcome
/// has probability below `1e-12` the other is returned without consuming
/// randomness.
pub fn measure<R: Rng + ?Sized>(
    state: &PureState,
    qubit: usize,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let p0 = state.prob_outcome(qubit, 0)?;
    let p1 = state.prob_outcome(qubit, 1)?;
    let outcome = match (p0 < ZERO_TOL, p1 < ZERO_TOL) {
        (true, true) => return Err(Error::DegenerateState(qubit)),
        (false, true) => 0,
        (true, false) => 1,
        (false, false) => {
            let r: f64 = rng.random();
            u8::from(r >= p0)
        }
    };
    let (probability, post_state) = state.collapse(qubit, outcome)?;
    Ok(MeasurementRecord {
        qubit,
        outcome,
        probability,
        post_state,
    })
}

/// One branch of a multi-qubit measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Outcome bits, in the order the qubits were listed.
    pub bits: Vec<u8>,
    pub probability: f64,
    /// `None` for branches with probability below `1e-12`.
    pub post_state: Option<PureState>,
}

/// Every outcome of measuring `qubits`, with exact Born probabilities.
///
/// Branches are listed in binary counting order with the first listed qubit
/// as the most significant bit.
pub fn enumerate_outcomes(state: &PureState, qubits: &[usize]) -> Result<Vec<Branch>> {
    let n = state.n_qubits();
    let mut seen = 0usize;
    for &q in qubits {
        state.check_qubit(q)?;
        if seen & mask(n, q) != 0 {
            return Err(Error::DuplicateQubit(q));
        }
        seen |= mask(n, q);
    }
    let k = qubits.len();
    (0..1usize << k)
        .map(|outcome| {
            let bits: Vec<u8> = (0..k).map(|j| ((outcome >> (k - 1 - j)) & 1) as u8).collect();
            let want = qubits
                .iter()
                .zip(&bits)
                .filter(|(_, &b)| b == 1)
                .fold(0, |acc, (&q, _)| acc | mask(n, q));
            let keep = |i: usize| i & seen == want;
            let probability: f64 = state
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let post_state = if probability < ZERO_TOL {
                None
            } else {
                let scale = probability.sqrt();
                let amps = state
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| if keep(i) { a / scale } else { Amplitude::new(0.0, 0.0) })
                    .collect();
                Some(PureState::from_normalized(n, amps)?)
            };
            Ok(Branch {
                bits,
                probability,
                post_state,
            })
        })
        .collect()
}

/// Replaces wires `a`,`b` of a state collapsed to `|measured⟩` on those wires
/// by fresh basis kets `|injected⟩`, keeping wire `c` as it is.
pub fn reinject(collapsed: &PureState, measured: (u8, u8), injected: (u8, u8)) -> Result<PureState> {
    let rest = collapsed.factor_out(&[(WIRE_A, measured.0), (WIRE_B, measured.1)])?;
    let kets = PureState::basis(2, (usize::from(injected.0) << 1) | usize::from(injected.1))?;
    kets.tensor(&rest)
}

/// Result of the measure-and-resend experiment at the dashed line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResendRun {
    pub u: u8,
    pub v: u8,
    pub final_state: PureState,
}

/// Runs Bob's half on the dashed-line state after measuring `a`,`b` and
/// reinjecting the outcomes `|u⟩|v⟩`.
pub fn measure_resend_experiment<R: Rng + ?Sized>(psi: &PureState, rng: &mut R) -> Result<ResendRun> {
    let dashed = dashed_line_state(psi)?;
    let ma = measure(&dashed, WIRE_A, rng)?;
    let mb = measure(&ma.post_state, WIRE_B, rng)?;
    let (u, v) = (ma.outcome, mb.outcome);
    let reinjected = reinject(&mb.post_state, (u, v), (u, v))?;
    Ok(ResendRun {
        u,
        v,
        final_state: bob_program().run(&reinjected)?,
    })
}

/// Deterministic variant of [`measure_resend_experiment`] for a forced branch.
/// Returns `None` when the branch has vanishing probability.
pub fn resend_branch(psi: &PureState, u: u8, v: u8) -> Result<Option<ResendRun>> {
    let dashed = dashed_line_state(psi)?;
    let branch = enumerate_outcomes(&dashed, &[WIRE_A, WIRE_B])?
        .into_iter()
        .find(|b| b.bits == [u, v])
        .ok_or(Error::BadBit(u.max(v)))?;
    let Some(post) = branch.post_state else {
        return Ok(None);
    };
    let reinjected = reinject(&post, (u, v), (u, v))?;
    Ok(Some(ResendRun {
        u,
        v,
        final_state: bob_program().run(&reinjected)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::measurement_rng;
    use crate::state::{COMPARE_TOL, CONSTRUCTION_TOL};

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Amplitude {
        Amplitude::new(re, im)
    }

    fn close(a: &PureState, b: &PureState, tol: f64) -> bool {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn program_shapes() {
        assert_eq!(alice_program().len(), 4);
        assert_eq!(bob_program().len(), 6);
        assert_eq!(full_program().len(), 10);
        assert_eq!(full_program().width(), 3);
        assert_eq!(
            alice_program().to_string(),
            "L b\nXOR c=b t=c\nXOR c=a t=b\nR a\n"
        );
        assert_eq!(
            bob_program().to_string(),
            "S a\nXOR c=b t=c\nXOR c=c t=a\nS a\nT c\nXOR c=c t=a\n"
        );
    }

    #[test]
    fn gate_step_validation() {
        assert!(matches!(
            GateStep::new(NamedGate::Xor, vec![0]),
            Err(Error::WireCount { .. })
        ));
        assert_eq!(
            GateStep::new(NamedGate::Xor, vec![1, 1]),
            Err(Error::DuplicateQubit(1))
        );
        let out_of_range = CircuitProgram::new("bad", vec![GateStep::single(NamedGate::L, 3)]);
        assert!(matches!(
            out_of_range.run(&PureState::from_bits("000").unwrap()),
            Err(Error::BadQubitIndex { index: 3, .. })
        ));
    }

    #[test]
    fn alice_on_all_zero_input() {
        let zero3 = PureState::from_bits("000").unwrap();
        // The first two gates alone leave |0⟩ ⊗ Φ⁺.
        let half = CircuitProgram::new("epr", alice_program().steps[..2].to_vec())
            .run(&zero3)
            .unwrap();
        let want_half = PureState::from_bits("0").unwrap().tensor(&PureState::phi_plus()).unwrap();
        assert!(close(&half, &want_half, 1e-15));

        let out = alice_program().run(&zero3).unwrap();
        let minus = PureState::qubit(c(H, 0.0), c(-H, 0.0)).unwrap();
        let want = minus.tensor(&PureState::phi_plus()).unwrap();
        assert!(close(&out, &want, 1e-15));
    }

    /// Hand-expanded dashed-line state, written out per (u,v) block.
    fn dashed_oracle(alpha: Amplitude, beta: Amplitude) -> Vec<Amplitude> {
        let blocks = [
            [alpha, beta],
            [beta, alpha],
            [-alpha, beta],
            [beta, -alpha],
        ];
        blocks.iter().flatten().map(|a| a * 0.5).collect()
    }

    #[test]
    fn dashed_line_matches_branch_expansion() {
        let mut rng = measurement_rng(11, 0);
        for _ in 0..20 {
            let psi = crate::rng::haar_qubit(&mut rng);
            let d = dashed_line_state(&psi).unwrap();
            let want = dashed_oracle(psi.amplitude(0), psi.amplitude(1));
            for (a, w) in d.amplitudes().iter().zip(&want) {
                assert!((a - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bob_restores_branch_zero() {
        let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let input = PureState::from_bits("00").unwrap().tensor(&psi).unwrap();
        let out = bob_program().run(&input).unwrap();
        assert!(out.equal_up_to_global_phase(&input, COMPARE_TOL).unwrap());
    }

    #[test]
    fn full_circuit_outputs_phi_phi_psi() {
        let phi_phi = PureState::plus().tensor(&PureState::plus()).unwrap();
        for bits in ["0", "1"] {
            let psi = PureState::from_bits(bits).unwrap();
            let out = full_program().run(&circuit_input(&psi).unwrap()).unwrap();
            let want = phi_phi.tensor(&psi).unwrap();
            assert!(out.equal_up_to_global_phase(&want, COMPARE_TOL).unwrap(), "{bits}");
        }
    }

    #[test]
    fn run_empty_and_split() {
        let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let s = circuit_input(&psi).unwrap();
        assert_eq!(CircuitProgram::new("empty", vec![]).run(&s).unwrap(), s);
        let split = bob_program().run(&alice_program().run(&s).unwrap()).unwrap();
        assert_eq!(split, full_program().run(&s).unwrap());
    }

    #[test]
    fn full_program_matrix_is_unitary() {
        let m = full_program().matrix(3).unwrap();
        assert!(crate::state::unitarity_deviation(&m) < 1e-12);
    }

    #[test]
    fn measurement_examples() {
        let mut rng = measurement_rng(3, 0);
        let zero = PureState::from_bits("0").unwrap();
        let rec = measure(&zero, 0, &mut rng).unwrap();
        assert_eq!((rec.outcome, rec.probability), (0, 1.0));

        let mut seen = [false; 2];
        for _ in 0..64 {
            let rec = measure(&PureState::plus(), 0, &mut rng).unwrap();
            assert!((rec.probability - 0.5).abs() < 1e-15);
            seen[rec.outcome as usize] = true;
        }
        assert_eq!(seen, [true, true]);

        for _ in 0..64 {
            let first = measure(&PureState::phi_plus(), 0, &mut rng).unwrap();
            let second = measure(&first.post_state, 1, &mut rng).unwrap();
            assert_eq!(first.outcome, second.outcome);
            assert_eq!(second.probability, 1.0);
        }
    }

    #[test]
    fn measurement_is_seed_deterministic() {
        let d = dashed_line_state(&PureState::plus()).unwrap();
        let run = |seed| {
            let mut rng = measurement_rng(seed, 5);
            let a = measure(&d, 0, &mut rng).unwrap();
            let b = measure(&a.post_state, 1, &mut rng).unwrap();
            (a.outcome, b.outcome, b.post_state)
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn measure_bad_qubit() {
        let mut rng = measurement_rng(0, 0);
        assert!(matches!(
            measure(&PureState::plus(), 1, &mut rng),
            Err(Error::BadQubitIndex { .. })
        ));
    }

    #[test]
    fn enumerate_examples() {
        let s = PureState::from_bits("01").unwrap();
        let branches = enumerate_outcomes(&s, &[0, 1]).unwrap();
        assert_eq!(branches.len(), 4);
        for b in &branches {
            if b.bits == [0, 1] {
                assert_eq!(b.probability, 1.0);
                assert_eq!(b.post_state.as_ref(), Some(&s));
            } else {
                assert_eq!(b.probability, 0.0);
                assert!(b.post_state.is_none());
            }
        }

        let mut rng = measurement_rng(4, 0);
        for _ in 0..10 {
            let psi = crate::rng::haar_qubit(&mut rng);
            let d = dashed_line_state(&psi).unwrap();
            for b in enumerate_outcomes(&d, &[0, 1]).unwrap() {
                assert!((b.probability - 0.25).abs() < COMPARE_TOL);
            }
        }
        assert_eq!(
            enumerate_outcomes(&s, &[1, 1]),
            Err(Error::DuplicateQubit(1))
        );
    }

    #[test]
    fn forced_branch_one_one_on_zero_input() {
        let zero = PureState::from_bits("0").unwrap();
        let run = resend_branch(&zero, 1, 1).unwrap().unwrap();
        let want = PureState::from_bits("110").unwrap();
        assert!(run
            .final_state
            .equal_up_to_global_phase(&want, COMPARE_TOL)
            .unwrap());
    }

    #[test]
    fn resend_reproduces_uv_psi() {
        let mut psi_rng = crate::rng::psi_rng(21, 0);
        for stream in 0..25 {
            let psi = crate::rng::haar_qubit(&mut psi_rng);
            let mut rng = measurement_rng(21, stream);
            let run = measure_resend_experiment(&psi, &mut rng).unwrap();
            let uv = PureState::basis(2, (usize::from(run.u) << 1) | usize::from(run.v)).unwrap();
            let want = uv.tensor(&psi).unwrap();
            assert!(run
                .final_state
                .equal_up_to_global_phase(&want, COMPARE_TOL)
                .unwrap());
        }
    }

    #[test]
    fn reinject_replaces_top_wires() {
        let psi = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let collapsed = PureState::from_bits("10").unwrap().tensor(&psi).unwrap();
        let moved = reinject(&collapsed, (1, 0), (0, 1)).unwrap();
        let want = PureState::from_bits("01").unwrap().tensor(&psi).unwrap();
        assert!(close(&moved, &want, CONSTRUCTION_TOL * 1e-6));
        assert!(matches!(
            reinject(&collapsed, (0, 0), (0, 0)),
            Err(Error::NotSeparable(_))
        ));
    }
}
