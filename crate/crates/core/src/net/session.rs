//! Broker-side session state machine.
//!
//! A [`Session`] owns the joint three-wire state of one Alice/Bob pair and
//! applies their commands subject to wire ownership. [`Session::handle`] is a
//! pure step function: on any rejected command it returns an `ERROR` for the
//! sender and leaves the session exactly as it was.

use crate::circuit::{measure, reinject, WIRE_A, WIRE_B, WIRE_C};
use crate::gates::GatePayload;
use crate::protocol::{output_fidelity, prepare_epr};
use crate::rng::{measurement_rng, SimRng};
use crate::state::{check_bit, PureState};

use super::wire::{Amps, ErrorCode, Real, Role, Wire, WireMessage};

const N_WIRES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    WaitingPeers,
    Distributed,
    Encoded,
    Decoded,
    Closed,
}

/// Who a message goes to, or came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Broker,
    Peer(Role),
}

/// A message addressed to one peer.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: Role,
    pub msg: WireMessage,
}

/// Every message the session saw or produced, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub from: Party,
    pub to: Party,
    pub msg: WireMessage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: u64,
    rng: SimRng,
    test_hooks: bool,
    phase: Phase,
    joined: [bool; 2],
    departed: [bool; 2],
    psi: Option<PureState>,
    joint: Option<PureState>,
    owner: [Option<Role>; N_WIRES],
    /// Known basis value of each wire, if any (set by measurement or reinjection).
    basis: [Option<u8>; N_WIRES],
    /// Wires that have been measured since they were last (re)created.
    measured: [bool; N_WIRES],
    log: Vec<LogEntry>,
}

type Rejection = (ErrorCode, String);

fn reject<T>(code: ErrorCode, message: impl Into<String>) -> Result<T, Rejection> {
    Err((code, message.into()))
}

impl Session {
    /// Fresh session drawing measurements from `measurement_rng(seed, id)`.
    pub fn new(id: u64, seed: u64, test_hooks: bool) -> Self {
        Self {
            id,
            rng: measurement_rng(seed, id),
            test_hooks,
            phase: Phase::WaitingPeers,
            joined: [false; 2],
            departed: [false; 2],
            psi: None,
            joint: None,
            owner: [None; N_WIRES],
            basis: [None; N_WIRES],
            measured: [false; N_WIRES],
            log: Vec::new(),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn joint_state(&self) -> Option<&PureState> {
        self.joint.as_ref()
    }

    pub fn owner(&self, wire: usize) -> Option<Role> {
        self.owner.get(wire).copied().flatten()
    }

    pub fn has_joined(&self, role: Role) -> bool {
        self.joined[role.index()]
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Equality ignoring the message log.
    pub fn same_state(&self, other: &Session) -> bool {
        let mut a = self.clone();
        a.log.clear();
        let mut b = other.clone();
        b.log.clear();
        a == b
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    /// Processes one message from `from` and returns the messages to deliver.
    pub fn handle(&mut self, from: Role, msg: WireMessage) -> Vec<Outbound> {
        self.log.push(LogEntry {
            from: Party::Peer(from),
            to: Party::Broker,
            msg: msg.clone(),
        });
        let out = match self.step(from, &msg) {
            Ok(out) => out,
            Err((code, message)) => vec![Outbound {
                to: from,
                msg: WireMessage::error(self.id, code, message),
            }],
        };
        for o in &out {
            let from = match (&o.msg, o.to) {
                (WireMessage::Classical { .. }, Role::Bob) => Party::Peer(Role::Alice),
                _ => Party::Broker,
            };
            self.log.push(LogEntry {
                from,
                to: Party::Peer(o.to),
                msg: o.msg.clone(),
            });
        }
        out
    }

    /// The connection of `role` dropped without a clean goodbye.
    pub fn disconnect(&mut self, role: Role) -> Vec<Outbound> {
        if self.departed[role.index()] || self.phase == Phase::Closed {
            self.departed[role.index()] = true;
            return Vec::new();
        }
        self.departed[role.index()] = true;
        self.close_after_departure(role, "disconnected")
    }

    fn close_after_departure(&mut self, role: Role, how: &str) -> Vec<Outbound> {
        let peer = role.peer();
        let finished = match role {
            Role::Alice => self.phase >= Phase::Encoded,
            Role::Bob => self.phase >= Phase::Decoded,
        };
        if finished {
            if self.departed.iter().all(|d| *d) {
                self.phase = Phase::Closed;
            }
            return Vec::new();
        }
        self.phase = Phase::Closed;
        if self.joined[peer.index()] && !self.departed[peer.index()] {
            let msg = WireMessage::error(self.id, ErrorCode::PeerDisconnected, format!("{role} {how}"));
            self.log.push(LogEntry {
                from: Party::Broker,
                to: Party::Peer(peer),
                msg: msg.clone(),
            });
            vec![Outbound { to: peer, msg }]
        } else {
            Vec::new()
        }
    }

    fn step(&mut self, from: Role, msg: &WireMessage) -> Result<Vec<Outbound>, Rejection> {
        if msg.session() != self.id {
            return reject(ErrorCode::Malformed, format!("message for session {}", msg.session()));
        }
        if self.phase == Phase::Closed {
            return reject(ErrorCode::ProtocolOrder, "session closed");
        }
        if self.departed[from.index()] {
            return reject(ErrorCode::ProtocolOrder, format!("{from} already left"));
        }
        match msg {
            WireMessage::Hello { role, psi, .. } => self.on_hello(from, *role, psi.as_ref()),
            WireMessage::Apply { gate, wires, .. } => self.on_apply(from, gate.0, wires),
            WireMessage::Measure { wire, .. } => self.on_measure(from, *wire),
            WireMessage::Classical { u, v, .. } => self.on_classical(from, *u, *v),
            WireMessage::Release { .. } => self.on_release(from),
            WireMessage::Bye { .. } => Ok(self.on_bye(from)),
            other => reject(
                ErrorCode::ProtocolOrder,
                format!("{} is not a client message", other.kind()),
            ),
        }
    }

    fn on_hello(&mut self, from: Role, role: Role, psi: Option<&Amps>) -> Result<Vec<Outbound>, Rejection> {
        if role != from {
            return reject(ErrorCode::Malformed, "role does not match connection");
        }
        if self.joined[role.index()] {
            return reject(ErrorCode::RoleTaken, format!("{role} already joined"));
        }
        let psi = match (role, psi) {
            (Role::Alice, Some(a)) => Some(
                PureState::from_normalized(1, a.0.clone())
                    .map_err(|e| (ErrorCode::Malformed, format!("mystery qubit: {e}")))?,
            ),
            (Role::Alice, None) => return reject(ErrorCode::Malformed, "alice must supply psi"),
            (Role::Bob, Some(_)) => return reject(ErrorCode::Malformed, "bob cannot supply psi"),
            (Role::Bob, None) => None,
        };
        let mut next = self.clone();
        next.joined[role.index()] = true;
        if psi.is_some() {
            next.psi = psi;
        }
        let mut out = Vec::new();
        if next.joined.iter().all(|j| *j) {
            let epr = prepare_epr().map_err(sim_error)?;
            let mystery = next.psi.as_ref().expect("alice joined with psi");
            next.joint = Some(mystery.tensor(&epr.joint).map_err(sim_error)?);
            next.owner = [Some(Role::Alice), Some(Role::Alice), Some(Role::Bob)];
            next.basis = [None, None, None];
            next.phase = Phase::Distributed;
            for to in [Role::Alice, Role::Bob] {
                out.push(Outbound {
                    to,
                    msg: WireMessage::EprReady { session: self.id },
                });
            }
        }
        self.commit(next);
        Ok(out)
    }

    fn check_active(&self, from: Role) -> Result<(), Rejection> {
        match self.phase {
            Phase::Distributed | Phase::Encoded => Ok(()),
            Phase::WaitingPeers => reject(ErrorCode::ProtocolOrder, "EPR pair not distributed yet"),
            _ => reject(ErrorCode::ProtocolOrder, format!("{from} cannot operate after decoding")),
        }
    }

    fn check_owned(&self, from: Role, wire: Wire) -> Result<usize, Rejection> {
        if wire.0 >= N_WIRES {
            return reject(ErrorCode::BadWire, format!("no wire {}", wire.0));
        }
        if self.owner[wire.0] != Some(from) {
            return reject(
                ErrorCode::NotOwner,
                format!("{from} does not own wire {}", crate::circuit::wire_name(wire.0)),
            );
        }
        if self.measured[wire.0] {
            return reject(
                ErrorCode::ProtocolOrder,
                format!("wire {} already measured", crate::circuit::wire_name(wire.0)),
            );
        }
        Ok(wire.0)
    }

    fn on_apply(&mut self, from: Role, gate: crate::gates::NamedGate, wires: &[Wire]) -> Result<Vec<Outbound>, Rejection> {
        self.check_active(from)?;
        if wires.len() != gate.arity() {
            return reject(
                ErrorCode::BadGate,
                format!("{gate} takes {} wire(s), got {}", gate.arity(), wires.len()),
            );
        }
        let idx = wires
            .iter()
            .map(|&w| self.check_owned(from, w))
            .collect::<Result<Vec<_>, _>>()?;
        let joint = self.joint.as_ref().expect("joint state exists once distributed");
        let updated = match (gate.payload(), idx.as_slice()) {
            (GatePayload::One(g), &[q]) => joint.apply_1q(q, &g),
            (GatePayload::Two(_), &[c, t]) if c == t => {
                return reject(ErrorCode::BadGate, "control and target coincide")
            }
            (GatePayload::Two(g), &[c, t]) => joint.apply_2q(c, t, &g),
            _ => unreachable!("arity checked above"),
        }
        .map_err(sim_error)?;
        let mut next = self.clone();
        next.joint = Some(updated);
        for &q in &idx {
            next.basis[q] = None;
        }
        self.commit(next);
        Ok(Vec::new())
    }

    fn on_measure(&mut self, from: Role, wire: Wire) -> Result<Vec<Outbound>, Rejection> {
        self.check_active(from)?;
        let q = self.check_owned(from, wire)?;
        let mut next = self.clone();
        let joint = next.joint.as_ref().expect("joint state exists once distributed");
        let rec = measure(joint, q, &mut next.rng).map_err(sim_error)?;
        next.joint = Some(rec.post_state);
        next.basis[q] = Some(rec.outcome);
        next.measured[q] = true;
        self.commit(next);
        Ok(vec![Outbound {
            to: from,
            msg: WireMessage::Measured {
                session: self.id,
                wire,
                outcome: rec.outcome,
            },
        }])
    }

    fn on_classical(&mut self, from: Role, u: u8, v: u8) -> Result<Vec<Outbound>, Rejection> {
        if from != Role::Alice {
            return reject(ErrorCode::ProtocolOrder, "only alice sends classical bits");
        }
        if self.phase != Phase::Distributed {
            return reject(ErrorCode::ProtocolOrder, "classical bits already sent or EPR pending");
        }
        check_bit(u).and(check_bit(v)).map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
        let (Some(ma), Some(mb)) = (self.basis[WIRE_A], self.basis[WIRE_B]) else {
            return reject(ErrorCode::ProtocolOrder, "alice must measure a and b first");
        };
        if !(self.measured[WIRE_A] && self.measured[WIRE_B]) {
            return reject(ErrorCode::ProtocolOrder, "alice must measure a and b first");
        }
        let joint = self.joint.as_ref().expect("joint state exists once distributed");
        // Bob rebuilds |u⟩|v⟩ from whatever bits arrive; Alice's measured qubits are discarded.
        let rebuilt = reinject(joint, (ma, mb), (u, v)).map_err(sim_error)?;
        let mut next = self.clone();
        next.joint = Some(rebuilt);
        next.owner = [Some(Role::Bob); N_WIRES];
        next.basis = [Some(u), Some(v), None];
        next.measured = [false; N_WIRES];
        next.phase = Phase::Encoded;
        self.commit(next);
        Ok(vec![Outbound {
            to: Role::Bob,
            msg: WireMessage::Classical {
                session: self.id,
                u,
                v,
            },
        }])
    }

    fn on_release(&mut self, from: Role) -> Result<Vec<Outbound>, Rejection> {
        if from != Role::Bob {
            return reject(ErrorCode::ProtocolOrder, "only bob releases");
        }
        if self.phase != Phase::Encoded {
            return reject(ErrorCode::ProtocolOrder, "nothing to release before classical bits");
        }
        let mut out = Vec::new();
        if self.test_hooks {
            let (Some(x), Some(y)) = (self.basis[WIRE_A], self.basis[WIRE_B]) else {
                return reject(ErrorCode::NotSeparable, "wires a and b are not in known basis states");
            };
            let joint = self.joint.as_ref().expect("joint state exists once distributed");
            let z = joint
                .factor_out(&[(WIRE_A, x), (WIRE_B, y)])
                .map_err(|e| (ErrorCode::NotSeparable, e.to_string()))?;
            let psi = self.psi.as_ref().expect("alice joined with psi");
            let fidelity = output_fidelity(psi, &z).map_err(sim_error)?;
            debug_assert_eq!(z.n_qubits(), 1, "only wire {WIRE_C} remains");
            out.push(Outbound {
                to: Role::Bob,
                msg: WireMessage::StateReport {
                    session: self.id,
                    amps: Amps(z.amplitudes().to_vec()),
                    fidelity: Real(fidelity),
                },
            });
        }
        self.phase = Phase::Decoded;
        out.push(Outbound {
            to: Role::Bob,
            msg: WireMessage::Bye { session: self.id },
        });
        self.departed[Role::Bob.index()] = true;
        if self.departed.iter().all(|d| *d) {
            self.phase = Phase::Closed;
        }
        Ok(out)
    }

    fn on_bye(&mut self, from: Role) -> Vec<Outbound> {
        self.departed[from.index()] = true;
        let mut out = vec![Outbound {
            to: from,
            msg: WireMessage::Bye { session: self.id },
        }];
        out.extend(self.close_after_departure(from, "left early"));
        out
    }

    fn commit(&mut self, next: Session) {
        let log = std::mem::take(&mut self.log);
        *self = next;
        self.log = log;
    }
}

fn sim_error(e: crate::error::Error) -> Rejection {
    (ErrorCode::Simulation, e.to_string())
}
