//! Alice and Bob as blocking broker clients.

use std::io::{self, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use crate::circuit::{bob_program, encode_program, WIRE_A, WIRE_B, WIRE_C};
use crate::gates::NamedGate;
use crate::protocol::{correction, ClassicalBits, Mode};
use crate::state::{PureState, COMPARE_TOL};

use super::broker::DEFAULT_IDLE_TIMEOUT;
use super::wire::{encode_message, read_message, Amps, ErrorCode, Role, Wire, WireError, WireMessage};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("broker error {code}: {message}")]
    Broker { code: ErrorCode, message: String },
    #[error("unexpected {got} while waiting for {want}")]
    Unexpected { want: &'static str, got: String },
    #[error("check bits ({x},{y}) differ from received bits ({u},{v})")]
    CheckBitMismatch { u: u8, v: u8, x: u8, y: u8 },
    #[error("reported fidelity {0} is below 1")]
    FidelityLoss(f64),
}

impl NetError {
    /// Symbolic code for process exit reporting.
    pub fn code(&self) -> &'static str {
        match self {
            NetError::ConnectionLost(_) => "CONNECTION_LOST",
            NetError::Broker { code, .. } => code.as_str(),
            NetError::Unexpected { .. } => "UNEXPECTED_MESSAGE",
            NetError::CheckBitMismatch { .. } => "CHECK_BIT_MISMATCH",
            NetError::FidelityLoss(_) => "FIDELITY_LOSS",
        }
    }
}

impl From<io::Error> for NetError {
    fn from(e: io::Error) -> Self {
        NetError::ConnectionLost(e.to_string())
    }
}

impl From<WireError> for NetError {
    fn from(e: WireError) -> Self {
        NetError::ConnectionLost(e.to_string())
    }
}

/// One client's connection to the broker, with a record of what it sent.
pub struct Connection {
    session: u64,
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    sent: Vec<WireMessage>,
    received: Vec<WireMessage>,
}

impl Connection {
    pub fn open(endpoint: impl ToSocketAddrs, session: u64) -> Result<Self, NetError> {
        let stream = TcpStream::connect(endpoint)?;
        stream.set_read_timeout(Some(DEFAULT_IDLE_TIMEOUT))?;
        let _ = stream.set_nodelay(true);
        Ok(Self {
            session,
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
            sent: Vec::new(),
            received: Vec::new(),
        })
    }

    pub fn set_timeout(&self, timeout: Duration) -> io::Result<()> {
        self.writer.set_read_timeout(Some(timeout))
    }

    pub fn send(&mut self, msg: WireMessage) -> Result<(), NetError> {
        let mut line = encode_message(&msg);
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.sent.push(msg);
        Ok(())
    }

    /// Next message; broker `ERROR`s become [`NetError::Broker`].
    pub fn recv(&mut self) -> Result<WireMessage, NetError> {
        let msg = read_message(&mut self.reader)?;
        self.received.push(msg.clone());
        match msg {
            WireMessage::Error { code, message, .. } => Err(NetError::Broker { code, message }),
            m => Ok(m),
        }
    }

    fn expect<T>(
        &mut self,
        want: &'static str,
        pick: impl FnOnce(&WireMessage) -> Option<T>,
    ) -> Result<T, NetError> {
        let msg = self.recv()?;
        pick(&msg).ok_or_else(|| NetError::Unexpected {
            want,
            got: msg.kind().to_string(),
        })
    }

    fn apply(&mut self, gate: NamedGate, wires: &[usize]) -> Result<(), NetError> {
        self.send(WireMessage::apply(self.session, gate, wires))
    }

    fn measure(&mut self, wire: usize) -> Result<u8, NetError> {
        self.send(WireMessage::Measure {
            session: self.session,
            wire: Wire(wire),
        })?;
        self.expect("MEASURED", |m| match m {
            WireMessage::Measured { wire: w, outcome, .. } if w.0 == wire => Some(*outcome),
            _ => None,
        })
    }

    fn hello(&mut self, role: Role, psi: Option<&PureState>) -> Result<(), NetError> {
        self.send(WireMessage::Hello {
            session: self.session,
            role,
            psi: psi.map(|p| Amps(p.amplitudes().to_vec())),
        })?;
        self.expect("EPR_READY", |m| matches!(m, WireMessage::EprReady { .. }).then_some(()))
    }

    fn bye(&mut self) -> Result<(), NetError> {
        self.send(WireMessage::Bye { session: self.session })?;
        self.expect("BYE", |m| matches!(m, WireMessage::Bye { .. }).then_some(()))
    }

    pub fn sent(&self) -> &[WireMessage] {
        &self.sent
    }

    pub fn received(&self) -> &[WireMessage] {
        &self.received
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliceReport {
    pub session: u64,
    pub bits: ClassicalBits,
    /// Every message Alice sent, in order.
    pub sent: Vec<WireMessage>,
}

/// Runs Alice's side: entangle with her half of the pair, measure, send the bits.
pub fn alice_client(endpoint: impl ToSocketAddrs, psi: &PureState, session: u64) -> Result<AliceReport, NetError> {
    let mut conn = Connection::open(endpoint, session)?;
    conn.hello(Role::Alice, Some(psi))?;
    for step in &encode_program().steps {
        conn.apply(step.gate, &step.wires)?;
    }
    let u = conn.measure(WIRE_A)?;
    let v = conn.measure(WIRE_B)?;
    conn.send(WireMessage::Classical { session, u, v })?;
    conn.bye()?;
    Ok(AliceReport {
        session,
        bits: ClassicalBits { u, v },
        sent: conn.sent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobReport {
    pub session: u64,
    pub mode: Mode,
    pub bits: ClassicalBits,
    /// Measured check bits (unitary mode only).
    pub check: Option<(u8, u8)>,
    /// Final wire-`c` amplitudes and fidelity, when the broker runs with test hooks.
    pub output: Option<(PureState, f64)>,
    pub sent: Vec<WireMessage>,
}

impl BobReport {
    pub fn check_passed(&self) -> bool {
        self.check.is_none_or(|c| c == (self.bits.u, self.bits.v))
    }
}

/// Runs Bob's side: wait for the bits, reconstruct, release.
///
/// A check-bit mismatch aborts with [`NetError::CheckBitMismatch`] only when
/// `strict_check` is set; otherwise it is left for the caller to flag. A
/// reported fidelity below `1 - 1e-9` is always an error.
pub fn bob_client(endpoint: impl ToSocketAddrs, mode: Mode, session: u64, strict_check: bool) -> Result<BobReport, NetError> {
    let mut conn = Connection::open(endpoint, session)?;
    conn.hello(Role::Bob, None)?;
    let bits = conn.expect("CLASSICAL", |m| match m {
        WireMessage::Classical { u, v, .. } => Some(ClassicalBits { u: *u, v: *v }),
        _ => None,
    })?;
    let check = match mode {
        Mode::UnitaryBob => {
            for step in &bob_program().steps {
                conn.apply(step.gate, &step.wires)?;
            }
            let x = conn.measure(WIRE_A)?;
            let y = conn.measure(WIRE_B)?;
            Some((x, y))
        }
        Mode::ClassicalBob => {
            for &gate in correction(bits) {
                conn.apply(gate, &[WIRE_C])?;
            }
            None
        }
    };
    if let (true, Some((x, y))) = (strict_check, check) {
        if (x, y) != (bits.u, bits.v) {
            let _ = conn.send(WireMessage::Bye { session });
            return Err(NetError::CheckBitMismatch { u: bits.u, v: bits.v, x, y });
        }
    }
    conn.send(WireMessage::Release { session })?;
    let mut output = None;
    loop {
        match conn.recv()? {
            WireMessage::StateReport { amps, fidelity, .. } => {
                let z = PureState::from_normalized(1, amps.0).map_err(|e| NetError::Unexpected {
                    want: "a one-qubit STATE_REPORT",
                    got: e.to_string(),
                })?;
                output = Some((z, fidelity.0));
            }
            WireMessage::Bye { .. } => break,
            other => {
                return Err(NetError::Unexpected {
                    want: "STATE_REPORT or BYE",
                    got: other.kind().to_string(),
                })
            }
        }
    }
    if let Some((_, f)) = &output {
        if *f < 1.0 - COMPARE_TOL {
            return Err(NetError::FidelityLoss(*f));
        }
    }
    Ok(BobReport {
        session,
        mode,
        bits,
        check,
        output,
        sent: conn.sent,
    })
}
