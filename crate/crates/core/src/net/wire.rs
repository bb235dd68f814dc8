//! Line-delimited wire protocol.
//!
//! Each message is one JSON object on one line, tagged by `kind`. Real
//! numbers travel as decimal strings with 17 significant digits so that
//! amplitudes and fidelities survive the round trip bit for bit.
//!
//! ```text
//! {"kind":"HELLO","session":0,"role":"alice","psi":[["6.0000000000000000e-1","0.0000000000000000e0"],...]}
//! {"kind":"APPLY","session":0,"gate":"XOR","wires":["a","b"]}
//! {"kind":"MEASURE","session":0,"wire":"a"}
//! {"kind":"MEASURED","session":0,"wire":"a","outcome":1}
//! {"kind":"CLASSICAL","session":0,"u":1,"v":0}
//! ```

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::gates::NamedGate;
use crate::state::Amplitude;

/// Longest accepted line, excluding the newline.
pub const MAX_LINE: usize = 64 * 1024;

pub const KINDS: [&str; 10] = [
    "HELLO",
    "EPR_READY",
    "APPLY",
    "MEASURE",
    "MEASURED",
    "CLASSICAL",
    "RELEASE",
    "STATE_REPORT",
    "ERROR",
    "BYE",
];

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("unknown message kind `{0}`")]
    UnknownKind(String),
    #[error("line exceeds {MAX_LINE} bytes")]
    OversizeLine,
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn index(self) -> usize {
        match self {
            Role::Alice => 0,
            Role::Bob => 1,
        }
    }

    pub fn peer(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        })
    }
}

/// Symbolic error codes carried by `ERROR` messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    RoleTaken,
    NotOwner,
    ProtocolOrder,
    Malformed,
    UnknownKind,
    Oversize,
    BadGate,
    BadWire,
    PeerDisconnected,
    NotSeparable,
    Simulation,
    Timeout,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::RoleTaken => "ROLE_TAKEN",
            ErrorCode::NotOwner => "NOT_OWNER",
            ErrorCode::ProtocolOrder => "PROTOCOL_ORDER",
            ErrorCode::Malformed => "MALFORMED",
            ErrorCode::UnknownKind => "UNKNOWN_KIND",
            ErrorCode::Oversize => "OVERSIZE",
            ErrorCode::BadGate => "BAD_GATE",
            ErrorCode::BadWire => "BAD_WIRE",
            ErrorCode::PeerDisconnected => "PEER_DISCONNECTED",
            ErrorCode::NotSeparable => "NOT_SEPARABLE",
            ErrorCode::Simulation => "SIMULATION",
            ErrorCode::Timeout => "TIMEOUT",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A circuit wire named by letter on the wire (`"a"`, `"b"`, `"c"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wire(pub usize);

impl Serialize for Wire {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::circuit::wire_name(self.0))
    }
}

impl<'de> Deserialize<'de> for Wire {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_bytes() {
            [c @ b'a'..=b'z'] => Ok(Wire(usize::from(c - b'a'))),
            _ => Err(D::Error::custom(format!("bad wire name `{s}`"))),
        }
    }
}

/// Gate name on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateName(pub NamedGate);

impl Serialize for GateName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0.name())
    }
}

impl<'de> Deserialize<'de> for GateName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NamedGate::from_str(&s).map(GateName).map_err(D::Error::custom)
    }
}

/// A real number encoded with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_real(self.0))
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let x: f64 = s.parse().map_err(D::Error::custom)?;
        if !x.is_finite() {
            return Err(D::Error::custom("non-finite number"));
        }
        Ok(Real(x))
    }
}

/// Amplitude list as `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Amps(pub Vec<Amplitude>);

impl Serialize for Amps {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[Real; 2]> = self.0.iter().map(|a| [Real(a.re), Real(a.im)]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Amps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[Real; 2]>::deserialize(d)?;
        Ok(Amps(
            pairs.into_iter().map(|[re, im]| Amplitude::new(re.0, im.0)).collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WireMessage {
    /// First message on every connection. Alice supplies the mystery qubit.
    Hello {
        session: u64,
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<Amps>,
    },
    EprReady {
        session: u64,
    },
    Apply {
        session: u64,
        gate: GateName,
        wires: Vec<Wire>,
    },
    Measure {
        session: u64,
        wire: Wire,
    },
    Measured {
        session: u64,
        wire: Wire,
        outcome: u8,
    },
    Classical {
        session: u64,
        u: u8,
        v: u8,
    },
    Release {
        session: u64,
    },
    /// Bob's final wire-`c` amplitudes; only sent by brokers running with test hooks.
    StateReport {
        session: u64,
        amps: Amps,
        fidelity: Real,
    },
    Error {
        session: u64,
        code: ErrorCode,
        message: String,
    },
    Bye {
        session: u64,
    },
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "HELLO",
            WireMessage::EprReady { .. } => "EPR_READY",
            WireMessage::Apply { .. } => "APPLY",
            WireMessage::Measure { .. } => "MEASURE",
            WireMessage::Measured { .. } => "MEASURED",
            WireMessage::Classical { .. } => "CLASSICAL",
            WireMessage::Release { .. } => "RELEASE",
            WireMessage::StateReport { .. } => "STATE_REPORT",
            WireMessage::Error { .. } => "ERROR",
            WireMessage::Bye { .. } => "BYE",
        }
    }

    pub fn session(&self) -> u64 {
        match *self {
            WireMessage::Hello { session, .. }
            | WireMessage::EprReady { session }
            | WireMessage::Apply { session, .. }
            | WireMessage::Measure { session, .. }
            | WireMessage::Measured { session, .. }
            | WireMessage::Classical { session, .. }
            | WireMessage::Release { session }
            | WireMessage::StateReport { session, .. }
            | WireMessage::Error { session, .. }
            | WireMessage::Bye { session } => session,
        }
    }

    pub fn error(session: u64, code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error {
            session,
            code,
            message: message.into(),
        }
    }

    pub fn apply(session: u64, gate: NamedGate, wires: &[usize]) -> Self {
        WireMessage::Apply {
            session,
            gate: GateName(gate),
            wires: wires.iter().map(|&w| Wire(w)).collect(),
        }
    }
}

/// Canonical one-line encoding, without the trailing newline.
pub fn encode_message(m: &WireMessage) -> String {
    serde_json::to_string(m).expect("wire messages always serialize")
}

pub fn decode_message(line: &str) -> Result<WireMessage, WireError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.len() > MAX_LINE {
        return Err(WireError::OversizeLine);
    }
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| WireError::MalformedLine(e.to_string()))?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| WireError::MalformedLine("missing `kind`".into()))?;
    if !KINDS.contains(&kind) {
        return Err(WireError::UnknownKind(kind.to_string()));
    }
    serde_json::from_value(value).map_err(|e| WireError::MalformedLine(e.to_string()))
}

/// Reads one line (at most [`MAX_LINE`] bytes) and decodes it.
///
/// An oversize line is consumed up to its newline before the error is returned.
pub fn read_message<R: BufRead>(reader: &mut R) -> Result<WireMessage, WireError> {
    let mut buf = Vec::new();
    let n = std::io::Read::take(&mut *reader, MAX_LINE as u64 + 2).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(WireError::Closed);
    }
    if buf.last() != Some(&b'\n') {
        if buf.len() > MAX_LINE {
            skip_line(reader)?;
            return Err(WireError::OversizeLine);
        }
        return Err(WireError::Closed);
    }
    let line = std::str::from_utf8(&buf).map_err(|e| WireError::MalformedLine(e.to_string()))?;
    decode_message(line)
}

fn skip_line<R: BufRead>(reader: &mut R) -> std::io::Result<()> {
    loop {
        let chunk = reader.fill_buf()?;
        if chunk.is_empty() {
            return Ok(());
        }
        if let Some(i) = chunk.iter().position(|&b| b == b'\n') {
            reader.consume(i + 1);
            return Ok(());
        }
        let len = chunk.len();
        reader.consume(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{haar_state, psi_rng};
    use crate::state::PureState;

    #[test]
    fn classical_round_trip() {
        let m = WireMessage::Classical {
            session: 3,
            u: 1,
            v: 0,
        };
        let line = encode_message(&m);
        assert_eq!(line, r#"{"kind":"CLASSICAL","session":3,"u":1,"v":0}"#);
        assert_eq!(decode_message(&line).unwrap(), m);
    }

    #[test]
    fn apply_uses_letters() {
        let m = WireMessage::apply(0, NamedGate::Xor, &[0, 1]);
        let line = encode_message(&m);
        assert_eq!(line, r#"{"kind":"APPLY","session":0,"gate":"XOR","wires":["a","b"]}"#);
        assert_eq!(decode_message(&line).unwrap(), m);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            decode_message(r#"{"kind":"FOO","session":1}"#),
            Err(WireError::UnknownKind(k)) if k == "FOO"
        ));
        assert!(matches!(decode_message("not json"), Err(WireError::MalformedLine(_))));
        assert!(matches!(
            decode_message(r#"{"kind":"APPLY","session":0,"gate":"H","wires":["a"]}"#),
            Err(WireError::MalformedLine(_))
        ));
        assert!(matches!(
            decode_message(r#"{"session":0}"#),
            Err(WireError::MalformedLine(_))
        ));
        let huge = format!(r#"{{"kind":"BYE","session":0,"pad":"{}"}}"#, "x".repeat(MAX_LINE));
        assert!(matches!(decode_message(&huge), Err(WireError::OversizeLine)));
    }

    #[test]
    fn oversize_line_is_skipped_by_reader() {
        let huge = format!("{}\n{}\n", "x".repeat(MAX_LINE + 10), encode_message(&WireMessage::Bye { session: 2 }));
        let mut reader = std::io::Cursor::new(huge.into_bytes());
        assert!(matches!(read_message(&mut reader), Err(WireError::OversizeLine)));
        assert_eq!(read_message(&mut reader).unwrap(), WireMessage::Bye { session: 2 });
        assert!(matches!(read_message(&mut reader), Err(WireError::Closed)));
    }

    #[test]
    fn state_report_preserves_fidelity() {
        let mut rng = psi_rng(1234, 0);
        for _ in 0..1000 {
            let s = haar_state(1, &mut rng);
            let reference = haar_state(1, &mut rng);
            let m = WireMessage::StateReport {
                session: 9,
                amps: Amps(s.amplitudes().to_vec()),
                fidelity: Real(reference.fidelity(&s).unwrap()),
            };
            let back = decode_message(&encode_message(&m)).unwrap();
            let WireMessage::StateReport { amps, fidelity, .. } = back else {
                panic!("wrong kind");
            };
            let s2 = PureState::new(1, amps.0).unwrap();
            let f1 = reference.fidelity(&s).unwrap();
            let f2 = reference.fidelity(&s2).unwrap();
            assert!((f1 - f2).abs() <= 1e-15);
            assert_eq!(fidelity.0.to_bits(), f1.to_bits());
        }
    }

    #[test]
    fn reals_use_seventeen_digits() {
        let s = serde_json::to_string(&Real(0.1)).unwrap();
        assert_eq!(s, "\"1.0000000000000001e-1\"");
    }
}
