//! Exact state-vector simulation of the XOR-circuit teleportation protocol.
//!
//! * [`state`]: pure states, one- and two-qubit unitaries.
//! * [`gates`]: the circuit's gate set.
//! * [`circuit`]: Alice's and Bob's gate programs, measurement, branch enumeration.
//! * [`analysis`]: density matrices, partial trace, purity.
//! * [`protocol`]: the two-party protocol and its transcripts.
//! * [`batch`]: seeded multi-trial runs, parallel when the `parallel` feature is on.
//! * [`net`]: the broker/alice/bob harness over a line-delimited TCP protocol.
//! * [`cli`]: the `qtele` command-line front end.

pub mod analysis;
pub mod batch;
pub mod circuit;
pub mod cli;
pub mod error;
pub mod gates;
pub mod net;
pub mod protocol;
pub mod rng;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use state::{Amplitude, Gate1, Gate2, PureState};
