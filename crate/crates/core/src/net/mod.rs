//! Two-party networked harness: a broker holding the joint state, and
//! Alice/Bob clients that drive it over TCP.

pub mod broker;
pub mod client;
pub mod proxy;
pub mod session;
pub mod wire;

pub use broker::{Broker, BrokerConfig, BrokerHandle, SessionRecord};
pub use client::{alice_client, bob_client, AliceReport, BobReport, Connection, NetError};
pub use proxy::{Fault, Proxy, ProxyHandle};
pub use session::{Phase, Session};
pub use wire::{decode_message, encode_message, read_message, ErrorCode, Role, WireError, WireMessage};
