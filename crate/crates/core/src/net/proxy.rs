//! Fault-injecting relay for harness tests.
//!
//! Sits between clients and the broker and rewrites client-to-broker
//! messages according to a [`Fault`]. Broker-to-client traffic is copied
//! through untouched.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::wire::{decode_message, encode_message, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Forward everything unchanged.
    None,
    /// Flip `u` in every `CLASSICAL`.
    FlipClassical,
    /// Drop the `index`-th `APPLY` (zero-based) on each connection.
    DropApply(usize),
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Fault::None),
            "flip-classical" => Ok(Fault::FlipClassical),
            _ => s
                .strip_prefix("drop-apply:")
                .and_then(|n| n.parse().ok())
                .map(Fault::DropApply)
                .ok_or_else(|| format!("unknown fault `{s}`; expected none, flip-classical or drop-apply:N")),
        }
    }
}

impl Fault {
    /// Rewrites one client line; `None` drops it.
    fn rewrite(self, line: &str, applies_seen: &mut usize) -> Option<String> {
        let Ok(msg) = decode_message(line) else {
            return Some(line.to_string());
        };
        match (self, msg) {
            (Fault::FlipClassical, WireMessage::Classical { session, u, v }) => Some(encode_message(&WireMessage::Classical {
                session,
                u: u ^ 1,
                v,
            })),
            (Fault::DropApply(k), WireMessage::Apply { .. }) => {
                let index = *applies_seen;
                *applies_seen += 1;
                (index != k).then(|| line.to_string())
            }
            _ => Some(line.to_string()),
        }
    }
}

pub struct Proxy {
    listener: TcpListener,
    upstream: SocketAddr,
    fault: Fault,
}

impl Proxy {
    pub fn bind(listen: impl ToSocketAddrs, upstream: impl ToSocketAddrs, fault: Fault) -> io::Result<Self> {
        let upstream = upstream
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no upstream address"))?;
        let listener = TcpListener::bind(listen)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            upstream,
            fault,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn serve(&self, shutdown: &AtomicBool) -> io::Result<()> {
        while !shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((client, _)) => {
                    // An unreachable upstream just drops this client.
                    if let Ok(upstream) = TcpStream::connect(self.upstream) {
                        let fault = self.fault;
                        thread::spawn(move || relay(client, upstream, fault));
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    pub fn spawn(self) -> io::Result<ProxyHandle> {
        let addr = self.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let thread = thread::spawn(move || self.serve(&flag));
        Ok(ProxyHandle {
            addr,
            shutdown,
            thread: Some(thread),
        })
    }
}

pub struct ProxyHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ProxyHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for ProxyHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn relay(client: TcpStream, upstream: TcpStream, fault: Fault) {
    let _ = client.set_nonblocking(false);
    let _ = client.set_nodelay(true);
    let _ = upstream.set_nodelay(true);
    let (Ok(mut down), Ok(up_reader)) = (client.try_clone(), upstream.try_clone()) else {
        return;
    };
    let back = thread::spawn(move || {
        let _ = io::copy(&mut BufReader::new(up_reader), &mut down);
        let _ = down.shutdown(std::net::Shutdown::Write);
    });
    let mut up = upstream;
    let mut applies_seen = 0;
    for line in BufReader::new(client).lines() {
        let Ok(line) = line else { break };
        if let Some(out) = fault.rewrite(&line, &mut applies_seen) {
            if up.write_all(format!("{out}\n").as_bytes()).is_err() {
                break;
            }
        }
    }
    let _ = up.shutdown(std::net::Shutdown::Write);
    let _ = back.join();
}
