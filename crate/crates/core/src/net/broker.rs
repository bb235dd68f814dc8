//! TCP broker.
//!
//! One reader thread per connection, one actor thread per session. Readers
//! forward decoded messages to the session actor over a channel; the actor is
//! the only code that touches the session state and the only writer on a
//! connection once it has joined a session.

use std::collections::HashMap;
use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::session::{LogEntry, Outbound, Session};
use super::wire::{encode_message, read_message, ErrorCode, Role, WireError, WireMessage};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(10);
const MAX_RECORDS: usize = 4096;
const ACCEPT_POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub seed: u64,
    /// Send `STATE_REPORT` on release.
    pub test_hooks: bool,
    pub idle_timeout: Duration,
    /// Stop serving after this many sessions have finished.
    pub max_sessions: Option<u64>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            test_hooks: false,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            max_sessions: None,
        }
    }
}

/// Message log of a finished session.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub id: u64,
    pub log: Vec<LogEntry>,
}

type ConnId = u64;

enum Event {
    Message { conn: ConnId, stream: TcpStream, msg: WireMessage },
    Reply { conn: ConnId, stream: TcpStream, msg: WireMessage },
    Gone { conn: ConnId, timed_out: bool },
}

struct Shared {
    config: BrokerConfig,
    sessions: Mutex<HashMap<u64, Sender<Event>>>,
    finished: AtomicU64,
    live: AtomicUsize,
    records: Mutex<Vec<SessionRecord>>,
    next_conn: AtomicU64,
}

pub struct Broker {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Broker {
    pub fn bind(addr: impl ToSocketAddrs, config: BrokerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                config,
                sessions: Mutex::new(HashMap::new()),
                finished: AtomicU64::new(0),
                live: AtomicUsize::new(0),
                records: Mutex::new(Vec::new()),
                next_conn: AtomicU64::new(0),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `shutdown` is set or the session budget is spent.
    pub fn serve(&self, shutdown: &AtomicBool) -> io::Result<()> {
        while !shutdown.load(Ordering::SeqCst) && !self.budget_spent() {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let shared = Arc::clone(&self.shared);
                    let conn = shared.next_conn.fetch_add(1, Ordering::SeqCst);
                    thread::spawn(move || serve_connection(shared, conn, stream));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        // Let running sessions drain before returning.
        while self.shared.live.load(Ordering::SeqCst) > 0 && !shutdown.load(Ordering::SeqCst) {
            thread::sleep(ACCEPT_POLL);
        }
        Ok(())
    }

    fn budget_spent(&self) -> bool {
        self.shared
            .config
            .max_sessions
            .is_some_and(|n| self.shared.finished.load(Ordering::SeqCst) >= n)
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> io::Result<BrokerHandle> {
        let addr = self.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let shared = Arc::clone(&self.shared);
        let thread = thread::spawn(move || self.serve(&flag));
        Ok(BrokerHandle {
            addr,
            shutdown,
            shared,
            thread: Some(thread),
        })
    }
}

pub struct BrokerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn finished_sessions(&self) -> u64 {
        self.shared.finished.load(Ordering::SeqCst)
    }

    /// Logs of every session that has ended so far, in completion order.
    pub fn records(&self) -> Vec<SessionRecord> {
        self.shared.records.lock().expect("records lock").clone()
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        self.join_inner()
    }

    /// Waits for the broker to stop on its own (session budget spent).
    pub fn join(mut self) -> io::Result<()> {
        self.join_inner()
    }

    fn join_inner(&mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("broker thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = self.join_inner();
    }
}

fn write_line(stream: &mut TcpStream, msg: &WireMessage) -> io::Result<()> {
    let mut line = encode_message(msg);
    line.push('\n');
    stream.write_all(line.as_bytes())
}

fn session_sender(shared: &Arc<Shared>, id: u64) -> Sender<Event> {
    let mut sessions = shared.sessions.lock().expect("session registry lock");
    sessions
        .entry(id)
        .or_insert_with(|| {
            let (tx, rx) = mpsc::channel();
            shared.live.fetch_add(1, Ordering::SeqCst);
            let shared = Arc::clone(shared);
            thread::spawn(move || run_session(shared, id, rx));
            tx
        })
        .clone()
}

fn serve_connection(shared: Arc<Shared>, conn: ConnId, stream: TcpStream) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(shared.config.idle_timeout));
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let mut session: Option<(u64, Sender<Event>)> = None;
    loop {
        let (event, closing) = match read_message(&mut reader) {
            Ok(msg) => {
                let id = msg.session();
                if session.as_ref().map(|(s, _)| *s) != Some(id) {
                    if session.is_some() {
                        let reply = WireMessage::error(id, ErrorCode::Malformed, "connection is bound to another session");
                        relay(&mut session, &mut writer, conn, reply);
                        continue;
                    }
                    if !matches!(msg, WireMessage::Hello { .. }) {
                        let _ = write_line(&mut writer, &WireMessage::error(id, ErrorCode::ProtocolOrder, "HELLO first"));
                        continue;
                    }
                    session = Some((id, session_sender(&shared, id)));
                }
                let Ok(stream) = writer.try_clone() else { break };
                (Event::Message { conn, stream, msg }, false)
            }
            Err(WireError::Closed) => (Event::Gone { conn, timed_out: false }, true),
            Err(WireError::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                (Event::Gone { conn, timed_out: true }, true)
            }
            Err(WireError::Io(_)) => (Event::Gone { conn, timed_out: false }, true),
            Err(e) => {
                let code = match e {
                    WireError::UnknownKind(_) => ErrorCode::UnknownKind,
                    WireError::OversizeLine => ErrorCode::Oversize,
                    _ => ErrorCode::Malformed,
                };
                let id = session.as_ref().map_or(0, |(s, _)| *s);
                relay(&mut session, &mut writer, conn, WireMessage::error(id, code, e.to_string()));
                continue;
            }
        };
        match &session {
            Some((_, tx)) => {
                if let Err(mpsc::SendError(event)) = tx.send(event) {
                    if let Event::Message { msg, .. } = event {
                        let _ = write_line(
                            &mut writer,
                            &WireMessage::error(msg.session(), ErrorCode::ProtocolOrder, "session closed"),
                        );
                    }
                    session = None;
                }
            }
            None if closing => {
                if let Event::Gone { timed_out: true, .. } = event {
                    let _ = write_line(&mut writer, &WireMessage::error(0, ErrorCode::Timeout, "idle timeout"));
                }
            }
            None => {}
        }
        if closing {
            break;
        }
    }
    let _ = writer.shutdown(std::net::Shutdown::Both);
}

/// Sends a reader-generated reply through the session actor when there is one.
fn relay(session: &mut Option<(u64, Sender<Event>)>, writer: &mut TcpStream, conn: ConnId, msg: WireMessage) {
    let msg = match (session, writer.try_clone()) {
        (Some((_, tx)), Ok(stream)) => match tx.send(Event::Reply { conn, stream, msg }) {
            Ok(()) => return,
            Err(mpsc::SendError(Event::Reply { msg, .. })) => msg,
            Err(_) => unreachable!("sent a reply"),
        },
        _ => msg,
    };
    let _ = write_line(writer, &msg);
}

struct Peer {
    conn: ConnId,
    stream: TcpStream,
}

/// Writes each outbound message to its addressee; `sender` overrides the
/// peer table for replies to the connection that triggered them.
fn deliver(peers: &mut [Option<Peer>; 2], out: Vec<Outbound>, mut sender: Option<(Role, &mut TcpStream)>) {
    for o in out {
        let stream = match (&mut sender, &mut peers[o.to.index()]) {
            (Some((r, s)), _) if *r == o.to => Some(&mut **s),
            (_, Some(p)) => Some(&mut p.stream),
            _ => None,
        };
        if let Some(s) = stream {
            let _ = write_line(s, &o.msg);
        }
    }
}

fn run_session(shared: Arc<Shared>, id: u64, rx: Receiver<Event>) {
    let config = &shared.config;
    let mut session = Session::new(id, config.seed, config.test_hooks);
    let mut peers: [Option<Peer>; 2] = [None, None];
    let mut pending: HashMap<ConnId, TcpStream> = HashMap::new();
    let role_of = |peers: &[Option<Peer>; 2], conn: ConnId| {
        [Role::Alice, Role::Bob]
            .into_iter()
            .find(|r| peers[r.index()].as_ref().is_some_and(|p| p.conn == conn))
    };

    while let Ok(event) = rx.recv_timeout(config.idle_timeout.saturating_mul(3)) {
        match event {
            Event::Reply { conn, mut stream, msg } => {
                let _ = write_line(&mut stream, &msg);
                pending.entry(conn).or_insert(stream);
            }
            Event::Message { conn, mut stream, msg } => {
                let bound = role_of(&peers, conn);
                let from = match (bound, &msg) {
                    (Some(r), _) => r,
                    (None, WireMessage::Hello { role, .. }) => *role,
                    (None, _) => {
                        let _ = write_line(&mut stream, &WireMessage::error(id, ErrorCode::ProtocolOrder, "HELLO first"));
                        continue;
                    }
                };
                let joined_before = session.has_joined(from);
                let out = session.handle(from, msg);
                if bound.is_none() && !joined_before && session.has_joined(from) {
                    pending.remove(&conn);
                    peers[from.index()] = Some(Peer { conn, stream: stream.try_clone().unwrap_or(stream) });
                    deliver(&mut peers, out, None);
                } else if bound.is_none() {
                    // Rejected HELLO: answer on this connection only.
                    for o in out {
                        let _ = write_line(&mut stream, &o.msg);
                    }
                    pending.entry(conn).or_insert(stream);
                } else {
                    deliver(&mut peers, out, Some((from, &mut stream)));
                }
            }
            Event::Gone { conn, timed_out } => {
                pending.remove(&conn);
                if let Some(role) = role_of(&peers, conn) {
                    if let Some(mut p) = peers[role.index()].take() {
                        if timed_out {
                            let _ = write_line(&mut p.stream, &WireMessage::error(id, ErrorCode::Timeout, "idle timeout"));
                        }
                    }
                    let out = session.disconnect(role);
                    deliver(&mut peers, out, None);
                }
            }
        }
        let nobody = peers.iter().all(Option::is_none) && pending.is_empty();
        if nobody && (session.is_closed() || !(session.has_joined(Role::Alice) || session.has_joined(Role::Bob))) {
            break;
        }
        if session.is_closed() && peers.iter().all(Option::is_none) {
            break;
        }
    }

    shared.sessions.lock().expect("session registry lock").remove(&id);
    {
        let mut records = shared.records.lock().expect("records lock");
        if records.len() == MAX_RECORDS {
            records.remove(0);
        }
        records.push(SessionRecord {
            id,
            log: session.log().to_vec(),
        });
    }
    shared.finished.fetch_add(1, Ordering::SeqCst);
    shared.live.fetch_sub(1, Ordering::SeqCst);
}
