#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Output, Stdio};

pub fn qtele() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtele"))
}

pub fn run(args: &[&str]) -> Output {
    qtele().args(args).output().expect("qtele runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// A background `qtele` process that prints `listening on ADDR` first.
pub struct Listener {
    pub child: Child,
    pub addr: String,
}

impl Listener {
    pub fn start(args: &[&str]) -> Self {
        let mut child = qtele()
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("listener starts");
        let mut first = String::new();
        BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut first).unwrap();
        let addr = first.trim().strip_prefix("listening on ").expect("address line").to_string();
        Self { child, addr }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Outcome of one serve/bob/alice run in three processes.
pub struct ThreeProcessRun {
    pub alice: Output,
    pub bob: Output,
    pub serve_status: Option<std::process::ExitStatus>,
}

pub fn three_process(seed: u64, session: u64, mode: &str, psi: &str, bob_extra: &[&str]) -> ThreeProcessRun {
    let seed_s = seed.to_string();
    let session_s = session.to_string();
    let mut serve = Listener::start(&["serve", "--listen", "127.0.0.1:0", "--seed", &seed_s, "--test-hooks", "--sessions", "1"]);
    let mut bob_args = vec!["bob", "--connect", &serve.addr, "--mode", mode, "--session", &session_s, "--format", "json"];
    bob_args.extend_from_slice(bob_extra);
    let bob = qtele().args(&bob_args).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    let alice = run(&["alice", "--connect", &serve.addr, "--psi", psi, "--seed", &seed_s, "--session", &session_s, "--format", "json"]);
    let bob = bob.wait_with_output().unwrap();
    let serve_status = wait_with_timeout(&mut serve.child, std::time::Duration::from_secs(5));
    ThreeProcessRun { alice, bob, serve_status }
}

pub fn wait_with_timeout(child: &mut Child, timeout: std::time::Duration) -> Option<std::process::ExitStatus> {
    let start = std::time::Instant::now();
    while start.elapsed() < timeout {
        if let Some(s) = child.try_wait().unwrap() {
            return Some(s);
        }
        std::thread::sleep(std::time::Duration::from_millis(10));
    }
    None
}
