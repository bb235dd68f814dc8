mod common;

use std::process::Stdio;

use common::{qtele, run, stderr, stdout, three_process, Listener};
use qtele::batch::PsiSpec;
use qtele::protocol::{teleport_once, Mode};

#[test]
fn simulate_plus_reports_unit_fidelities() {
    let o = run(&["simulate", "--psi", "plus", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("wire,reference,fidelity,purity"));
    for line in lines {
        let f: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((f - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn simulate_zero_outputs_phi_on_upper_wires() {
    let o = run(&["simulate", "--psi", "zero", "--format", "json", "--show-circuit"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    for w in &v["wires"].as_array().unwrap()[..2] {
        assert_eq!(w["reference"], "phi");
        assert!((w["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    assert_eq!(v["circuit"].as_array().unwrap().len(), 10);
}

#[test]
fn bad_psi_is_a_usage_error_with_no_output() {
    let o = run(&["teleport", "--psi", "1,2,x,4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("BAD_PSI_SPEC"));
    let o = run(&["serve", "--listen", "127.0.0.1:0", "--sessions", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
}

#[test]
fn renormalization_warns() {
    let o = run(&["simulate", "--psi", "1,0,1,0", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    let o = run(&["simulate", "--psi", "0.6,0,0,0.8", "--format", "csv"]);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn zero_trials_rejected() {
    for cmd in ["teleport", "dashed-line"] {
        assert_eq!(run(&[cmd, "--trials", "0"]).status.code(), Some(2));
    }
}

#[test]
fn teleport_is_deterministic_and_exact() {
    for fmt in ["json", "csv"] {
        let args = ["teleport", "--trials", "1000", "--seed", "12", "--mode", "classical-bob", "--format", fmt];
        let a = run(&args);
        let b = run(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
    let o = run(&["teleport", "--trials", "1000", "--seed", "12", "--format", "json"]);
    let out = stdout(&o);
    let summary: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert!(summary["summary"]["min_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert!(summary["summary"]["p_value"].as_f64().unwrap() > 0.001);
    assert_eq!(out.lines().count(), 1001);
}

#[test]
fn teleport_csv_header_is_fixed() {
    let o = run(&["teleport", "--trials", "2", "--format", "csv"]);
    assert_eq!(
        stdout(&o).lines().next(),
        Some("seed,trial,mode,u,v,x,y,fidelity,psi0_re,psi0_im,psi1_re,psi1_im")
    );
}

#[test]
fn dashed_line_reports_every_trial() {
    let o = run(&["dashed-line", "--trials", "20", "--seed", "4", "--format", "json"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for line in out.lines().take(20) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["fidelity_uv_psi"].as_f64().unwrap() >= 1.0 - 1e-9);
        assert!(v["marginal_gap"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn entangle_check_formats_agree() {
    let verdicts = |fmt: &str| -> Vec<String> {
        let o = run(&["entangle-check", "--psi", "zero", "--format", fmt]);
        stdout(&o)
            .lines()
            .filter_map(|l| ["product", "entangled"].into_iter().find(|v| l.contains(v)))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(verdicts("text"), ["product", "entangled", "entangled"]);
    assert_eq!(verdicts("json"), verdicts("text"));
    assert_eq!(verdicts("csv"), verdicts("text"));
    let o = run(&["entangle-check", "--psi", "plus", "--format", "csv"]);
    let out = stdout(&o);
    let purities: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(purities.iter().all(|p| *p < 1.0 - 1e-6));
    assert!((purities[2] - 0.5).abs() < 1e-9);
}

#[test]
fn three_processes_match_in_process_transcript() {
    let (seed, session) = (31, 4);
    let r = three_process(seed, session, "unitary-bob", "random", &[]);
    assert!(r.alice.status.success(), "{}", stderr(&r.alice));
    assert!(r.bob.status.success(), "{}", stderr(&r.bob));
    assert!(r.serve_status.is_some_and(|s| s.success()));
    let bob: serde_json::Value = serde_json::from_str(stdout(&r.bob).trim()).unwrap();
    let psi = PsiSpec::Random.resolve(seed, session);
    let oracle = teleport_once(&psi, Mode::UnitaryBob, seed, session).unwrap();
    assert_eq!(bob["u"], oracle.bits.u);
    assert_eq!(bob["v"], oracle.bits.v);
    assert_eq!(bob["fidelity"].as_f64().unwrap().to_bits(), oracle.fidelity.to_bits());
}

#[test]
fn alice_without_broker_fails() {
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let o = run(&["alice", "--connect", &addr]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("CONNECTION_LOST"));
}

#[test]
fn strict_check_catches_a_dropped_gate_through_the_proxy() {
    let serve = Listener::start(&["serve", "--listen", "127.0.0.1:0", "--seed", "2", "--test-hooks"]);
    let proxy = Listener::start(&["proxy", "--listen", "127.0.0.1:0", "--connect", &serve.addr, "--fault", "drop-apply:2"]);
    let bob = qtele()
        .args(["bob", "--connect", &proxy.addr, "--strict-check"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let alice = run(&["alice", "--connect", &serve.addr, "--psi", "one"]);
    assert!(alice.status.success());
    let bob = bob.wait_with_output().unwrap();
    assert_eq!(bob.status.code(), Some(3));
    assert!(stderr(&bob).contains("CHECK_BIT_MISMATCH"), "{}", stderr(&bob));
}

#[test]
fn corrupted_classical_bits_are_caught_by_the_test_hook() {
    let serve = Listener::start(&["serve", "--listen", "127.0.0.1:0", "--seed", "2", "--test-hooks"]);
    let proxy = Listener::start(&["proxy", "--listen", "127.0.0.1:0", "--connect", &serve.addr, "--fault", "flip-classical"]);
    let bob = qtele()
        .args(["bob", "--connect", &serve.addr, "--strict-check"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let alice = run(&["alice", "--connect", &proxy.addr, "--psi", "plus"]);
    assert!(alice.status.success());
    let bob = bob.wait_with_output().unwrap();
    assert_eq!(bob.status.code(), Some(3));
    assert!(stderr(&bob).contains("FIDELITY_LOSS"), "{}", stderr(&bob));
}
