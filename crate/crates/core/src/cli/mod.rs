//! Command-line front end.
//!
//! Every subcommand validates its arguments before doing any work. JSON output
//! is one object per line, CSV has a fixed header, and all output for a given
//! seed is byte-for-byte reproducible.

use std::io::{self, Write};
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{entangled_across, marginal, ENTANGLEMENT_TOL};
use crate::batch::{dashed_line_batch, summarize, teleport_batch, DashedLineRow, PsiSpec, PsiSpecError};
use crate::circuit::{circuit_input, dashed_line_state, full_program, wire_name, WIRE_A, WIRE_B, WIRE_C};
use crate::net::broker::DEFAULT_IDLE_TIMEOUT;
use crate::net::{alice_client, bob_client, Broker, BrokerConfig, Fault, NetError, Proxy};
use crate::protocol::{Mode, TranscriptRecord};
use crate::state::{PureState, COMPARE_TOL};
use crate::stats::chi_square_uniform;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qtele", version, about = "XOR-circuit teleportation simulator and two-party harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full ten-step circuit on |ψ00⟩ and report each output wire.
    Simulate(SimulateArgs),
    /// Run seeded teleportation trials.
    Teleport(TeleportArgs),
    /// Measure the upper wires at the dashed line, resend, and compare.
    DashedLine(DashedLineArgs),
    /// Purity of each wire at the dashed line and the entanglement verdicts.
    EntangleCheck(EntangleArgs),
    /// Run the state broker.
    Serve(ServeArgs),
    /// Run Alice against a broker.
    Alice(AliceArgs),
    /// Run Bob against a broker.
    Bob(BobArgs),
    /// Relay traffic to a broker, injecting a fault (for harness tests).
    Proxy(ProxyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "unitary-bob", alias = "unitary")]
    UnitaryBob,
    #[value(name = "classical-bob", alias = "classical")]
    ClassicalBob,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::UnitaryBob => Mode::UnitaryBob,
            ModeArg::ClassicalBob => Mode::ClassicalBob,
        }
    }
}

#[derive(Debug, Args)]
pub struct PsiArgs {
    /// `zero`, `one`, `plus`, `random`, or `re0,im0,re1,im1`.
    #[arg(long, default_value = "random", allow_hyphen_values = true)]
    pub psi: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub psi: PsiArgs,
    /// Print the ten circuit steps.
    #[arg(long)]
    pub show_circuit: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    #[command(flatten)]
    pub psi: PsiArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::UnitaryBob)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Fail when Bob's check bits disagree with the received bits.
    #[arg(long)]
    pub strict_check: bool,
}

#[derive(Debug, Args)]
pub struct DashedLineArgs {
    #[command(flatten)]
    pub psi: PsiArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EntangleArgs {
    #[command(flatten)]
    pub psi: PsiArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub listen: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Send the final wire-c state to Bob on release.
    #[arg(long)]
    pub test_hooks: bool,
    /// Exit after this many sessions have finished.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub sessions: Option<u64>,
    /// Idle timeout per connection, in seconds.
    #[arg(long, default_value_t = DEFAULT_IDLE_TIMEOUT.as_secs(), value_parser = clap::value_parser!(u64).range(1..))]
    pub idle_timeout: u64,
}

#[derive(Debug, Args)]
pub struct AliceArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub connect: String,
    /// `random` draws ψ from the seed and session id.
    #[arg(long, default_value = "random", allow_hyphen_values = true)]
    pub psi: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub session: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BobArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub connect: String,
    #[arg(long, value_enum, default_value_t = ModeArg::UnitaryBob)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub session: u64,
    /// Abort when the check bits disagree with the received bits.
    #[arg(long)]
    pub strict_check: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ProxyArgs {
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub connect: String,
    /// `none`, `flip-classical`, or `drop-apply:N`.
    #[arg(long, default_value = "none")]
    pub fault: String,
}

/// A failed command: exit status plus a symbolic code for stderr.
#[derive(Debug)]
pub struct Failure {
    pub exit: i32,
    pub code: &'static str,
    pub message: String,
}

impl Failure {
    fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_USAGE,
            code,
            message: message.into(),
        }
    }

    fn failed(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_FAILURE,
            code,
            message: message.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::failed("IO", e.to_string())
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::failed("SIMULATION", e.to_string())
    }
}

impl From<NetError> for Failure {
    fn from(e: NetError) -> Self {
        Failure::failed(e.code(), e.to_string())
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out, err),
        Command::Teleport(a) => teleport(&a, out, err),
        Command::DashedLine(a) => dashed_line(&a, out, err),
        Command::EntangleCheck(a) => entangle_check(&a, out, err),
        Command::Serve(a) => serve(&a, out),
        Command::Alice(a) => alice(&a, out, err),
        Command::Bob(a) => bob(&a, out, err),
        Command::Proxy(a) => proxy(&a, out),
    };
    let result = result.and_then(|code| out.flush().map(|_| code).map_err(Failure::from));
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}: {}", f.code, f.message);
            f.exit
        }
    }
}

fn parse_psi(spec: &str, err: &mut dyn Write) -> Result<PsiSpec, Failure> {
    let (psi, correction) = PsiSpec::parse_with_correction(spec).map_err(|e| match e {
        PsiSpecError::Malformed(_) | PsiSpecError::Invalid(_) => Failure::usage("BAD_PSI_SPEC", e.to_string()),
    })?;
    if PsiSpec::needs_warning(correction) {
        writeln!(err, "warning: psi renormalized (norm was off by {correction:.3e})")?;
    }
    Ok(psi)
}

fn amps_json(s: &PureState) -> serde_json::Value {
    s.amplitudes().iter().map(|a| json!([a.re, a.im])).collect()
}

fn json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(value).map_err(io::Error::other)?)
}

/// Output wire names after the full circuit.
const OUTPUT_WIRES: [&str; 3] = ["x", "y", "z"];

fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let psi = parse_psi(&a.psi.psi, err)?.resolve(a.psi.seed, 0);
    let program = full_program();
    let final_state = program.run(&circuit_input(&psi)?)?;
    let phi = PureState::plus();
    let mut rows = Vec::new();
    for (w, name) in OUTPUT_WIRES.iter().enumerate() {
        let (reference, target) = if w == WIRE_C { ("psi", &psi) } else { ("phi", &phi) };
        let rho = marginal(&final_state, &[w])?;
        rows.push((*name, reference, rho.expectation(target)?, rho.purity()));
    }
    match a.format {
        Format::Json => {
            let mut obj = json!({
                "psi": amps_json(&psi),
                "final": amps_json(&final_state),
                "wires": rows.iter().map(|(w, r, f, p)| json!({"wire": w, "reference": r, "fidelity": f, "purity": p})).collect::<Vec<_>>(),
            });
            if a.show_circuit {
                obj["circuit"] = program.steps.iter().map(|s| json!(s.to_string())).collect();
            }
            json_line(out, &obj)?;
        }
        Format::Csv => {
            writeln!(out, "wire,reference,fidelity,purity")?;
            for (w, r, f, p) in &rows {
                writeln!(out, "{w},{r},{f},{p}")?;
            }
        }
        Format::Text => {
            writeln!(out, "input psi: {psi}")?;
            if a.show_circuit {
                writeln!(out, "circuit ({} steps):", program.len())?;
                for (i, s) in program.steps.iter().enumerate() {
                    writeln!(out, "  {:>2}  {s}", i + 1)?;
                }
            }
            writeln!(out, "final state: {final_state}")?;
            writeln!(out, "wire  reference  fidelity        purity")?;
            for (w, r, f, p) in &rows {
                writeln!(out, "{w:<4}  {r:<9}  {f:<14.12}  {p:.12}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn teleport(a: &TeleportArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let psi = parse_psi(&a.psi.psi, err)?;
    let mode = Mode::from(a.mode);
    let runs = teleport_batch(&psi, mode, a.psi.seed, a.trials)?;
    let summary = summarize(&runs);
    let chi = chi_square_uniform(&summary.histogram);
    match a.format {
        Format::Json => {
            for r in &runs {
                writeln!(out, "{}", r.record().json())?;
            }
            json_line(
                out,
                &json!({"summary": {
                    "trials": summary.trials,
                    "min_fidelity": summary.min_fidelity,
                    "mean_fidelity": summary.mean_fidelity,
                    "histogram": {"00": summary.histogram[0], "01": summary.histogram[1], "10": summary.histogram[2], "11": summary.histogram[3]},
                    "chi_square": chi.statistic,
                    "p_value": chi.p_value,
                    "check_failures": summary.check_failures,
                }}),
            )?;
        }
        Format::Csv => {
            writeln!(out, "{}", TranscriptRecord::CSV_HEADER)?;
            for r in &runs {
                writeln!(out, "{}", r.record().csv_row())?;
            }
        }
        Format::Text => {
            writeln!(out, "trial  u v  x y  fidelity")?;
            for r in &runs {
                let check = r.bob_check.map_or("- -".to_string(), |(x, y)| format!("{x} {y}"));
                writeln!(out, "{:>5}  {} {}  {check}  {:.12}", r.trial, r.bits.u, r.bits.v, r.fidelity)?;
            }
            writeln!(out, "trials: {}  mode: {mode}  seed: {}", summary.trials, a.psi.seed)?;
            writeln!(
                out,
                "fidelity: min {:.12}  mean {:.12}",
                summary.min_fidelity, summary.mean_fidelity
            )?;
            writeln!(
                out,
                "bits: 00={} 01={} 10={} 11={}  chi-square {:.4} (dof {}, p {:.4})",
                summary.histogram[0], summary.histogram[1], summary.histogram[2], summary.histogram[3], chi.statistic, chi.dof, chi.p_value
            )?;
            if mode == Mode::UnitaryBob {
                writeln!(out, "check-bit mismatches: {}", summary.check_failures)?;
            }
        }
    }
    if summary.check_failures > 0 {
        if a.strict_check {
            return Err(Failure::failed(
                "CHECK_BIT_MISMATCH",
                format!("{} trial(s) failed the check", summary.check_failures),
            ));
        }
        writeln!(err, "warning: {} trial(s) failed the check", summary.check_failures)?;
    }
    if summary.min_fidelity < 1.0 - COMPARE_TOL {
        return Err(Failure::failed(
            "FIDELITY_LOSS",
            format!("minimum fidelity {}", summary.min_fidelity),
        ));
    }
    Ok(EXIT_OK)
}

fn dashed_row_ok(r: &DashedLineRow) -> bool {
    r.fidelity_uv_psi >= 1.0 - COMPARE_TOL && r.wire_c_fidelity >= 1.0 - COMPARE_TOL && r.marginal_gap <= COMPARE_TOL
}

fn dashed_line(a: &DashedLineArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let psi = parse_psi(&a.psi.psi, err)?;
    let rows = dashed_line_batch(&psi, a.psi.seed, a.trials)?;
    let failures = rows.iter().filter(|r| !dashed_row_ok(r)).count();
    const HEADER: &str = "trial,u,v,fidelity_uv_psi,wire_c_fidelity,marginal_gap,psi0_re,psi0_im,psi1_re,psi1_im";
    match a.format {
        Format::Json => {
            for r in &rows {
                let p = r.psi.amplitudes();
                json_line(
                    out,
                    &json!({
                        "trial": r.trial, "u": r.u, "v": r.v,
                        "fidelity_uv_psi": r.fidelity_uv_psi,
                        "wire_c_fidelity": r.wire_c_fidelity,
                        "marginal_gap": r.marginal_gap,
                        "psi0_re": p[0].re, "psi0_im": p[0].im, "psi1_re": p[1].re, "psi1_im": p[1].im,
                    }),
                )?;
            }
            json_line(out, &json!({"summary": {"trials": rows.len(), "failures": failures}}))?;
        }
        Format::Csv => {
            writeln!(out, "{HEADER}")?;
            for r in &rows {
                let p = r.psi.amplitudes();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.trial, r.u, r.v, r.fidelity_uv_psi, r.wire_c_fidelity, r.marginal_gap, p[0].re, p[0].im, p[1].re, p[1].im
                )?;
            }
        }
        Format::Text => {
            writeln!(out, "trial  u v  F(final,|uvψ⟩)  F(z,ψ)          |Δρ_z|")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>5}  {} {}  {:.12}  {:.12}  {:.3e}",
                    r.trial, r.u, r.v, r.fidelity_uv_psi, r.wire_c_fidelity, r.marginal_gap
                )?;
            }
            writeln!(
                out,
                "{} of {} trials match |uvψ⟩ and the unmeasured run",
                rows.len() - failures,
                rows.len()
            )?;
        }
    }
    if failures > 0 {
        return Err(Failure::failed("DASHED_LINE_MISMATCH", format!("{failures} trial(s) failed")));
    }
    Ok(EXIT_OK)
}

fn entangle_check(a: &EntangleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let psi = parse_psi(&a.psi.psi, err)?.resolve(a.psi.seed, 0);
    let dashed = dashed_line_state(&psi)?;
    let mut rows = Vec::new();
    for w in [WIRE_A, WIRE_B, WIRE_C] {
        let rest: String = [WIRE_A, WIRE_B, WIRE_C].into_iter().filter(|&o| o != w).map(wire_name).collect();
        let purity = marginal(&dashed, &[w])?.purity();
        let verdict = if entangled_across(&dashed, &[w], ENTANGLEMENT_TOL)? { "entangled" } else { "product" };
        rows.push((wire_name(w), rest, purity, verdict));
    }
    match a.format {
        Format::Json => {
            for (w, rest, p, v) in &rows {
                json_line(out, &json!({"wire": w, "rest": rest, "purity": p, "verdict": v}))?;
            }
        }
        Format::Csv => {
            writeln!(out, "wire,rest,purity,verdict")?;
            for (w, rest, p, v) in &rows {
                writeln!(out, "{w},{rest},{p},{v}")?;
            }
        }
        Format::Text => {
            writeln!(out, "input psi: {psi}")?;
            writeln!(out, "cut   purity          verdict")?;
            for (w, rest, p, v) in &rows {
                writeln!(out, "{w}|{rest:<3} {p:<14.12}  {v}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn serve(a: &ServeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let broker = Broker::bind(
        a.listen.as_str(),
        BrokerConfig {
            seed: a.seed,
            test_hooks: a.test_hooks,
            idle_timeout: Duration::from_secs(a.idle_timeout),
            max_sessions: a.sessions,
        },
    )
    .map_err(|e| Failure::failed("BIND", e.to_string()))?;
    writeln!(out, "listening on {}", broker.local_addr()?)?;
    out.flush()?;
    broker.serve(&AtomicBool::new(false))?;
    Ok(EXIT_OK)
}

fn alice(a: &AliceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let psi = parse_psi(&a.psi, err)?.resolve(a.seed, a.session);
    let report = alice_client(a.connect.as_str(), &psi, a.session)?;
    let (u, v) = (report.bits.u, report.bits.v);
    match a.format {
        Format::Json => json_line(out, &json!({"session": a.session, "u": u, "v": v}))?,
        Format::Csv => writeln!(out, "session,u,v\n{},{u},{v}", a.session)?,
        Format::Text => writeln!(out, "session {}: sent u={u} v={v}", a.session)?,
    }
    Ok(EXIT_OK)
}

fn bob(a: &BobArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let mode = Mode::from(a.mode);
    let report = bob_client(a.connect.as_str(), mode, a.session, a.strict_check)?;
    let (u, v) = (report.bits.u, report.bits.v);
    let (x, y) = (report.check.map(|c| c.0), report.check.map(|c| c.1));
    let fidelity = report.output.as_ref().map(|(_, f)| *f);
    match a.format {
        Format::Json => json_line(
            out,
            &json!({"session": a.session, "mode": mode, "u": u, "v": v, "x": x, "y": y, "fidelity": fidelity}),
        )?,
        Format::Csv => {
            let opt = |b: Option<u8>| b.map(|b| b.to_string()).unwrap_or_default();
            let f = fidelity.map(|f| f.to_string()).unwrap_or_default();
            writeln!(out, "session,mode,u,v,x,y,fidelity\n{},{mode},{u},{v},{},{},{f}", a.session, opt(x), opt(y))?;
        }
        Format::Text => {
            write!(out, "session {}: received u={u} v={v}", a.session)?;
            if let (Some(x), Some(y)) = (x, y) {
                write!(out, ", check x={x} y={y}")?;
            }
            if let Some(f) = fidelity {
                write!(out, ", fidelity {f:.12}")?;
            }
            writeln!(out)?;
        }
    }
    if !report.check_passed() {
        writeln!(err, "warning: check bits differ from the received bits")?;
    }
    Ok(EXIT_OK)
}

fn proxy(a: &ProxyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let fault: Fault = a.fault.parse().map_err(|e: String| Failure::usage("BAD_FAULT", e))?;
    let p = Proxy::bind(a.listen.as_str(), a.connect.as_str(), fault).map_err(|e| Failure::failed("BIND", e.to_string()))?;
    writeln!(out, "listening on {}", p.local_addr()?)?;
    out.flush()?;
    p.serve(&AtomicBool::new(false))?;
    Ok(EXIT_OK)
}
