//! Seeded multi-trial runs.
//!
//! Trial `k` of a batch with seed `s` draws its input from
//! [`psi_rng`]`(s, k)` and its measurements from
//! [`crate::rng::measurement_rng`]`(s, k)`, so results do not depend on how
//! trials are scheduled. With the `parallel` feature (on by default) batches
//! fan out over rayon; the `_sequential` variants are always available and
//! produce identical output.

use std::fmt;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analysis::{marginal, DensityMatrix};
use crate::circuit::{circuit_input, full_program, measure_resend_experiment, WIRE_C};
use crate::error::Result;
use crate::protocol::{teleport_once, Mode, TeleportTranscript};
use crate::rng::{haar_qubit, measurement_rng, psi_rng};
use crate::state::{Amplitude, PureState, CONSTRUCTION_TOL};

/// Input qubit for a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiSpec {
    Zero,
    One,
    Plus,
    /// Haar-random per trial.
    Random,
    Fixed(PureState),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PsiSpecError {
    #[error("expected `zero`, `one`, `plus`, `random` or `re0,im0,re1,im1`, got `{0}`")]
    Malformed(String),
    #[error("amplitudes do not define a state: {0}")]
    Invalid(#[from] crate::error::Error),
}

impl PsiSpec {
    /// State used for trial `trial` of a batch seeded with `seed`.
    pub fn resolve(&self, seed: u64, trial: u64) -> PureState {
        match self {
            PsiSpec::Zero => PureState::from_bits("0").expect("basis state"),
            PsiSpec::One => PureState::from_bits("1").expect("basis state"),
            PsiSpec::Plus => PureState::plus(),
            PsiSpec::Random => haar_qubit(&mut psi_rng(seed, trial)),
            PsiSpec::Fixed(s) => s.clone(),
        }
    }

    /// Parses a spec; for amplitude lists also returns how far the input norm was from 1.
    pub fn parse_with_correction(s: &str) -> Result<(Self, f64), PsiSpecError> {
        let spec = match s.trim() {
            "zero" => PsiSpec::Zero,
            "one" => PsiSpec::One,
            "plus" => PsiSpec::Plus,
            "random" => PsiSpec::Random,
            list => {
                let parts: Vec<f64> = list
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| PsiSpecError::Malformed(s.to_string()))?;
                let [re0, im0, re1, im1] = parts[..] else {
                    return Err(PsiSpecError::Malformed(s.to_string()));
                };
                let (state, norm) = PureState::normalize(
                    1,
                    vec![Amplitude::new(re0, im0), Amplitude::new(re1, im1)],
                )?;
                return Ok((PsiSpec::Fixed(state), (norm - 1.0).abs()));
            }
        };
        Ok((spec, 0.0))
    }

    /// True when normalizing the parsed amplitudes moved them by more than the construction tolerance.
    pub fn needs_warning(correction: f64) -> bool {
        correction > CONSTRUCTION_TOL
    }
}

impl FromStr for PsiSpec {
    type Err = PsiSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with_correction(s).map(|(spec, _)| spec)
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Zero => f.write_str("zero"),
            PsiSpec::One => f.write_str("one"),
            PsiSpec::Plus => f.write_str("plus"),
            PsiSpec::Random => f.write_str("random"),
            PsiSpec::Fixed(s) => {
                let a = s.amplitudes();
                write!(f, "{},{},{},{}", a[0].re, a[0].im, a[1].re, a[1].im)
            }
        }
    }
}

/// Runs `f` for trials `0..trials`, keeping trial order in the output.
pub fn map_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trials_sequential(trials, f)
    }
}

pub fn map_trials_sequential<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T>,
{
    (0..trials).map(f).collect()
}

fn teleport_trial(psi: &PsiSpec, mode: Mode, seed: u64, trial: u64) -> Result<TeleportTranscript> {
    teleport_once(&psi.resolve(seed, trial), mode, seed, trial)
}

pub fn teleport_batch(psi: &PsiSpec, mode: Mode, seed: u64, trials: u64) -> Result<Vec<TeleportTranscript>> {
    map_trials(trials, |k| teleport_trial(psi, mode, seed, k))
}

pub fn teleport_batch_sequential(psi: &PsiSpec, mode: Mode, seed: u64, trials: u64) -> Result<Vec<TeleportTranscript>> {
    map_trials_sequential(trials, |k| teleport_trial(psi, mode, seed, k))
}

/// Aggregate view of a teleport batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportSummary {
    pub trials: u64,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    /// Counts of `(u,v)` indexed by `2u + v`.
    pub histogram: [u64; 4],
    pub check_failures: u64,
}

pub fn summarize(transcripts: &[TeleportTranscript]) -> TeleportSummary {
    let mut histogram = [0u64; 4];
    let mut min_fidelity = f64::INFINITY;
    let mut sum = 0.0;
    let mut check_failures = 0;
    for t in transcripts {
        histogram[t.bits.index()] += 1;
        min_fidelity = min_fidelity.min(t.fidelity);
        sum += t.fidelity;
        if !t.check_passed() {
            check_failures += 1;
        }
    }
    let n = transcripts.len() as u64;
    TeleportSummary {
        trials: n,
        min_fidelity: if n == 0 { f64::NAN } else { min_fidelity },
        mean_fidelity: if n == 0 { f64::NAN } else { sum / n as f64 },
        histogram,
        check_failures,
    }
}

/// One measure-and-resend trial at the dashed line.
#[derive(Debug, Clone, PartialEq)]
pub struct DashedLineRow {
    pub trial: u64,
    pub psi: PureState,
    pub u: u8,
    pub v: u8,
    /// Fidelity of the final three-wire state against `|uvψ⟩`.
    pub fidelity_uv_psi: f64,
    /// `⟨ψ|ρ_c|ψ⟩` for the final wire-`c` marginal.
    pub wire_c_fidelity: f64,
    /// Largest entrywise gap between the wire-`c` marginals with and without the measurement.
    pub marginal_gap: f64,
}

fn dashed_line_trial(psi: &PsiSpec, seed: u64, trial: u64) -> Result<DashedLineRow> {
    let psi = psi.resolve(seed, trial);
    let mut rng = measurement_rng(seed, trial);
    let run = measure_resend_experiment(&psi, &mut rng)?;
    let uv = PureState::basis(2, (usize::from(run.u) << 1) | usize::from(run.v))?;
    let fidelity_uv_psi = uv.tensor(&psi)?.fidelity(&run.final_state)?;
    let with_measurement = marginal(&run.final_state, &[WIRE_C])?;
    let without = marginal(&full_program().run(&circuit_input(&psi)?)?, &[WIRE_C])?;
    Ok(DashedLineRow {
        trial,
        u: run.u,
        v: run.v,
        fidelity_uv_psi,
        wire_c_fidelity: with_measurement.expectation(&psi)?,
        marginal_gap: with_measurement.max_abs_diff(&without)?,
        psi,
    })
}

pub fn dashed_line_batch(psi: &PsiSpec, seed: u64, trials: u64) -> Result<Vec<DashedLineRow>> {
    map_trials(trials, |k| dashed_line_trial(psi, seed, k))
}

pub fn dashed_line_batch_sequential(psi: &PsiSpec, seed: u64, trials: u64) -> Result<Vec<DashedLineRow>> {
    map_trials_sequential(trials, |k| dashed_line_trial(psi, seed, k))
}

/// Largest entrywise deviation of the dashed-line wire-`c` marginal from `I/2`
/// over `count` random inputs.
pub fn dashed_line_marginal_sweep(seed: u64, count: u64) -> Result<f64> {
    let gaps = map_trials(count, |k| {
        let psi = PsiSpec::Random.resolve(seed, k);
        let d = crate::circuit::dashed_line_state(&psi)?;
        marginal(&d, &[WIRE_C])?.max_abs_diff(&DensityMatrix::maximally_mixed(1))
    })?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_spec_parsing() {
        assert_eq!("zero".parse::<PsiSpec>().unwrap(), PsiSpec::Zero);
        assert_eq!("random".parse::<PsiSpec>().unwrap(), PsiSpec::Random);
        let (spec, corr) = PsiSpec::parse_with_correction("0.6,0,0,0.8").unwrap();
        assert!(corr < 1e-12);
        assert!(matches!(spec, PsiSpec::Fixed(_)));
        let (_, corr) = PsiSpec::parse_with_correction("1,0,1,0").unwrap();
        assert!(PsiSpec::needs_warning(corr));
        assert!(matches!(
            "1,2,3".parse::<PsiSpec>(),
            Err(PsiSpecError::Malformed(_))
        ));
        assert!(matches!(
            "a,b,c,d".parse::<PsiSpec>(),
            Err(PsiSpecError::Malformed(_))
        ));
        assert!(matches!(
            "0,0,0,0".parse::<PsiSpec>(),
            Err(PsiSpecError::Invalid(_))
        ));
    }

    #[test]
    fn random_spec_is_per_trial() {
        let a = PsiSpec::Random.resolve(1, 0);
        assert_eq!(a, PsiSpec::Random.resolve(1, 0));
        assert_ne!(a, PsiSpec::Random.resolve(1, 1));
    }

    #[test]
    fn parallel_matches_sequential() {
        let par = teleport_batch(&PsiSpec::Random, Mode::UnitaryBob, 77, 64).unwrap();
        let seq = teleport_batch_sequential(&PsiSpec::Random, Mode::UnitaryBob, 77, 64).unwrap();
        assert_eq!(par, seq);
        let par = dashed_line_batch(&PsiSpec::Plus, 5, 16).unwrap();
        let seq = dashed_line_batch_sequential(&PsiSpec::Plus, 5, 16).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn summary_counts() {
        let runs = teleport_batch(&PsiSpec::Zero, Mode::ClassicalBob, 2, 200).unwrap();
        let s = summarize(&runs);
        assert_eq!(s.trials, 200);
        assert_eq!(s.histogram.iter().sum::<u64>(), 200);
        assert!(s.min_fidelity >= 1.0 - 1e-9);
        assert_eq!(s.check_failures, 0);
    }

    #[test]
    fn dashed_line_rows_are_exact() {
        for row in dashed_line_batch(&PsiSpec::Random, 9, 32).unwrap() {
            assert!(row.fidelity_uv_psi >= 1.0 - 1e-9);
            assert!(row.wire_c_fidelity >= 1.0 - 1e-9);
            assert!(row.marginal_gap <= 1e-9);
        }
        assert!(dashed_line_marginal_sweep(4, 20).unwrap() <= 1e-9);
    }
}
