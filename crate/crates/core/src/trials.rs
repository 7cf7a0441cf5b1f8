//! Balanced two-interval trial design.
//!
//! A block holds 16 trials: every (oddball interval, oddball contrast)
//! combination appears exactly twice, in shuffled order. Stimuli are reduced
//! to the signed contrast difference between the second and first interval.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baseline patch contrast (% contrast).
pub const BASELINE_CONTRAST: f64 = 10.0;
/// Oddball contrast levels (% contrast).
pub const ODDBALL_CONTRASTS: [f64; 4] = [11.5, 13.5, 17.0, 25.0];
pub const BLOCKS_PER_SESSION: u32 = 8;
pub const TRIALS_PER_BLOCK: u32 = 16;
pub const PATCH_POSITIONS: u8 = 6;

/// Presentation timing, kept as metadata only; the agents see a single noisy
/// sample of the contrast difference.
pub mod timing {
    pub const WARNING_S: f64 = 1.0;
    pub const FIXATION_MIN_S: f64 = 0.5;
    pub const FIXATION_MAX_S: f64 = 1.0;
    pub const STIMULUS_S: f64 = 0.085;
    pub const INTER_STIMULUS_S: f64 = 1.0;
}

/// One of the two intervals; doubles as a response (left handle extreme is
/// `First`, right extreme is `Second`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

impl Choice {
    /// -1 for `First` (left), +1 for `Second` (right).
    pub fn sign(self) -> f64 {
        match self {
            Choice::First => -1.0,
            Choice::Second => 1.0,
        }
    }

    /// Side of a signed position or decision variable. Zero has no side.
    pub fn from_sign(v: f64) -> Option<Choice> {
        if v > 0.0 {
            Some(Choice::Second)
        } else if v < 0.0 {
            Some(Choice::First)
        } else {
            None
        }
    }

    pub fn opposite(self) -> Choice {
        match self {
            Choice::First => Choice::Second,
            Choice::Second => Choice::First,
        }
    }

    /// Interval number, 1 or 2.
    pub fn number(self) -> u8 {
        match self {
            Choice::First => 1,
            Choice::Second => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Choice> {
        match n {
            1 => Ok(Choice::First),
            2 => Ok(Choice::Second),
            _ => Err(Error::invalid(format!("interval must be 1 or 2, got {n}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Choice::First => "first",
            Choice::Second => "second",
        }
    }
}

impl std::str::FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Choice::First),
            "second" => Ok(Choice::Second),
            _ => Err(Error::invalid(format!("unknown choice {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub block_index: u32,
    pub trial_index: u32,
    pub oddball_interval: Choice,
    pub oddball_contrast: f64,
    pub oddball_position: u8,
}

impl TrialSpec {
    pub fn new(
        block_index: u32,
        trial_index: u32,
        oddball_interval: Choice,
        oddball_contrast: f64,
        oddball_position: u8,
    ) -> Result<Self> {
        if block_index == 0 {
            return Err(Error::invalid("block indices start at 1"));
        }
        if !(1..=TRIALS_PER_BLOCK).contains(&trial_index) {
            return Err(Error::invalid(format!("trial index {trial_index} outside 1..=16")));
        }
        if !ODDBALL_CONTRASTS.contains(&oddball_contrast) {
            return Err(Error::invalid(format!(
                "oddball contrast {oddball_contrast} is not one of {ODDBALL_CONTRASTS:?}"
            )));
        }
        if !(1..=PATCH_POSITIONS).contains(&oddball_position) {
            return Err(Error::invalid(format!(
                "oddball position {oddball_position} outside 1..=6"
            )));
        }
        Ok(Self {
            block_index,
            trial_index,
            oddball_interval,
            oddball_contrast,
            oddball_position,
        })
    }

    pub fn baseline_contrast(&self) -> f64 {
        BASELINE_CONTRAST
    }

    pub fn delta_contrast(&self) -> f64 {
        delta_contrast(self)
    }

    /// The interval holding the oddball.
    pub fn correct_answer(&self) -> Choice {
        self.oddball_interval
    }
}

/// Contrast in the second interval minus contrast in the first, at the
/// oddball location.
pub fn delta_contrast(spec: &TrialSpec) -> f64 {
    spec.oddball_interval.sign() * (spec.oddball_contrast - BASELINE_CONTRAST)
}

/// The eight achievable contrast differences, ascending.
pub fn design_levels() -> [f64; 8] {
    let mut out = [0.0; 8];
    for (i, c) in ODDBALL_CONTRASTS.iter().enumerate() {
        out[3 - i] = -(c - BASELINE_CONTRAST);
        out[4 + i] = c - BASELINE_CONTRAST;
    }
    out
}

/// One shuffled block. Block indices past [`BLOCKS_PER_SESSION`] are allowed
/// for extended sessions.
pub fn generate_block<R: Rng + ?Sized>(block_index: u32, rng: &mut R) -> Result<Vec<TrialSpec>> {
    if block_index == 0 {
        return Err(Error::invalid("block indices start at 1"));
    }
    let mut combos = Vec::with_capacity(TRIALS_PER_BLOCK as usize);
    for _ in 0..2 {
        for interval in [Choice::First, Choice::Second] {
            for &contrast in &ODDBALL_CONTRASTS {
                combos.push((interval, contrast));
            }
        }
    }
    combos.shuffle(rng);
    combos
        .into_iter()
        .enumerate()
        .map(|(i, (interval, contrast))| {
            let position = rng.random_range(1..=PATCH_POSITIONS);
            TrialSpec::new(block_index, i as u32 + 1, interval, contrast, position)
        })
        .collect()
}

/// Writes `block,trial,interval,contrast,position,delta_c`.
pub fn write_trials_csv<W: Write>(out: W, trials: &[TrialSpec]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["block", "trial", "interval", "contrast", "position", "delta_c"])?;
    for t in trials {
        w.write_record([
            t.block_index.to_string(),
            t.trial_index.to_string(),
            t.oddball_interval.number().to_string(),
            t.oddball_contrast.to_string(),
            t.oddball_position.to_string(),
            t.delta_contrast().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trials csv>", e))?;
    Ok(())
}
