//! Effect processors and the intensity-scaled renderer.

mod eq;
mod reverb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;

pub use eq::{apply_eq, peaking_coefficients, Biquad, EqBand, EqSettings, EQ_BAND_COUNT};
pub use reverb::{apply_reverb, ReverbSettings, ReverbTopology, MAX_TAIL_SECS};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("descriptor {descriptor}: expected {expected} bands, found {found}")]
    BandCount {
        descriptor: String,
        expected: usize,
        found: usize,
    },
    #[error("descriptor {descriptor}: {field} {reason}")]
    Range {
        descriptor: String,
        field: String,
        reason: String,
    },
    #[error("filter instability: non-finite output for descriptor {0}")]
    FilterInstability(String),
    #[error("unstable reverb for descriptor {descriptor}: loop gain {gain} >= 1")]
    UnstableReverb { descriptor: String, gain: f64 },
    #[error("invalid effect level {0}: must be in (0, 1]")]
    Level(f64),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Intensity scale factor in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EffectLevel(f64);

impl EffectLevel {
    pub const LOW: EffectLevel = EffectLevel(0.3);
    pub const MEDIUM: EffectLevel = EffectLevel(0.6);
    pub const HIGH: EffectLevel = EffectLevel(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(DspError::Level(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn defaults() -> Vec<EffectLevel> {
        vec![Self::LOW, Self::MEDIUM, Self::HIGH]
    }
}

impl TryFrom<f64> for EffectLevel {
    type Error = DspError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EffectLevel> for f64 {
    fn from(l: EffectLevel) -> f64 {
        l.0
    }
}

impl std::fmt::Display for EffectLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Eq,
    Reverb,
}

impl EffectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectKind::Eq => "eq",
            EffectKind::Reverb => "reverb",
        }
    }
}

impl std::fmt::Display for EffectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EffectKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "eq" => Ok(EffectKind::Eq),
            "reverb" => Ok(EffectKind::Reverb),
            other => Err(format!("unknown effect {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Eq(EqSettings),
    Reverb(ReverbSettings),
}

impl Effect {
    pub fn kind(&self) -> EffectKind {
        match self {
            Effect::Eq(_) => EffectKind::Eq,
            Effect::Reverb(_) => EffectKind::Reverb,
        }
    }

    pub fn descriptor(&self) -> &str {
        match self {
            Effect::Eq(s) => &s.descriptor,
            Effect::Reverb(s) => &s.descriptor,
        }
    }
}

/// Applies `effect` at `level`. Deterministic: identical inputs give bit-identical output.
pub fn fx(audio: &AudioBuffer, effect: &Effect, level: EffectLevel) -> Result<AudioBuffer> {
    match effect {
        Effect::Eq(s) => apply_eq(audio, s, level),
        Effect::Reverb(s) => apply_reverb(audio, s, level),
    }
}
