//! 40-band parametric equalizer built from second-order peaking sections.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{DspError, EffectLevel, Result};
use crate::audio::AudioBuffer;

pub const EQ_BAND_COUNT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqBand {
    #[serde(rename = "freq_hz", alias = "center_hz")]
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub gain_db: f64,
}

impl EqBand {
    pub fn q(&self) -> f64 {
        self.center_hz / self.bandwidth_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqSettings {
    pub descriptor: String,
    pub bands: Vec<EqBand>,
}

impl EqSettings {
    /// 40 log-spaced bands from 20 Hz to 20 kHz, third-octave wide, all at 0 dB.
    pub fn flat(descriptor: impl Into<String>) -> Self {
        let ratio = 1000f64.powf(1.0 / (EQ_BAND_COUNT - 1) as f64);
        let width = 2f64.powf(1.0 / 6.0) - 2f64.powf(-1.0 / 6.0);
        let bands = (0..EQ_BAND_COUNT)
            .map(|k| {
                let center_hz = 20.0 * ratio.powi(k as i32);
                EqBand {
                    center_hz,
                    bandwidth_hz: center_hz * width,
                    gain_db: 0.0,
                }
            })
            .collect();
        Self {
            descriptor: descriptor.into(),
            bands,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.len() != EQ_BAND_COUNT {
            return Err(DspError::BandCount {
                descriptor: self.descriptor.clone(),
                expected: EQ_BAND_COUNT,
                found: self.bands.len(),
            });
        }
        let range = |field: String, reason: &str| DspError::Range {
            descriptor: self.descriptor.clone(),
            field,
            reason: reason.to_string(),
        };
        for (k, b) in self.bands.iter().enumerate() {
            if !(b.center_hz.is_finite() && b.center_hz > 0.0) {
                return Err(range(format!("bands[{k}].freq_hz"), "must be a positive frequency"));
            }
            if !(b.bandwidth_hz.is_finite() && b.bandwidth_hz > 0.0) {
                return Err(range(format!("bands[{k}].bandwidth_hz"), "must be positive"));
            }
            if !b.gain_db.is_finite() {
                return Err(range(format!("bands[{k}].gain_db"), "must be finite"));
            }
        }
        if let Some(k) = self
            .bands
            .windows(2)
            .position(|w| w[1].center_hz <= w[0].center_hz)
        {
            return Err(range(
                format!("bands[{}].freq_hz", k + 1),
                "center frequencies must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// Indices of bands that cannot be realized at `sample_rate`.
    pub fn bands_above_nyquist(&self, sample_rate: u32) -> Vec<usize> {
        let nyquist = sample_rate as f64 / 2.0;
        self.bands
            .iter()
            .enumerate()
            .filter(|(_, b)| b.center_hz >= nyquist)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Normalized biquad (a0 = 1), direct form I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn process(&self, samples: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for s in samples.iter_mut() {
            let x = *s;
            let y = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }

    /// |H(e^jw)| in dB at `freq_hz`.
    pub fn magnitude_db(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = -(self.b1 * s1 + self.b2 * s2);
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = -(self.a1 * s1 + self.a2 * s2);
        10.0 * ((nr * nr + ni * ni) / (dr * dr + di * di)).log10()
    }
}

/// Constant-Q peaking section: unity gain away from `center_hz`, exactly `gain_db` at it.
pub fn peaking_coefficients(center_hz: f64, q: f64, gain_db: f64, sample_rate: f64) -> Biquad {
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = 2.0 * PI * center_hz / sample_rate;
    let alpha = w0.sin() / (2.0 * q);
    let cos_w0 = w0.cos();
    let a0 = 1.0 + alpha / a;
    Biquad {
        b0: (1.0 + alpha * a) / a0,
        b1: -2.0 * cos_w0 / a0,
        b2: (1.0 - alpha * a) / a0,
        a1: -2.0 * cos_w0 / a0,
        a2: (1.0 - alpha / a) / a0,
    }
}

/// Cascade of peaking sections, band gains scaled by `level` in the dB domain.
/// Bands at or above Nyquist are skipped with a warning.
pub fn apply_eq(buffer: &AudioBuffer, settings: &EqSettings, level: EffectLevel) -> Result<AudioBuffer> {
    settings.validate()?;
    let fs = buffer.sample_rate() as f64;
    let skipped = settings.bands_above_nyquist(buffer.sample_rate());
    if !skipped.is_empty() {
        log::warn!(
            "descriptor {}: skipping {} band(s) at/above Nyquist ({} Hz): {:?}",
            settings.descriptor,
            skipped.len(),
            fs / 2.0,
            skipped
        );
    }

    let mut order: Vec<&EqBand> = settings
        .bands
        .iter()
        .filter(|b| b.center_hz < fs / 2.0)
        .collect();
    order.sort_by(|a, b| a.center_hz.total_cmp(&b.center_hz));
    let sections: Vec<Biquad> = order
        .into_iter()
        .map(|b| (b, level.value() * b.gain_db))
        .filter(|&(_, g)| g != 0.0)
        .map(|(b, g)| peaking_coefficients(b.center_hz, b.q(), g, fs))
        .collect();

    let mut channels = Vec::with_capacity(buffer.num_channels());
    for ch in buffer.channels() {
        let mut work: Vec<f64> = ch.iter().map(|&s| s as f64).collect();
        for section in &sections {
            section.process(&mut work);
        }
        if work.iter().any(|s| !s.is_finite()) {
            return Err(DspError::FilterInstability(settings.descriptor.clone()));
        }
        channels.push(work.into_iter().map(|s| s as f32).collect());
    }
    Ok(AudioBuffer::new(channels, buffer.sample_rate()).expect("shape preserved"))
}
