//! Comb/all-pass reverberator.
//!
//! Eight parallel feedback combs, each damped by a one-pole low-pass inside its loop and
//! optionally delay-modulated, are summed and diffused through four series all-pass
//! sections. The wet signal is mixed with the dry input by `level * wet_dry`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{DspError, EffectLevel, Result};
use crate::audio::AudioBuffer;

pub const MAX_TAIL_SECS: f64 = 10.0;

const COMB_COUNT: usize = 8;
const COMB_MIN_MS: f64 = 25.0;
const COMB_MAX_MS: f64 = 45.0;
const ALLPASS_MS: [f64; 4] = [7.0, 4.9, 2.9, 1.1];
const ALLPASS_GAIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverbSettings {
    pub descriptor: String,
    pub decay_s: f64,
    pub feedback_gain: f64,
    pub modulation_hz: f64,
    pub modulation_depth_ms: f64,
    pub lowpass_hz: f64,
    pub effect_gain: f64,
    pub wet_dry: f64,
}

impl ReverbSettings {
    /// A medium hall with modulation off.
    pub fn example(descriptor: impl Into<String>) -> Self {
        Self {
            descriptor: descriptor.into(),
            decay_s: 1.0,
            feedback_gain: 0.98,
            modulation_hz: 0.0,
            modulation_depth_ms: 0.0,
            lowpass_hz: 8000.0,
            effect_gain: 1.0,
            wet_dry: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |field: &str, reason: &str| DspError::Range {
            descriptor: self.descriptor.clone(),
            field: field.to_string(),
            reason: reason.to_string(),
        };
        let finite = |v: f64| v.is_finite();
        if !(finite(self.decay_s) && self.decay_s > 0.0) {
            return Err(range("decay_s", "must be > 0"));
        }
        if !(finite(self.feedback_gain) && (0.0..1.0).contains(&self.feedback_gain)) {
            return Err(range("feedback_gain", "must be in [0, 1)"));
        }
        if !(finite(self.modulation_hz) && self.modulation_hz >= 0.0) {
            return Err(range("modulation_hz", "must be >= 0"));
        }
        if !(finite(self.modulation_depth_ms) && self.modulation_depth_ms >= 0.0) {
            return Err(range("modulation_depth_ms", "must be >= 0"));
        }
        if !(finite(self.lowpass_hz) && self.lowpass_hz > 0.0) {
            return Err(range("lowpass_hz", "must be > 0"));
        }
        if !(finite(self.effect_gain) && self.effect_gain >= 0.0) {
            return Err(range("effect_gain", "must be >= 0"));
        }
        if !(finite(self.wet_dry) && (0.0..=1.0).contains(&self.wet_dry)) {
            return Err(range("wet_dry", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Delay lengths and loop gains resolved for one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverbTopology {
    pub comb_delays: Vec<usize>,
    pub comb_gains: Vec<f64>,
    pub allpass_delays: Vec<usize>,
    /// Seconds for the slowest path to fall 60 dB, capped at [`MAX_TAIL_SECS`].
    pub tail_secs: f64,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ReverbTopology {
    pub fn new(settings: &ReverbSettings, sample_rate: u32) -> Result<Self> {
        settings.validate()?;
        let fs = sample_rate as f64;

        let mut comb_delays: Vec<usize> = Vec::with_capacity(COMB_COUNT);
        for i in 0..COMB_COUNT {
            let ms = COMB_MIN_MS + (COMB_MAX_MS - COMB_MIN_MS) * i as f64 / (COMB_COUNT - 1) as f64;
            let mut d = ((ms * 1e-3 * fs).round() as usize).max(2);
            while comb_delays.iter().any(|&p| p >= d || gcd(p, d) != 1) {
                d += 1;
            }
            comb_delays.push(d);
        }
        let allpass_delays: Vec<usize> = ALLPASS_MS
            .iter()
            .map(|ms| ((ms * 1e-3 * fs).round() as usize).max(1))
            .collect();

        // Per-comb gain for a 60 dB decay in decay_s, never above the configured feedback.
        let comb_gains: Vec<f64> = comb_delays
            .iter()
            .map(|&d| {
                let tau = d as f64 / fs;
                settings.feedback_gain.min(10f64.powf(-3.0 * tau / settings.decay_s))
            })
            .collect();
        if let Some(&g) = comb_gains.iter().find(|g| **g >= 1.0) {
            return Err(DspError::UnstableReverb {
                descriptor: settings.descriptor.clone(),
                gain: g,
            });
        }

        let t60 = |delay: usize, gain: f64| {
            if gain <= 0.0 {
                delay as f64 / fs
            } else {
                3.0 * (delay as f64 / fs) / -gain.log10()
            }
        };
        let comb_tail = comb_delays
            .iter()
            .zip(&comb_gains)
            .map(|(&d, &g)| t60(d, g))
            .fold(0.0, f64::max);
        let allpass_tail: f64 = allpass_delays.iter().map(|&d| t60(d, ALLPASS_GAIN)).sum();
        let modulation_slack = settings.modulation_depth_ms * 1e-3;
        let tail_secs = (comb_tail + allpass_tail + modulation_slack).min(MAX_TAIL_SECS);

        Ok(Self {
            comb_delays,
            comb_gains,
            allpass_delays,
            tail_secs,
        })
    }

    pub fn tail_samples(&self, sample_rate: u32) -> usize {
        (self.tail_secs * sample_rate as f64).ceil() as usize
    }
}

struct Comb {
    line: Vec<f64>,
    write: usize,
    delay: f64,
    depth: f64,
    phase: f64,
    gain: f64,
    lp_coeff: f64,
    lp_state: f64,
}

impl Comb {
    #[inline]
    fn tick(&mut self, input: f64, lfo: f64) -> f64 {
        let len = self.line.len();
        let d = (self.delay + self.depth * (lfo + self.phase).sin()).max(1.0);
        let whole = d.floor();
        let frac = d - whole;
        let i0 = (self.write + len - whole as usize) % len;
        let i1 = (i0 + len - 1) % len;
        let out = self.line[i0] * (1.0 - frac) + self.line[i1] * frac;
        self.lp_state = (1.0 - self.lp_coeff) * out + self.lp_coeff * self.lp_state;
        self.line[self.write] = input + self.gain * self.lp_state;
        self.write = (self.write + 1) % len;
        out
    }
}

struct Allpass {
    line: Vec<f64>,
    pos: usize,
}

impl Allpass {
    #[inline]
    fn tick(&mut self, input: f64) -> f64 {
        let delayed = self.line[self.pos];
        let v = input + ALLPASS_GAIN * delayed;
        self.line[self.pos] = v;
        self.pos = (self.pos + 1) % self.line.len();
        delayed - ALLPASS_GAIN * v
    }
}

fn render_wet(input: &[f64], total: usize, topo: &ReverbTopology, settings: &ReverbSettings, fs: f64) -> Vec<f64> {
    let depth = settings.modulation_depth_ms * 1e-3 * fs;
    let lp_coeff = if settings.lowpass_hz >= fs / 2.0 {
        0.0
    } else {
        (-2.0 * PI * settings.lowpass_hz / fs).exp()
    };
    let mut combs: Vec<Comb> = topo
        .comb_delays
        .iter()
        .zip(&topo.comb_gains)
        .enumerate()
        .map(|(i, (&d, &g))| Comb {
            line: vec![0.0; d + depth.ceil() as usize + 2],
            write: 0,
            delay: d as f64,
            depth,
            phase: i as f64 * PI / 4.0,
            gain: g,
            lp_coeff,
            lp_state: 0.0,
        })
        .collect();
    let mut allpasses: Vec<Allpass> = topo
        .allpass_delays
        .iter()
        .map(|&d| Allpass {
            line: vec![0.0; d],
            pos: 0,
        })
        .collect();

    let bank_scale = settings.effect_gain / (COMB_COUNT as f64).sqrt();
    let lfo_step = 2.0 * PI * settings.modulation_hz / fs;
    let mut out = Vec::with_capacity(total);
    for n in 0..total {
        let x = input.get(n).copied().unwrap_or(0.0);
        let lfo = lfo_step * n as f64;
        let mut y: f64 = combs.iter_mut().map(|c| c.tick(x, lfo)).sum();
        for ap in allpasses.iter_mut() {
            y = ap.tick(y);
        }
        out.push(y * bank_scale);
    }
    out
}

/// Output is `input.len() + tail` frames; the first `input.len()` frames of the dry path
/// are the input itself with no latency.
pub fn apply_reverb(buffer: &AudioBuffer, settings: &ReverbSettings, level: EffectLevel) -> Result<AudioBuffer> {
    let fs = buffer.sample_rate();
    let topo = ReverbTopology::new(settings, fs)?;
    let total = buffer.len() + topo.tail_samples(fs);
    let w = level.value() * settings.wet_dry;

    let mut channels = Vec::with_capacity(buffer.num_channels());
    for ch in buffer.channels() {
        let dry: Vec<f64> = ch.iter().map(|&s| s as f64).collect();
        let wet = if w > 0.0 {
            render_wet(&dry, total, &topo, settings, fs as f64)
        } else {
            vec![0.0; total]
        };
        let mixed: Vec<f64> = (0..total)
            .map(|n| (1.0 - w) * dry.get(n).copied().unwrap_or(0.0) + w * wet[n])
            .collect();
        if mixed.iter().any(|s| !s.is_finite()) {
            return Err(DspError::FilterInstability(settings.descriptor.clone()));
        }
        channels.push(mixed.into_iter().map(|s| s as f32).collect());
    }
    Ok(AudioBuffer::new(channels, fs).expect("shape preserved"))
}
