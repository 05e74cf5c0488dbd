//! Shared setup for the end-to-end tests: synthetic inputs, fixture embedders, and a
//! wrapper around the `timbre-bench` binary.
//!
//! Fixture vectors have 19 coordinates:
//! - 0..16: the instrument's human ratings; text for instrument descriptor d has a 1 at d.
//! - 16: pads every instrument vector to the same norm.
//! - 17: the effect axis; every descriptor text has a 1 here.
//! - 18: the reference axis; every rendered file has a 1 here.
//!
//! So an instrument's similarity to descriptor d is proportional to its rating for d, and
//! an effect render at level l sits at l on the effect axis (or -l for the flipped fixture).

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timbre_core::audio::{write_wav, AudioBuffer, WavFormat};
use timbre_core::dsp::{EqSettings, ReverbSettings};
use timbre_core::effects::RenderManifest;
use timbre_core::fsutil::sha256_file;

pub const DIM: usize = 19;
const PAD: usize = 16;
const EFFECT_AXIS: usize = 17;
const REFERENCE_AXIS: usize = 18;

pub const INSTRUMENT_DESCRIPTORS: [&str; 16] = [
    "bright",
    "dark",
    "raspy",
    "mellow",
    "thin",
    "vigorous",
    "descriptor_07",
    "descriptor_08",
    "descriptor_09",
    "descriptor_10",
    "descriptor_11",
    "descriptor_12",
    "descriptor_13",
    "descriptor_14",
    "descriptor_15",
    "descriptor_16",
];

pub const EQ_DESCRIPTORS: [&str; 20] = [
    "bright", "calm", "clear", "cold", "cool", "crisp", "dark", "gentle", "hard", "harsh", "heavy", "loud", "mellow",
    "peaceful", "sharp", "smooth", "soft", "soothing", "tinny", "warm",
];

pub const REVERB_DESCRIPTORS: [&str; 20] = [
    "bass", "big", "church", "clear", "deep", "distant", "distorted", "echo", "hall", "haunting", "hollow", "loud", "low",
    "muffled", "sad", "soft", "spacious", "strong", "tinny", "warm",
];

pub const CHINESE: usize = 37;
pub const WESTERN: usize = 24;

pub fn bench_bin() -> &'static str {
    env!("CARGO_BIN_EXE_timbre-bench")
}

pub fn oracle_bin() -> &'static str {
    env!("CARGO_BIN_EXE_oracle-adapter")
}

/// Runs `timbre-bench --config <config> <args...>` with the cache location taken from config.
pub fn bench(config: &Path, args: &[&str]) -> Output {
    Command::new(bench_bin())
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("TIMBRE_BENCH_CACHE")
        .output()
        .expect("timbre-bench runs")
}

pub fn ok(out: &Output) -> Result<String, String> {
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn vec_json(v: &[f64]) -> String {
    serde_json::to_string(v).unwrap()
}

fn tone(freq: f64, secs: f64, sr: u32) -> AudioBuffer {
    let n = (secs * sr as f64) as usize;
    let s = (0..n)
        .map(|i| (0.4 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin()) as f32)
        .collect();
    AudioBuffer::mono(s, sr).unwrap()
}

#[derive(Debug, Clone)]
pub struct InstrumentData {
    pub ids: Vec<String>,
    pub groups: Vec<&'static str>,
    pub ratings: Vec<[f64; 16]>,
    /// Clip files per instrument.
    pub clips: Vec<Vec<PathBuf>>,
    pub ratings_csv: PathBuf,
    pub clip_dir: PathBuf,
}

/// Writes a ratings table for 37 Chinese and 24 Western instruments plus one clip per
/// instrument (two for the first, to exercise clip averaging).
pub fn write_instruments(root: &Path, seed: u64) -> InstrumentData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clip_dir = root.join("clips");
    std::fs::create_dir_all(&clip_dir).unwrap();
    let mut data = InstrumentData {
        ids: Vec::new(),
        groups: Vec::new(),
        ratings: Vec::new(),
        clips: Vec::new(),
        ratings_csv: root.join("ratings.csv"),
        clip_dir: clip_dir.clone(),
    };
    let mut csv = String::from("instrument_id,instrument_name,group,descriptor,rating\n");
    for k in 0..CHINESE + WESTERN {
        let (id, group) = if k < CHINESE {
            (format!("cn{:02}", k + 1), "chinese")
        } else {
            (format!("we{:02}", k - CHINESE + 1), "western")
        };
        let mut h = [0.0; 16];
        for v in h.iter_mut() {
            *v = (rng.gen_range(10..=90) as f64) / 10.0;
        }
        for (d, name) in INSTRUMENT_DESCRIPTORS.iter().enumerate() {
            writeln!(csv, "{id},Instrument {id},{group},{name},{}", h[d]).unwrap();
        }
        let freq = 110.0 + 13.0 * k as f64;
        let clips = if k == 0 {
            let dir = clip_dir.join(&id);
            std::fs::create_dir_all(&dir).unwrap();
            vec![dir.join("a.wav"), dir.join("b.wav")]
        } else {
            vec![clip_dir.join(format!("{id}.wav"))]
        };
        for (j, p) in clips.iter().enumerate() {
            write_wav(&tone(freq + 3.0 * j as f64, 0.1, 8000), p, WavFormat::Pcm16).unwrap();
        }
        data.ids.push(id);
        data.groups.push(group);
        data.ratings.push(h);
        data.clips.push(clips);
    }
    std::fs::write(&data.ratings_csv, csv).unwrap();
    data
}

#[derive(Debug, Clone)]
pub struct EffectsData {
    pub reference: PathBuf,
    pub eq_settings: PathBuf,
    pub reverb_settings: PathBuf,
}

/// A 0.5 s two-tone reference and distinct synthetic settings for every descriptor.
pub fn write_effects(root: &Path) -> EffectsData {
    let sr = 16000;
    let n = sr / 2;
    let s = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            (0.3 * (2.0 * std::f64::consts::PI * 220.0 * t).sin() + 0.2 * (2.0 * std::f64::consts::PI * 3100.0 * t).sin())
                as f32
        })
        .collect();
    let reference = root.join("reference.wav");
    write_wav(&AudioBuffer::mono(s, sr as u32).unwrap(), &reference, WavFormat::Pcm16).unwrap();

    let eq: Vec<EqSettings> = EQ_DESCRIPTORS
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut s = EqSettings::flat(*d);
            for (b, band) in s.bands.iter_mut().enumerate() {
                band.gain_db = 6.0 * (((b + 3 * k) as f64) * 0.37).sin();
            }
            s
        })
        .collect();
    let reverb: Vec<ReverbSettings> = REVERB_DESCRIPTORS
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut s = ReverbSettings::example(*d);
            s.decay_s = 0.3 + 0.04 * k as f64;
            s.wet_dry = 0.3 + 0.02 * k as f64;
            s.modulation_hz = 0.5;
            s.modulation_depth_ms = 0.5;
            s
        })
        .collect();
    let data = EffectsData {
        reference,
        eq_settings: root.join("eq.json"),
        reverb_settings: root.join("reverb.json"),
    };
    std::fs::write(&data.eq_settings, serde_json::to_string_pretty(&eq).unwrap()).unwrap();
    std::fs::write(&data.reverb_settings, serde_json::to_string_pretty(&reverb).unwrap()).unwrap();
    data
}

pub fn all_descriptors() -> BTreeSet<&'static str> {
    INSTRUMENT_DESCRIPTORS
        .iter()
        .chain(&EQ_DESCRIPTORS)
        .chain(&REVERB_DESCRIPTORS)
        .copied()
        .collect()
}

/// Fixture lines for descriptor texts and instrument clips.
pub fn instrument_fixture(instruments: Option<&InstrumentData>) -> String {
    let mut out = String::new();
    for d in all_descriptors() {
        let mut v = vec![0.0; DIM];
        v[EFFECT_AXIS] = 1.0;
        if let Some(k) = INSTRUMENT_DESCRIPTORS.iter().position(|x| *x == d) {
            v[k] = 1.0;
        }
        writeln!(out, r#"{{"kind":"text","text":"{d}","vector":{}}}"#, vec_json(&v)).unwrap();
    }
    if let Some(data) = instruments {
        let norm2 = |h: &[f64; 16]| h.iter().map(|v| v * v).sum::<f64>();
        let c = data.ratings.iter().map(norm2).fold(0.0, f64::max) + 1.0;
        for (h, clips) in data.ratings.iter().zip(&data.clips) {
            let mut v = vec![0.0; DIM];
            v[..16].copy_from_slice(h);
            v[PAD] = (c - norm2(h)).sqrt();
            for p in clips {
                let sha = sha256_file(p).unwrap();
                writeln!(out, r#"{{"kind":"audio","sha256":"{sha}","vector":{}}}"#, vec_json(&v)).unwrap();
            }
        }
    }
    out
}

/// Fixture lines for rendered files: the reference on its own axis, a level-l render at
/// `sign * l` on the effect axis.
pub fn render_fixture(render_dir: &Path, sign: f64) -> String {
    let manifest = RenderManifest::load(render_dir.join("manifest.jsonl")).unwrap();
    let mut out = String::new();
    for item in &manifest.items {
        let mut v = vec![0.0; DIM];
        v[REFERENCE_AXIS] = 1.0;
        if let Some(l) = item.level {
            v[EFFECT_AXIS] = sign * l;
        }
        let sha = sha256_file(render_dir.join(&item.path)).unwrap();
        writeln!(out, r#"{{"kind":"audio","sha256":"{sha}","vector":{}}}"#, vec_json(&v)).unwrap();
    }
    out
}

pub struct Setup {
    pub root: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    pub fixture_up: PathBuf,
    pub fixture_down: PathBuf,
    pub instruments: Option<InstrumentData>,
    pub effects: Option<EffectsData>,
}

/// Writes inputs and a config with two fixture adapters: `oracle` and `oracle-flipped`.
pub fn setup(root: &Path, instruments: bool, effects: bool) -> Setup {
    let instruments = instruments.then(|| write_instruments(root, 7));
    let effects = effects.then(|| write_effects(root));
    let out = root.join("out");
    let fixture_up = root.join("fixture_up.jsonl");
    let fixture_down = root.join("fixture_down.jsonl");
    let mut cfg = String::from("output_dir = \"out\"\n");
    if let Some(i) = &instruments {
        writeln!(cfg, "ratings_csv = {:?}", i.ratings_csv.to_str().unwrap()).unwrap();
        writeln!(cfg, "instrument_audio_dir = {:?}", i.clip_dir.to_str().unwrap()).unwrap();
    }
    if effects.is_some() {
        cfg.push_str("reference_audio = \"reference.wav\"\neq_settings = \"eq.json\"\nreverb_settings = \"reverb.json\"\n");
    }
    for (name, fixture) in [("oracle", &fixture_up), ("oracle-flipped", &fixture_down)] {
        writeln!(
            cfg,
            "\n[[adapters]]\nname = \"{name}\"\ncommand = \"'{}' --fixture '{}' --model {name}\"\nexpected_dim = {DIM}",
            oracle_bin(),
            fixture.display()
        )
        .unwrap();
    }
    let config = root.join("bench.toml");
    std::fs::write(&config, cfg).unwrap();
    let s = Setup {
        root: root.to_path_buf(),
        config,
        out,
        fixture_up,
        fixture_down,
        instruments,
        effects,
    };
    s.write_fixtures();
    s
}

impl Setup {
    /// (Re)writes both fixtures from the current inputs and whatever has been rendered.
    pub fn write_fixtures(&self) {
        let base = instrument_fixture(self.instruments.as_ref());
        let render_dir = self.out.join("render");
        let rendered = render_dir.join("manifest.jsonl").is_file();
        for (path, sign) in [(&self.fixture_up, 1.0), (&self.fixture_down, -1.0)] {
            let mut text = base.clone();
            if rendered {
                text.push_str(&render_fixture(&render_dir, sign));
            }
            std::fs::write(path, text).unwrap();
        }
    }

    /// Renders, then refreshes the fixtures so they know the rendered files.
    pub fn render(&self) -> Result<String, String> {
        let s = ok(&bench(&self.config, &["render"]))?;
        self.write_fixtures();
        Ok(s)
    }
}

/// Relative path -> bytes for every non-WAV file under `dir`, skipping the cache.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
            if rel == "cache" {
                continue;
            }
            if p.is_dir() {
                walk(base, &p, out);
            } else if p.extension().is_some_and(|x| x != "wav") {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
