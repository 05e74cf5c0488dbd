//! Run configuration: one TOML file, with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use timbre_core::dsp::EffectLevel;
use timbre_core::embedding::AdapterSpec;
use timbre_core::stats::DEFAULT_TOLERANCE;

use crate::error::{CliError, Context, Result};

/// Environment variable naming the embedding cache directory.
pub const CACHE_ENV: &str = "TIMBRE_BENCH_CACHE";

pub const PROMPT_PLACEHOLDER: &str = "{descriptor}";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdapter {
    #[serde(alias = "name")]
    model_name: String,
    command: String,
    #[serde(default)]
    expected_dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    adapters: Vec<RawAdapter>,
    output_dir: Option<PathBuf>,
    reference_audio: Option<PathBuf>,
    ratings_csv: Option<PathBuf>,
    instrument_audio_dir: Option<PathBuf>,
    eq_settings: Option<PathBuf>,
    reverb_settings: Option<PathBuf>,
    levels: Option<Vec<f64>>,
    tolerance: Option<f64>,
    prompt_template: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub adapter: Option<String>,
    pub levels: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub adapters: Vec<AdapterSpec>,
    pub reference_audio: Option<PathBuf>,
    pub ratings_csv: Option<PathBuf>,
    /// Holds `<instrument_id>.wav` or `<instrument_id>/*.wav` per instrument.
    pub instrument_audio_dir: Option<PathBuf>,
    pub eq_settings: Option<PathBuf>,
    pub reverb_settings: Option<PathBuf>,
    pub levels: Vec<EffectLevel>,
    pub tolerance: f64,
    pub prompt_template: Option<String>,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
}

fn resolve(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_absolute() { p } else { base.join(p) })
}

pub fn parse_levels(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .input("--levels")
}

impl RunConfig {
    /// Loads `path`, resolving relative paths against the file's directory. Flags win.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).input(&format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml(&text, &base, overrides)
    }

    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).input("config")?;

        let mut adapters: Vec<AdapterSpec> = raw
            .adapters
            .into_iter()
            .map(|a| AdapterSpec {
                command: a.command,
                model_name: a.model_name,
                expected_dim: a.expected_dim,
            })
            .collect();
        if let Some(name) = &overrides.adapter {
            adapters.retain(|a| &a.model_name == name);
            if adapters.is_empty() {
                return Err(CliError::Input(format!("--adapter {name}: no adapter with that name in config")));
            }
        }
        if adapters.is_empty() {
            return Err(CliError::Input("config: at least one adapter is required".into()));
        }
        for (i, a) in adapters.iter().enumerate() {
            if a.command.trim().is_empty() {
                return Err(CliError::Input(format!("adapter {}: empty command", a.model_name)));
            }
            if adapters[..i].iter().any(|b| b.model_name == a.model_name) {
                return Err(CliError::Input(format!("duplicate adapter name {}", a.model_name)));
            }
        }

        let level_values = overrides
            .levels
            .clone()
            .or(raw.levels)
            .unwrap_or_else(|| EffectLevel::defaults().into_iter().map(f64::from).collect());
        let levels = level_values
            .iter()
            .map(|&v| EffectLevel::new(v))
            .collect::<std::result::Result<Vec<_>, _>>()
            .input("levels")?;
        if levels.is_empty() || levels.windows(2).any(|w| w[1].value() <= w[0].value()) {
            return Err(CliError::Input(
                "levels must be non-empty and strictly increasing in (0, 1]".into(),
            ));
        }

        let tolerance = overrides.tolerance.or(raw.tolerance).unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(CliError::Input(format!("tolerance must be >= 0, got {tolerance}")));
        }
        if let Some(t) = &raw.prompt_template {
            if !t.contains(PROMPT_PLACEHOLDER) {
                return Err(CliError::Input(format!(
                    "prompt_template must contain {PROMPT_PLACEHOLDER}"
                )));
            }
        }

        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| resolve(base, raw.output_dir))
            .ok_or_else(|| CliError::Input("config: output_dir is required (or pass --out)".into()))?;
        let cache_dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| output_dir.join("cache"));

        Ok(Self {
            adapters,
            reference_audio: resolve(base, raw.reference_audio),
            ratings_csv: resolve(base, raw.ratings_csv),
            instrument_audio_dir: resolve(base, raw.instrument_audio_dir),
            eq_settings: resolve(base, raw.eq_settings),
            reverb_settings: resolve(base, raw.reverb_settings),
            levels,
            tolerance,
            prompt_template: raw.prompt_template,
            output_dir,
            cache_dir,
        })
    }

    /// Text sent to the adapter for a descriptor.
    pub fn prompt(&self, descriptor: &str) -> String {
        match &self.prompt_template {
            Some(t) => t.replace(PROMPT_PLACEHOLDER, descriptor),
            None => descriptor.to_string(),
        }
    }

    /// Returns the path when it is configured and exists, otherwise an input error.
    pub fn require<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        match value {
            None => Err(CliError::Input(format!("config: {field} is not set"))),
            Some(p) if !p.exists() => Err(CliError::Input(format!("{field}: {} does not exist", p.display()))),
            Some(p) => Ok(p),
        }
    }
}
