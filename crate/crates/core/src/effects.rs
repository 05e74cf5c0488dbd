//! Effect experiment: descriptor-specific EQ/reverb settings are rendered at several
//! intensities from one reference recording, and the change in descriptor similarity
//! relative to the unprocessed reference is classified per level sweep.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{write_wav, AudioBuffer, AudioError, WavFormat};
use crate::dsp::{fx, DspError, Effect, EffectKind, EffectLevel, EqSettings, ReverbSettings};
use crate::embedding::{cosine_similarity, Embedding, EmbeddingError};
use crate::fsutil::{sha256_hex, write_atomic};
use crate::stats::{classify_sequence, StatsError, TrendClass, TREND_LEGEND};

pub const REFERENCE_ITEM: &str = "reference";

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    SettingsFile { path: PathBuf, reason: String },
    #[error("duplicate {effect} descriptor {descriptor}")]
    DuplicateDescriptor { effect: EffectKind, descriptor: String },
    #[error(transparent)]
    Settings(#[from] DspError),
    #[error("rendering {effect} for descriptor {descriptor}: {source}")]
    Render {
        effect: EffectKind,
        descriptor: String,
        source: DspError,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("level set is empty")]
    EmptyLevels,
    #[error("level set must be strictly increasing")]
    UnorderedLevels,
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("missing embedding for manifest item {0}")]
    MissingAudioEmbedding(String),
    #[error("missing text embedding for descriptor {0}")]
    MissingTextEmbedding(String),
    #[error("descriptor {descriptor} ({effect}, model {model}): missing level {level}")]
    MissingLevel {
        descriptor: String,
        effect: EffectKind,
        model: String,
        level: String,
    },
    #[error("descriptor {descriptor} ({effect}, model {model}): duplicate level {level}")]
    DuplicateLevel {
        descriptor: String,
        effect: EffectKind,
        model: String,
        level: String,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, EffectsError>;

/// Validated per-descriptor settings for each effect, keyed and ordered by descriptor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorSettingsMap {
    pub eq: BTreeMap<String, EqSettings>,
    pub reverb: BTreeMap<String, ReverbSettings>,
}

impl DescriptorSettingsMap {
    pub fn from_lists(eq: Vec<EqSettings>, reverb: Vec<ReverbSettings>) -> Result<Self> {
        let mut map = Self::default();
        for s in eq {
            s.validate()?;
            if map.eq.contains_key(&s.descriptor) {
                return Err(EffectsError::DuplicateDescriptor {
                    effect: EffectKind::Eq,
                    descriptor: s.descriptor,
                });
            }
            map.eq.insert(s.descriptor.clone(), s);
        }
        for s in reverb {
            s.validate()?;
            if map.reverb.contains_key(&s.descriptor) {
                return Err(EffectsError::DuplicateDescriptor {
                    effect: EffectKind::Reverb,
                    descriptor: s.descriptor,
                });
            }
            map.reverb.insert(s.descriptor.clone(), s);
        }
        Ok(map)
    }

    /// All descriptors across both effects, sorted.
    pub fn descriptors(&self) -> Vec<String> {
        self.eq
            .keys()
            .chain(self.reverb.keys())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn descriptors_for(&self, effect: EffectKind) -> Vec<String> {
        match effect {
            EffectKind::Eq => self.eq.keys().cloned().collect(),
            EffectKind::Reverb => self.reverb.keys().cloned().collect(),
        }
    }

    /// (effect, settings) pairs in render order: EQ then reverb, descriptors ascending.
    pub fn effects(&self) -> Vec<Effect> {
        self.eq
            .values()
            .cloned()
            .map(Effect::Eq)
            .chain(self.reverb.values().cloned().map(Effect::Reverb))
            .collect()
    }
}

fn read_json_list<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| EffectsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| EffectsError::SettingsFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads the EQ and reverb settings files (JSON arrays of per-descriptor records).
/// Either file may be omitted.
pub fn load_settings(eq_path: Option<&Path>, reverb_path: Option<&Path>) -> Result<DescriptorSettingsMap> {
    let eq = eq_path.map(read_json_list::<EqSettings>).transpose()?.unwrap_or_default();
    let reverb = reverb_path
        .map(read_json_list::<ReverbSettings>)
        .transpose()?
        .unwrap_or_default();
    DescriptorSettingsMap::from_lists(eq, reverb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub item_id: String,
    /// Relative to the manifest's directory.
    pub path: String,
    pub descriptor: Option<String>,
    pub effect: Option<EffectKind>,
    pub level: Option<f64>,
    pub provenance_hash: String,
}

impl ManifestItem {
    pub fn is_reference(&self) -> bool {
        self.effect.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderManifest {
    pub items: Vec<ManifestItem>,
}

impl RenderManifest {
    pub fn to_jsonl(&self) -> String {
        self.items
            .iter()
            .map(|i| serde_json::to_string(i).expect("manifest serializes") + "\n")
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        let mut ids = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: ManifestItem = serde_json::from_str(line).map_err(|e| EffectsError::Manifest {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            if !ids.insert(item.item_id.clone()) {
                return Err(EffectsError::Manifest {
                    line: idx + 1,
                    reason: format!("duplicate item {}", item.item_id),
                });
            }
            items.push(item);
        }
        Ok(Self { items })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_atomic(path, self.to_jsonl().as_bytes()).map_err(|source| EffectsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EffectsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn reference(&self) -> Option<&ManifestItem> {
        self.items.iter().find(|i| i.is_reference())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderOutcome {
    pub manifest: RenderManifest,
    pub rendered: usize,
    pub reused: usize,
    pub warnings: Vec<String>,
}

pub fn item_id(effect: EffectKind, descriptor: &str, level: EffectLevel) -> String {
    format!("{effect}/{descriptor}/{level}")
}

fn buffer_hash(buffer: &AudioBuffer) -> String {
    let mut bytes = Vec::with_capacity(8 + buffer.len() * buffer.num_channels() * 4);
    bytes.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    bytes.extend_from_slice(&(buffer.num_channels() as u32).to_le_bytes());
    for ch in buffer.channels() {
        for s in ch {
            bytes.extend_from_slice(&s.to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}

fn provenance(reference_hash: &str, effect: &Effect, level: EffectLevel) -> String {
    let settings = match effect {
        Effect::Eq(s) => serde_json::to_value(s),
        Effect::Reverb(s) => serde_json::to_value(s),
    }
    .expect("settings serialize");
    let doc = serde_json::json!({
        "reference": reference_hash,
        "effect": effect.kind(),
        "settings": settings,
        "level": level.value(),
    });
    sha256_hex(doc.to_string().as_bytes())
}

fn check_levels(levels: &[EffectLevel]) -> Result<()> {
    if levels.is_empty() {
        return Err(EffectsError::EmptyLevels);
    }
    if levels.windows(2).any(|w| w[1].value() <= w[0].value()) {
        return Err(EffectsError::UnorderedLevels);
    }
    Ok(())
}

/// Renders every (descriptor, effect, level) variant plus the untouched reference into
/// `out_dir` as float WAVs named by provenance hash. Files whose hash already exists are
/// reused rather than re-rendered.
pub fn render_variants(
    reference: &AudioBuffer,
    map: &DescriptorSettingsMap,
    levels: &[EffectLevel],
    out_dir: &Path,
) -> Result<RenderOutcome> {
    check_levels(levels)?;
    std::fs::create_dir_all(out_dir).map_err(|source| EffectsError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let ref_hash = buffer_hash(reference);

    let mut warnings = Vec::new();
    for s in map.eq.values() {
        let skipped = s.bands_above_nyquist(reference.sample_rate());
        if !skipped.is_empty() {
            warnings.push(format!(
                "eq descriptor {}: {} band(s) at/above Nyquist skipped",
                s.descriptor,
                skipped.len()
            ));
        }
    }

    let ref_file = format!("reference-{}.wav", &ref_hash[..16]);
    let ref_path = out_dir.join(&ref_file);
    let mut reused = 0;
    let mut rendered = 0;
    if ref_path.exists() {
        reused += 1;
    } else {
        write_wav(reference, &ref_path, WavFormat::Float32)?;
        rendered += 1;
    }
    let mut items = vec![ManifestItem {
        item_id: REFERENCE_ITEM.to_string(),
        path: ref_file,
        descriptor: None,
        effect: None,
        level: None,
        provenance_hash: ref_hash.clone(),
    }];

    let tasks: Vec<(Effect, EffectLevel)> = map
        .effects()
        .into_iter()
        .flat_map(|e| levels.iter().map(move |&l| (e.clone(), l)))
        .collect();
    let results: Vec<(ManifestItem, bool)> = tasks
        .par_iter()
        .map(|(effect, level)| {
            let hash = provenance(&ref_hash, effect, *level);
            let file = format!("{}-{}.wav", effect.kind(), &hash[..16]);
            let path = out_dir.join(&file);
            let fresh = !path.exists();
            if fresh {
                let out = fx(reference, effect, *level).map_err(|source| EffectsError::Render {
                    effect: effect.kind(),
                    descriptor: effect.descriptor().to_string(),
                    source,
                })?;
                write_wav(&out, &path, WavFormat::Float32)?;
            }
            Ok((
                ManifestItem {
                    item_id: item_id(effect.kind(), effect.descriptor(), *level),
                    path: file,
                    descriptor: Some(effect.descriptor().to_string()),
                    effect: Some(effect.kind()),
                    level: Some(level.value()),
                    provenance_hash: hash,
                },
                fresh,
            ))
        })
        .collect::<Result<_>>()?;
    for (item, fresh) in results {
        if fresh {
            rendered += 1;
        } else {
            reused += 1;
        }
        items.push(item);
    }

    Ok(RenderOutcome {
        manifest: RenderManifest { items },
        rendered,
        reused,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub descriptor: String,
    pub effect: EffectKind,
    pub level: f64,
    pub delta: f64,
}

/// delta = sim(descriptor text, processed audio) - sim(descriptor text, reference audio).
pub fn compute_deltas(
    manifest: &RenderManifest,
    text: &HashMap<String, Embedding>,
    audio: &HashMap<String, Embedding>,
) -> Result<Vec<DeltaRecord>> {
    let reference = manifest
        .reference()
        .ok_or_else(|| EffectsError::MissingAudioEmbedding(REFERENCE_ITEM.to_string()))?;
    let ref_emb = audio
        .get(&reference.item_id)
        .ok_or_else(|| EffectsError::MissingAudioEmbedding(reference.item_id.clone()))?;

    let mut out = Vec::new();
    for item in manifest.items.iter().filter(|i| !i.is_reference()) {
        let (Some(descriptor), Some(effect), Some(level)) = (&item.descriptor, item.effect, item.level) else {
            continue;
        };
        let t = text
            .get(descriptor)
            .ok_or_else(|| EffectsError::MissingTextEmbedding(descriptor.clone()))?;
        let a = audio
            .get(&item.item_id)
            .ok_or_else(|| EffectsError::MissingAudioEmbedding(item.item_id.clone()))?;
        let delta = cosine_similarity(t, a)? - cosine_similarity(t, ref_emb)?;
        out.push(DeltaRecord {
            descriptor: descriptor.clone(),
            effect,
            level,
            delta,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub descriptor: String,
    /// One class per model, in [`TrendTable::models`] order.
    pub classes: Vec<TrendClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendTable {
    pub effect: EffectKind,
    pub models: Vec<String>,
    pub rows: Vec<TrendRow>,
}

/// Classifies each descriptor's level sweep for every model. Rows are sorted by descriptor.
pub fn build_trend_table(
    effect: EffectKind,
    per_model: &[(String, Vec<DeltaRecord>)],
    levels: &[EffectLevel],
    tolerance: f64,
) -> Result<TrendTable> {
    check_levels(levels)?;
    let descriptors: BTreeSet<&str> = per_model
        .iter()
        .flat_map(|(_, ds)| ds.iter())
        .filter(|d| d.effect == effect)
        .map(|d| d.descriptor.as_str())
        .collect();

    let mut rows = Vec::with_capacity(descriptors.len());
    for descriptor in descriptors {
        let mut classes = Vec::with_capacity(per_model.len());
        for (model, deltas) in per_model {
            let mut by_level: Vec<Option<f64>> = vec![None; levels.len()];
            for d in deltas.iter().filter(|d| d.effect == effect && d.descriptor == descriptor) {
                let Some(k) = levels.iter().position(|l| l.value() == d.level) else {
                    continue;
                };
                if by_level[k].replace(d.delta).is_some() {
                    return Err(EffectsError::DuplicateLevel {
                        descriptor: descriptor.to_string(),
                        effect,
                        model: model.clone(),
                        level: levels[k].to_string(),
                    });
                }
            }
            let series = by_level
                .iter()
                .zip(levels)
                .map(|(v, l)| {
                    v.ok_or_else(|| EffectsError::MissingLevel {
                        descriptor: descriptor.to_string(),
                        effect,
                        model: model.clone(),
                        level: l.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            classes.push(classify_sequence(&series, tolerance)?);
        }
        rows.push(TrendRow {
            descriptor: descriptor.to_string(),
            classes,
        });
    }
    Ok(TrendTable {
        effect,
        models: per_model.iter().map(|(m, _)| m.clone()).collect(),
        rows,
    })
}

impl TrendTable {
    /// Markdown table of trend symbols followed by the legend line.
    pub fn render(&self) -> String {
        let mut out = format!("| Descriptor | {} |\n", self.models.join(" | "));
        out.push_str(&format!("|---|{}\n", "---|".repeat(self.models.len())));
        for row in &self.rows {
            let cells: Vec<&str> = row.classes.iter().map(|c| c.symbol()).collect();
            out.push_str(&format!("| {} | {} |\n", row.descriptor, cells.join(" | ")));
        }
        out.push_str(&format!("\nLegend: {TREND_LEGEND}\n"));
        out
    }

    pub fn count(&self, model_index: usize, class: TrendClass) -> usize {
        self.rows.iter().filter(|r| r.classes[model_index] == class).count()
    }
}
