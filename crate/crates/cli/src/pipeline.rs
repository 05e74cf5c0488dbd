//! The `render`, `embed`, `eval-instruments` and `eval-effects` commands.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use timbre_core::audio::read_wav;
use timbre_core::dsp::EffectKind;
use timbre_core::effects::{
    build_trend_table, compute_deltas, load_settings, render_variants, DeltaRecord, DescriptorSettingsMap,
    RenderManifest, TrendTable,
};
use timbre_core::embedding::{save_embeddings, AdapterSpec, EmbedRequest, Embedding, EmbeddingCache};
use timbre_core::instruments::{
    compute_similarity_matrix, descriptor_level_correlation, group_summaries, instrument_level_correlation,
    InstrumentCorrelation, RatingsTable,
};
use timbre_core::stats::{summarize_correlations, CorrelationSummary, TrendClass};

use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};
use crate::tables::*;

pub const RENDER_DIR: &str = "render";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const EMBEDDINGS_DIR: &str = "embeddings";
pub const INSTRUMENTS_DIR: &str = "instruments";
pub const EFFECTS_DIR: &str = "effects";
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone)]
pub struct RenderSummary {
    pub manifest: RenderManifest,
    pub manifest_path: PathBuf,
    pub rendered: usize,
    pub reused: usize,
}

fn settings(cfg: &RunConfig) -> Result<DescriptorSettingsMap> {
    if cfg.eq_settings.is_none() && cfg.reverb_settings.is_none() {
        return Err(CliError::Input("config: neither eq_settings nor reverb_settings is set".into()));
    }
    let eq = cfg.eq_settings.as_ref().map(|_| cfg.require("eq_settings", &cfg.eq_settings)).transpose()?;
    let reverb = cfg
        .reverb_settings
        .as_ref()
        .map(|_| cfg.require("reverb_settings", &cfg.reverb_settings))
        .transpose()?;
    load_settings(eq, reverb).input("effect settings")
}

/// Renders every effect variant plus the reference, reusing files already present.
pub fn render(cfg: &RunConfig) -> Result<RenderSummary> {
    let ref_path = cfg.require("reference_audio", &cfg.reference_audio)?;
    let reference = read_wav(ref_path).input("reference_audio")?;
    let map = settings(cfg)?;
    let dir = cfg.output_dir.join(RENDER_DIR);
    let outcome = render_variants(&reference, &map, &cfg.levels, &dir).internal("render")?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    outcome.manifest.save(&manifest_path).internal("manifest")?;
    Ok(RenderSummary {
        manifest: outcome.manifest,
        manifest_path,
        rendered: outcome.rendered,
        reused: outcome.reused,
    })
}

fn absolute(p: &Path) -> Result<String> {
    std::path::absolute(p)
        .internal(&p.display().to_string())
        .map(|p| p.to_string_lossy().into_owned())
}

fn text_id(descriptor: &str) -> String {
    format!("text/{descriptor}")
}

fn text_requests(cfg: &RunConfig, descriptors: &[String]) -> Vec<EmbedRequest> {
    descriptors
        .iter()
        .map(|d| EmbedRequest::text(text_id(d), cfg.prompt(d)))
        .collect()
}

fn manifest_requests(manifest: &RenderManifest, render_dir: &Path) -> Result<Vec<EmbedRequest>> {
    manifest
        .items
        .iter()
        .map(|i| Ok(EmbedRequest::audio(i.item_id.clone(), absolute(&render_dir.join(&i.path))?)))
        .collect()
}

fn clip_id(instrument: &str, k: usize) -> String {
    format!("clip/{instrument}/{k}")
}

/// `<dir>/<id>.wav`, or every `*.wav` under `<dir>/<id>/` in name order.
fn instrument_clips(dir: &Path, table: &RatingsTable) -> Result<Vec<(String, Vec<PathBuf>)>> {
    table
        .instruments
        .iter()
        .map(|inst| {
            let single = dir.join(format!("{}.wav", inst.id));
            if single.is_file() {
                return Ok((inst.id.clone(), vec![single]));
            }
            let sub = dir.join(&inst.id);
            let mut clips: Vec<PathBuf> = match std::fs::read_dir(&sub) {
                Ok(entries) => entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                    .collect(),
                Err(_) => Vec::new(),
            };
            clips.sort();
            if clips.is_empty() {
                return Err(CliError::Input(format!(
                    "no audio clip for instrument {} in {}",
                    inst.id,
                    dir.display()
                )));
            }
            Ok((inst.id.clone(), clips))
        })
        .collect()
}

fn clip_requests(clips: &[(String, Vec<PathBuf>)]) -> Result<Vec<EmbedRequest>> {
    let mut out = Vec::new();
    for (inst, paths) in clips {
        for (k, p) in paths.iter().enumerate() {
            out.push(EmbedRequest::audio(clip_id(inst, k), absolute(p)?));
        }
    }
    Ok(out)
}

fn embed(cfg: &RunConfig, spec: &AdapterSpec, requests: &[EmbedRequest]) -> Result<HashMap<String, Embedding>> {
    let cache = EmbeddingCache::new(&cfg.cache_dir);
    let (embs, stats) = cache
        .embed(spec, requests)
        .internal(&format!("adapter {}", spec.model_name))?;
    log::info!(
        "{}: {} embeddings ({} cached, {} computed)",
        spec.model_name,
        embs.len(),
        stats.hits,
        stats.misses
    );
    Ok(embs.into_iter().map(|e| (e.id().to_string(), e)).collect())
}

fn text_map(descriptors: &[String], embs: &HashMap<String, Embedding>) -> Result<HashMap<String, Embedding>> {
    descriptors
        .iter()
        .map(|d| {
            embs.get(&text_id(d))
                .cloned()
                .map(|e| (d.clone(), e))
                .ok_or_else(|| CliError::Internal(format!("missing text embedding for {d}")))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct EmbedSummary {
    /// (model, number of embeddings written, path)
    pub written: Vec<(String, usize, PathBuf)>,
}

/// Embeds every configured item (rendered variants, instrument clips, descriptor texts)
/// with each adapter and writes `embeddings/<model>.jsonl`.
pub fn embed_all(cfg: &RunConfig) -> Result<EmbedSummary> {
    let mut requests = Vec::new();
    let mut descriptors: Vec<String> = Vec::new();
    let has_effects = cfg.reference_audio.is_some() && (cfg.eq_settings.is_some() || cfg.reverb_settings.is_some());
    let has_instruments = cfg.ratings_csv.is_some();
    if !has_effects && !has_instruments {
        return Err(CliError::Input(
            "config: nothing to embed (set reference_audio with effect settings, or ratings_csv)".into(),
        ));
    }
    if has_effects {
        let rendered = render(cfg)?;
        requests.extend(manifest_requests(&rendered.manifest, &cfg.output_dir.join(RENDER_DIR))?);
        descriptors.extend(settings(cfg)?.descriptors());
    }
    if has_instruments {
        let table = load_ratings(cfg)?;
        let dir = cfg.require("instrument_audio_dir", &cfg.instrument_audio_dir)?;
        requests.extend(clip_requests(&instrument_clips(dir, &table)?)?);
        descriptors.extend(table.descriptors);
    }
    descriptors.sort();
    descriptors.dedup();
    requests.extend(text_requests(cfg, &descriptors));

    let mut summary = EmbedSummary::default();
    for spec in &cfg.adapters {
        let map = embed(cfg, spec, &requests)?;
        let ordered: Vec<Embedding> = requests.iter().map(|r| map[&r.id].clone()).collect();
        let path = cfg
            .output_dir
            .join(EMBEDDINGS_DIR)
            .join(format!("{}.jsonl", model_dir_name(&spec.model_name)));
        save_embeddings(&ordered, &path).internal("embeddings")?;
        summary.written.push((spec.model_name.clone(), ordered.len(), path));
    }
    Ok(summary)
}

fn load_ratings(cfg: &RunConfig) -> Result<RatingsTable> {
    let path = cfg.require("ratings_csv", &cfg.ratings_csv)?;
    RatingsTable::load(path).input("ratings_csv")
}

#[derive(Debug, Clone)]
pub struct InstrumentModelResult {
    pub model: String,
    pub descriptors: Vec<(String, Option<f64>)>,
    pub descriptor_summary: CorrelationSummary,
    pub instruments: Vec<InstrumentCorrelation>,
    pub group_summaries: Vec<(String, CorrelationSummary)>,
}

fn summary_row(scope: &str, s: &CorrelationSummary) -> SummaryRow {
    SummaryRow {
        scope: scope.to_string(),
        positive: s.positive_count,
        negative: s.negative_count,
        defined: s.defined_count,
        undefined: s.undefined_count,
        mean_r: fmt_opt(s.mean_r),
    }
}

/// Descriptor- and instrument-level correlation between similarity and human ratings.
pub fn eval_instruments(cfg: &RunConfig) -> Result<Vec<InstrumentModelResult>> {
    let table = load_ratings(cfg)?;
    let dir = cfg.require("instrument_audio_dir", &cfg.instrument_audio_dir)?;
    let clips = instrument_clips(dir, &table)?;
    let mut requests = clip_requests(&clips)?;
    requests.extend(text_requests(cfg, &table.descriptors));

    let out_root = cfg.output_dir.join(INSTRUMENTS_DIR);
    let mut results = Vec::new();
    let mut index = InstrumentsIndex { models: Vec::new() };
    for spec in &cfg.adapters {
        let embs = embed(cfg, spec, &requests)?;
        let mut audio = HashMap::new();
        for (inst, paths) in &clips {
            let items: Vec<Embedding> = (0..paths.len()).map(|k| embs[&clip_id(inst, k)].clone()).collect();
            let mean = Embedding::mean(inst.clone(), &items).internal(&format!("instrument {inst}"))?;
            audio.insert(inst.clone(), mean);
        }
        let text = text_map(&table.descriptors, &embs)?;
        let sims = compute_similarity_matrix(&table, &audio, &text).internal("similarity")?;
        let descriptors = descriptor_level_correlation(&sims, &table).input("descriptor-level correlation")?;
        let instruments = instrument_level_correlation(&sims, &table).input("instrument-level correlation")?;
        let descriptor_summary = summarize_correlations(&descriptors);
        let groups: Vec<(String, CorrelationSummary)> = group_summaries(&instruments)
            .into_iter()
            .map(|(g, s)| (g.as_str().to_string(), s))
            .collect();

        let dir_name = model_dir_name(&spec.model_name);
        let model_dir = out_root.join(&dir_name);
        write_csv(
            &model_dir.join("descriptor_correlations.csv"),
            &descriptors
                .iter()
                .map(|(d, r)| DescriptorRow {
                    descriptor: d.clone(),
                    r: fmt_opt(*r),
                })
                .collect::<Vec<_>>(),
        )?;
        write_csv(
            &model_dir.join("instrument_correlations.csv"),
            &instruments
                .iter()
                .map(|c| InstrumentRow {
                    instrument: c.instrument.clone(),
                    group: c.group.as_str().to_string(),
                    r: fmt_opt(c.r),
                })
                .collect::<Vec<_>>(),
        )?;
        let mut scatter = Vec::new();
        for (i, inst) in table.instruments.iter().enumerate() {
            for (d, desc) in table.descriptors.iter().enumerate() {
                scatter.push(ScatterRow {
                    instrument: inst.id.clone(),
                    descriptor: desc.clone(),
                    human_rating: table.ratings[i][d],
                    similarity: sims.values[i][d],
                });
            }
        }
        write_csv(&model_dir.join("scatter.csv"), &scatter)?;
        let mut summary = vec![summary_row("descriptors", &descriptor_summary)];
        summary.extend(groups.iter().map(|(g, s)| summary_row(g, s)));
        write_csv(&model_dir.join("summary.csv"), &summary)?;

        index.models.push(ModelEntry {
            name: spec.model_name.clone(),
            dir: dir_name,
        });
        results.push(InstrumentModelResult {
            model: spec.model_name.clone(),
            descriptors,
            descriptor_summary,
            instruments,
            group_summaries: groups,
        });
    }
    write_json(&out_root.join(INDEX_FILE), &index)?;
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct EffectsResult {
    pub deltas: Vec<(String, Vec<DeltaRecord>)>,
    pub tables: Vec<TrendTable>,
    pub rendered: usize,
    pub reused: usize,
}

/// Renders, embeds and classifies the similarity change of every descriptor's level sweep.
pub fn eval_effects(cfg: &RunConfig) -> Result<EffectsResult> {
    let rendered = render(cfg)?;
    let map = settings(cfg)?;
    let descriptors = map.descriptors();
    let render_dir = cfg.output_dir.join(RENDER_DIR);
    let mut requests = manifest_requests(&rendered.manifest, &render_dir)?;
    requests.extend(text_requests(cfg, &descriptors));

    let mut per_model = Vec::new();
    for spec in &cfg.adapters {
        let embs = embed(cfg, spec, &requests)?;
        let text = text_map(&descriptors, &embs)?;
        let deltas = compute_deltas(&rendered.manifest, &text, &embs).internal("deltas")?;
        per_model.push((spec.model_name.clone(), deltas));
    }

    let out = cfg.output_dir.join(EFFECTS_DIR);
    let mut tables = Vec::new();
    let mut counts = Vec::new();
    let effects: Vec<EffectKind> = [EffectKind::Eq, EffectKind::Reverb]
        .into_iter()
        .filter(|&e| !map.descriptors_for(e).is_empty())
        .collect();
    for &effect in &effects {
        let table = build_trend_table(effect, &per_model, &cfg.levels, cfg.tolerance).internal("trends")?;
        let deltas: Vec<DeltaRow> = per_model
            .iter()
            .flat_map(|(model, ds)| {
                ds.iter().filter(|d| d.effect == effect).map(move |d| DeltaRow {
                    descriptor: d.descriptor.clone(),
                    effect: effect.to_string(),
                    level: d.level,
                    model: model.clone(),
                    delta: d.delta,
                })
            })
            .collect();
        write_csv(&out.join(format!("deltas_{effect}.csv")), &deltas)?;

        let trend_rows: Vec<TrendCsvRow> = table
            .rows
            .iter()
            .flat_map(|row| {
                table.models.iter().zip(&row.classes).map(|(m, c)| TrendCsvRow {
                    descriptor: row.descriptor.clone(),
                    model: m.clone(),
                    trend: c.name().to_string(),
                    symbol: c.symbol().to_string(),
                })
            })
            .collect();
        write_csv(&out.join(format!("trends_{effect}.csv")), &trend_rows)?;
        write_text(&out.join(format!("trends_{effect}.md")), &table.render())?;

        for (k, model) in table.models.iter().enumerate() {
            counts.push(TrendCountRow {
                effect: effect.to_string(),
                model: model.clone(),
                monotonic_up: table.count(k, TrendClass::MonotonicUp),
                monotonic_down: table.count(k, TrendClass::MonotonicDown),
                peaked: table.count(k, TrendClass::Peaked),
                dipped: table.count(k, TrendClass::Dipped),
                flat: table.count(k, TrendClass::Flat),
                total: table.rows.len(),
            });
        }
        tables.push(table);
    }
    write_csv(&out.join("trend_counts.csv"), &counts)?;
    write_json(
        &out.join(INDEX_FILE),
        &EffectsIndex {
            models: cfg.adapters.iter().map(|a| a.model_name.clone()).collect(),
            effects: effects.iter().map(|e| e.to_string()).collect(),
            levels: cfg.levels.iter().map(|l| l.value()).collect(),
            tolerance: cfg.tolerance,
        },
    )?;
    Ok(EffectsResult {
        deltas: per_model,
        tables,
        rendered: rendered.rendered,
        reused: rendered.reused,
    })
}

