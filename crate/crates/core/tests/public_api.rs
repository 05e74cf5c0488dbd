use std::collections::HashMap;

use approx::assert_abs_diff_eq;
use timbre_core::audio::{read_wav, AudioBuffer};
use timbre_core::dsp::{EffectKind, EffectLevel, EqSettings, ReverbSettings};
use timbre_core::effects::{
    build_trend_table, compute_deltas, render_variants, DescriptorSettingsMap, RenderManifest,
};
use timbre_core::embedding::{cosine_similarity, load_embeddings, save_embeddings, Embedding, Modality};
use timbre_core::instruments::{
    compute_similarity_matrix, descriptor_level_correlation, group_summaries, instrument_level_correlation,
    InstrumentGroup, RatingsTable,
};
use timbre_core::stats::TrendClass;

fn reference() -> AudioBuffer {
    let s = (0..4000).map(|i| ((i as f32) * 0.031).sin() * 0.4).collect();
    AudioBuffer::mono(s, 8000).unwrap()
}

fn settings() -> DescriptorSettingsMap {
    let mut warm = EqSettings::flat("warm");
    let mut bright = EqSettings::flat("bright");
    for (k, b) in warm.bands.iter_mut().enumerate() {
        b.gain_db = if k < 20 { 4.0 } else { -4.0 };
    }
    for (k, b) in bright.bands.iter_mut().enumerate() {
        b.gain_db = if k < 20 { -3.0 } else { 5.0 };
    }
    let mut hall = ReverbSettings::example("warm");
    hall.decay_s = 0.4;
    DescriptorSettingsMap::from_lists(vec![warm, bright], vec![hall]).unwrap()
}

/// Level l maps to (sign * l, 1), the reference to (0, 1), every text to (1, 0).
fn monotone_embeddings(manifest: &RenderManifest, sign: f64) -> HashMap<String, Embedding> {
    manifest
        .items
        .iter()
        .map(|i| {
            let v = vec![sign * i.level.unwrap_or(0.0), 1.0];
            (i.item_id.clone(), Embedding::new(&i.item_id, Modality::Audio, "m", v).unwrap())
        })
        .collect()
}

#[test]
fn effect_pipeline_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let map = settings();
    let levels = EffectLevel::defaults();
    let outcome = render_variants(&reference(), &map, &levels, dir.path()).unwrap();
    assert_eq!(outcome.manifest.items.len(), 3 * 3 + 1);
    assert_eq!(outcome.rendered, 10);

    outcome.manifest.save(dir.path().join("manifest.jsonl")).unwrap();
    let manifest = RenderManifest::load(dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(manifest, outcome.manifest);
    for item in &manifest.items {
        let audio = read_wav(dir.path().join(&item.path)).unwrap();
        assert_eq!(audio.sample_rate(), 8000);
        assert!(audio.len() >= 4000);
    }

    let text: HashMap<String, Embedding> = ["warm", "bright"]
        .iter()
        .map(|d| (d.to_string(), Embedding::new(*d, Modality::Text, "m", vec![1.0, 0.0]).unwrap()))
        .collect();
    let up = compute_deltas(&manifest, &text, &monotone_embeddings(&manifest, 1.0)).unwrap();
    let down = compute_deltas(&manifest, &text, &monotone_embeddings(&manifest, -1.0)).unwrap();
    assert_eq!(up.len(), 9);
    for d in &up {
        assert_abs_diff_eq!(d.delta, d.level / (d.level * d.level + 1.0).sqrt(), epsilon = 1e-12);
    }

    let per_model = vec![("up".to_string(), up), ("down".to_string(), down)];
    let eq = build_trend_table(EffectKind::Eq, &per_model, &levels, 1e-4).unwrap();
    assert_eq!(
        eq.rows.iter().map(|r| r.descriptor.as_str()).collect::<Vec<_>>(),
        ["bright", "warm"]
    );
    assert_eq!(eq.count(0, TrendClass::MonotonicUp), 2);
    assert_eq!(eq.count(1, TrendClass::MonotonicDown), 2);
    let reverb = build_trend_table(EffectKind::Reverb, &per_model, &levels, 1e-4).unwrap();
    assert_eq!(reverb.rows.len(), 1);
    assert!(reverb.render().contains("| warm | ↑ | ↓ |"));

    let again = render_variants(&reference(), &map, &levels, dir.path()).unwrap();
    assert_eq!((again.rendered, again.reused), (0, 10));
    assert_eq!(again.manifest, manifest);
}

#[test]
fn embedding_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.jsonl");
    let embs = vec![
        Embedding::new("a", Modality::Audio, "m", vec![0.1, 0.2, 0.3]).unwrap(),
        Embedding::new("t", Modality::Text, "m", vec![1.0 / 3.0, -2.5, 1e-300]).unwrap(),
    ];
    save_embeddings(&embs, &path).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert_eq!(back, embs);
    assert_abs_diff_eq!(
        cosine_similarity(&back[0], &back[1]).unwrap(),
        cosine_similarity(&embs[0], &embs[1]).unwrap(),
        epsilon = 1e-15
    );
}

#[test]
fn instrument_profile_correlation_ignores_audio_scale() {
    let mut csv = String::from("instrument_id,instrument_name,group,descriptor,rating\n");
    let ratings = [[2.0, 5.0, 7.0, 1.0], [8.0, 3.0, 4.0, 6.0], [5.0, 5.5, 1.0, 9.0], [3.0, 7.0, 2.0, 4.5]];
    let groups = ["chinese", "chinese", "western", "western"];
    let descriptors = ["bright", "dark", "raspy", "mellow"];
    for (i, h) in ratings.iter().enumerate() {
        for (d, name) in descriptors.iter().enumerate() {
            csv.push_str(&format!("i{i},Inst {i},{},{name},{}\n", groups[i], h[d]));
        }
    }
    let table = RatingsTable::from_csv(csv.as_bytes()).unwrap();
    let text: HashMap<String, Embedding> = descriptors
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let mut v = vec![0.0; 4];
            v[d] = 1.0;
            (name.to_string(), Embedding::new(*name, Modality::Text, "m", v).unwrap())
        })
        .collect();
    let audio: HashMap<String, Embedding> = ratings
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let scale = 0.5 + i as f64;
            let v = h.iter().map(|x| x * scale).collect();
            (format!("i{i}"), Embedding::new(format!("i{i}"), Modality::Audio, "m", v).unwrap())
        })
        .collect();
    let sims = compute_similarity_matrix(&table, &audio, &text).unwrap();
    let rows = instrument_level_correlation(&sims, &table).unwrap();
    for r in &rows {
        assert_abs_diff_eq!(r.r.unwrap(), 1.0, epsilon = 1e-12);
    }
    let summaries = group_summaries(&rows);
    assert_eq!(summaries[&InstrumentGroup::Chinese].positive_count, 2);
    assert_eq!(summaries[&InstrumentGroup::Western].positive_count, 2);
    assert_eq!(descriptor_level_correlation(&sims, &table).unwrap().len(), 4);
}
