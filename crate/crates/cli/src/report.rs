//! `report`: merges the CSV artifacts of both experiments into `report.md`.
//!
//! Every number in the report is recomputed from the CSV files on disk, so the report
//! always agrees with the artifacts it summarizes.

use std::path::{Path, PathBuf};

use timbre_core::stats::{summarize_correlations, CorrelationSummary, TREND_LEGEND};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{EFFECTS_DIR, INDEX_FILE, INSTRUMENTS_DIR};
use crate::tables::*;

pub const REPORT_FILE: &str = "report.md";

fn mean_text(s: &CorrelationSummary) -> String {
    s.mean_r.map_or_else(|| "n/a".to_string(), |m| format!("{m:.2}"))
}

fn undefined_note(s: &CorrelationSummary) -> String {
    match s.undefined_count {
        0 => String::new(),
        n => format!(", {n} undefined excluded"),
    }
}

fn require_files(root: &Path, files: &[PathBuf], missing: &mut Vec<String>) {
    for f in files {
        if !root.join(f).is_file() {
            missing.push(f.display().to_string());
        }
    }
}

fn instruments_section(out: &Path, missing: &mut Vec<String>) -> Result<Option<String>> {
    let index_rel = Path::new(INSTRUMENTS_DIR).join(INDEX_FILE);
    if !out.join(&index_rel).is_file() {
        missing.push(index_rel.display().to_string());
        return Ok(None);
    }
    let index: InstrumentsIndex = read_json(&out.join(&index_rel))?;
    let mut text = String::from("## Instruments\n\n");
    for m in &index.models {
        let dir = Path::new(INSTRUMENTS_DIR).join(&m.dir);
        let desc_rel = dir.join("descriptor_correlations.csv");
        let inst_rel = dir.join("instrument_correlations.csv");
        let before = missing.len();
        require_files(out, &[desc_rel.clone(), inst_rel.clone()], missing);
        if missing.len() > before {
            continue;
        }
        let descriptors: Vec<DescriptorRow> = read_csv(&out.join(&desc_rel))?;
        let rs = descriptors
            .iter()
            .map(|r| Ok((r.descriptor.as_str(), parse_opt(&r.r)?)))
            .collect::<Result<Vec<_>>>()?;
        let s = summarize_correlations(&rs);
        text.push_str(&format!("### {}\n\n", m.name));
        text.push_str(&format!(
            "- Descriptor level: {} of {} descriptors positively correlated (mean r = {}{})\n",
            s.positive_count,
            rs.len(),
            mean_text(&s),
            undefined_note(&s)
        ));

        let instruments: Vec<InstrumentRow> = read_csv(&out.join(&inst_rel))?;
        let mut groups: Vec<&str> = instruments.iter().map(|r| r.group.as_str()).collect();
        groups.sort();
        groups.dedup();
        for g in groups {
            let rs = instruments
                .iter()
                .filter(|r| r.group == g)
                .map(|r| Ok((r.instrument.as_str(), parse_opt(&r.r)?)))
                .collect::<Result<Vec<_>>>()?;
            let s = summarize_correlations(&rs);
            text.push_str(&format!(
                "- Instrument level ({g}): {} of {} instruments positively correlated (mean r = {}{})\n",
                s.positive_count,
                rs.len(),
                mean_text(&s),
                undefined_note(&s)
            ));
        }
        text.push('\n');
    }
    Ok(Some(text))
}

fn effect_title(effect: &str) -> String {
    match effect {
        "eq" => "EQ".to_string(),
        "reverb" => "Reverb".to_string(),
        other => other.to_string(),
    }
}

fn effects_section(out: &Path, missing: &mut Vec<String>) -> Result<Option<String>> {
    let index_rel = Path::new(EFFECTS_DIR).join(INDEX_FILE);
    if !out.join(&index_rel).is_file() {
        missing.push(index_rel.display().to_string());
        return Ok(None);
    }
    let index: EffectsIndex = read_json(&out.join(&index_rel))?;
    let levels: Vec<String> = index.levels.iter().map(|l| l.to_string()).collect();
    let mut text = format!(
        "## Effects\n\nLevels: {}. Tolerance: {}.\n\n",
        levels.join(", "),
        index.tolerance
    );
    for effect in &index.effects {
        let trends_rel = Path::new(EFFECTS_DIR).join(format!("trends_{effect}.csv"));
        let before = missing.len();
        require_files(out, std::slice::from_ref(&trends_rel), missing);
        if missing.len() > before {
            continue;
        }
        let rows: Vec<TrendCsvRow> = read_csv(&out.join(&trends_rel))?;
        let mut descriptors: Vec<&str> = rows.iter().map(|r| r.descriptor.as_str()).collect();
        descriptors.dedup();
        text.push_str(&format!("### {}\n\n", effect_title(effect)));
        text.push_str(&format!("| Descriptor | {} |\n", index.models.join(" | ")));
        text.push_str(&format!("|---|{}\n", "---|".repeat(index.models.len())));
        for d in &descriptors {
            let cells = index
                .models
                .iter()
                .map(|m| {
                    rows.iter()
                        .find(|r| r.descriptor == *d && &r.model == m)
                        .map(|r| r.symbol.as_str())
                        .ok_or_else(|| {
                            CliError::Input(format!("{}: no trend for {d} / {m}", trends_rel.display()))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            text.push_str(&format!("| {d} | {} |\n", cells.join(" | ")));
        }
        text.push_str(&format!("\nLegend: {TREND_LEGEND}\n\n"));
        for m in &index.models {
            let up = rows
                .iter()
                .filter(|r| &r.model == m && r.trend == "monotonic_up")
                .count();
            let total = descriptors.len();
            let pct = if total == 0 { 0.0 } else { 100.0 * up as f64 / total as f64 };
            text.push_str(&format!(
                "- {m}: {up} of {total} descriptors monotonic up ({pct:.0}%)\n"
            ));
        }
        text.push('\n');
    }
    Ok(Some(text))
}

/// Writes `report.md` from whatever experiment outputs exist. Fails when neither is present
/// or when an index lists artifacts that are missing.
pub fn report(cfg: &RunConfig) -> Result<PathBuf> {
    let out = &cfg.output_dir;
    let mut missing_instruments = Vec::new();
    let mut missing_effects = Vec::new();
    let instruments = instruments_section(out, &mut missing_instruments)?;
    let effects = effects_section(out, &mut missing_effects)?;

    if instruments.is_none() && effects.is_none() {
        missing_instruments.extend(missing_effects);
        return Err(CliError::Input(format!(
            "no experiment outputs in {}; missing: {}",
            out.display(),
            missing_instruments.join(", ")
        )));
    }
    // An absent index only means that experiment was not run.
    let mut broken = Vec::new();
    if instruments.is_some() {
        broken.extend(missing_instruments);
    }
    if effects.is_some() {
        broken.extend(missing_effects);
    }
    if !broken.is_empty() {
        return Err(CliError::Input(format!(
            "incomplete outputs in {}; missing: {}",
            out.display(),
            broken.join(", ")
        )));
    }

    let mut text = String::from("# Timbre alignment report\n\n");
    for section in [instruments, effects].into_iter().flatten() {
        text.push_str(&section);
    }
    let text = format!("{}\n", text.trim_end());
    let path = out.join(REPORT_FILE);
    write_text(&path, &text)?;
    Ok(path)
}
