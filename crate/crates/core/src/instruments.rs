//! Instrument experiment: human descriptor ratings vs. audio/text similarity profiles.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_similarity, Embedding, EmbeddingError};
use crate::stats::{pearson, summarize_correlations, CorrelationSummary, StatsError};

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("ratings csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("ratings csv row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("ratings missing cell: instrument {instrument}, descriptor {descriptor}")]
    MissingCell { instrument: String, descriptor: String },
    #[error("ratings table is empty")]
    Empty,
    #[error("missing audio embedding for instrument {0}")]
    MissingAudio(String),
    #[error("missing text embedding for descriptor {0}")]
    MissingText(String),
    #[error("shape mismatch between similarity matrix and ratings table")]
    Shape,
    #[error("need at least 3 instruments for descriptor-level correlation, have {0}")]
    TooFewInstruments(usize),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, InstrumentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentGroup {
    Chinese,
    Western,
}

impl InstrumentGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            InstrumentGroup::Chinese => "chinese",
            InstrumentGroup::Western => "western",
        }
    }
}

impl std::str::FromStr for InstrumentGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chinese" => Ok(InstrumentGroup::Chinese),
            "western" => Ok(InstrumentGroup::Western),
            other => Err(format!("unknown group {other:?} (expected chinese or western)")),
        }
    }
}

impl std::fmt::Display for InstrumentGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instrument {
    pub id: String,
    pub name: String,
    pub group: InstrumentGroup,
}

/// Mean ratings on the nine-point scale, `ratings[i][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    pub instruments: Vec<Instrument>,
    pub descriptors: Vec<String>,
    pub ratings: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RatingRow {
    instrument_id: String,
    instrument_name: String,
    group: String,
    descriptor: String,
    rating: f64,
}

impl RatingsTable {
    /// Reads `instrument_id,instrument_name,group,descriptor,rating` rows. Instrument and
    /// descriptor order follow first appearance.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut instruments: Vec<Instrument> = Vec::new();
        let mut inst_index: HashMap<String, usize> = HashMap::new();
        let mut descriptors: Vec<String> = Vec::new();
        let mut desc_index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, usize), f64> = HashMap::new();

        for (idx, row) in rdr.deserialize::<RatingRow>().enumerate() {
            let row_no = idx + 2;
            let row = row?;
            let bad = |reason: String| InstrumentError::Row { row: row_no, reason };
            let group: InstrumentGroup = row.group.parse().map_err(bad)?;
            if !(row.rating.is_finite() && (1.0..=9.0).contains(&row.rating)) {
                return Err(bad(format!("rating {} outside [1, 9]", row.rating)));
            }
            let i = match inst_index.get(&row.instrument_id) {
                Some(&i) => {
                    let known = &instruments[i];
                    if known.name != row.instrument_name || known.group != group {
                        return Err(bad(format!(
                            "instrument {} has inconsistent name/group",
                            row.instrument_id
                        )));
                    }
                    i
                }
                None => {
                    instruments.push(Instrument {
                        id: row.instrument_id.clone(),
                        name: row.instrument_name.clone(),
                        group,
                    });
                    inst_index.insert(row.instrument_id.clone(), instruments.len() - 1);
                    instruments.len() - 1
                }
            };
            let d = *desc_index.entry(row.descriptor.clone()).or_insert_with(|| {
                descriptors.push(row.descriptor.clone());
                descriptors.len() - 1
            });
            if cells.insert((i, d), row.rating).is_some() {
                return Err(bad(format!(
                    "duplicate rating for instrument {}, descriptor {}",
                    row.instrument_id, row.descriptor
                )));
            }
        }
        if instruments.is_empty() {
            return Err(InstrumentError::Empty);
        }

        let mut ratings = vec![vec![0.0; descriptors.len()]; instruments.len()];
        for (i, inst) in instruments.iter().enumerate() {
            for (d, desc) in descriptors.iter().enumerate() {
                ratings[i][d] = *cells.get(&(i, d)).ok_or_else(|| InstrumentError::MissingCell {
                    instrument: inst.id.clone(),
                    descriptor: desc.clone(),
                })?;
            }
        }
        Ok(Self {
            instruments,
            descriptors,
            ratings,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(csv::Error::from)?;
        Self::from_csv(file)
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.ratings.iter().map(|row| row[d]).collect()
    }
}

/// `values[i][d]` = cosine(audio of instrument i, text of descriptor d).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityProfileMatrix {
    pub instruments: Vec<String>,
    pub descriptors: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityProfileMatrix {
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[d]).collect()
    }

    fn matches(&self, table: &RatingsTable) -> bool {
        self.descriptors == table.descriptors
            && self.instruments.len() == table.instruments.len()
            && self
                .instruments
                .iter()
                .zip(&table.instruments)
                .all(|(a, b)| *a == b.id)
    }
}

pub fn compute_similarity_matrix(
    table: &RatingsTable,
    audio: &HashMap<String, Embedding>,
    text: &HashMap<String, Embedding>,
) -> Result<SimilarityProfileMatrix> {
    let texts: Vec<&Embedding> = table
        .descriptors
        .iter()
        .map(|d| text.get(d).ok_or_else(|| InstrumentError::MissingText(d.clone())))
        .collect::<Result<_>>()?;
    let values = table
        .instruments
        .par_iter()
        .map(|inst| {
            let a = audio
                .get(&inst.id)
                .ok_or_else(|| InstrumentError::MissingAudio(inst.id.clone()))?;
            texts
                .iter()
                .map(|t| cosine_similarity(a, t).map_err(InstrumentError::from))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityProfileMatrix {
        instruments: table.instruments.iter().map(|i| i.id.clone()).collect(),
        descriptors: table.descriptors.clone(),
        values,
    })
}

fn defined(r: std::result::Result<f64, StatsError>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(StatsError::ZeroVariance) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Per-descriptor r across instruments; `None` marks a zero-variance column.
pub fn descriptor_level_correlation(
    sims: &SimilarityProfileMatrix,
    table: &RatingsTable,
) -> Result<Vec<(String, Option<f64>)>> {
    if !sims.matches(table) {
        return Err(InstrumentError::Shape);
    }
    if table.instruments.len() < 3 {
        return Err(InstrumentError::TooFewInstruments(table.instruments.len()));
    }
    (0..table.descriptors.len())
        .into_par_iter()
        .map(|d| Ok((table.descriptors[d].clone(), defined(pearson(&table.column(d), &sims.column(d)))?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentCorrelation {
    pub instrument: String,
    pub group: InstrumentGroup,
    pub r: Option<f64>,
}

/// Per-instrument r across descriptors; `None` marks a zero-variance row.
pub fn instrument_level_correlation(
    sims: &SimilarityProfileMatrix,
    table: &RatingsTable,
) -> Result<Vec<InstrumentCorrelation>> {
    if !sims.matches(table) {
        return Err(InstrumentError::Shape);
    }
    table
        .instruments
        .par_iter()
        .zip(&table.ratings)
        .zip(&sims.values)
        .map(|((inst, h), s)| {
            Ok(InstrumentCorrelation {
                instrument: inst.id.clone(),
                group: inst.group,
                r: defined(pearson(h, s))?,
            })
        })
        .collect()
}

pub fn group_summaries(rows: &[InstrumentCorrelation]) -> BTreeMap<InstrumentGroup, CorrelationSummary> {
    let groups: HashSet<InstrumentGroup> = rows.iter().map(|r| r.group).collect();
    groups
        .into_iter()
        .map(|g| {
            let rs: Vec<(&str, Option<f64>)> = rows
                .iter()
                .filter(|r| r.group == g)
                .map(|r| (r.instrument.as_str(), r.r))
                .collect();
            (g, summarize_correlations(&rs))
        })
        .collect()
}
