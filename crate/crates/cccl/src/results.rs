//! The per-correction results table, one ΔX_c column per model.
//!
//! ```text
//! concept  language  sample  original  corrected  error_types  delta_sem  delta_xc:<model> ...
//! ```
//!
//! Rows are grouped by language (alphabetical), then sorted by ascending
//! ΔSEM with ties broken by concept id and sample index. `sample` is empty for
//! real corrections. Numbers are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use cccl_core::inventory::{ConceptId, ErrorTypes, LanguageCode};
use cccl_core::{ModelScores, PairedSeries, StatsError};

use crate::error::{Error, FormatError, Result};
use crate::fs::read_text;

const FIXED_COLUMNS: [&str; 7] = [
    "concept",
    "language",
    "sample",
    "original",
    "corrected",
    "error_types",
    "delta_sem",
];
const XC_PREFIX: &str = "delta_xc:";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub sample: Option<u32>,
    pub original: String,
    pub corrected: String,
    pub error_types: ErrorTypes,
    pub delta_sem: f64,
    /// One value per model, in [`ResultsTable::models`] order.
    pub delta_xc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub models: Vec<String>,
    pub rows: Vec<ResultRow>,
}

type RowKey = (ConceptId, LanguageCode, Option<u32>);

impl ResultsTable {
    /// Joins per-model scores on (concept, language, sample). Every model must
    /// score the same corrections, with identical ΔSEM.
    pub fn from_scores(scores: &[ModelScores]) -> Result<Self> {
        let mut models: Vec<String> = Vec::new();
        let mut rows: BTreeMap<RowKey, ResultRow> = BTreeMap::new();
        for (m, score) in scores.iter().enumerate() {
            if models.contains(&score.model_id) {
                return Err(Error::Inconsistent(format!(
                    "model `{}` listed twice",
                    score.model_id
                )));
            }
            models.push(score.model_id.clone());
            if m > 0 && score.results.len() != rows.len() {
                return Err(Error::Inconsistent(format!(
                    "model `{}` scored {} corrections, `{}` scored {}",
                    score.model_id,
                    score.results.len(),
                    models[0],
                    rows.len()
                )));
            }
            for r in &score.results {
                let key = (r.concept.clone(), r.language.clone(), r.sample_index);
                if m == 0 {
                    rows.insert(
                        key,
                        ResultRow {
                            concept: r.concept.clone(),
                            language: r.language.clone(),
                            sample: r.sample_index,
                            original: r.original.clone(),
                            corrected: r.corrected.clone(),
                            error_types: r.error_types,
                            delta_sem: r.delta_sem,
                            delta_xc: vec![r.delta_xc],
                        },
                    );
                    continue;
                }
                let row = rows.get_mut(&key).ok_or_else(|| {
                    Error::Inconsistent(format!(
                        "`{}`/{} scored by `{}` only",
                        r.concept, r.language, score.model_id
                    ))
                })?;
                if row.delta_sem.to_bits() != r.delta_sem.to_bits() {
                    return Err(Error::Inconsistent(format!(
                        "ΔSEM of `{}`/{} differs between models",
                        r.concept, r.language
                    )));
                }
                row.delta_xc.push(r.delta_xc);
            }
        }
        let mut table = Self {
            models,
            rows: rows.into_values().collect(),
        };
        table.sort();
        Ok(table)
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.language
                .cmp(&b.language)
                .then(a.delta_sem.total_cmp(&b.delta_sem))
                .then(a.concept.cmp(&b.concept))
                .then(a.sample.cmp(&b.sample))
        });
    }

    pub fn model_index(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    /// Languages present, alphabetical.
    pub fn languages(&self) -> Vec<LanguageCode> {
        let mut langs: Vec<LanguageCode> = self.rows.iter().map(|r| r.language.clone()).collect();
        langs.sort();
        langs.dedup();
        langs
    }

    pub fn rows_for<'a>(
        &'a self,
        language: &'a LanguageCode,
    ) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| &r.language == language)
    }

    /// (ΔSEM, ΔX_c) points of one model in one language, labelled by concept.
    pub fn series(
        &self,
        model: usize,
        language: &LanguageCode,
    ) -> Result<PairedSeries, StatsError> {
        let rows: Vec<&ResultRow> = self.rows_for(language).collect();
        let labels = rows
            .iter()
            .map(|r| match r.sample {
                Some(k) => format!("{}#{k}", r.concept),
                None => r.concept.to_string(),
            })
            .collect();
        PairedSeries::new(
            rows.iter().map(|r| r.delta_sem).collect(),
            rows.iter().map(|r| r.delta_xc[model]).collect(),
        )?
        .with_labels(labels)
    }
}

pub fn render_results(table: &ResultsTable) -> String {
    let mut out = FIXED_COLUMNS.join("\t");
    for m in &table.models {
        let _ = write!(out, "\t{XC_PREFIX}{m}");
    }
    out.push('\n');
    for r in &table.rows {
        let sample = r.sample.map(|k| k.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.concept, r.language, sample, r.original, r.corrected, r.error_types, r.delta_sem
        );
        for x in &r.delta_xc {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    }
    out
}

fn number(line: usize, column: &str, s: &str) -> Result<f64, FormatError> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| FormatError::syntax(line, format!("{column}: invalid number {s:?}")))
}

pub fn parse_results(text: &str) -> Result<ResultsTable, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, header)) = lines.next() else {
        return Err(FormatError::syntax(1, "missing header line"));
    };
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < FIXED_COLUMNS.len() || columns[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(FormatError::syntax(
            1,
            format!("header must start with {:?}", FIXED_COLUMNS.join("\t")),
        ));
    }
    let models = columns[FIXED_COLUMNS.len()..]
        .iter()
        .map(|c| match c.strip_prefix(XC_PREFIX) {
            Some(m) if !m.is_empty() => Ok(m.to_owned()),
            _ => Err(FormatError::syntax(1, format!("unexpected column {c:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != columns.len() {
            return Err(FormatError::syntax(
                no,
                format!("expected {} fields, found {}", columns.len(), f.len()),
            ));
        }
        let sample = if f[2].is_empty() {
            None
        } else {
            Some(
                f[2].parse()
                    .map_err(|_| FormatError::syntax(no, format!("invalid sample {:?}", f[2])))?,
            )
        };
        rows.push(ResultRow {
            concept: ConceptId::new(f[0]).map_err(|e| FormatError::new(no, e))?,
            language: LanguageCode::new(f[1]).map_err(|e| FormatError::new(no, e))?,
            sample,
            original: f[3].to_owned(),
            corrected: f[4].to_owned(),
            error_types: f[5].parse().map_err(|e| FormatError::new(no, e))?,
            delta_sem: number(no, "delta_sem", f[6])?,
            delta_xc: f[7..]
                .iter()
                .zip(&models)
                .map(|(s, m)| number(no, m, s))
                .collect::<Result<_, _>>()?,
        });
    }
    Ok(ResultsTable { models, rows })
}

pub fn load_results(path: &Path) -> Result<ResultsTable> {
    parse_results(&read_text(path)?).map_err(|e| Error::format(path, e))
}
