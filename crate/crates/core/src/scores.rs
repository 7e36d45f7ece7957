//! Category-to-point mapping, per-model and ensemble averaging, expert panel
//! means, and the score table file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::annotate::{AnnotationRun, ExposureCategory};
use crate::table::{format_value, parse_f64, write_csv, Table, TableError};
use crate::taxonomy::{OccupationCode, Taxonomy};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("cannot score an empty sample list")]
    EmptySamples,
    #[error("cannot form an ensemble from zero models")]
    NoModels,
    #[error("no expert scores for occupation `{0}`")]
    UnknownCode(OccupationCode),
    #[error("line {line}: malformed occupation code `{raw}`")]
    MalformedCode { line: u64, raw: String },
    #[error("line {line}: {what} score {value} is outside [0, 1]")]
    OutOfRange { line: u64, what: String, value: f64 },
    #[error("line {line}: duplicate code `{code}`")]
    DuplicateCode { line: u64, code: String },
    #[error("score table has no model columns between `expert` and `ensemble`")]
    NoModelColumns,
    #[error("unknown score column `{0}`")]
    UnknownColumn(String),
}

/// E1 counts fully, E2/E3 count half, E0 counts nothing.
pub fn category_points(c: ExposureCategory) -> f64 {
    match c {
        ExposureCategory::E0 => 0.0,
        ExposureCategory::E1 => 1.0,
        ExposureCategory::E2 | ExposureCategory::E3 => 0.5,
    }
}

pub fn model_score(samples: &[ExposureCategory]) -> Result<f64, ScoreError> {
    if samples.is_empty() {
        return Err(ScoreError::EmptySamples);
    }
    Ok(samples.iter().copied().map(category_points).sum::<f64>() / samples.len() as f64)
}

/// Unweighted mean over models.
pub fn ensemble(per_model: &BTreeMap<String, f64>) -> Result<f64, ScoreError> {
    if per_model.is_empty() {
        return Err(ScoreError::NoModels);
    }
    Ok(per_model.values().sum::<f64>() / per_model.len() as f64)
}

/// Individual expert ratings per occupation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpertPanel {
    pub scores: BTreeMap<OccupationCode, Vec<f64>>,
    pub panel_size: usize,
}

impl ExpertPanel {
    /// Reads a long-format `code,score` table (one row per rating). An
    /// optional `expert` column identifies raters for the panel size.
    pub fn parse(text: &str) -> Result<Self, ScoreError> {
        let table = Table::parse(text)?;
        let code_col = table.column("code")?;
        let score_col = table.column("score")?;
        let expert_col = table.column("expert").ok();
        let mut panel = ExpertPanel::default();
        let mut raters = std::collections::BTreeSet::new();
        for row in &table.rows {
            let code = OccupationCode::parse(row.get(code_col)).map_err(|_| ScoreError::MalformedCode {
                line: row.line,
                raw: row.get(code_col).to_owned(),
            })?;
            let v = parse_f64(row, score_col, "expert score")?;
            if !(0.0..=1.0).contains(&v) {
                return Err(ScoreError::OutOfRange {
                    line: row.line,
                    what: "expert".into(),
                    value: v,
                });
            }
            if let Some(c) = expert_col {
                raters.insert(row.get(c).to_owned());
            }
            panel.scores.entry(code).or_default().push(v);
        }
        panel.panel_size = if expert_col.is_some() {
            raters.len()
        } else {
            panel.scores.values().map(Vec::len).max().unwrap_or(0)
        };
        Ok(panel)
    }

    pub fn expert_mean(&self, code: &OccupationCode) -> Result<f64, ScoreError> {
        match self.scores.get(code) {
            Some(v) if !v.is_empty() => Ok(v.iter().sum::<f64>() / v.len() as f64),
            _ => Err(ScoreError::UnknownCode(code.clone())),
        }
    }

    pub fn means(&self) -> BTreeMap<OccupationCode, f64> {
        self.scores
            .keys()
            .filter_map(|c| self.expert_mean(c).ok().map(|m| (c.clone(), m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureRecord {
    pub code: OccupationCode,
    pub title: String,
    /// Empty when the record was read from a score table.
    pub per_model_samples: BTreeMap<String, Vec<ExposureCategory>>,
    pub per_model_score: BTreeMap<String, f64>,
    pub ensemble_score: f64,
    pub expert_score: Option<f64>,
    /// Combined value as written in the source table, if it had one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stated_ensemble: Option<f64>,
}

impl ExposureRecord {
    pub fn from_model_scores(
        code: OccupationCode,
        title: String,
        per_model_score: BTreeMap<String, f64>,
    ) -> Result<Self, ScoreError> {
        let ensemble_score = ensemble(&per_model_score)?;
        Ok(Self {
            code,
            title,
            per_model_samples: BTreeMap::new(),
            per_model_score,
            ensemble_score,
            expert_score: None,
            stated_ensemble: None,
        })
    }
}

/// Canonical per-occupation score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub models: Vec<String>,
    pub records: Vec<ExposureRecord>,
}

/// Which value of a record to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreColumn {
    Ensemble,
    Expert,
    Model(String),
}

impl ScoreColumn {
    pub fn parse(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "ensemble" => ScoreColumn::Ensemble,
            "expert" => ScoreColumn::Expert,
            other => ScoreColumn::Model(other.to_owned()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ScoreColumn::Ensemble => "ensemble",
            ScoreColumn::Expert => "expert",
            ScoreColumn::Model(m) => m,
        }
    }
}

impl ScoreTable {
    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        Self::from_table(&Table::read(path)?)
    }

    /// Reads `code,title,expert,<model...>,ensemble`. Every column between
    /// `expert` and `ensemble` is a model. The ensemble is recomputed from
    /// the model columns; the file's value is kept as `stated_ensemble`.
    pub fn parse(text: &str) -> Result<Self, ScoreError> {
        Self::from_table(&Table::parse(text)?)
    }

    fn from_table(table: &Table) -> Result<Self, ScoreError> {
        let code_col = table.column("code")?;
        let title_col = table.column("title").ok();
        let expert_col = table.column("expert")?;
        let ens_col = table.column("ensemble")?;
        if ens_col <= expert_col + 1 {
            return Err(ScoreError::NoModelColumns);
        }
        let models: Vec<String> = table.header[expert_col + 1..ens_col]
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let in_range = |line: u64, what: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(ScoreError::OutOfRange {
                    line,
                    what: what.to_owned(),
                    value: v,
                })
            }
        };
        let mut seen = std::collections::HashSet::new();
        let mut records = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            let raw = row.get(code_col);
            let code = OccupationCode::parse(raw).map_err(|_| ScoreError::MalformedCode {
                line: row.line,
                raw: raw.to_owned(),
            })?;
            if !seen.insert(code.clone()) {
                return Err(ScoreError::DuplicateCode {
                    line: row.line,
                    code: code.to_string(),
                });
            }
            let mut per_model = BTreeMap::new();
            for (k, m) in models.iter().enumerate() {
                let v = parse_f64(row, expert_col + 1 + k, m)?;
                per_model.insert(m.clone(), in_range(row.line, m, v)?);
            }
            let expert_score = if row.get(expert_col).is_empty() {
                None
            } else {
                Some(in_range(row.line, "expert", parse_f64(row, expert_col, "expert")?)?)
            };
            let stated_ensemble = if row.get(ens_col).is_empty() {
                None
            } else {
                Some(parse_f64(row, ens_col, "ensemble")?)
            };
            let mut rec = ExposureRecord::from_model_scores(
                code,
                title_col.map(|c| row.get(c).to_owned()).unwrap_or_default(),
                per_model,
            )?;
            rec.expert_score = expert_score;
            rec.stated_ensemble = stated_ensemble;
            records.push(rec);
        }
        Ok(Self { models, records })
    }

    /// Builds records from annotation runs. When one (model, occupation)
    /// pair has several runs, the last one wins.
    pub fn from_runs(
        runs: &[AnnotationRun],
        taxonomy: Option<&Taxonomy>,
        experts: Option<&ExpertPanel>,
    ) -> Result<Self, ScoreError> {
        let mut by_code: BTreeMap<OccupationCode, BTreeMap<String, Vec<ExposureCategory>>> = BTreeMap::new();
        for run in runs {
            by_code
                .entry(run.occupation_code.clone())
                .or_default()
                .insert(run.model_id.clone(), run.samples.clone());
        }
        let mut models = std::collections::BTreeSet::new();
        let mut records = Vec::with_capacity(by_code.len());
        for (code, samples) in by_code {
            let mut per_model = BTreeMap::new();
            for (m, s) in &samples {
                per_model.insert(m.clone(), model_score(s)?);
                models.insert(m.clone());
            }
            let title = taxonomy
                .and_then(|t| t.get(&code))
                .map(|n| n.title.clone())
                .unwrap_or_default();
            let mut rec = ExposureRecord::from_model_scores(code, title, per_model)?;
            rec.per_model_samples = samples;
            rec.expert_score = experts.and_then(|p| p.expert_mean(&rec.code).ok());
            records.push(rec);
        }
        Ok(Self {
            models: models.into_iter().collect(),
            records,
        })
    }

    /// Replaces expert scores with panel means where the panel has the code.
    pub fn attach_experts(&mut self, panel: &ExpertPanel) {
        for rec in &mut self.records {
            if let Ok(m) = panel.expert_mean(&rec.code) {
                rec.expert_score = Some(m);
            }
        }
    }

    pub fn get(&self, code: &OccupationCode) -> Option<&ExposureRecord> {
        self.records.iter().find(|r| &r.code == code)
    }

    /// Values of one column keyed by code; rows without a value are skipped.
    pub fn column(&self, col: &ScoreColumn) -> Result<BTreeMap<OccupationCode, f64>, ScoreError> {
        if let ScoreColumn::Model(m) = col {
            if !self.models.iter().any(|x| x == m) {
                return Err(ScoreError::UnknownColumn(m.clone()));
            }
        }
        Ok(self
            .records
            .iter()
            .filter_map(|r| {
                let v = match col {
                    ScoreColumn::Ensemble => Some(r.ensemble_score),
                    ScoreColumn::Expert => r.expert_score,
                    ScoreColumn::Model(m) => r.per_model_score.get(m).copied(),
                };
                v.map(|v| (r.code.clone(), v))
            })
            .collect())
    }

    /// Largest |recomputed - stated| ensemble difference, with its code.
    pub fn max_ensemble_deviation(&self) -> Option<(OccupationCode, f64)> {
        self.records
            .iter()
            .filter_map(|r| {
                r.stated_ensemble
                    .map(|s| (r.code.clone(), (r.ensemble_score - s).abs()))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `code,title,expert,<models>,ensemble`; `decimals = None` writes full precision.
    pub fn to_csv(&self, decimals: Option<usize>) -> String {
        let mut header = vec!["code", "title", "expert"];
        header.extend(self.models.iter().map(String::as_str));
        header.push("ensemble");
        write_csv(
            &header,
            self.records.iter().map(|r| {
                let mut row = vec![
                    r.code.to_string(),
                    r.title.clone(),
                    r.expert_score.map(|v| format_value(v, decimals)).unwrap_or_default(),
                ];
                for m in &self.models {
                    row.push(
                        r.per_model_score
                            .get(m)
                            .map(|v| format_value(*v, decimals))
                            .unwrap_or_default(),
                    );
                }
                row.push(format_value(r.ensemble_score, decimals));
                row
            }),
        )
    }
}
