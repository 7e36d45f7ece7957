use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use occexpo::annotate::read_records;
use occexpo::exposure::{DemographicShares, IntensityMatrix, MatrixIssue};
use occexpo::model::{ExposureSource, Scenario};
use occexpo::scores::{ExpertPanel, ScoreColumn, ScoreError, ScoreTable};
use occexpo::stats::{OutcomeSeries, StatsError};
use occexpo::table::TableError;
use occexpo::taxonomy::{OccupationCode, Taxonomy};
use serde::Serialize;

use crate::ValidateArgs;

/// Largest accepted gap between a stated ensemble value and the recomputed
/// mean of the model columns (covers 4-decimal rounding of the inputs).
const ENSEMBLE_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.file, self.message)
    }
}

#[derive(Default)]
struct Report {
    diagnostics: Vec<Diagnostic>,
}

impl Report {
    fn push(&mut self, path: &Path, line: Option<u64>, message: impl Into<String>) {
        let message = message.into();
        let message = match line {
            Some(l) if !message.starts_with("line ") => format!("line {l}: {message}"),
            _ => message,
        };
        self.diagnostics.push(Diagnostic {
            file: path.display().to_string(),
            line,
            message,
        });
    }

    fn read(&mut self, path: &Path) -> Option<String> {
        match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                self.push(path, None, format!("cannot read: {e}"));
                None
            }
        }
    }
}

fn table_line(e: &TableError) -> Option<u64> {
    match e {
        TableError::Parse { line, .. } => Some(*line),
        _ => None,
    }
}

fn score_line(e: &ScoreError) -> Option<u64> {
    match e {
        ScoreError::Table(t) => table_line(t),
        ScoreError::MalformedCode { line, .. }
        | ScoreError::OutOfRange { line, .. }
        | ScoreError::DuplicateCode { line, .. } => Some(*line),
        _ => None,
    }
}

fn stats_line(e: &StatsError) -> Option<u64> {
    match e {
        StatsError::Table(t) => table_line(t),
        StatsError::MalformedCode { line, .. } => Some(*line),
        _ => None,
    }
}

fn issue_line(i: &MatrixIssue) -> Option<u64> {
    match i {
        MatrixIssue::RowSum { line, .. } | MatrixIssue::DuplicateRow { line, .. } => Some(*line),
        _ => None,
    }
}

/// Dry-run schema and invariant checks over every given file, including
/// cross-file consistency. Never fails; problems come back as diagnostics.
pub fn validate(args: &ValidateArgs) -> Vec<Diagnostic> {
    let mut r = Report::default();

    let taxonomy = args.taxonomy.as_deref().and_then(|p| {
        let text = r.read(p)?;
        match Taxonomy::parse(&text) {
            Ok(t) => Some(t),
            Err(e) => {
                r.push(p, e.line(), e.to_string());
                None
            }
        }
    });

    let scores = args.scores.as_deref().and_then(|p| {
        let text = r.read(p)?;
        match ScoreTable::parse(&text) {
            Ok(t) => {
                for rec in &t.records {
                    if let Some(stated) = rec.stated_ensemble {
                        let gap = (rec.ensemble_score - stated).abs();
                        if gap > ENSEMBLE_TOLERANCE {
                            r.push(
                                p,
                                None,
                                format!(
                                    "`{}`: stated ensemble {stated} differs from the model mean {} by {gap:.2e}",
                                    rec.code, rec.ensemble_score
                                ),
                            );
                        }
                    }
                }
                Some(t)
            }
            Err(e) => {
                r.push(p, score_line(&e), e.to_string());
                None
            }
        }
    });

    if let Some(p) = args.experts.as_deref() {
        if let Some(text) = r.read(p) {
            if let Err(e) = ExpertPanel::parse(&text) {
                r.push(p, score_line(&e), e.to_string());
            }
        }
    }

    if let Some(p) = args.annotations.as_deref() {
        if let Err(e) = read_records(p) {
            r.push(p, None, e.to_string());
        }
    }

    let intensity = args.intensity.as_deref().and_then(|p| {
        let text = r.read(p)?;
        match IntensityMatrix::diagnose(&text) {
            Ok(issues) if issues.is_empty() => IntensityMatrix::parse(&text).ok(),
            Ok(issues) => {
                for i in &issues {
                    r.push(p, issue_line(i), i.to_string());
                }
                None
            }
            Err(e) => {
                r.push(p, None, e.to_string());
                None
            }
        }
    });

    let demographics = args.demographics.as_deref().and_then(|p| {
        let text = r.read(p)?;
        match DemographicShares::diagnose(&text) {
            Ok(issues) if issues.is_empty() => DemographicShares::parse(&text).ok(),
            Ok(issues) => {
                for i in &issues {
                    r.push(p, issue_line(i), i.to_string());
                }
                None
            }
            Err(e) => {
                r.push(p, None, e.to_string());
                None
            }
        }
    });

    if let Some(p) = args.outcomes.as_deref() {
        if let Some(text) = r.read(p) {
            if let Err(e) = OutcomeSeries::parse(&text).and_then(|o| o.into_series()) {
                r.push(p, stats_line(&e), e.to_string());
            }
        }
    }

    let ensemble: Option<BTreeMap<OccupationCode, f64>> =
        scores.as_ref().and_then(|t| t.column(&ScoreColumn::Ensemble).ok());

    if let Some(p) = args.scenario.as_deref() {
        if let Some(text) = r.read(p) {
            let source = match (&intensity, &ensemble) {
                (Some(beta), Some(s)) => Some(ExposureSource {
                    intensity: beta,
                    occupation_scores: s,
                }),
                _ => None,
            };
            if let Err(e) = Scenario::parse(&text, None, source) {
                r.push(p, None, e.to_string());
            }
        }
    }

    // cross-file checks
    if let (Some(tax), Some(table), Some(tp), Some(sp)) =
        (&taxonomy, &scores, args.taxonomy.as_deref(), args.scores.as_deref())
    {
        for rec in &table.records {
            if tax.get(&rec.code).is_none() {
                r.push(
                    sp,
                    None,
                    format!("code `{}` is not in taxonomy {}", rec.code, tp.display()),
                );
            }
        }
        for leaf in tax.scored_leaves() {
            if table.get(&leaf.code).is_none() {
                r.push(
                    tp,
                    Some(leaf.line),
                    format!("occupation `{}` has no score in {}", leaf.code, sp.display()),
                );
            }
        }
    }
    if let (Some(beta), Some(s), Some(ip), Some(sp)) =
        (&intensity, &ensemble, args.intensity.as_deref(), args.scores.as_deref())
    {
        for code in &beta.occupations {
            if !s.contains_key(code) {
                r.push(ip, None, format!("column `{code}` has no score in {}", sp.display()));
            }
        }
    }
    if let (Some(beta), Some(demo), Some(dp), Some(ip)) = (
        &intensity,
        &demographics,
        args.demographics.as_deref(),
        args.intensity.as_deref(),
    ) {
        let industries: BTreeSet<&String> = beta.industries().iter().collect();
        for col in &demo.matrix.columns {
            if !industries.contains(col) {
                r.push(dp, None, format!("industry `{col}` is not a row of {}", ip.display()));
            }
        }
    }

    r.diagnostics
}
