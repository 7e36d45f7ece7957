//! Projection of occupational exposure onto industries (through the
//! occupational intensity matrix) and onto demographic groups (through
//! industry employment shares).
//!
//! Both projections are row-stochastic matrix-vector products. Row sums are
//! checked, never renormalized.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::table::{parse_f64, Table, TableError};
use crate::taxonomy::{Level, OccupationCode};

pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixIssue {
    NegativeWeight { row: String, column: String, value: f64 },
    RowSum { row: String, line: u64, sum: f64 },
    MixedLevels { first: Level, other: Level, column: String },
    BadColumn { column: String },
    DuplicateRow { row: String, line: u64 },
    DuplicateColumn { column: String },
    Empty,
}

impl fmt::Display for MatrixIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixIssue::NegativeWeight { row, column, value } => {
                write!(f, "row `{row}`, column `{column}`: negative weight {value}")
            }
            MatrixIssue::RowSum { row, line, sum } => {
                write!(f, "line {line}: row `{row}` sums to {sum}, expected 1")
            }
            MatrixIssue::MixedLevels { first, other, column } => write!(
                f,
                "column `{column}` is a {other} code but earlier columns are {first} codes"
            ),
            MatrixIssue::BadColumn { column } => write!(f, "column `{column}` is not an occupation code"),
            MatrixIssue::DuplicateRow { row, line } => write!(f, "line {line}: duplicate row `{row}`"),
            MatrixIssue::DuplicateColumn { column } => write!(f, "duplicate column `{column}`"),
            MatrixIssue::Empty => write!(f, "matrix has no rows or no columns"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExposureError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid share matrix: {0}")]
    Invalid(MatrixIssue),
    #[error("no score for `{0}`")]
    MissingScore(String),
    #[error("key column must be `{expected}`, found `{found}`")]
    KeyColumn { expected: String, found: String },
}

/// Row-stochastic share matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareMatrix {
    pub key: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    lines: Vec<u64>,
}

impl ShareMatrix {
    pub fn new(
        key: &str,
        rows: Vec<String>,
        columns: Vec<String>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self, ExposureError> {
        let lines = (0..rows.len() as u64).map(|i| i + 2).collect();
        let m = Self {
            key: key.to_owned(),
            rows,
            columns,
            weights,
            lines,
        };
        match m.issues().into_iter().next() {
            Some(issue) => Err(ExposureError::Invalid(issue)),
            None => Ok(m),
        }
    }

    /// Parses without validating shares; see [`ShareMatrix::issues`].
    pub fn parse_unchecked(text: &str, key: &str) -> Result<Self, ExposureError> {
        let table = Table::parse(text)?;
        let found = table.header.first().cloned().unwrap_or_default();
        if !found.eq_ignore_ascii_case(key) {
            return Err(ExposureError::KeyColumn {
                expected: key.to_owned(),
                found,
            });
        }
        let columns: Vec<String> = table.header[1..].to_vec();
        let mut rows = Vec::with_capacity(table.rows.len());
        let mut weights = Vec::with_capacity(table.rows.len());
        let mut lines = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            if row.fields.len() != columns.len() + 1 {
                return Err(TableError::Parse {
                    line: row.line,
                    message: format!("expected {} fields, found {}", columns.len() + 1, row.fields.len()),
                }
                .into());
            }
            rows.push(row.get(0).to_owned());
            lines.push(row.line);
            weights.push(
                (1..=columns.len())
                    .map(|j| parse_f64(row, j, &columns[j - 1]))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Ok(Self {
            key: key.to_owned(),
            rows,
            columns,
            weights,
            lines,
        })
    }

    pub fn parse(text: &str, key: &str) -> Result<Self, ExposureError> {
        let m = Self::parse_unchecked(text, key)?;
        match m.issues().into_iter().next() {
            Some(issue) => Err(ExposureError::Invalid(issue)),
            None => Ok(m),
        }
    }

    /// Every structural and share violation, in row order.
    pub fn issues(&self) -> Vec<MatrixIssue> {
        let mut out = Vec::new();
        if self.rows.is_empty() || self.columns.is_empty() {
            out.push(MatrixIssue::Empty);
            return out;
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c) {
                out.push(MatrixIssue::DuplicateColumn { column: c.clone() });
            }
        }
        let mut seen = HashSet::new();
        for (i, r) in self.rows.iter().enumerate() {
            if !seen.insert(r) {
                out.push(MatrixIssue::DuplicateRow {
                    row: r.clone(),
                    line: self.lines[i],
                });
            }
            let mut sum = 0.0;
            for (j, &w) in self.weights[i].iter().enumerate() {
                if w < 0.0 {
                    out.push(MatrixIssue::NegativeWeight {
                        row: r.clone(),
                        column: self.columns[j].clone(),
                        value: w,
                    });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(MatrixIssue::RowSum {
                    row: r.clone(),
                    line: self.lines[i],
                    sum,
                });
            }
        }
        out
    }

    pub fn row(&self, label: &str) -> Option<&[f64]> {
        self.rows
            .iter()
            .position(|r| r == label)
            .map(|i| self.weights[i].as_slice())
    }

    /// `out[i] = Σ_j w[i][j] · values[column j]`, in row order.
    pub fn project(&self, values: &BTreeMap<String, f64>) -> Result<Vec<(String, f64)>, ExposureError> {
        let col_values = self
            .columns
            .iter()
            .map(|c| {
                values
                    .get(c)
                    .copied()
                    .ok_or_else(|| ExposureError::MissingScore(c.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .rows
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| (r.clone(), w.iter().zip(&col_values).map(|(a, b)| a * b).sum()))
            .collect())
    }
}

/// Industry × occupation employment shares.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMatrix {
    pub matrix: ShareMatrix,
    pub occupations: Vec<OccupationCode>,
}

impl IntensityMatrix {
    pub const KEY: &'static str = "industry_id";

    pub fn from_shares(matrix: ShareMatrix) -> Result<Self, ExposureError> {
        let occupations = occupation_columns(&matrix.columns).map_err(ExposureError::Invalid)?;
        if let Some(issue) = matrix.issues().into_iter().next() {
            return Err(ExposureError::Invalid(issue));
        }
        Ok(Self { matrix, occupations })
    }

    pub fn parse(text: &str) -> Result<Self, ExposureError> {
        Self::from_shares(ShareMatrix::parse_unchecked(text, Self::KEY)?)
    }

    pub fn load(path: &Path) -> Result<Self, ExposureError> {
        Self::parse(&read(path)?)
    }

    /// Collects every issue instead of stopping at the first.
    pub fn diagnose(text: &str) -> Result<Vec<MatrixIssue>, ExposureError> {
        let m = ShareMatrix::parse_unchecked(text, Self::KEY)?;
        let mut issues = Vec::new();
        if let Err(i) = occupation_columns(&m.columns) {
            issues.push(i);
        }
        issues.extend(m.issues());
        Ok(issues)
    }

    pub fn industries(&self) -> &[String] {
        &self.matrix.rows
    }
}

fn occupation_columns(columns: &[String]) -> Result<Vec<OccupationCode>, MatrixIssue> {
    let mut out: Vec<OccupationCode> = Vec::with_capacity(columns.len());
    for c in columns {
        let code = OccupationCode::parse(c).map_err(|_| MatrixIssue::BadColumn { column: c.clone() })?;
        if let Some(first) = out.first() {
            if first.level() != code.level() {
                return Err(MatrixIssue::MixedLevels {
                    first: first.level(),
                    other: code.level(),
                    column: c.clone(),
                });
            }
        }
        out.push(code);
    }
    Ok(out)
}

/// Age group × industry employment shares.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicShares {
    pub matrix: ShareMatrix,
}

impl DemographicShares {
    pub const KEY: &'static str = "age_group";

    pub fn parse(text: &str) -> Result<Self, ExposureError> {
        Ok(Self {
            matrix: ShareMatrix::parse(text, Self::KEY)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ExposureError> {
        Self::parse(&read(path)?)
    }

    pub fn diagnose(text: &str) -> Result<Vec<MatrixIssue>, ExposureError> {
        Ok(ShareMatrix::parse_unchecked(text, Self::KEY)?.issues())
    }

    pub fn age_groups(&self) -> &[String] {
        &self.matrix.rows
    }
}

fn read(path: &Path) -> Result<String, ExposureError> {
    std::fs::read_to_string(path).map_err(|source| {
        TableError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

/// `r_i = Σ_j β_ij · r_j`, one value per industry in matrix order.
pub fn industry_exposure(
    beta: &IntensityMatrix,
    occupation_scores: &BTreeMap<OccupationCode, f64>,
) -> Result<Vec<(String, f64)>, ExposureError> {
    let by_name: BTreeMap<String, f64> = beta
        .occupations
        .iter()
        .filter_map(|c| occupation_scores.get(c).map(|v| (c.to_string(), *v)))
        .collect();
    beta.matrix.project(&by_name)
}

/// `d_a = Σ_i w_ai · r_i`, one value per age group in matrix order.
pub fn demographic_exposure(
    shares: &DemographicShares,
    industry_scores: &BTreeMap<String, f64>,
) -> Result<Vec<(String, f64)>, ExposureError> {
    shares.matrix.project(industry_scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> OccupationCode {
        s.parse().unwrap()
    }

    #[test]
    fn degenerate_and_symmetric_weights() {
        let m = IntensityMatrix::parse("industry_id,2-01\n1,1.0\n").unwrap();
        let r = industry_exposure(&m, &BTreeMap::from([(code("2-01"), 0.3)])).unwrap();
        assert_eq!(r, vec![("1".to_owned(), 0.3)]);

        let m = IntensityMatrix::parse("industry_id,2-01,2-02\n1,0.5,0.5\n").unwrap();
        let r = industry_exposure(&m, &BTreeMap::from([(code("2-01"), 0.2), (code("2-02"), 0.4)])).unwrap();
        assert!((r[0].1 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn row_sum_violation_names_row() {
        let err = IntensityMatrix::parse("industry_id,2-01,2-02\n1,0.5,0.5\n7,0.5,0.48\n").unwrap_err();
        match err {
            ExposureError::Invalid(MatrixIssue::RowSum { row, line, .. }) => {
                assert_eq!(row, "7");
                assert_eq!(line, 3);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn structural_checks() {
        assert!(matches!(
            IntensityMatrix::parse("industry_id,2-01,2\n1,0.5,0.5\n"),
            Err(ExposureError::Invalid(MatrixIssue::MixedLevels { .. }))
        ));
        assert!(matches!(
            IntensityMatrix::parse("industry_id,2-01,2-02\n1,1.5,-0.5\n"),
            Err(ExposureError::Invalid(MatrixIssue::NegativeWeight { .. }))
        ));
        assert!(matches!(
            IntensityMatrix::parse("industry,2-01\n1,1\n"),
            Err(ExposureError::KeyColumn { .. })
        ));
        let issues = IntensityMatrix::diagnose("industry_id,2-01,2-02\n1,0.5,0.4\n2,0.9,0.0\n").unwrap();
        assert_eq!(issues.len(), 2);
    }

    #[test]
    fn missing_score_is_an_error() {
        let m = IntensityMatrix::parse("industry_id,2-01,2-02\n1,1.0,0.0\n").unwrap();
        let err = industry_exposure(&m, &BTreeMap::from([(code("2-01"), 0.3)])).unwrap_err();
        assert!(matches!(err, ExposureError::MissingScore(c) if c == "2-02"));
    }

    #[test]
    fn demographic_examples() {
        let d = DemographicShares::parse("age_group,1,2\n16-19,1.0,0.0\n20-29,0.5,0.5\n").unwrap();
        let r = demographic_exposure(&d, &BTreeMap::from([("1".to_owned(), 0.45), ("2".to_owned(), 0.15)])).unwrap();
        assert_eq!(r[0], ("16-19".to_owned(), 0.45));
        let d = DemographicShares::parse("age_group,1,2\nall,0.5,0.5\n").unwrap();
        let r = demographic_exposure(&d, &BTreeMap::from([("1".to_owned(), 0.1), ("2".to_owned(), 0.5)])).unwrap();
        assert!((r[0].1 - 0.3).abs() < 1e-15);
        assert!(matches!(
            demographic_exposure(&d, &BTreeMap::from([("1".to_owned(), 0.1)])),
            Err(ExposureError::MissingScore(_))
        ));
    }
}
