//! Descriptive statistics for exposure scores: summary panels, Pearson
//! correlation with Student-t significance stars, vacancy shares and their
//! growth, and exposure-vs-outcome scatter reports with an OLS fit line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::special::beta_reg;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{parse_f64, Table, TableError};
use crate::taxonomy::OccupationCode;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: {0} series is constant")]
    ConstantSeries(&'static str),
    #[error("vacancy counts must be non-negative (`{code}` has {value})")]
    NegativeCount { code: OccupationCode, value: f64 },
    #[error("vacancy counts sum to zero")]
    ZeroTotal,
    #[error("baseline share for `{0}` is zero")]
    ZeroBaseline(OccupationCode),
    #[error("share series cover different occupations (`{0}` is in only one)")]
    CodeSetMismatch(OccupationCode),
    #[error("shares sum to {0}, expected 1")]
    ShareSum(f64),
    #[error("no occupation appears in both the exposure and outcome series")]
    EmptyIntersection,
    #[error("line {line}: malformed occupation code `{raw}`")]
    MalformedCode { line: u64, raw: String },
    #[error("unknown outcome kind `{0}`")]
    UnknownKind(String),
    #[error("star thresholds must be strictly increasing p-values in (0, 1]")]
    BadThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (denominator n - 1).
    pub std: f64,
}

/// Single-pass (Welford) mean and sample standard deviation.
pub fn summarize(series: &[f64]) -> Result<SummaryEntry, StatsError> {
    if series.len() < 2 {
        return Err(StatsError::TooFew {
            need: 2,
            got: series.len(),
        });
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in series.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(SummaryEntry {
        count: series.len(),
        mean,
        std: (m2 / (series.len() - 1) as f64).max(0.0).sqrt(),
    })
}

/// p-value cut-offs for significance stars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarThresholds {
    /// `(p_cutoff, stars)`, sorted by increasing cut-off.
    levels: Vec<(f64, String)>,
}

impl Default for StarThresholds {
    fn default() -> Self {
        Self {
            levels: vec![(0.001, "***".into()), (0.01, "**".into()), (0.05, "*".into())],
        }
    }
}

impl StarThresholds {
    /// Cut-offs for one, two, three... stars, e.g. `[0.05, 0.01, 0.001]`.
    pub fn new(cutoffs: &[f64]) -> Result<Self, StatsError> {
        if cutoffs.is_empty()
            || cutoffs.iter().any(|p| !(*p > 0.0 && *p <= 1.0))
            || cutoffs.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(StatsError::BadThresholds);
        }
        let mut levels: Vec<(f64, String)> = cutoffs
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, "*".repeat(i + 1)))
            .collect();
        levels.reverse();
        Ok(Self { levels })
    }

    /// A p-value earns the stars of the strictest cut-off it falls below.
    pub fn stars(&self, p: f64) -> &str {
        self.levels
            .iter()
            .find(|(cut, _)| p < *cut)
            .map(|(_, s)| s.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrResult {
    pub r: f64,
    pub n: usize,
    pub t: f64,
    pub p_value: f64,
    pub stars: String,
}

impl fmt::Display for CorrResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}{}", self.r, self.stars)
    }
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooFew {
            need: min,
            got: x.len(),
        });
    }
    Ok(())
}

/// Pearson r only; requires two points and non-constant series.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantSeries("first"));
    }
    if syy == 0.0 {
        return Err(StatsError::ConstantSeries("second"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under H0: ρ = 0, Student t with n - 2 df.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    let t2 = r * r * df / one_minus;
    // P(|T| > t) = I_{df / (df + t²)}(df / 2, 1 / 2)
    beta_reg(df / 2.0, 0.5, df / (df + t2)).clamp(0.0, 1.0)
}

pub fn pearson(x: &[f64], y: &[f64], thresholds: &StarThresholds) -> Result<CorrResult, StatsError> {
    check_pair(x, y, 3)?;
    let r = pearson_r(x, y)?;
    let n = x.len();
    let one_minus = 1.0 - r * r;
    let t = if one_minus <= 0.0 {
        f64::INFINITY.copysign(r)
    } else {
        r * ((n - 2) as f64).sqrt() / one_minus.sqrt()
    };
    let p_value = correlation_p_value(r, n);
    Ok(CorrResult {
        r,
        n,
        t,
        p_value,
        stars: thresholds.stars(p_value).to_owned(),
    })
}

/// Pairs two keyed series on their common keys, in key order.
pub fn paired<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> (Vec<K>, Vec<f64>, Vec<f64>) {
    let mut keys = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, x) in a {
        if let Some(y) = b.get(k) {
            keys.push(k.clone());
            xs.push(*x);
            ys.push(*y);
        }
    }
    (keys, xs, ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<CorrResult>>,
}

/// Pairwise complete-case correlations between named series.
pub fn correlation_matrix(
    series: &[(String, BTreeMap<OccupationCode, f64>)],
    thresholds: &StarThresholds,
) -> Result<CorrelationMatrix, StatsError> {
    let mut cells = Vec::with_capacity(series.len());
    for (i, (_, a)) in series.iter().enumerate() {
        let mut row = Vec::with_capacity(series.len());
        for (j, (_, b)) in series.iter().enumerate() {
            let (_, x, y) = paired(a, b);
            let mut c = pearson(&x, &y, thresholds)?;
            if i == j {
                // exact on the diagonal rather than 1 - ε
                c.r = 1.0;
                c.t = f64::INFINITY;
                c.p_value = 0.0;
                c.stars = thresholds.stars(0.0).to_owned();
            }
            row.push(c);
        }
        cells.push(row);
    }
    Ok(CorrelationMatrix {
        names: series.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Salary,
    WageGrowth,
    VacancyShare,
    VacancyShareGrowth,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Salary => "salary",
            OutcomeKind::WageGrowth => "wage_growth",
            OutcomeKind::VacancyShare => "vacancy_share",
            OutcomeKind::VacancyShareGrowth => "vacancy_share_growth",
        }
    }
}

impl FromStr for OutcomeKind {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "salary" => Ok(OutcomeKind::Salary),
            "wage_growth" => Ok(OutcomeKind::WageGrowth),
            "vacancy_share" => Ok(OutcomeKind::VacancyShare),
            "vacancy_share_growth" => Ok(OutcomeKind::VacancyShareGrowth),
            other => Err(StatsError::UnknownKind(other.to_owned())),
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeSeries {
    pub kind: OutcomeKind,
    pub values: BTreeMap<OccupationCode, f64>,
    /// Codes listed with an empty value; dropped from every analysis.
    pub missing: Vec<OccupationCode>,
}

impl OutcomeSeries {
    pub fn new(kind: OutcomeKind, values: BTreeMap<OccupationCode, f64>) -> Result<Self, StatsError> {
        let s = Self {
            kind,
            values,
            missing: Vec::new(),
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), StatsError> {
        if self.kind == OutcomeKind::VacancyShare && self.missing.is_empty() {
            let sum: f64 = self.values.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(StatsError::ShareSum(sum));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<OutcomeInput, StatsError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?)
    }

    /// Reads `code,<kind>`. A `vacancy_count` column yields raw counts that
    /// are normalized into shares.
    pub fn parse(text: &str) -> Result<OutcomeInput, StatsError> {
        let table = Table::parse(text)?;
        let code_col = table.column("code")?;
        let val_col = if code_col == 0 { 1 } else { 0 };
        let kind_name = table.header.get(val_col).cloned().unwrap_or_default();
        let mut values = BTreeMap::new();
        let mut missing = Vec::new();
        for row in &table.rows {
            let raw = row.get(code_col);
            let code = OccupationCode::parse(raw).map_err(|_| StatsError::MalformedCode {
                line: row.line,
                raw: raw.to_owned(),
            })?;
            if row.get(val_col).is_empty() {
                missing.push(code);
            } else {
                values.insert(code, parse_f64(row, val_col, &kind_name)?);
            }
        }
        if kind_name.eq_ignore_ascii_case("vacancy_count") {
            return Ok(OutcomeInput::VacancyCounts(values));
        }
        let s = OutcomeSeries {
            kind: kind_name.parse()?,
            values,
            missing,
        };
        s.check()?;
        Ok(OutcomeInput::Series(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeInput {
    Series(OutcomeSeries),
    VacancyCounts(BTreeMap<OccupationCode, f64>),
}

impl OutcomeInput {
    pub fn into_series(self) -> Result<OutcomeSeries, StatsError> {
        match self {
            OutcomeInput::Series(s) => Ok(s),
            OutcomeInput::VacancyCounts(c) => vacancy_shares(&c),
        }
    }
}

pub fn vacancy_shares(counts: &BTreeMap<OccupationCode, f64>) -> Result<OutcomeSeries, StatsError> {
    for (code, &v) in counts {
        if v < 0.0 {
            return Err(StatsError::NegativeCount {
                code: code.clone(),
                value: v,
            });
        }
    }
    let total: f64 = counts.values().sum();
    if total <= 0.0 {
        return Err(StatsError::ZeroTotal);
    }
    Ok(OutcomeSeries {
        kind: OutcomeKind::VacancyShare,
        values: counts.iter().map(|(c, v)| (c.clone(), v / total)).collect(),
        missing: Vec::new(),
    })
}

/// Relative change of each occupation's share between two periods.
pub fn share_growth(t0: &OutcomeSeries, t1: &OutcomeSeries) -> Result<OutcomeSeries, StatsError> {
    if let Some(c) = t0
        .values
        .keys()
        .find(|c| !t1.values.contains_key(*c))
        .or_else(|| t1.values.keys().find(|c| !t0.values.contains_key(*c)))
    {
        return Err(StatsError::CodeSetMismatch(c.clone()));
    }
    let mut values = BTreeMap::new();
    for (code, &base) in &t0.values {
        if base == 0.0 {
            return Err(StatsError::ZeroBaseline(code.clone()));
        }
        values.insert(code.clone(), (t1.values[code] - base) / base);
    }
    Ok(OutcomeSeries {
        kind: OutcomeKind::VacancyShareGrowth,
        values,
        missing: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<FitLine, StatsError> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantSeries("exposure"));
    }
    let slope = sxy / sxx;
    Ok(FitLine {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub code: OccupationCode,
    pub title: String,
    pub exposure: f64,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterReport {
    pub outcome_kind: OutcomeKind,
    /// Effective sample size after complete-case filtering.
    pub n: usize,
    pub dropped: Vec<OccupationCode>,
    pub r: f64,
    /// Present when n >= 3.
    pub correlation: Option<CorrResult>,
    pub fit: FitLine,
    pub rows: Vec<ScatterRow>,
}

impl ScatterReport {
    /// `x,y,label` triples for external plotting.
    pub fn plot_data(&self, decimals: Option<usize>) -> String {
        use crate::table::{format_value, write_csv};
        write_csv(
            &["x", "y", "label"],
            self.rows.iter().map(|r| {
                vec![
                    format_value(r.exposure, decimals),
                    format_value(r.outcome, decimals),
                    if r.title.is_empty() {
                        r.code.to_string()
                    } else {
                        format!("{} {}", r.code, r.title)
                    },
                ]
            }),
        )
    }
}

pub fn scatter_report(
    exposure: &BTreeMap<OccupationCode, f64>,
    outcome: &OutcomeSeries,
    titles: &BTreeMap<OccupationCode, String>,
    thresholds: &StarThresholds,
) -> Result<ScatterReport, StatsError> {
    let (codes, x, y) = paired(exposure, &outcome.values);
    if codes.is_empty() {
        return Err(StatsError::EmptyIntersection);
    }
    let mut dropped: Vec<OccupationCode> = exposure
        .keys()
        .filter(|c| !outcome.values.contains_key(*c))
        .cloned()
        .collect();
    dropped.sort();
    let r = pearson_r(&x, &y)?;
    let correlation = if x.len() >= 3 {
        Some(pearson(&x, &y, thresholds)?)
    } else {
        None
    };
    let fit = ols(&x, &y)?;
    let rows = codes
        .into_iter()
        .zip(x.iter().zip(&y))
        .map(|(code, (&ex, &out))| ScatterRow {
            title: titles.get(&code).cloned().unwrap_or_default(),
            code,
            exposure: ex,
            outcome: out,
        })
        .collect::<Vec<_>>();
    Ok(ScatterReport {
        outcome_kind: outcome.kind,
        n: rows.len(),
        dropped,
        r,
        correlation,
        fit,
        rows,
    })
}
