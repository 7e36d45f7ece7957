//! Multi-sector AI adoption model.
//!
//! Each sector produces a baseline output share `s_i`. Adopting the new
//! technology multiplies sector productivity by `g(r_i)`, where `r_i` is the
//! sector's exposure, and destroys a fraction `δ_i` of the new output. The
//! economy-wide output ratio is
//!
//! ```text
//! g_total = Σ_i s_i · [(1 - x_i) + x_i · (1 - δ_i) · g(r_i)]
//! ```
//!
//! Because the sum is separable, adopting exactly where
//! `(1 - δ_i) · g(r_i) > 1` maximizes it. For `g(r) = exp(r / ρ)` that is
//! `r_i > ρ · ln(1 / (1 - δ_i))`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exposure::{industry_exposure, ExposureError, IntensityMatrix};
use crate::table::{format_value, write_csv};
use crate::taxonomy::OccupationCode;

pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("exposure must be non-negative, got {0}")]
    NegativeExposure(f64),
    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("damage ratio must lie in [0, 1), got {0}")]
    DamageOutOfRange(f64),
    #[error("closed-form threshold needs an exponential growth law")]
    NotExponential,
    #[error("growth table: {0}")]
    BadTable(String),
    #[error("output shares sum to {0}, expected 1")]
    ShareSum(f64),
    #[error("sector `{id}`: {message}")]
    BadSector { id: String, message: String },
    #[error("{got} decisions for {expected} sectors")]
    DecisionCount { expected: usize, got: usize },
    #[error("sectors must be sorted by decreasing exposure (`{0}` breaks the order)")]
    Unsorted(String),
    #[error("grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("adoption ratio {0} is outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Exposure(#[from] ExposureError),
}

/// Piecewise-linear `r -> g` table. Starts at `r = 0`, strictly increasing
/// in `r`, non-decreasing in `g`, `g(0) >= 1`; held flat past the last point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct GrowthTable {
    points: Vec<(f64, f64)>,
}

impl GrowthTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let bad = |m: &str| Err(ModelError::BadTable(m.to_owned()));
        match points.first() {
            None => return bad("no points"),
            Some(&(r0, g0)) => {
                if r0 != 0.0 {
                    return bad("first point must be at r = 0");
                }
                if g0 < 1.0 {
                    return bad("g(0) must be at least 1");
                }
            }
        }
        if points.iter().any(|(r, g)| !r.is_finite() || !g.is_finite()) {
            return bad("non-finite point");
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad("r values must be strictly increasing");
            }
            if w[1].1 < w[0].1 {
                return bad("g values must be non-decreasing");
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval(&self, r: f64) -> f64 {
        let pts = &self.points;
        let k = pts.partition_point(|(x, _)| *x <= r);
        if k == pts.len() {
            return pts[pts.len() - 1].1;
        }
        // k >= 1 because pts[0].0 == 0 <= r
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        y0 + (y1 - y0) * (r - x0) / (x1 - x0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for GrowthTable {
    type Error = ModelError;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<GrowthTable> for Vec<(f64, f64)> {
    fn from(t: GrowthTable) -> Self {
        t.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthLaw {
    /// `g(r) = exp(r / rho)`
    Exponential {
        rho: f64,
    },
    Custom {
        table: GrowthTable,
    },
}

impl GrowthLaw {
    pub fn exponential(rho: f64) -> Result<Self, ModelError> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ModelError::NonPositiveRho(rho));
        }
        Ok(GrowthLaw::Exponential { rho })
    }
}

pub fn growth_factor(law: &GrowthLaw, r: f64) -> Result<f64, ModelError> {
    if r.is_nan() || r < 0.0 {
        return Err(ModelError::NegativeExposure(r));
    }
    match law {
        GrowthLaw::Exponential { rho } => {
            if rho.is_nan() || *rho <= 0.0 {
                return Err(ModelError::NonPositiveRho(*rho));
            }
            Ok((r / rho).exp())
        }
        GrowthLaw::Custom { table } => Ok(table.eval(r)),
    }
}

fn check_delta(delta: f64) -> Result<(), ModelError> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(ModelError::DamageOutOfRange(delta))
    }
}

/// Exposure above which adoption pays: `ρ · ln(1 / (1 - δ))`.
pub fn adoption_threshold(delta: f64, law: &GrowthLaw) -> Result<f64, ModelError> {
    check_delta(delta)?;
    match law {
        GrowthLaw::Exponential { rho } => {
            if rho.is_nan() || *rho <= 0.0 {
                return Err(ModelError::NonPositiveRho(*rho));
            }
            Ok(rho * (1.0 / (1.0 - delta)).ln())
        }
        GrowthLaw::Custom { .. } => Err(ModelError::NotExponential),
    }
}

/// Threshold for any non-decreasing law, found by bisection on
/// `(1 - δ) · g(r) > 1` over `[0, r_max]`. `None` when even `r_max` does
/// not pay.
pub fn bisect_threshold(delta: f64, law: &GrowthLaw, r_max: f64) -> Result<Option<f64>, ModelError> {
    check_delta(delta)?;
    let pays = |r: f64| -> Result<bool, ModelError> { Ok((1.0 - delta) * growth_factor(law, r)? > 1.0) };
    if pays(0.0)? {
        return Ok(Some(0.0));
    }
    if !pays(r_max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pays(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub id: String,
    /// Baseline sector output, when the scenario gives levels instead of shares.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_output: Option<f64>,
    pub output_share: f64,
    pub damage_ratio: f64,
    pub exposure: f64,
}

impl Sector {
    pub fn new(id: impl Into<String>, output_share: f64, damage_ratio: f64, exposure: f64) -> Self {
        Self {
            id: id.into(),
            baseline_output: None,
            output_share,
            damage_ratio,
            exposure,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |message: String| {
            Err(ModelError::BadSector {
                id: self.id.clone(),
                message,
            })
        };
        if !(0.0..=1.0).contains(&self.output_share) {
            return bad(format!("output share {} outside [0, 1]", self.output_share));
        }
        if !(0.0..1.0).contains(&self.damage_ratio) {
            return bad(format!("damage ratio {} outside [0, 1)", self.damage_ratio));
        }
        if !(0.0..=1.0).contains(&self.exposure) {
            return bad(format!("exposure {} outside [0, 1]", self.exposure));
        }
        if let Some(y) = self.baseline_output {
            if !(y >= 0.0 && y.is_finite()) {
                return bad(format!("baseline output {y} must be non-negative"));
            }
        }
        Ok(())
    }
}

pub fn validate_economy(sectors: &[Sector]) -> Result<(), ModelError> {
    for s in sectors {
        s.validate()?;
    }
    let sum: f64 = sectors.iter().map(|s| s.output_share).sum();
    if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
        return Err(ModelError::ShareSum(sum));
    }
    Ok(())
}

/// Adopt iff `(1 - δ) · g(r) > 1`; a tie does not adopt.
pub fn adopt_decision(sector: &Sector, law: &GrowthLaw) -> Result<bool, ModelError> {
    check_delta(sector.damage_ratio)?;
    Ok((1.0 - sector.damage_ratio) * growth_factor(law, sector.exposure)? > 1.0)
}

fn sector_term(s: &Sector, law: &GrowthLaw, adopt: bool) -> Result<f64, ModelError> {
    Ok(if adopt {
        (1.0 - s.damage_ratio) * growth_factor(law, s.exposure)?
    } else {
        1.0
    })
}

/// Output ratio of the new allocation to the old-technology baseline.
pub fn aggregate_growth(sectors: &[Sector], law: &GrowthLaw, decisions: &[bool]) -> Result<f64, ModelError> {
    if decisions.len() != sectors.len() {
        return Err(ModelError::DecisionCount {
            expected: sectors.len(),
            got: decisions.len(),
        });
    }
    validate_economy(sectors)?;
    // 1 + Σ s_i x_i ((1 - δ_i) g(r_i) - 1): equal to Σ s_i [...] because the
    // shares sum to one, and exactly 1 when nobody adopts
    let mut gain = 0.0;
    for (s, &x) in sectors.iter().zip(decisions) {
        if x {
            gain += s.output_share * (sector_term(s, law, true)? - 1.0);
        }
    }
    Ok(1.0 + gain)
}

pub fn optimal_decisions(sectors: &[Sector], law: &GrowthLaw) -> Result<Vec<bool>, ModelError> {
    sectors.iter().map(|s| adopt_decision(s, law)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorDiagnostic {
    pub id: String,
    pub output_share: f64,
    pub exposure: f64,
    pub damage_ratio: f64,
    pub growth_factor: f64,
    /// `None` for custom laws whose threshold lies beyond `r = 1`.
    pub threshold: Option<f64>,
    pub adopt: u8,
    /// New-technology output `g(r) · s`, before damage, in baseline units.
    pub new_output: f64,
    /// Damage `x · δ · g(r) · s`, in baseline units.
    pub damage: f64,
    /// This sector's term of the aggregate sum.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub law: GrowthLaw,
    pub sectors: Vec<SectorDiagnostic>,
    pub decisions: Vec<u8>,
    pub aggregate_growth: f64,
}

pub fn scenario_report(sectors: &[Sector], law: &GrowthLaw, decisions: &[bool]) -> Result<ScenarioReport, ModelError> {
    let aggregate_growth = aggregate_growth(sectors, law, decisions)?;
    let mut diag = Vec::with_capacity(sectors.len());
    for (s, &x) in sectors.iter().zip(decisions) {
        let g = growth_factor(law, s.exposure)?;
        let threshold = match law {
            GrowthLaw::Exponential { .. } => Some(adoption_threshold(s.damage_ratio, law)?),
            GrowthLaw::Custom { .. } => bisect_threshold(s.damage_ratio, law, 1.0)?,
        };
        let xi = f64::from(u8::from(x));
        diag.push(SectorDiagnostic {
            id: s.id.clone(),
            output_share: s.output_share,
            exposure: s.exposure,
            damage_ratio: s.damage_ratio,
            growth_factor: g,
            threshold,
            adopt: u8::from(x),
            new_output: g * s.output_share,
            damage: xi * s.damage_ratio * g * s.output_share,
            contribution: s.output_share * sector_term(s, law, x)?,
        });
    }
    Ok(ScenarioReport {
        law: law.clone(),
        sectors: diag,
        decisions: decisions.iter().map(|&x| u8::from(x)).collect(),
        aggregate_growth,
    })
}

pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| {
                if k == points - 1 {
                    end
                } else {
                    start + (end - start) * k as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

pub const DEFAULT_GRID_POINTS: usize = 21;
pub const DEFAULT_DELTA_MAX: f64 = 0.95;

/// Number of top-exposure sectors that adopt at adoption ratio `a`.
pub fn adopting_count(ratio: f64, n: usize) -> usize {
    // the nudge keeps k/20 · n from flooring one short
    (((ratio * n as f64) + 1e-9).floor() as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourGrid {
    /// Row axis: uniform damage ratio applied to every sector.
    pub deltas: Vec<f64>,
    /// Column axis: fraction of sectors (by decreasing exposure) adopting.
    pub ratios: Vec<f64>,
    /// `values[row][col]`.
    pub values: Vec<Vec<f64>>,
}

impl ContourGrid {
    pub fn to_csv(&self, decimals: Option<usize>) -> String {
        let mut header = vec!["delta".to_owned()];
        header.extend(self.ratios.iter().map(|r| format_value(*r, decimals)));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(
            &header_refs,
            self.deltas.iter().zip(&self.values).map(|(d, row)| {
                std::iter::once(format_value(*d, decimals))
                    .chain(row.iter().map(|v| format_value(*v, decimals)))
                    .collect::<Vec<_>>()
            }),
        )
    }
}

/// Aggregate growth over a (damage ratio × adoption ratio) grid. Cell
/// `(d, a)` forces the top `⌊a · n⌋` sectors to adopt and sets every
/// `δ_i = d`. Sectors must already be sorted by decreasing exposure.
pub fn contour_grid(
    sectors: &[Sector],
    law: &GrowthLaw,
    delta_grid: &[f64],
    ratio_grid: &[f64],
) -> Result<ContourGrid, ModelError> {
    if delta_grid.is_empty() {
        return Err(ModelError::EmptyGrid("delta"));
    }
    if ratio_grid.is_empty() {
        return Err(ModelError::EmptyGrid("adoption ratio"));
    }
    for w in sectors.windows(2) {
        if w[1].exposure > w[0].exposure {
            return Err(ModelError::Unsorted(w[1].id.clone()));
        }
    }
    for &d in delta_grid {
        check_delta(d)?;
    }
    for &a in ratio_grid {
        if !(0.0..=1.0).contains(&a) {
            return Err(ModelError::RatioOutOfRange(a));
        }
    }
    validate_economy(sectors)?;
    let n = sectors.len();
    let values = delta_grid
        .par_iter()
        .map(|&d| {
            let economy: Vec<Sector> = sectors
                .iter()
                .map(|s| Sector {
                    damage_ratio: d,
                    ..s.clone()
                })
                .collect();
            ratio_grid
                .iter()
                .map(|&a| {
                    let k = adopting_count(a, n);
                    let decisions: Vec<bool> = (0..n).map(|i| i < k).collect();
                    aggregate_growth(&economy, law, &decisions)
                })
                .collect::<Result<Vec<f64>, ModelError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ContourGrid {
        deltas: delta_grid.to_vec(),
        ratios: ratio_grid.to_vec(),
        values,
    })
}

/// Stable sort by decreasing exposure.
pub fn sort_by_exposure(sectors: &mut [Sector]) {
    sectors.sort_by(|a, b| b.exposure.total_cmp(&a.exposure));
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSector {
    id: String,
    share: Option<f64>,
    baseline_output: Option<f64>,
    delta: Option<f64>,
    exposure: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default = "default_law")]
    law: String,
    rho: Option<f64>,
    growth_table: Option<Vec<(f64, f64)>>,
    /// Convenience: `δ_i = κ · r_i` for sectors without `delta`.
    damage_per_exposure: Option<f64>,
    #[serde(rename = "sector")]
    sectors: Vec<RawSector>,
}

fn default_law() -> String {
    "exponential".to_owned()
}

/// Sectors plus growth law, as read from a scenario file.
///
/// ```toml
/// law = "exponential"   # or "custom" with growth_table = [[0.0, 1.0], ...]
/// rho = 1.0
/// [[sector]]
/// id = "1"
/// share = 0.2           # or baseline_output = 120.0 (all sectors alike)
/// delta = 0.1
/// exposure = 0.35       # omit to derive from an intensity matrix row
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub law: GrowthLaw,
    pub sectors: Vec<Sector>,
}

/// Occupational inputs used to derive sector exposure when a scenario omits it.
pub struct ExposureSource<'a> {
    pub intensity: &'a IntensityMatrix,
    pub occupation_scores: &'a BTreeMap<OccupationCode, f64>,
}

impl Scenario {
    pub fn load(
        path: &Path,
        rho_override: Option<f64>,
        source: Option<ExposureSource<'_>>,
    ) -> Result<Self, ModelError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ModelError::Scenario(format!("{}: {e}", path.display())))?;
        Self::parse(&text, rho_override, source)
    }

    pub fn parse(
        text: &str,
        rho_override: Option<f64>,
        source: Option<ExposureSource<'_>>,
    ) -> Result<Self, ModelError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ModelError::Scenario(e.to_string()))?;
        let law = match raw.law.as_str() {
            "exponential" => GrowthLaw::exponential(rho_override.or(raw.rho).unwrap_or(1.0))?,
            "custom" => GrowthLaw::Custom {
                table: GrowthTable::new(
                    raw.growth_table
                        .ok_or_else(|| ModelError::Scenario("custom law needs growth_table".into()))?,
                )?,
            },
            other => return Err(ModelError::Scenario(format!("unknown law `{other}`"))),
        };
        if raw.sectors.is_empty() {
            return Err(ModelError::Scenario("no sectors".into()));
        }

        let derived: Option<BTreeMap<String, f64>> = match &source {
            Some(src) => Some(
                industry_exposure(src.intensity, src.occupation_scores)?
                    .into_iter()
                    .collect(),
            ),
            None => None,
        };

        let by_level = raw.sectors.iter().filter(|s| s.baseline_output.is_some()).count();
        if by_level != 0 && by_level != raw.sectors.len() {
            return Err(ModelError::Scenario(
                "give either `share` or `baseline_output` for every sector, not a mix".into(),
            ));
        }
        let total_output: f64 = raw.sectors.iter().filter_map(|s| s.baseline_output).sum();
        if by_level != 0 && (total_output.is_nan() || total_output <= 0.0) {
            return Err(ModelError::Scenario("baseline outputs sum to zero".into()));
        }

        let mut sectors = Vec::with_capacity(raw.sectors.len());
        for rs in raw.sectors {
            let bad = |m: &str| ModelError::BadSector {
                id: rs.id.clone(),
                message: m.to_owned(),
            };
            let share = match (rs.share, rs.baseline_output) {
                (Some(_), Some(_)) => return Err(bad("give `share` or `baseline_output`, not both")),
                (Some(s), None) => s,
                (None, Some(y)) => y / total_output,
                (None, None) => return Err(bad("missing `share` or `baseline_output`")),
            };
            let exposure = match (rs.exposure, &derived) {
                (Some(r), _) => r,
                (None, Some(d)) => *d.get(&rs.id).ok_or_else(|| bad("no intensity row for this sector"))?,
                (None, None) => return Err(bad("missing `exposure` and no intensity matrix was given")),
            };
            let damage_ratio = match (rs.delta, raw.damage_per_exposure) {
                (Some(d), _) => d,
                (None, Some(k)) => k * exposure,
                (None, None) => return Err(bad("missing `delta`")),
            };
            let sector = Sector {
                id: rs.id.clone(),
                baseline_output: rs.baseline_output,
                output_share: share,
                damage_ratio,
                exposure,
            };
            sector.validate()?;
            sectors.push(sector);
        }
        validate_economy(&sectors)?;
        Ok(Self { law, sectors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(rho: f64) -> GrowthLaw {
        GrowthLaw::exponential(rho).unwrap()
    }

    #[test]
    fn growth_factor_examples() {
        assert_eq!(growth_factor(&exp(1.0), 0.0).unwrap(), 1.0);
        assert!((growth_factor(&exp(1.0), 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert!((growth_factor(&exp(0.5), 0.25).unwrap() - 1.648_721_270_700_128).abs() < 1e-12);
        assert!(matches!(
            growth_factor(&exp(1.0), -0.1),
            Err(ModelError::NegativeExposure(_))
        ));
        assert!(matches!(
            GrowthLaw::exponential(0.0),
            Err(ModelError::NonPositiveRho(_))
        ));
        assert!(matches!(
            growth_factor(&GrowthLaw::Exponential { rho: -1.0 }, 0.5),
            Err(ModelError::NonPositiveRho(_))
        ));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(adoption_threshold(0.0, &exp(1.0)).unwrap(), 0.0);
        assert!((adoption_threshold(0.2, &exp(1.0)).unwrap() - 0.223_143_551_314_209_7).abs() < 1e-12);
        assert!((adoption_threshold(0.5, &exp(2.0)).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-12);
        assert!(matches!(
            adoption_threshold(1.0, &exp(1.0)),
            Err(ModelError::DamageOutOfRange(_))
        ));
        let custom = GrowthLaw::Custom {
            table: GrowthTable::new(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap(),
        };
        assert!(matches!(
            adoption_threshold(0.2, &custom),
            Err(ModelError::NotExponential)
        ));
    }

    #[test]
    fn decision_examples() {
        let law = exp(1.0);
        assert!(adopt_decision(&Sector::new("a", 1.0, 0.2, 0.3), &law).unwrap());
        assert!(!adopt_decision(&Sector::new("a", 1.0, 0.2, 0.1), &law).unwrap());
        assert!(!adopt_decision(&Sector::new("a", 1.0, 0.0, 0.0), &law).unwrap());
    }

    #[test]
    fn aggregate_examples() {
        let law = exp(1.0);
        let s = vec![Sector::new("a", 0.3, 0.4, 0.9), Sector::new("b", 0.7, 0.1, 0.2)];
        assert_eq!(aggregate_growth(&s, &law, &[false, false]).unwrap(), 1.0);
        let one = vec![Sector::new("a", 1.0, 0.0, 2f64.ln())];
        assert!((aggregate_growth(&one, &law, &[true]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            aggregate_growth(&s, &law, &[true]),
            Err(ModelError::DecisionCount { .. })
        ));
        let skew = vec![Sector::new("a", 0.3, 0.4, 0.9), Sector::new("b", 0.6, 0.1, 0.2)];
        assert!(matches!(
            aggregate_growth(&skew, &law, &[false, false]),
            Err(ModelError::ShareSum(_))
        ));
    }

    #[test]
    fn corner_economies() {
        let law = exp(0.5);
        let costless: Vec<_> = (0..4)
            .map(|i| Sector::new(i.to_string(), 0.25, 0.0, 0.1 * (i + 1) as f64))
            .collect();
        assert_eq!(optimal_decisions(&costless, &law).unwrap(), vec![true; 4]);
        let flat: Vec<_> = (0..4)
            .map(|i| Sector::new(i.to_string(), 0.25, 0.1 * i as f64, 0.0))
            .collect();
        assert_eq!(optimal_decisions(&flat, &law).unwrap(), vec![false; 4]);
    }

    #[test]
    fn custom_table_interpolates_and_bisects() {
        let table = GrowthTable::new(vec![(0.0, 1.0), (0.5, 1.5), (1.0, 1.5)]).unwrap();
        let law = GrowthLaw::Custom { table };
        assert!((growth_factor(&law, 0.25).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(growth_factor(&law, 3.0).unwrap(), 1.5);
        // (1 - 0.2) g(r) > 1 ⇔ g(r) > 1.25 ⇔ r > 0.25
        let t = bisect_threshold(0.2, &law, 1.0).unwrap().unwrap();
        assert!((t - 0.25).abs() < 1e-12);
        assert_eq!(bisect_threshold(0.5, &law, 1.0).unwrap(), None);
        // bisection agrees with the closed form for the exponential law
        let t = bisect_threshold(0.3, &exp(0.7), 5.0).unwrap().unwrap();
        assert!((t - adoption_threshold(0.3, &exp(0.7)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bad_tables() {
        assert!(GrowthTable::new(vec![]).is_err());
        assert!(GrowthTable::new(vec![(0.1, 1.0)]).is_err());
        assert!(GrowthTable::new(vec![(0.0, 0.9)]).is_err());
        assert!(GrowthTable::new(vec![(0.0, 1.0), (0.5, 0.99)]).is_err());
        assert!(GrowthTable::new(vec![(0.0, 1.0), (0.0, 1.2)]).is_err());
    }

    #[test]
    fn adopting_counts_floor() {
        assert_eq!(adopting_count(0.0, 15), 0);
        assert_eq!(adopting_count(0.7, 15), 10);
        assert_eq!(adopting_count(0.2, 15), 3);
        assert_eq!(adopting_count(1.0, 15), 15);
        for k in 0..=20 {
            assert_eq!(adopting_count(k as f64 / 20.0, 20), k);
        }
    }

    #[test]
    fn contour_rejects_unsorted() {
        let s = vec![Sector::new("a", 0.5, 0.0, 0.1), Sector::new("b", 0.5, 0.0, 0.2)];
        assert!(matches!(
            contour_grid(&s, &exp(1.0), &[0.0], &[0.0]),
            Err(ModelError::Unsorted(id)) if id == "b"
        ));
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 0.95, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 0.95);
        assert!((g[10] - 0.475).abs() < 1e-15);
    }

    #[test]
    fn scenario_parsing() {
        let text = "rho = 2.0\n[[sector]]\nid = \"1\"\nbaseline_output = 30.0\ndelta = 0.1\nexposure = 0.4\n\
                    [[sector]]\nid = \"2\"\nbaseline_output = 70.0\ndelta = 0.0\nexposure = 0.0\n";
        let s = Scenario::parse(text, None, None).unwrap();
        assert_eq!(s.law, GrowthLaw::Exponential { rho: 2.0 });
        assert!((s.sectors[0].output_share - 0.3).abs() < 1e-15);
        let s = Scenario::parse(text, Some(0.5), None).unwrap();
        assert_eq!(s.law, GrowthLaw::Exponential { rho: 0.5 });

        let kappa = "damage_per_exposure = 0.5\n[[sector]]\nid = \"1\"\nshare = 1.0\nexposure = 0.4\n";
        let s = Scenario::parse(kappa, None, None).unwrap();
        assert!((s.sectors[0].damage_ratio - 0.2).abs() < 1e-15);

        let too_much = "[[sector]]\nid = \"1\"\nshare = 1.0\ndelta = 1.0\nexposure = 0.4\n";
        assert!(matches!(
            Scenario::parse(too_much, None, None),
            Err(ModelError::BadSector { .. })
        ));
        let mixed = "[[sector]]\nid = \"1\"\nshare = 0.5\ndelta = 0.1\nexposure = 0.4\n\
                     [[sector]]\nid = \"2\"\nbaseline_output = 5.0\ndelta = 0.1\nexposure = 0.4\n";
        assert!(matches!(
            Scenario::parse(mixed, None, None),
            Err(ModelError::Scenario(_))
        ));
    }

    #[test]
    fn scenario_exposure_from_intensity() {
        let beta = IntensityMatrix::parse("industry_id,2-01,2-02\n1,0.25,0.75\n2,1.0,0.0\n").unwrap();
        let scores = BTreeMap::from([("2-01".parse().unwrap(), 0.8), ("2-02".parse().unwrap(), 0.4)]);
        let text = "[[sector]]\nid = \"1\"\nshare = 0.5\ndelta = 0.1\n[[sector]]\nid = \"2\"\nshare = 0.5\ndelta = 0.1\nexposure = 0.1\n";
        let s = Scenario::parse(
            text,
            None,
            Some(ExposureSource {
                intensity: &beta,
                occupation_scores: &scores,
            }),
        )
        .unwrap();
        assert!((s.sectors[0].exposure - 0.5).abs() < 1e-15);
        assert_eq!(s.sectors[1].exposure, 0.1);
        assert!(Scenario::parse(text, None, None).is_err());
    }

    #[test]
    fn report_diagnostics() {
        let law = exp(1.0);
        let s = vec![Sector::new("a", 0.4, 0.2, 0.3), Sector::new("b", 0.6, 0.2, 0.1)];
        let d = optimal_decisions(&s, &law).unwrap();
        let rep = scenario_report(&s, &law, &d).unwrap();
        assert_eq!(rep.decisions, vec![1, 0]);
        let sum: f64 = rep.sectors.iter().map(|x| x.contribution).sum();
        assert!((sum - rep.aggregate_growth).abs() < 1e-15);
        assert!((rep.sectors[0].damage - 0.2 * 0.3f64.exp() * 0.4).abs() < 1e-15);
        assert_eq!(rep.sectors[1].damage, 0.0);
    }
}
