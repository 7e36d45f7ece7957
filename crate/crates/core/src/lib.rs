//! Occupational exposure to large language models.
//!
//! The crate covers the whole path from rubric annotation to economy-wide
//! effects:
//!
//! - [`taxonomy`]: the four-level occupational classification and averaging
//!   of scores up the tree.
//! - [`annotate`]: prompting classifier clients, response parsing, retries,
//!   deterministic mock clients and the annotation store.
//! - [`scores`]: category points, per-model and ensemble scores, expert
//!   panels and the score table file.
//! - [`exposure`]: projection onto industries and age groups.
//! - [`stats`]: summary panels, Pearson correlation with significance stars,
//!   vacancy shares and scatter reports.
//! - [`model`]: the multi-sector adoption model and contour grids.

pub mod annotate;
pub mod exposure;
pub mod fixtures;
pub mod model;
pub mod scores;
pub mod special;
pub mod stats;
pub mod table;
pub mod taxonomy;

pub use annotate::{AnnotationRun, ClassifierClient, ExposureCategory, MockClient};
pub use exposure::{DemographicShares, IntensityMatrix};
pub use model::{GrowthLaw, Scenario, Sector};
pub use scores::{ExposureRecord, ScoreTable};
pub use stats::{CorrResult, StarThresholds};
pub use taxonomy::{Level, OccupationCode, Taxonomy};
