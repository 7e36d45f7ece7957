//! Datasets bundled with the crate.
//!
//! `MEDIUM63_SCORES` and `TAXONOMY_MEDIUM63` hold the 63 medium-category
//! occupations with expert and per-model scores; `INDUSTRIES15` lists the 15
//! industry ids. `DEMO_INTENSITY` and `DEMO_DEMOGRAPHICS` are synthetic
//! demonstration matrices, not survey data.

use std::path::PathBuf;

pub const MEDIUM63_SCORES: &str = include_str!("../fixtures/medium63_scores.csv");
pub const TAXONOMY_MEDIUM63: &str = include_str!("../fixtures/taxonomy_medium63.csv");
pub const INDUSTRIES15: &str = include_str!("../fixtures/industries15.csv");
pub const DEMO_INTENSITY: &str = include_str!("../fixtures/demo_intensity.csv");
pub const DEMO_DEMOGRAPHICS: &str = include_str!("../fixtures/demo_demographics.csv");
pub const DEMO_SCENARIO: &str = include_str!("../fixtures/demo_scenario.toml");

/// Directory holding the fixture files on disk.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// `(industry_id, title)` pairs in file order.
pub fn industries() -> Vec<(String, String)> {
    let table = crate::table::Table::parse(INDUSTRIES15).expect("bundled industry list parses");
    table
        .rows
        .iter()
        .map(|r| (r.get(0).to_owned(), r.get(1).to_owned()))
        .collect()
}
