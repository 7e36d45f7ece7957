//! Four-level occupational classification tree and score aggregation up the
//! hierarchy.
//!
//! Codes are dash-separated numeric segments: `2` (large), `2-06` (medium),
//! `2-06-01` (small), `2-06-01-01` (fine). Parentage follows the code prefix.
//! Exclusion is read from the taxonomy file and inherited by every descendant.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Large,
    Medium,
    Small,
    Fine,
}

impl Level {
    fn from_depth(depth: usize) -> Option<Self> {
        match depth {
            1 => Some(Level::Large),
            2 => Some(Level::Medium),
            3 => Some(Level::Small),
            4 => Some(Level::Fine),
            _ => None,
        }
    }

    pub fn depth(self) -> usize {
        self as usize + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Large => "large",
            Level::Medium => "medium",
            Level::Small => "small",
            Level::Fine => "fine",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed occupation code `{0}`")]
pub struct MalformedCode(pub String);

/// A validated occupation code. Ordering is numeric segment by segment, so
/// `2-9` sorts before `2-10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationCode {
    raw: String,
    segments: Vec<u32>,
}

impl OccupationCode {
    pub fn parse(raw: &str) -> Result<Self, MalformedCode> {
        let raw = raw.trim();
        let segments = raw
            .split('-')
            .map(|s| {
                if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                    None
                } else {
                    s.parse::<u32>().ok()
                }
            })
            .collect::<Option<Vec<_>>>()
            .filter(|s| Level::from_depth(s.len()).is_some())
            .ok_or_else(|| MalformedCode(raw.to_owned()))?;
        Ok(Self {
            raw: raw.to_owned(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn level(&self) -> Level {
        Level::from_depth(self.segments.len()).expect("validated at parse")
    }

    /// Code of the enclosing category, `None` for large categories.
    pub fn parent(&self) -> Option<OccupationCode> {
        if self.segments.len() == 1 {
            return None;
        }
        let cut = self.raw.rfind('-').expect("multi-segment code has a dash");
        Some(Self {
            raw: self.raw[..cut].to_owned(),
            segments: self.segments[..self.segments.len() - 1].to_vec(),
        })
    }

    pub fn is_ancestor_of(&self, other: &OccupationCode) -> bool {
        self.segments.len() < other.segments.len()
            && other.segments[..self.segments.len()] == self.segments[..]
            && other.raw.starts_with(&self.raw)
    }
}

impl Ord for OccupationCode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.segments
            .cmp(&other.segments)
            .then_with(|| self.raw.cmp(&other.raw))
    }
}

impl PartialOrd for OccupationCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromStr for OccupationCode {
    type Err = MalformedCode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for OccupationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl Serialize for OccupationCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for OccupationCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("line {line}: malformed occupation code `{raw}`")]
    MalformedCode { line: u64, raw: String },
    #[error("line {line}: duplicate code `{code}` (first defined on line {first_line})")]
    DuplicateCode { line: u64, code: String, first_line: u64 },
    #[error("line {line}: orphan code `{code}`: parent `{parent}` is not defined")]
    OrphanCode { line: u64, code: String, parent: String },
    #[error("line {line}: excluded flag must be true or false, got `{value}`")]
    BadExcludedFlag { line: u64, value: String },
    #[error("missing score for occupation `{0}`")]
    MissingScore(OccupationCode),
    #[error("score {value} for occupation `{code}` is outside [0, 1]")]
    ScoreOutOfRange { code: OccupationCode, value: f64 },
}

impl TaxonomyError {
    /// Physical line in the source file, when the error came from loading.
    pub fn line(&self) -> Option<u64> {
        match self {
            TaxonomyError::MalformedCode { line, .. }
            | TaxonomyError::DuplicateCode { line, .. }
            | TaxonomyError::OrphanCode { line, .. }
            | TaxonomyError::BadExcludedFlag { line, .. } => Some(*line),
            TaxonomyError::Table(TableError::Parse { line, .. }) => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OccupationNode {
    pub code: OccupationCode,
    pub title: String,
    /// Opaque UTF-8 text; may be empty, in which case the node cannot be annotated.
    pub description: String,
    pub excluded: bool,
    pub line: u64,
    children: Vec<usize>,
}

impl OccupationNode {
    pub fn has_description(&self) -> bool {
        !self.description.trim().is_empty()
    }

    pub fn level(&self) -> Level {
        self.code.level()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Immutable occupational classification tree.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    nodes: Vec<OccupationNode>,
    roots: Vec<usize>,
    index: HashMap<OccupationCode, usize>,
}

/// One taxonomy row before tree construction.
#[derive(Debug, Clone)]
pub struct TaxonomyRow {
    pub line: u64,
    pub code: String,
    pub title: String,
    pub description: String,
    pub excluded: bool,
}

impl TaxonomyRow {
    pub fn new(code: &str, title: &str) -> Self {
        Self {
            line: 0,
            code: code.to_owned(),
            title: title.to_owned(),
            description: String::new(),
            excluded: false,
        }
    }
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "" | "false" | "0" | "no" | "n" => Some(false),
        "true" | "1" | "yes" | "y" => Some(true),
        _ => None,
    }
}

impl Taxonomy {
    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?)
    }

    /// Parses a `code,title,description,excluded` document.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let table = Table::parse(text)?;
        let code_col = table.column("code")?;
        let title_col = table.column("title")?;
        let desc_col = table.column("description").ok();
        let excl_col = table.column("excluded").ok();
        let mut rows = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            let excluded = match excl_col {
                Some(c) => parse_flag(row.get(c)).ok_or_else(|| TaxonomyError::BadExcludedFlag {
                    line: row.line,
                    value: row.get(c).to_owned(),
                })?,
                None => false,
            };
            rows.push(TaxonomyRow {
                line: row.line,
                code: row.get(code_col).to_owned(),
                title: row.get(title_col).to_owned(),
                description: desc_col.map(|c| row.get(c).to_owned()).unwrap_or_default(),
                excluded,
            });
        }
        Self::from_rows(rows)
    }

    /// Builds the tree from rows in any order. Children keep row order.
    pub fn from_rows(rows: Vec<TaxonomyRow>) -> Result<Self, TaxonomyError> {
        let mut nodes: Vec<OccupationNode> = Vec::with_capacity(rows.len());
        let mut index: HashMap<OccupationCode, usize> = HashMap::with_capacity(rows.len());
        for row in rows {
            let code = OccupationCode::parse(&row.code).map_err(|_| TaxonomyError::MalformedCode {
                line: row.line,
                raw: row.code.clone(),
            })?;
            if let Some(&first) = index.get(&code) {
                return Err(TaxonomyError::DuplicateCode {
                    line: row.line,
                    code: code.to_string(),
                    first_line: nodes[first].line,
                });
            }
            index.insert(code.clone(), nodes.len());
            nodes.push(OccupationNode {
                code,
                title: row.title,
                description: row.description,
                excluded: row.excluded,
                line: row.line,
                children: Vec::new(),
            });
        }

        let mut roots = Vec::new();
        for i in 0..nodes.len() {
            match nodes[i].code.parent() {
                None => roots.push(i),
                Some(parent) => {
                    let p = *index.get(&parent).ok_or_else(|| TaxonomyError::OrphanCode {
                        line: nodes[i].line,
                        code: nodes[i].code.to_string(),
                        parent: parent.to_string(),
                    })?;
                    nodes[p].children.push(i);
                }
            }
        }

        let mut tax = Self { nodes, roots, index };
        tax.propagate_exclusion();
        Ok(tax)
    }

    fn propagate_exclusion(&mut self) {
        let mut stack: Vec<(usize, bool)> = self.roots.iter().map(|&r| (r, false)).collect();
        while let Some((i, inherited)) = stack.pop() {
            let excluded = inherited || self.nodes[i].excluded;
            self.nodes[i].excluded = excluded;
            for &c in &self.nodes[i].children {
                stack.push((c, excluded));
            }
        }
    }

    pub fn get(&self, code: &OccupationCode) -> Option<&OccupationNode> {
        self.index.get(code).map(|&i| &self.nodes[i])
    }

    pub fn get_str(&self, code: &str) -> Option<&OccupationNode> {
        OccupationCode::parse(code).ok().and_then(|c| self.get(&c))
    }

    pub fn roots(&self) -> impl Iterator<Item = &OccupationNode> {
        self.roots.iter().map(|&i| &self.nodes[i])
    }

    pub fn children<'a>(&'a self, node: &'a OccupationNode) -> impl Iterator<Item = &'a OccupationNode> {
        node.children.iter().map(|&i| &self.nodes[i])
    }

    /// All nodes in pre-order (parents before children, siblings in row order).
    pub fn iter(&self) -> impl Iterator<Item = &OccupationNode> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            order.push(i);
            stack.extend(self.nodes[i].children.iter().rev());
        }
        order.into_iter().map(|i| &self.nodes[i])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count(&self, level: Level, include_excluded: bool) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.level() == level && (include_excluded || !n.excluded))
            .count()
    }

    /// Non-excluded nodes without children: the nodes that must be scored
    /// directly. For a complete four-level tree these are the fine categories.
    pub fn scored_leaves(&self) -> impl Iterator<Item = &OccupationNode> {
        self.iter().filter(|n| !n.excluded && n.is_leaf())
    }

    /// Averages leaf scores up the tree, level by level.
    ///
    /// Every non-excluded leaf must have a score in `[0, 1]`; every
    /// non-excluded internal node receives the unweighted mean of its
    /// immediate non-excluded children. Excluded nodes are absent from the
    /// result. Scores supplied for internal or unknown codes are ignored.
    pub fn aggregate_up(
        &self,
        leaf_scores: &BTreeMap<OccupationCode, f64>,
    ) -> Result<BTreeMap<OccupationCode, f64>, TaxonomyError> {
        let mut out = BTreeMap::new();
        for &r in &self.roots {
            self.aggregate_node(r, leaf_scores, &mut out)?;
        }
        Ok(out)
    }

    fn aggregate_node(
        &self,
        i: usize,
        leaf_scores: &BTreeMap<OccupationCode, f64>,
        out: &mut BTreeMap<OccupationCode, f64>,
    ) -> Result<Option<f64>, TaxonomyError> {
        let node = &self.nodes[i];
        if node.excluded {
            return Ok(None);
        }
        let score = if node.is_leaf() {
            let v = *leaf_scores
                .get(&node.code)
                .ok_or_else(|| TaxonomyError::MissingScore(node.code.clone()))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(TaxonomyError::ScoreOutOfRange {
                    code: node.code.clone(),
                    value: v,
                });
            }
            v
        } else {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &c in &node.children {
                if let Some(v) = self.aggregate_node(c, leaf_scores, out)? {
                    sum += v;
                    n += 1;
                }
            }
            if n == 0 {
                // all children excluded while the parent is not
                return Ok(None);
            }
            sum / n as f64
        };
        out.insert(node.code.clone(), score);
        Ok(Some(score))
    }
}
