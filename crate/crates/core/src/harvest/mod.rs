//! Opportunistic sensing: pick observations out of public microblog posts by
//! hashtag and keyword.

mod corpus;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{parse_corpus, write_corpus};

use crate::model::{CellValue, Entry, GeoTag, ModelError, TableId, TableSchema, ValueType};
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("a harvest needs at least one hashtag or keyword")]
    EmptySpec,
    #[error("invalid term \"{0}\": terms are single words")]
    InvalidTerm(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("harvest table needs column \"{column}\" of type {expected}")]
    MissingColumn { column: &'static str, expected: ValueType },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicPost {
    pub post_id: String,
    pub author: String,
    pub posted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geotag: Option<Coordinates>,
    pub text: String,
}

/// Hashtags are kept with their leading `#`, both kinds lowercased.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct HarvestSpec {
    hashtags: BTreeSet<String>,
    keywords: BTreeSet<String>,
    require_geotag: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RawSpec {
    hashtags: Vec<String>,
    keywords: Vec<String>,
    require_geotag: bool,
}

impl TryFrom<RawSpec> for HarvestSpec {
    type Error = HarvestError;

    fn try_from(raw: RawSpec) -> Result<Self, HarvestError> {
        HarvestSpec::new(raw.hashtags, raw.keywords, raw.require_geotag)
    }
}

impl From<HarvestSpec> for RawSpec {
    fn from(spec: HarvestSpec) -> Self {
        RawSpec {
            hashtags: spec.hashtags.into_iter().collect(),
            keywords: spec.keywords.into_iter().collect(),
            require_geotag: spec.require_geotag,
        }
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn normalize_word(term: &str) -> Result<String, HarvestError> {
    if term.is_empty() || !term.chars().all(is_word_char) {
        return Err(HarvestError::InvalidTerm(term.to_owned()));
    }
    Ok(term.to_lowercase())
}

impl HarvestSpec {
    /// Hashtags may be given with or without the leading `#`.
    pub fn new(
        hashtags: impl IntoIterator<Item = impl AsRef<str>>,
        keywords: impl IntoIterator<Item = impl AsRef<str>>,
        require_geotag: bool,
    ) -> Result<Self, HarvestError> {
        let hashtags = hashtags
            .into_iter()
            .map(|t| {
                let t = t.as_ref();
                normalize_word(t.strip_prefix('#').unwrap_or(t)).map(|w| format!("#{w}"))
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        let keywords = keywords
            .into_iter()
            .map(|k| normalize_word(k.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if hashtags.is_empty() && keywords.is_empty() {
            return Err(HarvestError::EmptySpec);
        }
        Ok(HarvestSpec {
            hashtags,
            keywords,
            require_geotag,
        })
    }

    pub fn hashtags(&self) -> &BTreeSet<String> {
        &self.hashtags
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    pub fn require_geotag(&self) -> bool {
        self.require_geotag
    }

    /// Terms of this spec found in `text`: hashtags first, then keywords,
    /// each group in sorted order.
    pub fn matched_terms(&self, text: &str) -> Vec<String> {
        let mut tags = HashSet::new();
        let mut words = HashSet::new();
        let mut prev = None;
        let mut rest = text;
        while !rest.is_empty() {
            let start = rest.find(is_word_char).unwrap_or(rest.len());
            if start > 0 {
                prev = rest[..start].chars().last();
            }
            rest = &rest[start..];
            let end = rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len());
            if end == 0 {
                break;
            }
            let token = rest[..end].to_lowercase();
            if prev == Some('#') {
                tags.insert(format!("#{token}"));
            }
            words.insert(token);
            rest = &rest[end..];
        }
        self.hashtags
            .iter()
            .filter(|t| tags.contains(*t))
            .chain(self.keywords.iter().filter(|k| words.contains(*k)))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub post_id: String,
    pub author: String,
    pub posted_at: DateTime<Utc>,
    pub text: String,
    pub matched_terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geotag: Option<Coordinates>,
}

fn observe(post: &PublicPost, spec: &HarvestSpec) -> Option<Observation> {
    if spec.require_geotag && post.geotag.is_none() {
        return None;
    }
    let matched_terms = spec.matched_terms(&post.text);
    if matched_terms.is_empty() {
        return None;
    }
    Some(Observation {
        post_id: post.post_id.clone(),
        author: post.author.clone(),
        posted_at: post.posted_at,
        text: post.text.clone(),
        matched_terms,
        geotag: post.geotag,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Matching posts, in input order.
pub fn harvest(posts: &[PublicPost], spec: &HarvestSpec) -> Vec<Observation> {
    harvest_with(posts, spec, Execution::default())
}

pub fn harvest_with(posts: &[PublicPost], spec: &HarvestSpec, execution: Execution) -> Vec<Observation> {
    match execution {
        Execution::Sequential => posts.iter().filter_map(|p| observe(p, spec)).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            posts.par_iter().filter_map(|p| observe(p, spec)).collect()
        }
    }
}

pub const HARVEST_COLUMNS: [(&str, ValueType); 5] = [
    ("post_id", ValueType::Text),
    ("author", ValueType::Text),
    ("posted_at", ValueType::Timestamp),
    ("text", ValueType::Text),
    ("matched_terms", ValueType::Text),
];

/// Create a table with the harvest columns.
pub fn create_harvest_table(store: &Store, title: &str, author: &str) -> Result<TableSchema, HarvestError> {
    let columns: Vec<(String, ValueType)> = HARVEST_COLUMNS.iter().map(|(n, t)| (n.to_string(), *t)).collect();
    Ok(store.create_table(title, &columns, author)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestImport {
    pub added: Vec<Entry>,
    /// Observations whose post_id the table already held.
    pub skipped: usize,
}

/// Append observations as entries, skipping post ids already present.
/// Matched terms are stored space-separated.
pub fn harvest_to_table(
    store: &Store,
    table_id: &TableId,
    observations: &[Observation],
    recorded_by: &str,
) -> Result<HarvestImport, HarvestError> {
    let mut seen: HashSet<String> = store.with_table(table_id, |doc| {
        for (name, expected) in HARVEST_COLUMNS {
            if doc.column(name).map(|c| c.value_type) != Some(expected) {
                return Err(HarvestError::MissingColumn { column: name, expected });
            }
        }
        Ok(doc
            .entries
            .iter()
            .filter_map(|e| match e.values.get("post_id") {
                Some(CellValue::Text(id)) => Some(id.clone()),
                _ => None,
            })
            .collect())
    })??;
    let mut added = Vec::new();
    let mut skipped = 0;
    for obs in observations {
        if !seen.insert(obs.post_id.clone()) {
            skipped += 1;
            continue;
        }
        let values = BTreeMap::from([
            ("post_id".to_owned(), CellValue::Text(obs.post_id.clone())),
            ("author".to_owned(), CellValue::Text(obs.author.clone())),
            ("posted_at".to_owned(), CellValue::Timestamp(obs.posted_at)),
            ("text".to_owned(), CellValue::Text(obs.text.clone())),
            ("matched_terms".to_owned(), CellValue::Text(obs.matched_terms.join(" "))),
        ]);
        let geotag = obs
            .geotag
            .map(|c| GeoTag::device(c.latitude, c.longitude))
            .transpose()
            .map_err(|e: ModelError| HarvestError::Store(e.into()))?;
        added.push(store.add_entry_values(table_id, values, recorded_by, geotag)?);
    }
    Ok(HarvestImport { added, skipped })
}

#[cfg(test)]
mod tests;
