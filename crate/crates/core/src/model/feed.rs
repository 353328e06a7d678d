use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::annotation::{Annotation, AnnotationKind};

/// Conjunctive feed filter; unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedFilter {
    pub geotagged_only: bool,
    pub kind: Option<AnnotationKind>,
    pub author: Option<String>,
    /// Keep annotations effective at or after this instant.
    pub since: Option<DateTime<Utc>>,
}

impl FeedFilter {
    pub fn matches(&self, a: &Annotation) -> bool {
        (!self.geotagged_only || a.is_geotagged())
            && self.kind.is_none_or(|k| a.kind == k)
            && self.author.as_deref().is_none_or(|author| a.author == author)
            && self.since.is_none_or(|t| a.effective_at >= t)
    }
}

/// Newest first: `effective_at` descending, then insertion `sequence`
/// descending. Across tables the table id settles what is left.
pub fn feed_order(a: &Annotation, b: &Annotation) -> Ordering {
    b.effective_at
        .cmp(&a.effective_at)
        .then(b.sequence.cmp(&a.sequence))
        .then_with(|| b.scope.table_id().cmp(a.scope.table_id()))
}

pub fn feed<'a>(annotations: impl IntoIterator<Item = &'a Annotation>, filter: &FeedFilter) -> Vec<Annotation> {
    let mut out: Vec<Annotation> = annotations.into_iter().filter(|a| filter.matches(a)).cloned().collect();
    out.sort_by(feed_order);
    out
}
