use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::geo::GeoTag;
use super::ids::AnnotationId;
use super::scope::Scope;
use super::sinks::{Receipt, SinkId};
use super::{check_author, check_xml_text, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    #[default]
    Note,
    /// Something happened in the field worth flagging to the team.
    Event,
    InstrumentFailure,
}

impl AnnotationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationKind::Note => "note",
            AnnotationKind::Event => "event",
            AnnotationKind::InstrumentFailure => "instrument_failure",
        }
    }
}

impl fmt::Display for AnnotationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnnotationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "note" => Ok(AnnotationKind::Note),
            "event" => Ok(AnnotationKind::Event),
            "instrument_failure" => Ok(AnnotationKind::InstrumentFailure),
            other => Err(format!("unknown annotation kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    #[default]
    Private,
    Public,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Private => "private",
            Visibility::Public => "public",
        }
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Visibility {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "private" => Ok(Visibility::Private),
            "public" => Ok(Visibility::Public),
            other => Err(format!("unknown visibility `{other}`")),
        }
    }
}

/// A contextual note bound to a table, row, column or cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotation_id: AnnotationId,
    pub author: String,
    /// Set from the clock at creation and never changed.
    pub captured_at: DateTime<Utc>,
    /// When the noted event happened (or will). Defaults to `captured_at`.
    pub effective_at: DateTime<Utc>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geotag: Option<GeoTag>,
    pub kind: AnnotationKind,
    pub visibility: Visibility,
    /// Sinks beyond the private database. Contains `public_microblog` exactly
    /// when `visibility` is public.
    pub extra_sinks: BTreeSet<SinkId>,
    pub scope: Scope,
    pub sequence: u64,
    /// Delivery receipts, appended as sinks acknowledge.
    #[serde(default)]
    pub receipts: Vec<Receipt>,
}

impl Annotation {
    pub fn is_geotagged(&self) -> bool {
        self.geotag.is_some()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyText);
        }
        check_xml_text("text", &self.text)?;
        check_author(&self.author)?;
        if let Some(tag) = &self.geotag {
            tag.validate()?;
        }
        if self.extra_sinks.contains(&SinkId::PrivateDb) {
            return Err(ModelError::InvalidSinks(
                "private_db is implied and cannot be an extra sink".into(),
            ));
        }
        let public = self.extra_sinks.contains(&SinkId::PublicMicroblog);
        if public != (self.visibility == Visibility::Public) {
            return Err(ModelError::invariant(
                "public visibility iff public_microblog sink",
                format!("annotation {}", self.annotation_id),
            ));
        }
        Ok(())
    }
}

/// Caller-controlled knobs for a new annotation. Everything defaults to a
/// private note effective at capture time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotateOptions {
    pub effective_at: Option<DateTime<Utc>>,
    pub geotag: Option<GeoTag>,
    pub kind: Option<AnnotationKind>,
    pub visibility: Option<Visibility>,
    pub extra_sinks: Option<BTreeSet<SinkId>>,
}

/// Options after defaults and the visibility/sink coupling are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedOptions {
    pub kind: AnnotationKind,
    pub visibility: Visibility,
    pub extra_sinks: BTreeSet<SinkId>,
}

impl AnnotateOptions {
    /// Apply defaults. Asking for public visibility adds the public sink and
    /// listing the public sink makes the note public; explicitly private with
    /// the public sink listed is rejected.
    pub fn resolve(&self) -> Result<ResolvedOptions, ModelError> {
        let mut extra_sinks = self.extra_sinks.clone().unwrap_or_default();
        extra_sinks.remove(&SinkId::PrivateDb);
        let listed_public = extra_sinks.contains(&SinkId::PublicMicroblog);
        let visibility = match (self.visibility, listed_public) {
            (Some(Visibility::Private), true) => {
                return Err(ModelError::InvalidSinks(
                    "a private note cannot target public_microblog".into(),
                ))
            }
            (Some(Visibility::Public), _) | (None, true) => Visibility::Public,
            (Some(Visibility::Private), false) | (None, false) => Visibility::Private,
        };
        if visibility == Visibility::Public {
            extra_sinks.insert(SinkId::PublicMicroblog);
        }
        Ok(ResolvedOptions {
            kind: self.kind.unwrap_or_default(),
            visibility,
            extra_sinks,
        })
    }
}
