use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// A publication target. The four well-known sinks have dedicated variants;
/// deployments may register more under [`SinkId::Other`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum SinkId {
    /// The team's private database. Every item is delivered here.
    PrivateDb,
    PublicMicroblog,
    /// Raw sensor / data-point repository.
    RawRepo,
    /// Contextual (descriptive) metadata repository.
    ContextRepo,
    Other(String),
}

impl SinkId {
    pub fn as_str(&self) -> &str {
        match self {
            SinkId::PrivateDb => "private_db",
            SinkId::PublicMicroblog => "public_microblog",
            SinkId::RawRepo => "raw_repo",
            SinkId::ContextRepo => "context_repo",
            SinkId::Other(s) => s,
        }
    }
}

impl fmt::Display for SinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<String> for SinkId {
    fn from(s: String) -> Self {
        match s.as_str() {
            "private_db" => SinkId::PrivateDb,
            "public_microblog" => SinkId::PublicMicroblog,
            "raw_repo" => SinkId::RawRepo,
            "context_repo" => SinkId::ContextRepo,
            _ => SinkId::Other(s),
        }
    }
}

impl From<&str> for SinkId {
    fn from(s: &str) -> Self {
        SinkId::from(s.to_owned())
    }
}

impl From<SinkId> for String {
    fn from(id: SinkId) -> String {
        match id {
            SinkId::Other(s) => s,
            known => known.as_str().to_owned(),
        }
    }
}

impl FromStr for SinkId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(SinkId::from(s))
    }
}

/// Proof of delivery handed back by a sink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub sink: SinkId,
    /// Sink-assigned identifier of the stored post.
    pub receipt_id: String,
    pub at: DateTime<Utc>,
}
