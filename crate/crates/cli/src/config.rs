//! Service configuration, read from a TOML file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use fieldlog_core::model::SinkId;
use fieldlog_core::sync::SinkDescriptor;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const DEFAULT_DATA_DIR: &str = "fieldlog-data";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    /// Author recorded when a request names none.
    pub author: Option<String>,
    /// Seconds between background sync ticks.
    pub tick_interval_secs: f64,
    /// Connectivity script replayed one line per tick. Overridden by a
    /// state set through `sim connectivity` or `PUT /sim/connectivity`.
    pub connectivity_script: Option<PathBuf>,
    pub sinks: Vec<SinkConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            bind: DEFAULT_BIND.parse().unwrap(),
            author: None,
            tick_interval_secs: 30.0,
            connectivity_script: None,
            sinks: Vec::new(),
        }
    }
}

/// A sink backed by the reference mock: posts go to an NDJSON log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkConfig {
    pub id: SinkId,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub max_post_length: Option<usize>,
    #[serde(default)]
    pub supports_lookup: bool,
    /// Receive log; relative paths are under the data directory. Defaults
    /// to `sinks/<id>.ndjson`.
    #[serde(default)]
    pub log: Option<PathBuf>,
    #[serde(default)]
    pub transient_probability: f64,
    #[serde(default)]
    pub ack_loss_probability: f64,
    #[serde(default)]
    pub fault_seed: u64,
}

impl SinkConfig {
    fn preset(descriptor: SinkDescriptor) -> Self {
        SinkConfig {
            id: descriptor.sink_id,
            endpoint: descriptor.endpoint,
            max_post_length: descriptor.max_post_length,
            supports_lookup: descriptor.supports_lookup,
            log: None,
            transient_probability: 0.0,
            ack_loss_probability: 0.0,
            fault_seed: 0,
        }
    }

    pub fn descriptor(&self) -> SinkDescriptor {
        SinkDescriptor {
            sink_id: self.id.clone(),
            max_post_length: self.max_post_length,
            supports_lookup: self.supports_lookup,
            endpoint: self.endpoint.clone(),
        }
    }

    pub fn log_path(&self, data_dir: &Path) -> PathBuf {
        match &self.log {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => data_dir.join(p),
            None => data_dir.join("sinks").join(format!("{}.ndjson", self.id)),
        }
    }
}

/// The four well-known sinks with their usual capabilities.
pub fn default_sinks() -> Vec<SinkConfig> {
    vec![
        SinkConfig::preset(SinkDescriptor::private_db("mock:private_db")),
        SinkConfig::preset(SinkDescriptor::public_microblog("mock:public_microblog")),
        SinkConfig::preset(SinkDescriptor::repository(SinkId::RawRepo, "mock:raw_repo")),
        SinkConfig::preset(SinkDescriptor::repository(SinkId::ContextRepo, "mock:context_repo")),
    ]
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_owned(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tick_interval_secs.is_finite() && self.tick_interval_secs > 0.0) {
            return Err(ConfigError::Invalid("tick_interval_secs must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sinks {
            if !seen.insert(&s.id) {
                return Err(ConfigError::Invalid(format!("sink {} configured twice", s.id)));
            }
            if s.max_post_length == Some(0) {
                return Err(ConfigError::Invalid(format!(
                    "sink {}: max_post_length must be positive",
                    s.id
                )));
            }
        }
        if !self.sinks.is_empty() && !seen.contains(&SinkId::PrivateDb) {
            return Err(ConfigError::Invalid("the private_db sink is mandatory".into()));
        }
        Ok(())
    }

    /// Configured sinks, or the default four when none are listed.
    pub fn effective_sinks(&self) -> Vec<SinkConfig> {
        if self.sinks.is_empty() {
            default_sinks()
        } else {
            self.sinks.clone()
        }
    }

    pub fn tick_interval(&self) -> Duration {
        Duration::from_secs_f64(self.tick_interval_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert!(c.bind.ip().is_loopback());
        assert_eq!(c.effective_sinks().len(), 4);
    }

    #[test]
    fn full_file_parses() {
        let c = Config::parse(
            r#"
data_dir = "/var/lib/fieldlog"
bind = "0.0.0.0:9000"
author = "field-team"
tick_interval_secs = 5
connectivity_script = "net.script"

[[sinks]]
id = "private_db"
supports_lookup = true

[[sinks]]
id = "public_microblog"
max_post_length = 140
ack_loss_probability = 0.1
log = "/tmp/public.ndjson"
"#,
        )
        .unwrap();
        assert_eq!(c.sinks.len(), 2);
        assert_eq!(
            c.sinks[1].log_path(Path::new("/d")),
            PathBuf::from("/tmp/public.ndjson")
        );
        assert_eq!(
            c.sinks[0].log_path(Path::new("/d")),
            PathBuf::from("/d/sinks/private_db.ndjson")
        );
        assert_eq!(c.tick_interval(), Duration::from_secs(5));
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(Config::parse("colour = 1").is_err());
        assert!(Config::parse("tick_interval_secs = 0").is_err());
        assert!(Config::parse("[[sinks]]\nid = \"public_microblog\"").is_err());
        assert!(Config::parse("[[sinks]]\nid = \"private_db\"\n[[sinks]]\nid = \"private_db\"").is_err());
    }
}
