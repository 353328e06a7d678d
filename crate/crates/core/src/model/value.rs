use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::clock::{format_timestamp, parse_timestamp};

/// Cell type of a column. Values are validated against it when entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    #[default]
    Text,
    Number,
    Boolean,
    Timestamp,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Text => "text",
            ValueType::Number => "number",
            ValueType::Boolean => "boolean",
            ValueType::Timestamp => "timestamp",
        }
    }

    /// Parse user-entered text as a value of this type. `None` means the
    /// text does not conform.
    pub fn parse(self, raw: &str) -> Option<CellValue> {
        match self {
            ValueType::Text => Some(CellValue::Text(raw.to_owned())),
            ValueType::Number => raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(CellValue::Number),
            ValueType::Boolean => match raw.trim().to_ascii_lowercase().as_str() {
                "true" => Some(CellValue::Boolean(true)),
                "false" => Some(CellValue::Boolean(false)),
                _ => None,
            },
            ValueType::Timestamp => parse_timestamp(raw).map(CellValue::Timestamp),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "string" => Ok(ValueType::Text),
            "number" | "numeric" => Ok(ValueType::Number),
            "boolean" | "bool" => Ok(ValueType::Boolean),
            "timestamp" | "datetime" => Ok(ValueType::Timestamp),
            other => Err(format!("unknown value type `{other}`")),
        }
    }
}

/// A typed cell. Numbers are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum CellValue {
    Text(String),
    Number(f64),
    Boolean(bool),
    Timestamp(DateTime<Utc>),
}

impl CellValue {
    pub fn value_type(&self) -> ValueType {
        match self {
            CellValue::Text(_) => ValueType::Text,
            CellValue::Number(_) => ValueType::Number,
            CellValue::Boolean(_) => ValueType::Boolean,
            CellValue::Timestamp(_) => ValueType::Timestamp,
        }
    }
}

/// Canonical text form; `value_type().parse(&v.to_string()) == Some(v)`.
impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Text(s) => f.write_str(s),
            // f64's Display is the shortest string that parses back to the same bits.
            CellValue::Number(v) => write!(f, "{v}"),
            CellValue::Boolean(b) => write!(f, "{b}"),
            CellValue::Timestamp(t) => f.write_str(&format_timestamp(t)),
        }
    }
}
