use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoSource {
    /// Coordinates from the device's location provider.
    Device,
    /// The user described the location in words, with or without coordinates.
    ManualDescription,
}

impl GeoSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GeoSource::Device => "device",
            GeoSource::ManualDescription => "manual_description",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "device" => Some(GeoSource::Device),
            "manual_description" => Some(GeoSource::ManualDescription),
            _ => None,
        }
    }
}

/// WGS84 location attached to an entry or annotation. Construct through
/// [`GeoTag::device`] or [`GeoTag::described`] so the invariants hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTag {
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub source: GeoSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl GeoTag {
    pub fn device(latitude: f64, longitude: f64) -> Result<Self, ModelError> {
        let tag = GeoTag {
            latitude: Some(latitude),
            longitude: Some(longitude),
            source: GeoSource::Device,
            description: None,
        };
        tag.validate()?;
        Ok(tag)
    }

    pub fn described(description: impl Into<String>, coordinates: Option<(f64, f64)>) -> Result<Self, ModelError> {
        let tag = GeoTag {
            latitude: coordinates.map(|c| c.0),
            longitude: coordinates.map(|c| c.1),
            source: GeoSource::ManualDescription,
            description: Some(description.into()),
        };
        tag.validate()?;
        Ok(tag)
    }

    pub fn coordinates(&self) -> Option<(f64, f64)> {
        self.latitude.zip(self.longitude)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidGeoTag(msg));
        if self.latitude.is_some() != self.longitude.is_some() {
            return bad("latitude and longitude must be given together".into());
        }
        if let Some((lat, lon)) = self.coordinates() {
            if !(-90.0..=90.0).contains(&lat) {
                return bad(format!("latitude {lat} outside [-90, 90]"));
            }
            if !(-180.0..=180.0).contains(&lon) {
                return bad(format!("longitude {lon} outside [-180, 180]"));
            }
        }
        match self.source {
            GeoSource::Device if self.coordinates().is_none() => bad("device geotag requires coordinates".into()),
            GeoSource::ManualDescription if self.description.as_deref().is_none_or(|d| d.trim().is_empty()) => {
                bad("manual geotag requires a non-empty description".into())
            }
            _ => Ok(()),
        }
    }
}
