//! The error shape shared by the HTTP surface and the CLI.

use fieldlog_core::export::ExportError;
use fieldlog_core::harvest::HarvestError;
use fieldlog_core::model::ModelError;
use fieldlog_core::store::StoreError;
use fieldlog_core::sync::SyncError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    ValidationFailed,
    NotFound,
    Conflict,
    Unavailable,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::BadRequest | ErrorCode::ValidationFailed => 400,
            ErrorCode::NotFound => 404,
            ErrorCode::Conflict => 409,
            ErrorCode::Unavailable => 503,
            ErrorCode::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Wire form: `{"error": {"code", "message", "fields": [{"field", "message"}]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub fields: Vec<FieldError>,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ApiError,
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ApiError {}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            fields: Vec::new(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    /// A validation failure pinned to one request field.
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        let message = message.into();
        ApiError {
            code: ErrorCode::ValidationFailed,
            fields: vec![FieldError {
                field: field.into(),
                message: message.clone(),
            }],
            message,
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let message = e.to_string();
        let field = match &e {
            ModelError::UnknownTable(_) => return ApiError::not_found(message),
            ModelError::Invariant { .. } => return ApiError::internal(message),
            ModelError::EmptyTitle => "title".to_owned(),
            ModelError::EmptyColumnName | ModelError::DuplicateColumn { .. } => "name".to_owned(),
            ModelError::UnknownColumn { column } | ModelError::TypeMismatch { column, .. } => {
                format!("values.{column}")
            }
            ModelError::EmptyText => "text".to_owned(),
            ModelError::EmptyAuthor => "author".to_owned(),
            ModelError::UnstorableCharacter { field, .. } => field.clone(),
            ModelError::InvalidGeoTag(_) => "geotag".to_owned(),
            ModelError::InvalidSinks(_) => "extra_sinks".to_owned(),
            ModelError::ScopeNotFound(nf) => {
                if nf.missing_table {
                    return ApiError::not_found(message);
                }
                let mut err = ApiError::new(ErrorCode::ValidationFailed, message.clone());
                if let Some(row) = nf.missing_row {
                    err.fields.push(FieldError {
                        field: "row".into(),
                        message: format!("row {row} does not exist"),
                    });
                }
                if let Some(column) = &nf.missing_column {
                    err.fields.push(FieldError {
                        field: "column".into(),
                        message: format!("column \"{column}\" does not exist"),
                    });
                }
                return err;
            }
        };
        ApiError::field(field, message)
    }
}

impl From<SyncError> for ApiError {
    fn from(e: SyncError) -> Self {
        match e {
            SyncError::UnregisteredSink(_) | SyncError::SinkNotAllowed { .. } => {
                ApiError::field("extra_sinks", e.to_string())
            }
            SyncError::UnknownItem(_) => ApiError::not_found(e.to_string()),
            SyncError::Script { .. } => ApiError::bad_request(e.to_string()),
            other => ApiError::new(ErrorCode::Conflict, other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Model(m) => m.into(),
            StoreError::Sync(s) => s.into(),
            StoreError::AmbiguousTable(_) => ApiError::new(ErrorCode::Conflict, e.to_string()),
            StoreError::Poisoned => ApiError::new(ErrorCode::Unavailable, e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<HarvestError> for ApiError {
    fn from(e: HarvestError) -> Self {
        match e {
            HarvestError::Store(s) => s.into(),
            HarvestError::EmptySpec => ApiError::field("spec", e.to_string()),
            HarvestError::InvalidTerm(_) => ApiError::field("spec", e.to_string()),
            HarvestError::Corpus { .. } => ApiError::field("corpus", e.to_string()),
            HarvestError::MissingColumn { .. } => ApiError::field("table", e.to_string()),
        }
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Store(s) => s.into(),
            other => ApiError::internal(other.to_string()),
        }
    }
}
