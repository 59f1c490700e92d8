use commflow_core::Error as CoreError;
use serde::Serialize;

/// Failure of a view or workspace operation, classified for HTTP and exit
/// codes.
#[derive(Debug, Clone, thiserror::Error)]
pub enum AppError {
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },

    #[error("invalid `{field}`: {message}")]
    BadParam { field: String, message: String },

    #[error("{0}")]
    Unprocessable(String),

    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn bad(field: &str, message: impl std::fmt::Display) -> Self {
        AppError::BadParam {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn missing(field: &str) -> Self {
        AppError::bad(field, "required parameter is missing")
    }

    pub fn status(&self) -> u16 {
        match self {
            AppError::NotFound { .. } => 404,
            AppError::BadParam { .. } => 400,
            AppError::Unprocessable(_) => 422,
            AppError::Internal(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.to_string(),
            field: match self {
                AppError::BadParam { field, .. } => Some(field.clone()),
                _ => None,
            },
        }
    }

    /// Maps a core error raised while evaluating a request parameter.
    pub fn from_core(e: CoreError, field: &str) -> Self {
        match e {
            CoreError::UnknownPatient(id) => AppError::NotFound { what: "patient", id },
            CoreError::UnknownNode(id) => AppError::NotFound { what: "node", id },
            CoreError::InvalidInput(m) | CoreError::EmptyNetwork(m) => AppError::bad(field, m),
            CoreError::NotNetworkLevel(m) => AppError::bad(field, format!("{m} is not a network-level measure")),
            e @ (CoreError::DegenerateShape { .. }
            | CoreError::SingleClass
            | CoreError::ZeroVariance
            | CoreError::MissingMeasure(_)
            | CoreError::Infeasible(_)) => AppError::Unprocessable(e.to_string()),
            e => AppError::Internal(e.to_string()),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        AppError::from_core(e, "input")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
