//! The count protocol shared by every backend.
//!
//! Request document: the targeting predicates (`ethnic_affinity`,
//! `home_country`, `expat_origin`, `non_expat`, `interests_required`,
//! `locations`, `demographics`) plus an optional `interest`. Response
//! document: `{"count": u64, "clamped": bool}`. Failures carry
//! `{"error": {"kind", "message", "predicate"?, "value"?}}`.

use serde::{Deserialize, Serialize};

use crate::catalog::Targeting;
use crate::error::Error;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountRequest {
    #[serde(flatten)]
    pub targeting: Targeting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interest: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResponse {
    pub count: u64,
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_ms: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ErrorDocument {
    error: WireError,
}

impl WireError {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorDocument {
            error: self.clone(),
        })
        .expect("error documents always serialize")
    }

    pub fn from_json(body: &str) -> Option<Self> {
        serde_json::from_str::<ErrorDocument>(body)
            .ok()
            .map(|doc| doc.error)
    }
}

impl From<&Error> for WireError {
    fn from(err: &Error) -> Self {
        let (predicate, value, retry_after_ms) = match err {
            Error::InvalidTargeting { predicate, value } => {
                (Some(predicate.clone()), Some(value.clone()), None)
            }
            Error::QuotaExceeded { retry_after_ms } => (None, None, *retry_after_ms),
            _ => (None, None, None),
        };
        WireError {
            kind: err.kind().to_string(),
            message: err.to_string(),
            predicate,
            value,
            retry_after_ms,
        }
    }
}

impl From<WireError> for Error {
    fn from(wire: WireError) -> Self {
        match wire.kind.as_str() {
            "invalid_targeting" => Error::InvalidTargeting {
                predicate: wire.predicate.unwrap_or_default(),
                value: wire.value.unwrap_or_default(),
            },
            "quota_exceeded" => Error::QuotaExceeded {
                retry_after_ms: wire.retry_after_ms,
            },
            "contradiction" | "invalid_argument" => Error::InvalidTargeting {
                predicate: wire.predicate.unwrap_or_else(|| "request".into()),
                value: wire.message,
            },
            _ => Error::Transport(format!("{}: {}", wire.kind, wire.message)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{AxisName, PopulationSpec};

    #[test]
    fn request_document_uses_flat_field_names() {
        let spec = PopulationSpec::new("x")
            .affinity("hispanic")
            .non_expat()
            .select(AxisName::Age, "19-28");
        let request = CountRequest {
            targeting: spec.targeting,
            interest: Some("rock".into()),
        };
        let json = serde_json::to_string(&request).unwrap();
        assert_eq!(
            json,
            r#"{"ethnic_affinity":"hispanic","non_expat":true,"demographics":{"age":"19-28"},"interest":"rock"}"#
        );
        let back: CountRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, request);
    }

    #[test]
    fn invalid_targeting_survives_the_wire() {
        let err = Error::InvalidTargeting {
            predicate: "ethnic_affinity".into(),
            value: "martian".into(),
        };
        let wire = WireError::from(&err);
        let back: Error = WireError::from_json(&wire.to_json()).unwrap().into();
        assert!(matches!(back, Error::InvalidTargeting { ref value, .. } if value == "martian"));
        assert!(!back.is_retryable());
    }
}
