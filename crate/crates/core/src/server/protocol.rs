//! Wire format: one JSON document per `\n`-terminated line, tagged by `type`.

use serde::{Deserialize, Serialize};

use crate::pem::OcclusionLevel;

/// Ground-truth object in ego-relative Cartesian meters (x right, y forward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObject {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub occ: OcclusionLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePerceived {
    pub source_id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownModel,
    NotInitialized,
    TimeRegression,
    DuplicateId,
    InvalidFrame,
    Malformed,
    UnexpectedMessage,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnknownModel => "unknown_model",
            Self::NotInitialized => "not_initialized",
            Self::TimeRegression => "time_regression",
            Self::DuplicateId => "duplicate_id",
            Self::InvalidFrame => "invalid_frame",
            Self::Malformed => "malformed",
            Self::UnexpectedMessage => "unexpected_message",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    Init { model: String, seed: u64, rate_hz: f64 },
    Frame { t: f64, objects: Vec<WireObject> },
    Response { t: f64, objects: Vec<WirePerceived> },
    Reset {},
    Error { code: ErrorCode, message: String },
    Shutdown {},
    /// Reply to `init`, `reset` and `shutdown`; `of` names the request.
    Ack { of: String },
}

impl WireMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::Error {
            code,
            message: message.into(),
        }
    }

    pub fn ack(of: &str) -> Self {
        Self::Ack { of: of.to_string() }
    }

    /// Serialized form with the terminating newline.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("wire messages always serialize");
        s.push('\n');
        s
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let m = WireMessage::Frame {
            t: 0.5,
            objects: vec![WireObject {
                id: 4,
                x: -1.25,
                y: 30.0,
                occ: OcclusionLevel::Vis2,
            }],
        };
        let line = m.to_line();
        assert_eq!(line, "{\"type\":\"frame\",\"t\":0.5,\"objects\":[{\"id\":4,\"x\":-1.25,\"y\":30.0,\"occ\":2}]}\n");
        assert_eq!(WireMessage::parse(&line).unwrap(), m);
    }

    #[test]
    fn empty_bodied_messages() {
        assert_eq!(WireMessage::parse(r#"{"type":"reset"}"#).unwrap(), WireMessage::Reset {});
        assert_eq!(WireMessage::Shutdown {}.to_line(), "{\"type\":\"shutdown\"}\n");
    }

    #[test]
    fn error_codes_are_snake_case() {
        let line = WireMessage::error(ErrorCode::NotInitialized, "send init first").to_line();
        assert!(line.contains("\"code\":\"not_initialized\""));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(WireMessage::parse(r#"{"type":"reset","extra":1}"#).is_err());
        assert!(WireMessage::parse(r#"{"type":"frame","t":0}"#).is_err());
    }
}
