//! Conversation messages and their JSON wire form.

use std::collections::BTreeMap;
use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A payload value. On the wire each value is a one-key object naming its
/// type, e.g. `{"int": 3}` or `{"bytes": "AAE="}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    String(String),
    Int(i64),
    Bool(bool),
    Bytes(#[serde(serialize_with = "to_base64", deserialize_with = "from_base64")] Vec<u8>),
}

fn to_base64<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&STANDARD.encode(bytes))
}

fn from_base64<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let text = String::deserialize(d)?;
    STANDARD.decode(text).map_err(serde::de::Error::custom)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => write!(f, "{s:?}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Bytes(b) => write!(f, "<{} bytes>", b.len()),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Vec<u8>> for Value {
    fn from(b: Vec<u8>) -> Self {
        Value::Bytes(b)
    }
}

pub type Payload = Vec<(String, Value)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Invitation,
    InSession,
}

/// Header keys every invitation carries.
pub const INVITATION_KEYS: [&str; 3] = ["role", "principal", "protocol_ref"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationMessage {
    pub kind: MessageKind,
    pub cid: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub payload: Payload,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invitation without `{0}` header")]
    MissingHeader(&'static str),
    #[error("in-session message without a label")]
    EmptyLabel,
}

impl ConversationMessage {
    pub fn in_session(
        cid: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        label: impl Into<String>,
        payload: Payload,
    ) -> Self {
        Self {
            kind: MessageKind::InSession,
            cid: cid.into(),
            from: from.into(),
            to: to.into(),
            label: label.into(),
            payload,
            extras: BTreeMap::new(),
        }
    }

    /// An invitation for `role`, played by `principal`, following the local
    /// protocol named by `protocol_ref`.
    pub fn invitation(
        cid: impl Into<String>,
        from: impl Into<String>,
        role: impl Into<String>,
        principal: impl Into<String>,
        protocol_ref: impl Into<String>,
    ) -> Self {
        let role = role.into();
        let extras = BTreeMap::from([
            ("role".to_owned(), role.clone()),
            ("principal".to_owned(), principal.into()),
            ("protocol_ref".to_owned(), protocol_ref.into()),
        ]);
        Self {
            kind: MessageKind::Invitation,
            cid: cid.into(),
            from: from.into(),
            to: role,
            label: String::new(),
            payload: Vec::new(),
            extras,
        }
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extras.get(key).map(String::as_str)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        match self.kind {
            MessageKind::Invitation => {
                for key in INVITATION_KEYS {
                    if !self.extras.contains_key(key) {
                        return Err(WireError::MissingHeader(key));
                    }
                }
                Ok(())
            }
            MessageKind::InSession if self.label.is_empty() => Err(WireError::EmptyLabel),
            MessageKind::InSession => Ok(()),
        }
    }

    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("messages always serialise")
    }

    pub fn from_wire(text: &str) -> Result<Self, WireError> {
        let msg: Self = serde_json::from_str(text)?;
        msg.validate()?;
        Ok(msg)
    }
}
