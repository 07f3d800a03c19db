use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use super::TransportError;

/// Who plays each role, and which local protocol they follow.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct InvitationEntry {
    pub role: String,
    #[serde(rename = "principal name")]
    pub principal: String,
    #[serde(rename = "local capability")]
    pub capability: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
pub struct InvitationConfig {
    #[serde(rename = "invitations")]
    pub entries: Vec<InvitationEntry>,
}

impl InvitationConfig {
    /// Reads the YAML form:
    ///
    /// ```yaml
    /// invitations:
    ///   - role: U
    ///     principal name: alice
    ///     local capability: DataAquisition_U.scr
    /// ```
    pub fn from_yaml(text: &str) -> Result<Self, TransportError> {
        let cfg: Self =
            serde_yaml::from_str(text).map_err(|e| TransportError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, TransportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransportError::Config(format!("{}: {e}", path.display())))?;
        Self::from_yaml(&text)
    }

    pub fn new<R, P, C>(entries: impl IntoIterator<Item = (R, P, C)>) -> Self
    where
        R: Into<String>,
        P: Into<String>,
        C: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|(role, principal, capability)| InvitationEntry {
                    role: role.into(),
                    principal: principal.into(),
                    capability: capability.into(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.role.is_empty() || e.principal.is_empty() || e.capability.is_empty() {
                return Err(TransportError::Config(format!(
                    "incomplete entry for role {:?}",
                    e.role
                )));
            }
            if !seen.insert(e.role.as_str()) {
                return Err(TransportError::Config(format!(
                    "role {} listed twice",
                    e.role
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, role: &str) -> Option<&InvitationEntry> {
        self.entries.iter().find(|e| e.role == role)
    }
}
