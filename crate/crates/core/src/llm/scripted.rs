use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{Backend, BackendError, CallCounts, ChatRequest, Role};

/// Serves canned replies per role, in order.
#[derive(Debug)]
pub struct ScriptedBackend {
    replies: BTreeMap<Role, Vec<String>>,
    cursor: Mutex<CallCounts>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    #[serde(default)]
    designer: Vec<String>,
    #[serde(default)]
    planner: Vec<String>,
    #[serde(default)]
    coder: Vec<String>,
    #[serde(default)]
    critic: Vec<String>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = (Role, Vec<String>)>) -> Self {
        Self {
            replies: replies.into_iter().collect(),
            cursor: Mutex::new(CallCounts::default()),
        }
    }

    /// Fixture file: TOML with one string array per role.
    pub fn from_toml_str(text: &str) -> Result<Self, BackendError> {
        let f: Fixture = toml::from_str(text).map_err(|e| BackendError::Fixture(e.to_string()))?;
        Ok(Self::new([
            (Role::Designer, f.designer),
            (Role::Planner, f.planner),
            (Role::Coder, f.coder),
            (Role::Critic, f.critic),
        ]))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn remaining(&self, role: Role) -> usize {
        let used = self.cursor.lock().expect("cursor lock").get(role) as usize;
        self.replies.get(&role).map_or(0, |v| v.len().saturating_sub(used))
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let position = cursor.get(request.role) + 1;
        let reply = self
            .replies
            .get(&request.role)
            .and_then(|v| v.get(position as usize - 1))
            .ok_or(BackendError::FixtureExhausted {
                role: request.role,
                position,
            })?;
        cursor.set(request.role, position);
        Ok(reply.clone())
    }

    fn fast_forward(&self, consumed: &CallCounts) {
        *self.cursor.lock().expect("cursor lock") = consumed.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_in_order_then_exhausts() {
        let b = ScriptedBackend::new([(Role::Planner, vec!["r1".to_string(), "r2".to_string()])]);
        let req = ChatRequest::new(Role::Planner, "s", "u");
        assert_eq!(b.complete(&req).unwrap(), "r1");
        assert_eq!(b.complete(&req).unwrap(), "r2");
        assert_eq!(
            b.complete(&req),
            Err(BackendError::FixtureExhausted {
                role: Role::Planner,
                position: 3
            })
        );
    }

    #[test]
    fn roles_are_independent() {
        let b = ScriptedBackend::from_toml_str("coder = ['c1']\ncritic = ['k1']").unwrap();
        assert_eq!(b.complete(&ChatRequest::new(Role::Critic, "s", "u")).unwrap(), "k1");
        assert_eq!(b.complete(&ChatRequest::new(Role::Coder, "s", "u")).unwrap(), "c1");
        assert!(b.complete(&ChatRequest::new(Role::Designer, "s", "u")).is_err());
    }

    #[test]
    fn fast_forward_skips() {
        let b = ScriptedBackend::from_toml_str("coder = ['a', 'b', 'c']").unwrap();
        let mut consumed = CallCounts::default();
        consumed.set(Role::Coder, 2);
        b.fast_forward(&consumed);
        assert_eq!(b.complete(&ChatRequest::new(Role::Coder, "s", "u")).unwrap(), "c");
        assert_eq!(b.remaining(Role::Coder), 0);
    }

    #[test]
    fn unknown_role_key_rejected() {
        assert!(ScriptedBackend::from_toml_str("reviewer = ['x']").is_err());
    }
}
