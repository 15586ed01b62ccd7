//! Prompt templates for the four LLM roles.
//!
//! Each role has a system and a user template. Placeholders are written
//! `{{name}}`; rendering fails on a placeholder without a value so a template
//! edit cannot silently drop context.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::llm::{ChatRequest, Role};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read prompt template {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("template {template} uses {{{{{key}}}}} but no value was supplied")]
    MissingValue { template: String, key: String },
    #[error("template {template} has an unterminated placeholder")]
    Unterminated { template: String },
}

const SHIPPED: [(&str, &str); 8] = [
    ("designer.system", include_str!("../data/prompts/designer.system.txt")),
    ("designer.user", include_str!("../data/prompts/designer.user.txt")),
    ("planner.system", include_str!("../data/prompts/planner.system.txt")),
    ("planner.user", include_str!("../data/prompts/planner.user.txt")),
    ("coder.system", include_str!("../data/prompts/coder.system.txt")),
    ("coder.user", include_str!("../data/prompts/coder.user.txt")),
    ("critic.system", include_str!("../data/prompts/critic.system.txt")),
    ("critic.user", include_str!("../data/prompts/critic.user.txt")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::shipped()
    }
}

impl PromptSet {
    pub fn shipped() -> Self {
        Self {
            templates: SHIPPED
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Shipped templates, replaced by any `<role>.<part>.txt` found in `dir`.
    pub fn load(dir: Option<&Path>) -> Result<Self, PromptError> {
        let mut set = Self::shipped();
        let Some(dir) = dir else { return Ok(set) };
        for (name, _) in SHIPPED {
            let path = dir.join(format!("{name}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    set.templates.insert(name.to_string(), text);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(PromptError::Io { path, source }),
            }
        }
        Ok(set)
    }

    pub fn template(&self, role: Role, part: &str) -> &str {
        self.templates
            .get(&format!("{}.{part}", role.as_str()))
            .map_or("", String::as_str)
    }

    /// Renders both templates of `role` into a chat request.
    pub fn request(&self, role: Role, vars: &[(&str, &str)]) -> Result<ChatRequest, PromptError> {
        let system = render(&format!("{role}.system"), self.template(role, "system"), vars)?;
        let user = render(&format!("{role}.user"), self.template(role, "user"), vars)?;
        Ok(ChatRequest::new(role, system.trim_end(), user.trim_end()))
    }
}

/// Substitutes every `{{key}}` in `template`. Values are inserted verbatim
/// and never rescanned.
pub fn render(name: &str, template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| PromptError::Unterminated {
            template: name.to_string(),
        })?;
        let key = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| PromptError::MissingValue {
                template: name.to_string(),
                key: key.to_string(),
            })?;
        out.push_str(value.1);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_without_rescanning() {
        let out = render("t", "a {{x}} b {{ y }}", &[("x", "{{y}}"), ("y", "2")]).unwrap();
        assert_eq!(out, "a {{y}} b 2");
    }

    #[test]
    fn missing_value_is_an_error() {
        let err = render("t", "{{nope}}", &[]).unwrap_err();
        assert!(matches!(err, PromptError::MissingValue { key, .. } if key == "nope"));
        assert!(matches!(
            render("t", "{{open", &[]),
            Err(PromptError::Unterminated { .. })
        ));
    }

    #[test]
    fn directory_overrides_single_template() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("critic.user.txt"), "only {{code}}").unwrap();
        let set = PromptSet::load(Some(dir.path())).unwrap();
        assert_eq!(set.template(Role::Critic, "user"), "only {{code}}");
        assert_eq!(
            set.template(Role::Planner, "user"),
            PromptSet::shipped().template(Role::Planner, "user")
        );
    }

    #[test]
    fn shipped_request_starts_with_system() {
        let vars = [("strategy", "s"), ("code", "c"), ("report", "r")];
        let req = PromptSet::shipped().request(Role::Critic, &vars).unwrap();
        assert!(req.is_well_formed());
        assert!(req.user_text().contains("```bt\nc\n```"));
    }
}
