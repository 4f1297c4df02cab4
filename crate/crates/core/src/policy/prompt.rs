//! Prompt templates.
//!
//! Templates are plain text with `{{name}}` placeholders: `persona`, `day`,
//! `title`, `body`, `peer_comments` and `refutation`. Defaults are compiled
//! in from `templates/*.txt`; a template directory containing `none.txt`,
//! `commenting.txt` and/or `accuracy.txt` overrides them file by file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DecisionRequest;
use crate::error::{Error, Result};
use crate::persona::render_persona_text;
use crate::seed::sha256_hex;

pub const DEFAULT_REFUTATION: &str =
    "Independent fact-checkers have reviewed this story and determined that it is false.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    #[serde(rename = "none")]
    Baseline,
    Commenting,
    Accuracy,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [TemplateId::Baseline, TemplateId::Commenting, TemplateId::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::Baseline => "none",
            TemplateId::Commenting => "commenting",
            TemplateId::Accuracy => "accuracy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Template(format!("unknown template id `{s}`")))
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub baseline: String,
    pub commenting: String,
    pub accuracy: String,
    pub refutation: String,
    /// Only the most recent this-many peer comments are shown.
    pub max_peer_comments: usize,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            baseline: include_str!("../../templates/none.txt").to_string(),
            commenting: include_str!("../../templates/commenting.txt").to_string(),
            accuracy: include_str!("../../templates/accuracy.txt").to_string(),
            refutation: DEFAULT_REFUTATION.to_string(),
            max_peer_comments: 3,
        }
    }
}

impl PromptTemplates {
    pub fn load(dir: Option<&Path>, refutation: &str, max_peer_comments: usize) -> Result<Self> {
        let mut t = PromptTemplates {
            refutation: refutation.to_string(),
            max_peer_comments,
            ..PromptTemplates::default()
        };
        if let Some(dir) = dir {
            for id in TemplateId::ALL {
                let path = dir.join(format!("{}.txt", id.name()));
                if path.exists() {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::io(path.display().to_string(), e))?;
                    *t.get_mut(id) = text;
                }
            }
        }
        Ok(t)
    }

    pub fn get(&self, id: TemplateId) -> &str {
        match id {
            TemplateId::Baseline => &self.baseline,
            TemplateId::Commenting => &self.commenting,
            TemplateId::Accuracy => &self.accuracy,
        }
    }

    fn get_mut(&mut self, id: TemplateId) -> &mut String {
        match id {
            TemplateId::Baseline => &mut self.baseline,
            TemplateId::Commenting => &mut self.commenting,
            TemplateId::Accuracy => &mut self.accuracy,
        }
    }

    /// Hash over all template texts and the refutation sentence.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        for id in TemplateId::ALL {
            s.push_str(id.name());
            s.push('\0');
            s.push_str(self.get(id));
            s.push('\0');
        }
        s.push_str(&self.refutation);
        sha256_hex(s)
    }
}

/// Instantiates the template selected by the request's context.
pub fn render_prompt(req: &DecisionRequest<'_>, templates: &PromptTemplates) -> Result<String> {
    let id = req.template_id();
    let comments = req.context.peer_comments();
    let recent = &comments[comments.len().saturating_sub(templates.max_peer_comments)..];
    let peer_block = if recent.is_empty() {
        "(no comments)".to_string()
    } else {
        recent.iter().map(|c| format!("- \"{c}\"")).collect::<Vec<_>>().join("\n")
    };
    let body = if req.news.body.trim().is_empty() {
        String::new()
    } else {
        format!("{}\n", req.news.body.trim())
    };

    let mut out = templates.get(id).to_string();
    for (key, value) in [
        ("persona", render_persona_text(req.persona)),
        ("day", req.day.to_string()),
        ("title", req.news.title.clone()),
        ("body", body),
        ("peer_comments", peer_block),
        ("refutation", templates.refutation.clone()),
    ] {
        out = out.replace(&format!("{{{{{key}}}}}"), &value);
    }
    if let Some(start) = out.find("{{") {
        let end = out[start..].find("}}").map_or(out.len(), |e| start + e + 2);
        return Err(Error::Template(format!(
            "template `{id}` has unresolved placeholder `{}`",
            &out[start..end]
        )));
    }
    Ok(out)
}
