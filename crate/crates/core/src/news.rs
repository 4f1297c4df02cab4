//! News items, one JSON object per line:
//!
//! ```text
//! {"id": "pol-001", "title": "...", "body": "...", "veracity": "fake", "topic": "political"}
//! ```
//!
//! `id`, `title` and `veracity` (`fake` | `real`) are required; `body`
//! defaults to empty and `topic` to `unspecified`. Blank lines and lines
//! starting with `#` are skipped. Items keep file order.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Veracity {
    Fake,
    Real,
}

impl fmt::Display for Veracity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Veracity::Fake => "fake",
            Veracity::Real => "real",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    #[serde(rename = "id")]
    pub news_id: String,
    pub title: String,
    pub body: String,
    pub veracity: Veracity,
    pub topic: String,
}

#[derive(Deserialize)]
struct RawItem {
    id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    veracity: Option<String>,
    topic: Option<String>,
}

impl NewsItem {
    /// Stand-in used when a stub-policy experiment names no news file.
    pub fn placeholder() -> Self {
        NewsItem {
            news_id: "placeholder".into(),
            title: "Unverified claim circulating online".into(),
            body: String::new(),
            veracity: Veracity::Fake,
            topic: "political".into(),
        }
    }
}

pub fn load_news(path: &Path) -> Result<Vec<NewsItem>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_news(std::io::BufReader::new(file), path)
}

/// Parses every record, then fails with all problems at once if any record
/// is invalid.
pub fn parse_news<R: BufRead>(r: R, path: &Path) -> Result<Vec<NewsItem>> {
    let mut items = Vec::new();
    let mut problems = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let raw: RawItem = match serde_json::from_str(trimmed) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}:{lineno}: malformed record: {e}", path.display()));
                continue;
            }
        };
        let id = raw.id.clone().filter(|s| !s.trim().is_empty());
        let who = id.clone().unwrap_or_else(|| "<no id>".into());
        let mut bad = |what: &str| problems.push(format!("{}:{lineno}: record `{who}` {what}", path.display()));

        if id.is_none() {
            bad("is missing `id`");
        }
        if id.as_ref().is_some_and(|i| items.iter().any(|n: &NewsItem| &n.news_id == i)) {
            bad("repeats an earlier id");
        }
        let title = raw.title.filter(|t| !t.trim().is_empty());
        if title.is_none() {
            bad("is missing a non-empty `title`");
        }
        let veracity = match raw.veracity.as_deref().map(|v| v.trim().to_ascii_lowercase()) {
            Some(v) if v == "fake" => Some(Veracity::Fake),
            Some(v) if v == "real" => Some(Veracity::Real),
            Some(v) => {
                bad(&format!("has unknown veracity `{v}`"));
                None
            }
            None => {
                bad("is missing `veracity`");
                None
            }
        };
        if let (Some(news_id), Some(title), Some(veracity)) = (id, title, veracity) {
            items.push(NewsItem {
                news_id,
                title,
                body: raw.body.unwrap_or_default(),
                veracity,
                topic: raw.topic.unwrap_or_else(|| "unspecified".into()),
            });
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    if items.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "news file contains no records".into(),
        });
    }
    Ok(items)
}

/// Cuts `body` to at most `budget` characters, backing up to the last word
/// boundary, and marks the cut with an ellipsis.
pub fn truncate_body(body: &str, budget: usize) -> String {
    if body.chars().count() <= budget {
        return body.to_string();
    }
    let cut: String = body.chars().take(budget).collect();
    let kept = match cut.rfind(char::is_whitespace) {
        Some(pos) if pos > 0 => cut[..pos].trim_end(),
        _ => cut.as_str(),
    };
    format!("{kept} …")
}
