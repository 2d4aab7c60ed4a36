//! Caption cleanup for fine-tuning datasets and prompts: strip known poor
//! tags and prepend the trigger phrase.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TRIGGER: &str = "360-degree panoramic image";
pub const DEFAULT_BLOCKLIST: &[&str] = &["3 6 0 picture"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CaptionError {
    #[error("trigger phrase must not be empty")]
    EmptyTrigger,
    #[error("blocklist entry {index} is empty")]
    EmptyBlocklistEntry { index: usize },
    #[error("trigger phrase contains blocklisted text `{entry}`")]
    TriggerBlocked { entry: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRule {
    blocklist: Vec<String>,
    trigger: String,
    separator: String,
}

impl Default for CaptionRule {
    fn default() -> Self {
        Self {
            blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            trigger: DEFAULT_TRIGGER.to_string(),
            separator: ", ".to_string(),
        }
    }
}

impl CaptionRule {
    pub fn new(trigger: impl Into<String>, blocklist: Vec<String>) -> Result<Self, CaptionError> {
        let trigger = normalize_whitespace(&trigger.into());
        if trigger.is_empty() {
            return Err(CaptionError::EmptyTrigger);
        }
        if let Some(index) = blocklist.iter().position(|b| b.is_empty()) {
            return Err(CaptionError::EmptyBlocklistEntry { index });
        }
        if let Some(entry) = blocklist.iter().find(|b| trigger.contains(b.as_str())) {
            return Err(CaptionError::TriggerBlocked { entry: entry.clone() });
        }
        Ok(Self {
            blocklist,
            trigger,
            separator: ", ".to_string(),
        })
    }

    pub fn trigger(&self) -> &str {
        &self.trigger
    }

    pub fn blocklist(&self) -> &[String] {
        &self.blocklist
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes blocklisted substrings until none remain. Whitespace is collapsed
/// between rounds so that removals cannot splice a new match together out of
/// differently spaced fragments.
fn scrub(raw: &str, blocklist: &[String]) -> String {
    let mut text = normalize_whitespace(raw);
    loop {
        let mut next = text.clone();
        for entry in blocklist {
            next = next.replace(entry.as_str(), " ");
        }
        let next = normalize_whitespace(&next);
        if next == text {
            return text;
        }
        text = next;
    }
}

/// Cleans `raw` and prepends the trigger phrase.
///
/// ```
/// use panostitch::caption::{prepare_caption, CaptionRule};
/// let rule = CaptionRule::default();
/// assert_eq!(
///     prepare_caption("3 6 0 picture, a castle", &rule),
///     "360-degree panoramic image, a castle"
/// );
/// ```
pub fn prepare_caption(raw: &str, rule: &CaptionRule) -> String {
    let mut text = tidy(raw, rule);
    loop {
        let next = tidy(&text, rule);
        if next == text {
            break;
        }
        text = next;
    }
    let mut parts: Vec<&str> = if text.is_empty() {
        Vec::new()
    } else {
        text.split(rule.separator.as_str()).collect()
    };
    if parts.first() == Some(&rule.trigger.as_str()) {
        parts.remove(0);
    }
    if parts.is_empty() {
        return rule.trigger.clone();
    }
    format!("{}{}{}", rule.trigger, rule.separator, parts.join(&rule.separator))
}

/// One round of blocklist removal followed by comma cleanup.
fn tidy(text: &str, rule: &CaptionRule) -> String {
    scrub(text, &rule.blocklist)
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(&rule.separator)
}
