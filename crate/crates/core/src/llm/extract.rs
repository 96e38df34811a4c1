use std::fmt;

use crate::model::normalize_text;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub text: String,
    pub reading: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Empty,
    PhraseMissing(String),
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Empty => f.write_str("empty"),
            Rejection::PhraseMissing(p) => write!(f, "phrase missing: {p}"),
        }
    }
}

const ECHO_LABELS: [&str; 3] = ["Word:", "Interjection:", "Emotion:"];

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let t = line.trim_start();
    let head = t.get(..label.len())?;
    head.eq_ignore_ascii_case(label).then(|| t[label.len()..].trim())
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('「', '」'), ('『', '』'), ('“', '”')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}

/// Pulls the script (and optional kana reading) out of a raw completion.
pub fn extract_script(raw: &str, expected_phrase: Option<&str>) -> Result<Extracted, Rejection> {
    let mut body = Vec::new();
    let mut reading = None;
    let mut seen_script_label = false;
    for line in raw.lines() {
        if let Some(rest) = strip_label(line, "Reading:") {
            let r = normalize_text(unquote(rest));
            if !r.is_empty() {
                reading = Some(r);
            }
            continue;
        }
        if let Some(rest) = strip_label(line, "Script:") {
            // a later label means the model restated the answer; keep the last one
            body.clear();
            seen_script_label = true;
            if !rest.is_empty() {
                body.push(rest.to_string());
            }
            continue;
        }
        if ECHO_LABELS.iter().any(|l| strip_label(line, l).is_some()) || line.trim_start().starts_with('#') {
            if !seen_script_label {
                body.clear();
            }
            continue;
        }
        if !line.trim().is_empty() {
            body.push(line.trim().to_string());
        }
    }
    let text = normalize_text(unquote(&body.join(" ")));
    if text.is_empty() {
        return Err(Rejection::Empty);
    }
    if let Some(p) = expected_phrase {
        if !text.contains(p) {
            return Err(Rejection::PhraseMissing(p.to_string()));
        }
    }
    Ok(Extracted { text, reading })
}
