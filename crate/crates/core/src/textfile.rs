//! Reader for the line-oriented `key = value` / `[section]` input files.

use crate::diagnostics::Diagnostic;

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Section {
    /// `None` for the top-level block before the first header.
    pub header: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Splits a file into sections. `#` starts a comment.
pub(crate) fn read_sections(text: &str) -> Result<Vec<Section>, Vec<Diagnostic>> {
    let mut sections = vec![Section {
        header: None,
        line: 0,
        entries: Vec::new(),
    }];
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => sections.push(Section {
                    header: Some(name.trim().to_string()),
                    line,
                    entries: Vec::new(),
                }),
                _ => errors.push(Diagnostic::at_line(
                    line,
                    format!("malformed section header `{content}`"),
                )),
            }
            continue;
        }
        match content.split_once('=') {
            Some((key, value)) if !key.trim().is_empty() => {
                sections.last_mut().unwrap().entries.push(Entry {
                    key: key.trim().to_string(),
                    value: value.trim().to_string(),
                    line,
                });
            }
            _ => errors.push(Diagnostic::at_line(
                line,
                format!("expected `key = value`, found `{content}`"),
            )),
        }
    }
    if errors.is_empty() {
        Ok(sections)
    } else {
        Err(errors)
    }
}

pub(crate) fn parse_number(entry: &Entry, errors: &mut Vec<Diagnostic>) -> Option<f64> {
    match entry.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(Diagnostic::at_line(
                entry.line,
                format!(
                    "`{}` must be a finite number, found `{}`",
                    entry.key, entry.value
                ),
            ));
            None
        }
    }
}
