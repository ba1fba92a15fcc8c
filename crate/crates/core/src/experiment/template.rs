use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Split `s` into literal text and `{name}` placeholders. Braces that do not
/// enclose a plain identifier are literal.
fn tokens(s: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if close > 0 && after[..close].chars().all(is_name_char) => {
                if open > 0 {
                    out.push((false, &rest[..open]));
                }
                out.push((true, &after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push((false, &rest[..=open]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push((false, rest));
    }
    out
}

/// Placeholder names in `s`, in order of appearance.
pub fn placeholders(s: &str) -> Vec<String> {
    tokens(s).into_iter().filter(|t| t.0).map(|t| t.1.to_string()).collect()
}

/// Substitute every `{name}` in `s`; unknown names are an error.
pub fn render(s: &str, values: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    for (is_placeholder, text) in tokens(s) {
        if is_placeholder {
            let v = values.get(text).ok_or_else(|| Error::UnknownPlaceholder(text.to_string()))?;
            out.push_str(v);
        } else {
            out.push_str(text);
        }
    }
    Ok(out)
}
