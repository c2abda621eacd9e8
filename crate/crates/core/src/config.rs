//! Flat `key = value` configuration text.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys are case-sensitive. A later assignment of the same key wins.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_flat(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, found `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Config {
                line,
                message: format!("malformed key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::Config {
                line,
                message: format!("missing value for `{key}`"),
            });
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// A length in metres from text such as `300um`, `9.182 mm` or `0.05`
/// (bare numbers are metres).
pub fn parse_length(text: &str) -> Result<f64, String> {
    let t = text.trim();
    const UNITS: [(&str, f64); 7] = [
        ("nm", 1e-9),
        ("μm", 1e-6),
        ("um", 1e-6),
        ("mm", 1e-3),
        ("cm", 1e-2),
        ("km", 1e3),
        ("m", 1.0),
    ];
    let (number, scale) = UNITS
        .iter()
        .find_map(|&(suffix, scale)| t.strip_suffix(suffix).map(|n| (n.trim(), scale)))
        .unwrap_or((t, 1.0));
    let v: f64 = number
        .parse()
        .map_err(|_| format!("cannot read `{text}` as a length"))?;
    if !v.is_finite() {
        return Err(format!("length `{text}` is not finite"));
    }
    Ok(v * scale)
}
