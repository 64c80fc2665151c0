//! Flat `key = value` configuration text.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::invalid(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::invalid(format!(
                "line {}: duplicate key '{k}'",
                i + 1
            )));
        }
    }
    Ok(out)
}

pub fn to_kv_text(kv: &BTreeMap<String, String>) -> String {
    kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let kv = parse_kv("# c\n a = 1 \n\nb=two words\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two words");
        assert_eq!(parse_kv(&to_kv_text(&kv)).unwrap(), kv);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_kv("novalue").is_err());
        assert!(parse_kv("a=1\na=2").is_err());
        assert!(parse_kv(" = 3").is_err());
    }
}
