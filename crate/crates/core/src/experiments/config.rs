//! `key = value` spec files. Lines starting with `#` are comments; lists are
//! comma separated (optionally bracketed) or `start:stop:step` ranges.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config { line, msg: format!("bad key `{}`", key) });
            }
            let entry = Entry { key, value: value.trim().to_string(), line };
            // Later assignments win.
            entries.retain(|e| e.key != entry.key);
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    /// Rejects the first key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(Error::Config { line: e.line, msg: format!("unknown key `{}`", e.key) }),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Parses `key` with `parse`, attaching the line number to failures.
    pub fn parse_with<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|msg| Error::Config { line: e.line, msg: format!("`{}`: {msg}", e.key) }),
        }
    }
}

fn list_items(text: &str) -> Vec<&str> {
    let t = text.trim().trim_start_matches('[').trim_end_matches(']');
    t.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse `{}`", s.trim()))
}

/// Inclusive `start:stop:step` range, or `None` if `text` is not a range.
fn range(text: &str) -> Option<std::result::Result<Vec<f64>, String>> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 3 {
        return None;
    }
    Some((|| {
        let (a, b, h): (f64, f64, f64) = (parse_num(parts[0])?, parse_num(parts[1])?, parse_num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(format!("range `{text}` needs step > 0 and start <= stop"));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| a + h * k as f64).collect())
    })())
}

pub fn parse_f64_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    let v = match range(text) {
        Some(r) => r?,
        None => list_items(text).into_iter().map(parse_num).collect::<std::result::Result<_, _>>()?,
    };
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

pub fn parse_usize_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    if let Some(r) = range(text) {
        return r?
            .into_iter()
            .map(|v| {
                if v.fract() == 0.0 && v >= 0.0 {
                    Ok(v as usize)
                } else {
                    Err(format!("`{v}` is not a nonnegative integer"))
                }
            })
            .collect();
    }
    let v: Vec<usize> = list_items(text).into_iter().map(parse_num).collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

/// Like [`parse_usize_list`] but items may also be fractions of `n` written
/// with an `n` suffix (`0.25n`), rounded to the nearest integer.
pub fn parse_m_list(text: &str, n: usize) -> std::result::Result<Vec<usize>, String> {
    if !text.contains('n') {
        return parse_usize_list(text);
    }
    let v: Vec<usize> = list_items(text)
        .into_iter()
        .map(|item| match item.strip_suffix('n') {
            Some(frac) => {
                let f: f64 = if frac.is_empty() { 1.0 } else { parse_num(frac)? };
                if !(f > 0.0) {
                    return Err(format!("`{item}` must be a positive fraction of n"));
                }
                Ok(((f * n as f64).round() as usize).max(1))
            }
            None => parse_num(item),
        })
        .collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_overrides() {
        let cfg = Config::parse("# sweep\nn = 128\n\ns = 2:8:2  # grid\nn = 64\n").unwrap();
        assert_eq!(cfg.get("n").unwrap().value, "64");
        assert_eq!(cfg.get("n").unwrap().line, 5);
        assert_eq!(parse_usize_list(&cfg.get("s").unwrap().value).unwrap(), vec![2, 4, 6, 8]);
    }

    #[test]
    fn unknown_key_names_line() {
        let cfg = Config::parse("n = 1\nfoo = 2\n").unwrap();
        match cfg.check_known(&["n"]).unwrap_err() {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_names_line() {
        assert!(matches!(Config::parse("n = 1\noops\n"), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn value_error_names_line() {
        let cfg = Config::parse("\ntrials = many\n").unwrap();
        let err = cfg.parse_with("trials", |v| parse_num::<usize>(v)).unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn lists() {
        assert_eq!(parse_usize_list("[4, 8,16]").unwrap(), vec![4, 8, 16]);
        assert_eq!(parse_f64_list("0.9,1,1.1").unwrap(), vec![0.9, 1.0, 1.1]);
        assert_eq!(parse_f64_list("0.5:1:0.25").unwrap(), vec![0.5, 0.75, 1.0]);
        assert_eq!(parse_m_list("0.25n, 0.5n, 100", 128).unwrap(), vec![32, 64, 100]);
        assert!(parse_usize_list("").is_err());
        assert!(parse_usize_list("5:1:1").is_err());
        assert!(parse_usize_list("1:2:0.5").is_err());
    }
}
