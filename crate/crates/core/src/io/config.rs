//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [participation]
//! alpha = 0.055
//! h2x = 0.08
//!
//! [phenotype.BMI]
//! sumstats = bmi.sumstats
//! ```
//!
//! Keys before the first section belong to the unnamed section `""`.
//! Values are raw strings; typed accessors report the file and line of a bad
//! value.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub path: PathBuf,
    pub sections: Vec<Section>,
}

impl Config {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: path.display().to_string(), line, message };
        let mut sections = vec![Section { name: String::new(), line: 0, entries: Vec::new() }];
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(ln, format!("unterminated section header `{line}`")))?
                    .trim();
                if name.is_empty() {
                    return Err(err(ln, "empty section name".into()));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(err(ln, format!("duplicate section [{name}]")));
                }
                sections.push(Section { name: name.to_string(), line: ln, entries: Vec::new() });
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(ln, format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(err(ln, "empty key".into()));
            }
            let sec = sections.last_mut().expect("root section");
            if sec.entries.iter().any(|e| e.key == key) {
                return Err(err(ln, format!("duplicate key `{key}`")));
            }
            sec.entries.push(Entry { key: key.to_string(), value: v.trim().to_string(), line: ln });
        }
        Ok(Self { path: path.to_path_buf(), sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sections named `prefix.<rest>`, returned as `(rest, section)` in file
    /// order.
    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a Section)> + 'a {
        self.sections.iter().filter_map(move |s| {
            s.name.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')).map(|r| (r, s))
        })
    }

    pub fn parse_err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { path: self.path.display().to_string(), line, message: message.into() }
    }

    /// Resolves a path value relative to the config file's directory.
    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, cfg: &Config, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|_| cfg.parse_err(e.line, format!("{key}: `{}` is not a number", e.value))),
        }
    }

    pub fn require_f64(&self, cfg: &Config, key: &str) -> Result<f64> {
        self.f64(cfg, key)?
            .ok_or_else(|| Error::MissingInput(format!("`{key}` in [{}] of {}", self.name, cfg.path.display())))
    }

    pub fn usize(&self, cfg: &Config, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| cfg.parse_err(e.line, format!("{key}: `{}` is not a count", e.value))),
        }
    }

    pub fn bool(&self, cfg: &Config, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                v => Err(cfg.parse_err(e.line, format!("{key}: `{v}` is not a boolean"))),
            },
        }
    }

    /// Comma-separated list; empty items are dropped.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.str(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default()
    }

    pub fn f64_list(&self, cfg: &Config, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        self.list(key)
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| cfg.parse_err(e.line, format!("{key}: `{s}` is not a number"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn strip_comment(line: &str) -> &str {
    let b = line.as_bytes();
    match (1..b.len()).find(|&i| b[i] == b'#' && b[i - 1].is_ascii_whitespace()) {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "\
top = 1
# comment
[participation]
alpha = 0.055
h2x=0.08

[phenotype.BMI]
sumstats = data/bmi.tsv
binary = no
[phenotype.height]
grid = 0.1, 0.2 ,0.3
";

    #[test]
    fn parses_sections_and_values() {
        let c = Config::parse(Path::new("/tmp/x/run.cfg"), TEXT).unwrap();
        assert_eq!(c.section("").unwrap().str("top"), Some("1"));
        let p = c.section("participation").unwrap();
        assert_eq!(p.f64(&c, "h2x").unwrap(), Some(0.08));
        let names: Vec<&str> = c.sections_with_prefix("phenotype").map(|(n, _)| n).collect();
        assert_eq!(names, vec!["BMI", "height"]);
        let bmi = c.section("phenotype.BMI").unwrap();
        assert_eq!(bmi.bool(&c, "binary").unwrap(), Some(false));
        assert_eq!(c.resolve(bmi.str("sumstats").unwrap()), PathBuf::from("/tmp/x/data/bmi.tsv"));
        let h = c.section("phenotype.height").unwrap();
        assert_eq!(h.f64_list(&c, "grid").unwrap(), Some(vec![0.1, 0.2, 0.3]));
    }

    #[test]
    fn inline_comments_are_stripped() {
        let c = Config::parse(Path::new("c"), "[a]  # header\nx = 0.1   # note\ny = free\t# tab\nz = a#b\n").unwrap();
        let a = c.section("a").unwrap();
        assert_eq!(a.f64(&c, "x").unwrap(), Some(0.1));
        assert_eq!(a.str("y"), Some("free"));
        assert_eq!(a.str("z"), Some("a#b"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = Config::parse(Path::new("c"), "[a]\nx = 1\nx = 2\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 3, .. }));
        let bad = Config::parse(Path::new("c"), "[a\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 1, .. }));
        let c = Config::parse(Path::new("c"), "[a]\n\nalpha = lots\n").unwrap();
        let e = c.section("a").unwrap().f64(&c, "alpha").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = c.section("a").unwrap().require_f64(&c, "h2x").unwrap_err();
        assert!(e.to_string().contains("h2x"));
    }
}
