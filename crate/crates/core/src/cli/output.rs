//! CSV and `key=value` report writers with fixed, locale-free formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Scientific notation with 16 significant digits.
pub fn num(x: f64) -> String {
    // −0.0 prints as 0
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.15e}")
}

pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn float(&mut self, key: &str, value: f64) -> &mut Self {
        let _ = writeln!(self.text, "{key}={}", num(value));
        self
    }

    pub fn int(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key}={value}");
        self
    }

    pub fn raw(&mut self, text: &str) -> &mut Self {
        self.text.push_str(text);
        self
    }

    pub fn finish(&self) -> String {
        self.text.clone()
    }
}

/// Files produced by one subcommand, held in memory until the run succeeds.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file into `dir`. If any write fails the files already
    /// written are removed again.
    pub fn write_all(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, contents) {
                let _ = std::fs::remove_file(&path);
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(written)
    }
}
