//! Deterministic report files: RFC-4180 CSV with `.` decimals and LF line
//! endings, and a key=value run manifest.

use crate::config::{canonical_toml, ExperimentConfig, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// CSV cell formatter. Floats use the shortest round-trip representation,
/// which is deterministic for a given build.
pub enum Cell {
    Str(String),
    Int(i64),
    Uint(u64),
    Float(f64),
    /// empty field
    Empty,
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Uint(v as u64)
    }
}

fn render_cell(cell: &Cell) -> String {
    let raw = match cell {
        Cell::Str(s) => s.clone(),
        Cell::Int(v) => v.to_string(),
        Cell::Uint(v) => v.to_string(),
        Cell::Float(v) => {
            if v.is_nan() {
                "NaN".to_string()
            } else {
                format!("{v}")
            }
        }
        Cell::Empty => String::new(),
    };
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "{}", header.join(","));
        Self { buf }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let rendered: Vec<String> = cells.iter().map(render_cell).collect();
        let _ = writeln!(self.buf, "{}", rendered.join(","));
    }

    pub fn bytes(&self) -> &[u8] {
        self.buf.as_bytes()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.buf.as_bytes())?;
        Ok(())
    }
}

/// SHA-256 of the canonical config rendering.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_toml(cfg).as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Write the run manifest: experiment kind, canonical config hash, seed,
/// and crate version, as key=value lines.
pub fn write_manifest(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("manifest");
    let body = format!(
        "experiment={}\nconfig_hash={}\nseed={}\nversion={}\nformat=1\n",
        cfg.kind.name(),
        config_hash(cfg),
        cfg.seed,
        env!("CARGO_PKG_VERSION"),
    );
    std::fs::write(&path, body)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_rfc4180ish() {
        let mut csv = Csv::new(&["a", "b", "c"]);
        csv.row(vec![Cell::from("x,y"), Cell::Float(0.5), Cell::Empty]);
        let text = String::from_utf8(csv.bytes().to_vec()).unwrap();
        assert_eq!(text, "a,b,c\n\"x,y\",0.5,\n");
    }

    #[test]
    fn float_rendering_is_locale_free() {
        let mut csv = Csv::new(&["v"]);
        csv.row(vec![Cell::Float(1234.5)]);
        csv.row(vec![Cell::Float(1e-9)]);
        csv.row(vec![Cell::Float(f64::NAN)]);
        let text = String::from_utf8(csv.bytes().to_vec()).unwrap();
        assert_eq!(text, "v\n1234.5\n0.000000001\nNaN\n");
    }
}
