//! Report envelopes, artifact files and human-readable formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Human-readable summary only (stdout); never chosen explicitly.
    #[value(skip)]
    Text,
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where and how a command writes its artifacts.
pub struct Sink {
    pub command: String,
    pub config: RunConfig,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    pub fn json_string<T: Serialize>(&self, result: &T) -> anyhow::Result<String> {
        let env = Envelope { tool: "foodchain", version: VERSION, command: &self.command, config: &self.config, result };
        Ok(serde_json::to_string_pretty(&env)? + "\n")
    }

    fn csv_header(&self) -> anyhow::Result<String> {
        let h = Header { tool: "foodchain", version: VERSION, command: &self.command, config: &self.config };
        Ok(format!("# {}\n", serde_json::to_string(&h)?))
    }

    fn path(&self, name: &str) -> anyhow::Result<Option<PathBuf>> {
        let Some(dir) = &self.out_dir else { return Ok(None) };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Some(dir.join(name)))
    }

    /// Writes `<name>.json`, or prints it when stdout is reserved for JSON.
    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> anyhow::Result<()> {
        if !self.format.json() {
            return Ok(());
        }
        let text = self.json_string(result)?;
        match self.path(&format!("{name}.json"))? {
            Some(p) => write_file(&p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Writes `<name>.csv` behind a `#` line carrying the config, or prints
    /// it when stdout is reserved for CSV.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> anyhow::Result<()> {
        if !self.format.csv() {
            return Ok(());
        }
        let mut buf = self.csv_header()?.into_bytes();
        body(&mut buf)?;
        match self.path(&format!("{name}.csv"))? {
            Some(p) => write_file(&p, &buf),
            None => {
                std::io::stdout().write_all(&buf)?;
                Ok(())
            }
        }
    }

    /// True when stdout carries the human-readable summary.
    pub fn human(&self) -> bool {
        self.out_dir.is_some() || self.format == Format::Text
    }
}

fn write_file(p: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
    f.write_all(bytes).with_context(|| format!("writing {}", p.display()))
}

/// Ten significant digits, fixed notation for moderate magnitudes.
pub fn g(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..10).contains(&mag) {
        let s = format!("{:.*}", (9 - mag).max(0) as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.9e}")
    }
}

pub fn g_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), g)
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(&format!("{c:<w$}"));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}
