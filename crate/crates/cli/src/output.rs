//! Output files. Every file carries the config hash: CSV and corpus files in a
//! leading `# config_hash=` comment, JSON in a `config_hash` field, traces in a
//! header key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ebsurf::chain::io::write_trace;
use ebsurf::ChainTrace;
use serde::Serialize;

/// Fixed 17-significant-digit form used for every CSV number.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files written by one command.
#[derive(Debug)]
pub struct Outputs {
    pub dir: PathBuf,
    pub hash: String,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Header row plus data rows, each already joined by the caller.
    pub fn csv(&mut self, name: &str, comments: &[String], header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = format!("# config_hash={}\n", self.hash);
        for c in comments {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str(&header.join(","));
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.put(name, s.as_bytes())
    }

    /// Pretty JSON object with `config_hash` as its first field.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let body = serde_json::to_value(value)?;
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), self.hash.clone().into());
        match body {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("value".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Trace file with a `config_hash` header key after the magic line.
    pub fn trace(&mut self, name: &str, trace: &ChainTrace) -> Result<PathBuf> {
        let mut buf = Vec::new();
        write_trace(trace, &mut buf)?;
        let split = buf.iter().position(|b| *b == b'\n').map_or(buf.len(), |i| i + 1);
        let mut out = Vec::with_capacity(buf.len() + 80);
        out.extend_from_slice(&buf[..split]);
        writeln!(out, "config_hash={}", self.hash)?;
        out.extend_from_slice(&buf[split..]);
        self.put(name, &out)
    }

    /// Arbitrary text body behind a `# config_hash=` line.
    pub fn text(&mut self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let mut out = format!("# config_hash={}\n", self.hash).into_bytes();
        out.extend_from_slice(body);
        self.put(name, &out)
    }
}
