//! Result files.
//!
//! Every CSV starts with one metadata comment line
//! `# hbfsim <version> config_sha256=<hex> seed=<seed> created_unix=<secs>`
//! followed by an RFC 4180 body. JSON summaries carry the same fields in a
//! `meta` object.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::Resolved;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub created_unix: u64,
}

impl Meta {
    pub fn new(r: &Resolved) -> Self {
        Self {
            tool: "hbfsim",
            version: VERSION,
            config_sha256: r.sha256.clone(),
            seed: r.seed,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn header_line(&self) -> String {
        format!(
            "# hbfsim {} config_sha256={} seed={} created_unix={}",
            self.version, self.config_sha256, self.seed, self.created_unix
        )
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes `rows` as CSV below the metadata line.
pub fn write_csv<T: Serialize>(path: &Path, meta: &Meta, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", meta.header_line()).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes a pretty-printed JSON summary with a `meta` object.
pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &WithMeta { meta, body }).map_err(|e| io_err(path, e))?;
    writeln!(out).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// CSV content with the metadata line removed.
pub fn csv_body(text: &str) -> &str {
    match text.split_once('\n') {
        Some((first, rest)) if first.starts_with("# hbfsim") => rest,
        _ => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta {
            tool: "hbfsim",
            version: VERSION,
            config_sha256: "ab".into(),
            seed: 5,
            created_unix: 1,
        }
    }

    #[test]
    fn csv_has_header_line_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        #[derive(Serialize)]
        struct Row {
            name: &'static str,
            v: f64,
        }
        write_csv(&p, &meta(), [Row { name: "a,b", v: 1.5 }]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# hbfsim "));
        assert_eq!(csv_body(&text), "name,v\n\"a,b\",1.5\n");
    }

    #[test]
    fn json_embeds_meta() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        #[derive(Serialize)]
        struct S {
            x: u32,
        }
        write_json(&p, &meta(), &S { x: 3 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["meta"]["seed"], 5);
        assert_eq!(v["x"], 3);
    }
}
