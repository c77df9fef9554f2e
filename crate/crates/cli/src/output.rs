//! Report files: `report.json`, `summary.csv` and `manifest.json`.

use std::fs;
use std::io;
use std::path::Path;

use flowlab_core::report::{to_json, write_summary, SummaryRow};
use serde::Serialize;

pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.csv";
pub const MANIFEST: &str = "manifest.json";

/// Writes through a temporary file and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, dir.join(name))
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seeds: Vec<String>,
    pub configs: &'a C,
    pub started: String,
    pub finished: String,
    pub results: Results,
}

#[derive(Serialize)]
pub struct Results {
    pub report: &'static str,
    pub summary: &'static str,
}

/// Writes the three output files. `report` must not contain timestamps.
pub fn write_outputs<R: Serialize, C: Serialize>(
    dir: &Path,
    report: &R,
    rows: &[SummaryRow],
    manifest: &Manifest<'_, C>,
) -> anyhow::Result<()> {
    write_atomic(dir, REPORT, to_json(report)?.as_bytes())?;
    let mut csv = Vec::new();
    write_summary(&mut csv, rows)?;
    write_atomic(dir, SUMMARY, &csv)?;
    write_atomic(dir, MANIFEST, serde_json::to_string_pretty(manifest)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.json", b"{}").unwrap();
        write_atomic(dir.path(), "a.json", b"[]").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.json")).unwrap(), "[]");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
