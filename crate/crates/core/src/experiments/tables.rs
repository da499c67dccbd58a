use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::MANIFEST;
use crate::error::{Error, Result};

fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).exists())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn aligned(path: &Path) -> Result<String> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut rows = vec![header];
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    let cols = rows[0].len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r.get(c).map_or(0, |s| s.chars().count())).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&width)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect();
        let _ = writeln!(out, "  {}", line.join("  "));
    }
    Ok(out)
}

/// Renders every CSV of every run below `root` (the run directory itself or
/// its immediate subdirectories) as aligned text, with the run's warnings.
pub fn render_tables(root: &Path) -> Result<String> {
    let dirs = run_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::Config(format!(
            "no {MANIFEST} in {} or its subdirectories",
            root.display()
        )));
    }
    let mut out = String::new();
    for dir in dirs {
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
        let name = manifest["experiment"].as_str().unwrap_or("?");
        let _ = writeln!(
            out,
            "== {name} ({}) version {} in {:.1} s",
            dir.display(),
            manifest["version"].as_str().unwrap_or("?"),
            manifest["seconds"].as_f64().unwrap_or(f64::NAN)
        );
        for w in manifest["warnings"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "warning: {}", w.as_str().unwrap_or_default());
        }
        let files = manifest["files"].as_array().cloned().unwrap_or_default();
        for f in files.iter().filter_map(|f| f.as_str()).filter(|f| f.ends_with(".csv")) {
            let _ = writeln!(out, "-- {f}");
            out.push_str(&aligned(&dir.join(f))?);
        }
        out.push('\n');
    }
    Ok(out)
}
