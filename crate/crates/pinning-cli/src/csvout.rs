//! CSV artifacts: metadata header lines, stable float formatting, and the
//! overwrite guard.
//!
//! Every artifact starts with `# key=value` comment lines (config hash,
//! master seed, tool version, free-form extras) followed by one CSV header
//! row and data rows. All floats are written with 12 significant digits in
//! scientific notation, so a rerun of the same configuration produces a
//! byte-identical file regardless of worker count.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Stable float formatting: 12 significant digits, scientific; `nan`,
/// `inf`, `-inf` spelled in lowercase.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// The `# config_hash=` value of an existing artifact, if the file exists
/// and carries one.
pub fn existing_hash(path: &Path) -> Option<String> {
    let f = fs::File::open(path).ok()?;
    for line in BufReader::new(f).lines() {
        let line = line.ok()?;
        if let Some(rest) = line.strip_prefix("# config_hash=") {
            return Some(rest.trim().to_string());
        }
        if !line.starts_with('#') {
            break;
        }
    }
    None
}

/// Refuses to overwrite an artifact produced by a *different*
/// configuration. Rewriting the same configuration is allowed (and yields
/// identical bytes); `force` overrides the guard.
pub fn guard_overwrite(path: &Path, hash: &str, force: bool) -> Result<(), String> {
    if force || !path.exists() {
        return Ok(());
    }
    match existing_hash(path) {
        Some(old) if old == hash => Ok(()),
        Some(old) => Err(format!(
            "{} holds results for config {}, current config is {} (use --force to replace)",
            path.display(),
            &old[..16.min(old.len())],
            &hash[..16.min(hash.len())]
        )),
        None => Err(format!(
            "{} exists but carries no config hash (use --force to replace)",
            path.display()
        )),
    }
}

/// Writes one artifact: metadata comments, then the CSV table.
pub fn write_artifact(
    path: &Path,
    meta: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = fs::File::create(path)?;
    for (k, v) in meta {
        writeln!(file, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width must match header");
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
