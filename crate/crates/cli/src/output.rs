//! Output files are staged in temporaries next to their targets and renamed
//! only once every file of a command is ready.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempfile::NamedTempFile;

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Fails unless `path` could be written: its directory exists and it is not
/// itself a directory.
pub fn check_writable(path: &Path) -> Result<()> {
    let dir = parent_of(path);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    if path.is_dir() {
        bail!("output path {} is a directory", path.display());
    }
    Ok(())
}

pub fn check_distinct(a: &Path, b: &Path) -> Result<()> {
    if a == b {
        bail!("output and sidecar would both be written to {}", a.display());
    }
    Ok(())
}

/// Writes all files or none of them.
pub fn write_all(files: Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let mut tmp = NamedTempFile::new_in(parent_of(&path))
            .with_context(|| format!("creating a temporary file for {}", path.display()))?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((path, tmp));
    }
    let mut done: Vec<PathBuf> = Vec::new();
    for (path, tmp) in staged {
        if let Err(e) = tmp.persist(&path) {
            for p in &done {
                let _ = fs::remove_file(p);
            }
            return Err(e.error).with_context(|| format!("writing {}", path.display()));
        }
        done.push(path);
    }
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Sidecar path: the output with its extension replaced.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}
