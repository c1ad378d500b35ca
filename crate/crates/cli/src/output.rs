// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Writes `contents` to `dir/name` via a temporary file in the same
/// directory and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &Path, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let parent = path.parent().unwrap_or(dir).to_path_buf();
    let wrap = |source| CliError::Write {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(&parent).map_err(wrap)?;
    let mut tmp = NamedTempFile::new_in(&parent).map_err(wrap)?;
    tmp.write_all(contents.as_bytes()).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(&path).map_err(|e| wrap(e.error))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}
