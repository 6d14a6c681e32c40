//! Files are staged in memory and written only once every one of them is
//! ready; each lands through a temp file and an atomic rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
    summary: Vec<(String, String)>,
}

impl Outputs {
    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn kv(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    /// Write every staged file into `dir`, then print the summary.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir)
                .map_err(|e| CliError::Usage(format!("output directory {} is not writable: {e}", dir.display())))?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
            written.push(path);
        }
        for (k, v) in &self.summary {
            println!("{k}={v}");
        }
        for p in &written {
            println!("wrote={}", p.display());
        }
        Ok(written)
    }
}

/// Comma-joined shortest round-trip representation.
pub fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}
