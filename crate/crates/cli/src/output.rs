use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Writes files under one output directory and remembers their names.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Key-value manifest listing every file written so far, itself last.
    pub fn finish(mut self, entries: &[(String, String)]) -> Result<Vec<String>, CliError> {
        let mut text = String::new();
        for (k, v) in entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        let mut files = self.written.clone();
        files.sort();
        text.push_str(&format!("files = {}\n", files.join(",")));
        self.write("manifest.txt", &text)?;
        Ok(self.written)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mia_core::numeric::mean_var(xs);
    (m, v.sqrt())
}
