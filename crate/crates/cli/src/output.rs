//! Artifact directory with atomic writes (temp file + rename).

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` so that readers see either the old or the new file.
    pub fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let target = self.path(name);
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        tmp.write_all(contents.as_bytes())
            .map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        Ok(())
    }
}
