//! Output directories: every one gets the resolved config and a version
//! stamp next to the results.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub struct OutDir {
    pub path: PathBuf,
}

impl OutDir {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        Self::create_at(&cfg.out_dir, cfg)
    }

    pub fn create_at(path: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(path)?;
        let dir = Self { path: path.to_path_buf() };
        dir.write_text("config.toml", &cfg.emit()?)?;
        dir.write_text("version.txt", &format!("{VERSION}\n"))?;
        Ok(dir)
    }

    pub fn sub(&self, name: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        Self::create_at(&self.path.join(name), cfg)
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Run `write` against a buffered file and flush it.
    pub fn write_with<F>(&self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut f = self.file(name)?;
        write(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough to read the same double back.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
