//! Result files. Every text file starts with a `#` line naming the master
//! seed and the effective config hash; JSON files carry both in a `meta`
//! object instead.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub master_seed: u64,
    pub config_sha256: String,
}

pub struct OutputDir {
    dir: PathBuf,
    meta: Meta,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Wrapped<'a, T> {
    meta: &'a Meta,
    data: &'a T,
}

impl OutputDir {
    /// Creates the directory and writes the effective config into it.
    pub fn create(config: &RunConfig) -> Result<Self, CliError> {
        let dir = config.output.dir.clone();
        fs::create_dir_all(&dir)?;
        let meta = Meta { master_seed: config.master_seed, config_sha256: config.hash() };
        let mut out = Self { dir, meta, formats: config.output.formats.clone(), written: Vec::new() };
        out.write_text("config.toml", &config.to_toml())?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Files written so far, in order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn header(&self) -> String {
        format!("# master_seed={} config_sha256={}\n", self.meta.master_seed, self.meta.config_sha256)
    }

    fn create_file(&mut self, name: &str) -> Result<fs::File, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = fs::File::create(&path)?;
        self.written.push(path);
        Ok(file)
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let header = self.header();
        let mut f = self.create_file(name)?;
        f.write_all(header.as_bytes())?;
        f.write_all(body.as_bytes())?;
        Ok(())
    }

    /// Header row from the serde field names; skipped unless CSV output is on.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let header = self.header();
        let mut f = self.create_file(name)?;
        f.write_all(header.as_bytes())?;
        let mut w = csv::Writer::from_writer(f);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Other(format!("{name}: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Space-separated `x y` columns for plotting tools.
    pub fn write_columns(&mut self, name: &str, labels: [&str; 2], points: &[(f64, f64)]) -> Result<(), CliError> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut body = format!("# {} {}\n", labels[0], labels[1]);
        for (x, y) in points {
            body.push_str(&format!("{x:e} {y:e}\n"));
        }
        self.write_text(name, &body)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<(), CliError> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let text = serde_json::to_string_pretty(&Wrapped { meta: &self.meta, data })
            .map_err(|e| CliError::Other(format!("{name}: {e}")))?;
        let mut f = self.create_file(name)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
