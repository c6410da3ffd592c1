//! Output files. CSVs start with one `#` provenance line; JSON documents carry
//! `version` and `config_hash` fields. Nothing time-dependent is written.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Bumped whenever a CSV column set or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: &'static str,
    pub config_hash: String,
}

impl Provenance {
    pub fn header_line(&self) -> String {
        format!(
            "# omega-srf {} schema={} command={} config_sha256={}\n",
            omega_srf::VERSION,
            SCHEMA_VERSION,
            self.command,
            self.config_hash
        )
    }
}

pub struct OutDir {
    root: PathBuf,
    pub prov: Provenance,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    schema: u32,
    command: &'static str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl OutDir {
    pub fn create(root: &Path, prov: Provenance) -> Result<OutDir, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), prov })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes the provenance line, then whatever `body` emits.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(self.prov.header_line().as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let env = Envelope {
            version: omega_srf::VERSION,
            schema: SCHEMA_VERSION,
            command: self.prov.command,
            config_hash: &self.prov.config_hash,
            body,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}
