//! Artifact writers. Every file carries the command, the resolved config and
//! a sha256 of its data section, so two runs can be compared by hash alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// 17 significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Artifacts<'a> {
    dir: &'a Path,
    command: &'a str,
    config: serde_json::Value,
    written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    /// Creates the output directory and saves the resolved config in it.
    pub fn create(command: &'a str, config: &'a RunConfig) -> Result<Self, CliError> {
        let dir = config.out.as_path();
        fs::create_dir_all(dir)?;
        let mut artifacts = Self {
            dir,
            command,
            config: config.to_json(),
            written: Vec::new(),
        };
        let text = serde_json::to_string_pretty(config).expect("config serializes");
        artifacts.write_file("config.json", text + "\n")?;
        Ok(artifacts)
    }

    fn write_file(&mut self, name: &str, contents: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with `#`-prefixed provenance lines ahead of the header.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<String, CliError>
    where
        R: IntoIterator<Item = String>,
        I: IntoIterator<Item = R>,
    {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        for row in rows {
            writer.write_record(row).map_err(csv_error)?;
        }
        let data = writer
            .into_inner()
            .map_err(|e| CliError::Io(e.into_error()))?;
        let hash = sha256_hex(&data);
        let mut text = format!(
            "# command: {}\n# config: {}\n# sha256: {hash}\n",
            self.command, self.config
        );
        text.push_str(std::str::from_utf8(&data).expect("csv output is utf-8"));
        self.write_file(name, text)?;
        Ok(hash)
    }

    /// JSON object `{command, config, sha256, data}`; the hash covers the
    /// compact serialization of `data`.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<String, CliError> {
        let data = serde_json::to_value(data).expect("report serializes");
        let hash = sha256_hex(data.to_string().as_bytes());
        let doc = json!({
            "command": self.command,
            "config": self.config,
            "sha256": hash,
            "data": data,
        });
        self.write_file(name, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
        Ok(hash)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
