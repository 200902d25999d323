//! Machine-readable outputs: CSV tables (optionally mirrored as
//! gnuplot-ready .dat files) and JSON summaries embedding the resolved
//! config and a schema version.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::CliError;

/// Shortest round-trip decimal form; stable across runs on the same
/// floating-point environment.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub struct OutputWriter {
    dir: PathBuf,
    csv: bool,
    json: bool,
    dat: bool,
}

impl OutputWriter {
    pub fn new(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> Result<Self, CliError> {
        let dir = override_dir
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        std::fs::create_dir_all(&dir)?;
        let formats = &cfg.output.formats;
        let explicit = !formats.is_empty();
        Ok(Self {
            dir,
            csv: !explicit || formats.iter().any(|f| f == "csv"),
            json: !explicit || formats.iter().any(|f| f == "json"),
            dat: formats.iter().any(|f| f == "dat"),
        })
    }

    /// Write a table with a header row; mirrors to .dat when requested.
    pub fn write_table(
        &self,
        name: &str,
        headers: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        if self.csv {
            let path = self.dir.join(format!("{name}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(headers)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        if self.dat {
            let path = self.dir.join(format!("{name}.dat"));
            let mut text = format!("# {}\n", headers.join(" "));
            for row in rows {
                text.push_str(&row.join(" "));
                text.push('\n');
            }
            std::fs::write(path, text)?;
        }
        Ok(())
    }

    /// Write `<name>.json` with the payload flattened next to the resolved
    /// config and schema version.
    pub fn write_summary<T: Serialize>(
        &self,
        name: &str,
        command: &str,
        config: &ExperimentConfig,
        payload: &T,
    ) -> Result<(), CliError> {
        if !self.json {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Summary<'a, T: Serialize> {
            schema_version: &'static str,
            command: &'a str,
            config: &'a ExperimentConfig,
            #[serde(flatten)]
            payload: &'a T,
        }
        let doc = Summary {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            payload,
        };
        let path = self.dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::config(format!("serialization failed: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
