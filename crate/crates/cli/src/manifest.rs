use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

/// Written once per run, next to the primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub output_paths: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            output_paths: Vec::new(),
        }
    }

    /// `<primary output>.manifest.json`, or `spinlie-<command>.manifest.json`
    /// in the working directory when the run wrote nothing else.
    pub fn default_path(&self) -> PathBuf {
        match self.output_paths.first() {
            Some(p) => {
                let mut name = p.file_name().unwrap_or_default().to_os_string();
                name.push(".manifest.json");
                p.with_file_name(name)
            }
            None => PathBuf::from(format!("spinlie-{}.manifest.json", self.command)),
        }
    }
}
