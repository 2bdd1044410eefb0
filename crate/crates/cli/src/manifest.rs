//! Run manifests: what produced an output file.
//!
//! The digest covers everything that determines the CSV bytes (tool
//! version, command, seed, quick flag and the resolved config) and nothing
//! else, so identical runs share a digest whatever their timing or thread
//! count. Timestamps and paths live only in the JSON sidecar.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mdiqc_core::params::{serialize_config, Config};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "mdiqc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub quick: bool,
    pub threads: Option<usize>,
    pub config: String,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, seed: u64, quick: bool, threads: Option<usize>) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            quick,
            threads,
            config: serialize_config(config),
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    fn canonical(&self) -> String {
        format!(
            "{TOOL} {VERSION}\ncommand = {}\nseed = {}\nquick = {}\n{}",
            self.command, self.seed, self.quick, self.config
        )
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `#` lines opening every CSV.
    pub fn csv_header(&self) -> String {
        format!(
            "# {TOOL} {VERSION} {}\n# manifest sha256:{}\n# seed {} quick {}\n",
            self.command,
            self.digest(),
            self.seed,
            self.quick
        )
    }

    pub fn to_json(&self) -> String {
        let v = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "digest": self.digest(),
            "seed": self.seed,
            "quick": self.quick,
            "threads": self.threads,
            "config": self.config,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "started_unix": self.started_unix,
            "finished_unix": self.finished_unix,
        });
        serde_json::to_string_pretty(&v).expect("manifest is plain JSON")
    }
}

/// `<out>.manifest.json` next to the output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
