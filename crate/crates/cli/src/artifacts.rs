//! Provenance stamping and deterministic artifact writers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = concat!("alphapot ", env!("CARGO_PKG_VERSION"));

/// What every artifact of a run carries.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub grid: Value,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64, grid: Value) -> Self {
        Self {
            command: command.to_string(),
            config_sha256: hex(&Sha256::digest(config_bytes)),
            seed,
            grid,
            version: VERSION,
        }
    }

    pub fn header(&self) -> Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct OutDir {
    pub root: PathBuf,
    pub prov: Provenance,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path, prov: Provenance) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), prov, written: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    /// Pretty JSON `{ "provenance": …, "result": … }`.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let doc = json!({ "provenance": self.prov.header(), "result": result });
        let p = self.path(name);
        fs::write(&p, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", p.display()))
    }

    /// Prepends a `# {provenance}` comment line to a CSV written by someone else.
    pub fn stamp_csv(&mut self, name: &str) -> Result<()> {
        let p = self.path(name);
        let body = fs::read_to_string(&p)?;
        fs::write(&p, format!("# {}\n{body}", serde_json::to_string(&self.prov.header())?))?;
        Ok(())
    }

    pub fn csv_writer(&mut self, name: &str) -> Result<csv::Writer<fs::File>> {
        let p = self.path(name);
        let mut f = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        use std::io::Write;
        writeln!(f, "# {}", serde_json::to_string(&self.prov.header())?)?;
        Ok(csv::Writer::from_writer(f))
    }

    /// Timestamped sidecar, kept apart so the artifacts themselves are reproducible.
    pub fn finish(mut self) -> Result<()> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let files = std::mem::take(&mut self.written);
        let meta = json!({
            "provenance": self.prov.header(),
            "finished_unix_seconds": secs,
            "artifacts": files,
        });
        fs::write(self.root.join("run_meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }
}
