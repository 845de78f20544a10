//! Run manifests and manifest-tagged CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

/// Records what produced a set of artifacts.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: String,
    pub inputs: Vec<(String, String)>,
    pub stages: Vec<(String, f64)>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Self { command: command.into(), seed, config, inputs: Vec::new(), stages: Vec::new(), outputs: Vec::new() }
    }

    /// Registers an input file by content hash.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push((path.display().to_string(), hex(&Sha256::digest(&bytes))));
        Ok(())
    }

    /// Hash over command, seed, config snapshot and input contents. Timings and
    /// outputs are excluded so re-runs carry the same id.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\0");
        h.update(self.seed.to_le_bytes());
        h.update(self.config.as_bytes());
        for (_, digest) in &self.inputs {
            h.update(digest.as_bytes());
        }
        hex(&h.finalize())
    }

    /// Runs `f` and records its wall time under `name`. Errors are tagged with the stage.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self).with_context(|| format!("stage {name} failed"))?;
        self.stages.push((name.into(), t.elapsed().as_secs_f64()));
        Ok(out)
    }

    /// Opens a CSV whose first line references this manifest.
    pub fn csv(&mut self, path: &Path) -> Result<CsvOut> {
        self.outputs.push(path.display().to_string());
        CsvOut::create(path, &self.id())
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "id": self.id(),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs.iter().map(|(p, d)| json!({"path": p, "sha256": d})).collect::<Vec<_>>(),
            "stages": self.stages.iter().map(|(n, s)| json!({"stage": n, "seconds": s})).collect::<Vec<_>>(),
            "outputs": self.outputs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct CsvOut {
    inner: csv::Writer<BufWriter<File>>,
    path: PathBuf,
}

impl CsvOut {
    fn create(path: &Path, manifest_id: &str) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "# manifest {manifest_id}")?;
        Ok(Self { inner: csv::Writer::from_writer(w), path: path.to_path_buf() })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(fields).with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, so re-runs compare byte for byte.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Reads a CSV written by [`CsvOut`], skipping `#` comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
