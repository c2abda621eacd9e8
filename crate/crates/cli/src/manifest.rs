use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub preset: Option<String>,
    pub config_sources: Vec<String>,
    pub config_sha256: String,
    pub workers: usize,
    pub params: serde_json::Value,
    pub timings: Vec<Timing>,
    pub outputs: Vec<OutputFile>,
}

/// Output directory plus the bookkeeping for its manifest.
pub struct Run {
    dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl Run {
    pub fn new(
        dir: &Path,
        command: &str,
        preset: Option<&str>,
        sources: Vec<String>,
        digest: String,
        workers: usize,
        params: &impl Serialize,
    ) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                preset: preset.map(str::to_string),
                config_sources: sources,
                config_sha256: digest,
                workers,
                params: serde_json::to_value(params)?,
                timings: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest.timings.push(Timing {
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes `name` through `fill` and records its digest.
    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> pt_rotor::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).with_context(|| format!("formatting {name}"))?;
        let path = self.dir.join(name);
        let mut f = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f.write_all(&buf)?;
        f.flush()?;
        self.manifest.outputs.push(OutputFile {
            file: name.to_string(),
            bytes: buf.len() as u64,
            sha256: hex::encode(Sha256::digest(&buf)),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, |w| {
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.timings.push(Timing {
            stage: "total".into(),
            seconds: self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(path)
    }
}
