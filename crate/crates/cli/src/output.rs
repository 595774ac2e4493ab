use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub domain: String,
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_s: f64,
}

/// A fresh directory under `root/runs`, plus bookkeeping for the manifest line written on [`Run::finish`].
pub struct Run {
    root: PathBuf,
    dir: PathBuf,
    id: String,
    outputs: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl Run {
    pub fn create(root: &Path, command: &str, domain: &str) -> Result<Run> {
        let runs = root.join("runs");
        fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
        let mut n = manifest_len(root)? + 1;
        loop {
            let id = format!("{n:04}-{command}-{domain}");
            let dir = runs.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => {
                    return Ok(Run {
                        root: root.to_path_buf(),
                        dir,
                        id,
                        outputs: Vec::new(),
                        started: Instant::now(),
                        started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
            }
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` through a temporary file and a rename.
    pub fn write(&mut self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, body).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        let rel = path.strip_prefix(&self.root).unwrap_or(&path);
        self.outputs.push(rel.to_string_lossy().into_owned());
        Ok(path)
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> critic_lab::Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn finish(self, command: &str, domain: &str, variants: Vec<String>, seeds: Vec<u64>, config: &impl Serialize) -> Result<RunManifest> {
        let m = RunManifest {
            run_id: self.id,
            command: command.into(),
            domain: domain.into(),
            variants,
            seeds,
            config_hash: config_hash(config)?,
            outputs: self.outputs,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: self.started_unix,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.root.join(MANIFEST);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).with_context(|| format!("opening {}", path.display()))?;
        writeln!(f, "{}", serde_json::to_string(&m)?)?;
        Ok(m)
    }
}

fn manifest_len(root: &Path) -> Result<usize> {
    match File::open(root.join(MANIFEST)) {
        Ok(f) => Ok(BufReader::new(f).lines().count()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}

pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let text = serde_json::to_vec(config)?;
    Ok(hex::encode(&Sha256::digest(&text)[..8]))
}
