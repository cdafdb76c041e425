//! Output directories that appear only when complete, and their manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.tsv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files are written into a hidden sibling directory that is renamed onto
/// the target by [`OutputDir::commit`]. Dropping without committing removes it.
pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    artifacts: Vec<(String, String)>,
    committed: bool,
}

impl OutputDir {
    pub fn create(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            bail!("{} already exists (pass --force to replace it)", target.display());
        }
        let name = target
            .file_name()
            .with_context(|| format!("{} is not a directory path", target.display()))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(OutputDir {
            target: target.to_path_buf(),
            staging,
            artifacts: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.staging.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// Writes the manifest and moves the directory into place.
    pub fn commit(mut self, manifest: Manifest) -> Result<PathBuf> {
        let text = manifest.to_text(&self.artifacts);
        fs::write(self.staging.join(MANIFEST), text)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("removing {}", self.target.display()))?;
        }
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("moving output into {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// What produced a directory: command, configuration, inputs and timing.
pub struct Manifest {
    command: String,
    config: Vec<(String, String)>,
    seed: Option<u64>,
    inputs: Vec<(String, String)>,
    started: Instant,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            config: Vec::new(),
            seed: None,
            inputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(mut self, key: &str, value: impl ToString) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path, contents: &[u8]) {
        self.inputs.push((path.display().to_string(), sha256_hex(contents)));
    }

    /// Hash of the command and its configuration, in the listed order.
    pub fn config_hash(&self) -> String {
        let mut canon = self.command.clone();
        for (k, v) in &self.config {
            canon.push('\n');
            canon.push_str(k);
            canon.push('=');
            canon.push_str(v);
        }
        sha256_hex(canon.as_bytes())
    }

    fn to_text(&self, artifacts: &[(String, String)]) -> String {
        let mut rows = vec![
            ("command".to_string(), self.command.clone()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("config_sha256".to_string(), self.config_hash()),
        ];
        if let Some(seed) = self.seed {
            rows.push(("seed".into(), seed.to_string()));
        }
        rows.extend(self.config.iter().map(|(k, v)| (format!("config/{k}"), v.clone())));
        rows.extend(self.inputs.iter().map(|(p, h)| (format!("input/{p}"), h.clone())));
        rows.extend(artifacts.iter().map(|(n, h)| (format!("artifact/{n}"), h.clone())));
        rows.push(("elapsed_ms".into(), self.started.elapsed().as_millis().to_string()));
        let mut out = String::from("key\tvalue\n");
        for (k, v) in rows {
            out.push_str(&k);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Reads an input file and records its digest.
pub fn read_input(path: &Path, manifest: &mut Manifest) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.input(path, text.as_bytes());
    Ok(text)
}
