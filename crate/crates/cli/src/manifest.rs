//! Run manifests: what a command read and wrote, with content hashes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Failure, Outcome};

#[derive(Serialize)]
struct Artifact {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    seed: Option<u64>,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
    wall_time_s: f64,
}

/// Collects a command's inputs and outputs while it runs.
pub struct Recorder {
    command: &'static str,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Outcome<String> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

impl Recorder {
    pub fn start(command: &'static str) -> Self {
        Recorder {
            command,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes every artifact and writes the manifest to `path`.
    pub fn finish<C: Serialize>(self, config: &C, seed: Option<u64>, path: &Path) -> Outcome {
        let hash = |ps: &[PathBuf]| -> Outcome<Vec<Artifact>> {
            ps.iter()
                .map(|p| {
                    Ok(Artifact {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command,
            config,
            seed,
            inputs: hash(&self.inputs)?,
            outputs: hash(&self.outputs)?,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Failure::Internal(format!("manifest: {e}")))?;
        fs::write(path, text + "\n")
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
    }
}

/// `dir/name.ext` becomes `dir/name<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_replaces_extension() {
        assert_eq!(
            sibling(Path::new("out/c.jsonl"), ".truth.jsonl"),
            PathBuf::from("out/c.truth.jsonl")
        );
        assert_eq!(sibling(Path::new("c"), ".x"), PathBuf::from("c.x"));
    }
}
