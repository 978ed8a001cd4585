use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    /// False for files with run-dependent content such as timings.
    pub reproducible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub versions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outside_hypotheses: Option<bool>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects inputs and outputs of one command run in `out_dir`.
#[derive(Debug)]
pub struct ManifestBuilder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", out_dir.display())))?;
        let versions = BTreeMap::from([
            ("lsd-lab".to_string(), lsd_lab::VERSION.to_string()),
            ("lsd-lab-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                versions,
                diagnostics: BTreeMap::new(),
                outside_hypotheses: None,
            },
        })
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.manifest.config.insert(key.to_string(), value.to_string());
    }

    pub fn diagnostic(&mut self, key: &str, value: impl ToString) {
        self.manifest
            .diagnostics
            .insert(key.to_string(), value.to_string());
    }

    pub fn outside_hypotheses(&mut self, flag: bool) {
        self.manifest.outside_hypotheses = Some(flag);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            reproducible: true,
        });
        String::from_utf8(bytes)
            .map_err(|_| Failure::input(format!("{} is not UTF-8 text", path.display())))
    }

    /// Writes an output file into the output directory and records it.
    pub fn write_output(&mut self, name: &str, contents: &str, reproducible: bool) -> Result<(), Failure> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            reproducible,
        });
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<RunManifest, Failure> {
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Failure::input(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let path = self.out_dir.join(MANIFEST_FILE);
        fs::write(&path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}
