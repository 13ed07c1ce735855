use crate::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Config, library version and digests of every file a command wrote.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub outputs: Vec<OutputDigest>,
}

/// Collects outputs in write order; file names are relative to the output directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.root.join(name), data)?;
        self.written.push(OutputDigest {
            file: name.to_string(),
            bytes: data.len(),
            sha256: hex::encode(Sha256::digest(data)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn finish(self, command: &'static str, config: &RunConfig) -> std::io::Result<()> {
        let m = Manifest {
            command,
            version: nlab_core::VERSION,
            config,
            outputs: self.written,
        };
        let mut text = serde_json::to_vec_pretty(&m).map_err(std::io::Error::other)?;
        text.push(b'\n');
        std::fs::write(self.root.join("manifest.json"), text)
    }
}
