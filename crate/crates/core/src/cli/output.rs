use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub phaseprobe: &'static str,
    pub manifest: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

/// Output directory whose files are written atomically and recorded for the manifest.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&target, e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(&target, e))?;
        // temp files are created 0600
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(&target, e))?;
        }
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        self.written.retain(|r| r.path != name);
        self.written.push(FileRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Renders with a writer callback, then writes atomically.
    pub fn write_with<F>(&mut self, name: &str, render: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| Error::io(self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    pub fn written(&self) -> &[FileRecord] {
        &self.written
    }

    /// Writes `manifest.json` listing inputs and everything written so far.
    pub fn finish(mut self, command: &str, config_hash: &str, seed: Option<u64>, inputs: Vec<FileRecord>) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            versions: Versions {
                phaseprobe: env!("CARGO_PKG_VERSION"),
                manifest: MANIFEST_VERSION,
            },
            inputs,
            outputs: self.written.clone(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}

/// Hash record for an input file, named relative to `base` where possible.
pub fn input_record(path: &Path, base: &Path) -> Result<FileRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let shown = path.strip_prefix(base).unwrap_or(path);
    Ok(FileRecord {
        path: shown.to_string_lossy().into_owned(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}
