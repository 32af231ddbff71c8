use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// Output files held in memory until the whole command has succeeded.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<FileHash>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_with(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> zonecut::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.add(name, buf);
        Ok(())
    }

    /// Reads an input file and records its hash for the manifest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        self.inputs.push(FileHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    /// Writes every file, then `<command>.manifest.json`, each through a
    /// temporary file renamed into place.
    pub fn commit(self, dir: &Path, command: &str, config: &impl Serialize) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        let outputs = self.files.iter().map(|(n, b)| FileHash { path: n.clone(), sha256: sha256_hex(b) }).collect();
        let manifest = Manifest { command, config, inputs: self.inputs, outputs };
        let manifest_name = format!("{command}.manifest.json");
        let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
        manifest_bytes.push(b'\n');
        let mut written = Vec::new();
        for (name, bytes) in self.files.iter().map(|(n, b)| (n.as_str(), b)).chain([(manifest_name.as_str(), &manifest_bytes)]) {
            let path = dir.join(name);
            write_atomic(dir, &path, bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
