use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::args::{Cli, Command, Context, ReplayArgs};
use super::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(bytes),
        }
    }

    pub fn of_file(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io_at(path, e))?;
        Ok(Self::of_bytes(path, &bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Record of one invocation. Holds no timestamps or absolute output paths
/// so that a faithful re-run reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<FileDigest>,
    pub inputs: Vec<FileDigest>,
    /// Relative to the output directory.
    pub outputs: Vec<FileDigest>,
    /// `complete` or `partial`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Collects output files of one invocation and finally writes the manifest.
pub struct Outputs {
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    files: Vec<FileDigest>,
}

impl Outputs {
    pub fn create(ctx: &Context) -> Result<Self, CliError> {
        std::fs::create_dir_all(&ctx.out_dir).map_err(|e| CliError::io_at(&ctx.out_dir, e))?;
        Ok(Self {
            dir: ctx.out_dir.clone(),
            inputs: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let d = FileDigest::of_file(path)?;
        if !self.inputs.contains(&d) {
            self.inputs.push(d);
        }
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io_at(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io_at(&path, e))?;
        self.record(rel, bytes);
        Ok(())
    }

    /// Records a file already written under the output directory.
    pub fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.files.push(FileDigest::of_bytes(Path::new(rel), bytes));
    }

    pub fn finish(self, ctx: &Context, error: Option<&CliError>) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "pemkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: ctx.command.name().into(),
            argv: ctx.argv.clone(),
            seed: ctx.seed,
            config: ctx.config.clone(),
            inputs: self.inputs,
            outputs: self.files,
            status: if error.is_some() { "partial" } else { "complete" }.into(),
            error: error.map(|e| e.to_string()),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::io_at(&path, e))
    }
}

pub fn read_manifest(path: &Path) -> Result<(Manifest, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io_at(path, e))?;
    let m = serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((m, bytes))
}

/// Re-executes the manifest's command line into `ctx.out_dir` and compares
/// every recorded output and the new manifest with the originals.
pub fn replay(ctx: &Context, a: &ReplayArgs) -> Result<(), CliError> {
    if !ctx.out_dir_given {
        return Err(CliError::Usage("replay needs --out-dir for the re-run outputs".into()));
    }
    let (m, original) = read_manifest(&a.manifest)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by pemkit {}, replaying with {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    for input in m.config.iter().chain(&m.inputs) {
        let now = FileDigest::of_file(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Data(format!("input {} changed since the manifest was written", input.path)));
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("pemkit".to_string()).chain(m.argv.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("manifest argv: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    super::execute(cli, m.argv.clone(), Some(ctx.out_dir.clone()))?;

    let mut mismatched = Vec::new();
    for out in &m.outputs {
        let path = ctx.out_dir.join(&out.path);
        let now = FileDigest::of_file(&path)?;
        if now.sha256 != out.sha256 {
            mismatched.push(out.path.clone());
        }
    }
    let new_manifest = std::fs::read(ctx.out_dir.join(MANIFEST_FILE)).map_err(|e| CliError::io_at(&ctx.out_dir, e))?;
    if new_manifest != original {
        mismatched.push(MANIFEST_FILE.into());
    }
    if !mismatched.is_empty() {
        return Err(CliError::Data(format!("replay differs in: {}", mismatched.join(", "))));
    }
    println!("replayed {}: {} outputs byte-identical", m.command, m.outputs.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
