use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use fdi_core::Error as CoreError;

/// CLI error carrying its exit code: 1 for runtime (I/O) failures, 2 for
/// usage, configuration and data-validation problems.
#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::Io { .. }) | CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes a file atomically (temp file in the same directory, then rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    let tmp = path.with_extension("tmp~");
    {
        let mut file = fs::File::create(&tmp)
            .map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
        file.write_all(content)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        file.flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// SHA-256 of a file, hex encoded.
pub fn file_digest(path: &Path) -> CliResult<String> {
    use sha2::{Digest, Sha256};
    let bytes =
        fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Digests either a plain file or the known files of a dataset archive.
pub fn input_digests(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    if path.is_dir() {
        for name in ["meta.json", "features.tsv", "users.tsv", "profiles.tsv"] {
            let file = path.join(name);
            if file.is_file() {
                out.push((file.display().to_string(), file_digest(&file)?));
            }
        }
    } else {
        out.push((path.display().to_string(), file_digest(path)?));
    }
    Ok(out)
}
