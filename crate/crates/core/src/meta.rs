//! Provenance header written at the top of every output file.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Hex SHA-256 of the configuration bytes that produced the file.
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Metadata {
    pub fn new(config_bytes: &[u8], seed: Option<u64>) -> Self {
        Self { version: VERSION.to_string(), config_hash: sha256_hex(config_bytes), seed }
    }

    /// `# key=value` comment lines, suitable for CSV files read with `#` comments.
    pub fn write_comment<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# shm_version={}", self.version)?;
        writeln!(w, "# config_sha256={}", self.config_hash)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed={s}"),
            None => writeln!(w, "# seed=none"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
