use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continual::{Coreset, SiRegularizer};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::trainer::{AgentState, TrainConfig};

pub const MAGIC: &[u8; 8] = b"PCRLCKPT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;
const DIGEST_LEN: usize = 32;

/// Everything needed to resume training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointData {
    pub state: AgentState,
    pub coreset: Coreset,
    pub regs: Vec<SiRegularizer>,
    pub config: TrainConfig,
    /// Number of tasks of `config.tasks` fully trained.
    pub tasks_done: usize,
}

/// `magic | version u32 LE | payload length u64 LE | JSON payload | sha256`,
/// the digest covering every byte before it.
pub fn encode(data: &CheckpointData, version: u32) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(data).map_err(|e| Error::Serde(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<CheckpointData> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::CheckpointTruncated {
            expected: (HEADER_LEN + DIGEST_LEN) as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = (HEADER_LEN as u64).saturating_add(len).saturating_add(DIGEST_LEN as u64);
    if (bytes.len() as u64) < expected {
        return Err(Error::CheckpointTruncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    let body_end = bytes.len() - DIGEST_LEN;
    if (bytes.len() as u64) != expected || Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(Error::CheckpointChecksum);
    }
    if version > FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    serde_json::from_slice(&bytes[HEADER_LEN..body_end]).map_err(|e| Error::Serde(e.to_string()))
}

/// Atomic write (temp file then rename).
pub fn checkpoint_save(data: &CheckpointData, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode(data, FORMAT_VERSION)?)
}

pub fn checkpoint_load(path: &Path) -> Result<CheckpointData> {
    decode(&fsutil::read(path)?)
}
