use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::partition::PartitionLayout;
use crate::{message, Error, Result};

/// Verifier-side secret kept next to, never inside, the shipped assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSecret {
    pub n_s: usize,
    pub delta: f64,
    /// Message bits as a `0`/`1` string.
    pub message: String,
    pub seed: u64,
    /// SHA-256 of the original field file (or of the primitive spec), hex.
    pub field_fingerprint: String,
    /// How to rebuild the original field: a primitive spec, or absent for a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
}

impl LayoutSecret {
    pub fn new(layout: &PartitionLayout, seed: u64, field_fingerprint: String) -> Self {
        Self {
            n_s: layout.n_s,
            delta: layout.delta,
            message: message::to_bit_string(&layout.message),
            seed,
            field_fingerprint,
            primitive: None,
        }
    }

    pub fn layout(&self) -> Result<PartitionLayout> {
        PartitionLayout::new(self.n_s, message::from_bit_string(&self.message)?, self.delta)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let secret: Self = serde_json::from_str(s)?;
        secret.layout()?;
        Ok(secret)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fails unless `bytes` hash to the recorded fingerprint.
    pub fn check_fingerprint(&self, bytes: &[u8]) -> Result<()> {
        let got = fingerprint_bytes(bytes);
        if got != self.field_fingerprint {
            return Err(Error::InvalidArgument(format!(
                "field fingerprint mismatch: secret has {}, file hashes to {got}",
                self.field_fingerprint
            )));
        }
        Ok(())
    }
}

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(fingerprint_bytes(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let layout = PartitionLayout::new(32, message::from_hex("c0de").unwrap(), 0.001).unwrap();
        let s = LayoutSecret::new(&layout, 9, fingerprint_bytes(b"abc"));
        assert_eq!(
            s.field_fingerprint,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let back = LayoutSecret::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.layout().unwrap(), layout);
        assert!(s.check_fingerprint(b"abd").is_err());
    }
}
