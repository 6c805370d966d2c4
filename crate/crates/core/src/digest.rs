//! SHA-256 helpers used for content hashes and provenance.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Incremental hasher that length-prefixes every part so that
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
#[derive(Default)]
pub struct PartHasher {
    inner: Sha256,
}

impl PartHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn part(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.part(s.as_bytes())
    }

    pub fn finish_hex(self) -> String {
        hex::encode(self.inner.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn parts_are_framed() {
        let mut a = PartHasher::new();
        a.str("ab").str("c");
        let mut b = PartHasher::new();
        b.str("a").str("bc");
        assert_ne!(a.finish_hex(), b.finish_hex());
    }
}
