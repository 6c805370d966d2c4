//! Binary index file.
//!
//! ```text
//! magic      4 bytes  "GKIX"
//! version    u16 LE
//! encoder_id u32 LE length + UTF-8 bytes
//! dim        u32 LE
//! count      u64 LE
//! count x { id: u32 LE length + UTF-8 bytes, dim x f64 LE }
//! ```

use std::path::Path;

use super::{EmbeddingVector, IndexEntry, IndexError, KnowledgeIndex};

pub const INDEX_MAGIC: [u8; 4] = *b"GKIX";
pub const INDEX_VERSION: u16 = 1;

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode_index(index: &KnowledgeIndex) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + index.len() * (16 + 8 * index.dim));
    buf.extend_from_slice(&INDEX_MAGIC);
    buf.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    put_str(&mut buf, &index.encoder_id);
    buf.extend_from_slice(&(index.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(index.entries.len() as u64).to_le_bytes());
    for e in &index.entries {
        put_str(&mut buf, &e.knowledge_id);
        for v in e.vector.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            IndexError::CorruptIndex(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], IndexError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn string(&mut self, what: &str) -> Result<String, IndexError> {
        let len = u32::from_le_bytes(self.array(what)?) as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| IndexError::CorruptIndex(format!("{what} is not UTF-8")))
    }
}

pub fn decode_index(bytes: &[u8]) -> Result<KnowledgeIndex, IndexError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.array::<4>("magic")? != INDEX_MAGIC {
        return Err(IndexError::CorruptIndex("bad magic".into()));
    }
    let version = u16::from_le_bytes(r.array("version")?);
    if version != INDEX_VERSION {
        return Err(IndexError::VersionMismatch {
            found: version,
            expected: INDEX_VERSION,
        });
    }
    let encoder_id = r.string("encoder id")?;
    let dim = u32::from_le_bytes(r.array("dim")?) as usize;
    let count = u64::from_le_bytes(r.array("entry count")?);
    // Each entry needs at least 4 + 8*dim bytes; reject absurd counts early.
    let min_entry = 4 + 8 * dim as u64;
    if count.saturating_mul(min_entry) > (bytes.len() - r.pos) as u64 {
        return Err(IndexError::CorruptIndex(format!("truncated: {count} entries declared")));
    }
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let knowledge_id = r.string("knowledge id")?;
        let raw = r.take(8 * dim, "vector")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let vector = EmbeddingVector::new(values).map_err(|e| IndexError::CorruptIndex(e.to_string()))?;
        entries.push(IndexEntry { knowledge_id, vector });
    }
    if r.pos != bytes.len() {
        return Err(IndexError::CorruptIndex(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    KnowledgeIndex::new(encoder_id, dim, entries).map_err(|e| IndexError::CorruptIndex(e.to_string()))
}

pub fn save_index(index: &KnowledgeIndex, path: &Path) -> Result<(), IndexError> {
    std::fs::write(path, encode_index(index)).map_err(|e| IndexError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_index(path: &Path) -> Result<KnowledgeIndex, IndexError> {
    let bytes = std::fs::read(path).map_err(|e| IndexError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    decode_index(&bytes)
}
