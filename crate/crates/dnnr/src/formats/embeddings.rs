//! `DNNR-EMB`: magic `DNNREMB1`, u32 version, u32 dim, u64 count, then
//! `count` records of `[u16 id length, id bytes, dim × f32]`, then the
//! checksum.

use std::path::Path;

use dnnr_core::EmbeddingStore;

use super::{Reader, Writer};
use crate::error::{DnnrError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 8] = b"DNNREMB1";
pub const VERSION: u32 = 1;

pub fn encode(store: &EmbeddingStore) -> Result<Vec<u8>, String> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u32(u32::try_from(store.dim()).map_err(|_| "dim does not fit u32")?);
    w.u64(store.len() as u64);
    for (id, v) in store.iter() {
        w.short_str(id)?;
        v.iter().for_each(|&x| w.f32(x));
    }
    Ok(w.finish())
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingStore, String> {
    let mut r = Reader::checked(bytes)?;
    if r.take(8)? != MAGIC {
        return Err("bad magic, not a DNNR-EMB file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    let mut store = EmbeddingStore::new(dim);
    let mut v = Vec::with_capacity(dim);
    for _ in 0..count {
        let id = r.short_str()?;
        v.clear();
        r.f32s(dim, &mut v)?;
        store.insert(&id, &v).map_err(|e| e.to_string())?;
    }
    r.expect_end()?;
    Ok(store)
}

pub fn save(path: &Path, store: &EmbeddingStore) -> Result<()> {
    let bytes = encode(store).map_err(|m| DnnrError::format(path, m))?;
    fsutil::write_atomic(path, &bytes)
}

/// Loads a whole file; nothing is returned unless the checksum holds.
pub fn load(path: &Path) -> Result<EmbeddingStore> {
    decode(&fsutil::read(path)?).map_err(|m| DnnrError::format(path, m))
}
