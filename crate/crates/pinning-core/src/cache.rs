//! Binary on-disk cache for constrained tables.
//!
//! A table is worth minutes of dynamic programming but is a pure function of
//! `(gap law, disorder spec, n, l_max)`, so it is stored under a SHA-256 key
//! of exactly those inputs plus a format version. Files carry a magic header,
//! the shape, and a payload checksum; a cache hit is only returned when every
//! one of those matches, so a stale or truncated file degrades to a rebuild,
//! never to wrong numbers.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disorder::DisorderSpec;
use crate::dp::{ConstrainedTable, DpError};
use crate::law::LawSpec;

const MAGIC: &[u8; 8] = b"PINTBL\x00\x01";
/// Bump when the numeric contents of tables change meaning.
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error("cache file corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Table(#[from] DpError),
}

/// Content key of a table: hex SHA-256 over the law, the disorder stream,
/// the shape, and the format version.
pub fn table_key(law: &LawSpec, disorder: &DisorderSpec, n: usize, l_max: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(FORMAT_VERSION.to_le_bytes());
    hasher.update(serde_json::to_string(law).expect("law specs serialize").as_bytes());
    hasher.update(serde_json::to_string(disorder).expect("disorder specs serialize").as_bytes());
    hasher.update((n as u64).to_le_bytes());
    hasher.update((l_max as u64).to_le_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn table_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("table-{}.bin", &key[..32.min(key.len())]))
}

/// Writes a table under its key. Writes to a scratch name first and renames
/// into place, so readers never observe a half-written file.
pub fn save_table(dir: &Path, key: &str, table: &ConstrainedTable) -> Result<PathBuf, CacheError> {
    fs::create_dir_all(dir)?;
    let path = table_path(dir, key);
    let tmp = path.with_extension("tmp");
    let data = table.raw_data();
    let mut payload = Vec::with_capacity(data.len() * 8);
    for v in data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = Sha256::digest(&payload);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&(table.n() as u64).to_le_bytes())?;
        f.write_all(&(table.l_max() as u64).to_le_bytes())?;
        f.write_all(&(data.len() as u64).to_le_bytes())?;
        f.write_all(&checksum)?;
        f.write_all(&payload)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads the table stored under `key`, if present and intact. A missing file
/// is `Ok(None)`; a present-but-damaged file is an error (the caller should
/// surface it rather than silently rebuild over evidence of corruption).
pub fn load_table(
    dir: &Path,
    key: &str,
    n: usize,
    l_max: usize,
) -> Result<Option<ConstrainedTable>, CacheError> {
    let path = table_path(dir, key);
    let mut f = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut header = [0u8; 8 + 8 + 8 + 8 + 32];
    f.read_exact(&mut header)
        .map_err(|_| CacheError::Corrupt("header truncated".into()))?;
    if &header[..8] != MAGIC {
        return Err(CacheError::Corrupt("bad magic".into()));
    }
    let read_u64 = |off: usize| u64::from_le_bytes(header[off..off + 8].try_into().unwrap());
    let file_n = read_u64(8) as usize;
    let file_l_max = read_u64(16) as usize;
    let count = read_u64(24) as usize;
    if file_n != n || file_l_max != l_max {
        return Err(CacheError::Corrupt(format!(
            "shape mismatch: file ({file_n}, {file_l_max}) vs requested ({n}, {l_max})"
        )));
    }
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(CacheError::Corrupt(format!(
            "payload is {} bytes, header promises {}",
            payload.len(),
            count * 8
        )));
    }
    let checksum = Sha256::digest(&payload);
    if checksum.as_slice() != &header[32..64] {
        return Err(CacheError::Corrupt("payload checksum mismatch".into()));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Some(ConstrainedTable::from_raw(n, l_max, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::ChargeSequence;
    use crate::law::InterArrivalLaw;

    fn fixture() -> (LawSpec, DisorderSpec, ConstrainedTable) {
        let spec = LawSpec::polynomial(2.0);
        let law = InterArrivalLaw::build(spec.clone()).unwrap();
        let dspec = DisorderSpec::gaussian(1.0, 11);
        let charges = ChargeSequence::generate(dspec.clone(), 40).unwrap();
        let table = ConstrainedTable::build(40, &charges, &law, 40).unwrap();
        (spec, dspec, table)
    }

    #[test]
    fn round_trip_preserves_every_entry() {
        let (spec, dspec, table) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let key = table_key(&spec, &dspec, 40, 40);
        save_table(dir.path(), &key, &table).unwrap();
        let loaded = load_table(dir.path(), &key, 40, 40).unwrap().unwrap();
        for l in 0..=40 {
            for m in l..=40 {
                let (a, b) = (table.log_z(m, l), loaded.log_z(m, l));
                assert!(a == b || (a.is_nan() && b.is_nan()), "({m},{l}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn missing_file_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_table(dir.path(), "deadbeef", 10, 10).unwrap().is_none());
    }

    #[test]
    fn keys_separate_configurations() {
        let spec = LawSpec::polynomial(2.0);
        let d1 = DisorderSpec::gaussian(1.0, 1);
        let d2 = DisorderSpec::gaussian(1.0, 2);
        let k_base = table_key(&spec, &d1, 30, 30);
        assert_eq!(k_base, table_key(&spec, &d1, 30, 30), "key must be deterministic");
        assert_ne!(k_base, table_key(&spec, &d2, 30, 30), "seed must enter the key");
        assert_ne!(k_base, table_key(&spec, &d1, 31, 31), "shape must enter the key");
        assert_ne!(
            k_base,
            table_key(&LawSpec::truncated(1.0, 2), &d1, 30, 30),
            "law must enter the key"
        );
    }

    #[test]
    fn corruption_is_detected() {
        let (spec, dspec, table) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let key = table_key(&spec, &dspec, 40, 40);
        let path = save_table(dir.path(), &key, &table).unwrap();
        // flip one payload byte
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 5;
        bytes[last] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        match load_table(dir.path(), &key, 40, 40) {
            Err(CacheError::Corrupt(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("expected corruption error, got {other:?}"),
        }
        // truncation is also caught
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_table(dir.path(), &key, 40, 40).is_err());
        // wrong requested shape is refused
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_table(dir.path(), &key, 40, 39),
            Err(CacheError::Corrupt(_))
        ));
    }
}
