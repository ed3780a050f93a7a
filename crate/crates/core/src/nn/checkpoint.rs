//! Binary checkpoint format for a `ParameterStore`.
//!
//! Layout: 8-byte magic, u32 LE header length, JSON header, then per
//! MLP (in entry order) per layer the row-major weight matrix followed
//! by the bias vector, all little-endian f64. The header records the
//! architecture, a hyperparameter snapshot, the seed lineage and a
//! SHA-256 of the parameter payload; loading refuses any mismatch and
//! reproduces every bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Linear, Mlp, ParameterStore};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"UASSOCK1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MlpSpec {
    pub name: String,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub arch: Vec<MlpSpec>,
    /// Opaque hyperparameter snapshot.
    pub hyper: serde_json::Value,
    pub seed_lineage: Vec<u64>,
    pub param_version: u64,
    pub param_sha256: String,
    pub manifest_hash: Option<String>,
}

fn payload_bytes(store: &ParameterStore) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(store.param_count() * 8);
    for (_, mlp) in store.entries() {
        for layer in &mlp.layers {
            for v in layer.w.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in layer.b.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    bytes
}

pub fn save_checkpoint(
    path: &Path,
    store: &ParameterStore,
    hyper: serde_json::Value,
    seed_lineage: Vec<u64>,
    manifest_hash: Option<String>,
) -> Result<CheckpointMeta> {
    let payload = payload_bytes(store);
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        arch: store.arch(),
        hyper,
        seed_lineage,
        param_version: store.version(),
        param_sha256: hex::encode(Sha256::digest(&payload)),
        manifest_hash,
    };
    let header = serde_json::to_vec(&meta)
        .map_err(|e| Error::Checkpoint(format!("header encode: {e}")))?;

    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header.len() as u32).to_le_bytes())?;
    file.write_all(&header)?;
    file.write_all(&payload)?;
    Ok(meta)
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterStore, CheckpointMeta)> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut len = [0u8; 4];
    file.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    file.read_exact(&mut header)?;
    let meta: CheckpointMeta = serde_json::from_slice(&header)
        .map_err(|e| Error::Checkpoint(format!("header decode: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {}",
            meta.format_version
        )));
    }

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if hex::encode(Sha256::digest(&payload)) != meta.param_sha256 {
        return Err(Error::Checkpoint(
            "parameter hash mismatch: refusing corrupted checkpoint".into(),
        ));
    }

    let mut off = 0;
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let need = n * 8;
        if off + need > payload.len() {
            return Err(Error::Checkpoint("payload truncated".into()));
        }
        let out = payload[off..off + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        off += need;
        Ok(out)
    };

    let mut entries = Vec::with_capacity(meta.arch.len());
    for spec in &meta.arch {
        let mut layers = Vec::with_capacity(spec.dims.len() - 1);
        for io in spec.dims.windows(2) {
            let (ins, outs) = (io[0], io[1]);
            let w = ndarray::Array2::from_shape_vec((outs, ins), take(ins * outs)?)
                .map_err(|e| Error::Checkpoint(format!("weight shape: {e}")))?;
            let b = ndarray::Array1::from_vec(take(outs)?);
            layers.push(Linear { w, b });
        }
        entries.push((spec.name.clone(), Mlp { layers }));
    }
    if off != payload.len() {
        return Err(Error::Checkpoint("trailing bytes in payload".into()));
    }
    Ok((
        ParameterStore::from_parts(entries, meta.param_version),
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> ParameterStore {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        ParameterStore::new(vec![
            ("f".into(), Mlp::new(&[7, 16, 16], &mut rng)),
            ("actor".into(), Mlp::new(&[16, 32, 4], &mut rng)),
        ])
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let mut s = store();
        s.bump_version();
        s.bump_version();
        let meta = save_checkpoint(
            &path,
            &s,
            serde_json::json!({"lr": 1e-4}),
            vec![17, 3],
            Some("abc".into()),
        )
        .unwrap();
        let (loaded, meta2) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.flatten(), s.flatten());
        assert_eq!(loaded.version(), 2);
        assert_eq!(meta.param_sha256, meta2.param_sha256);
        assert_eq!(meta2.seed_lineage, vec![17, 3]);
        assert_eq!(meta2.arch, s.arch());
    }

    #[test]
    fn corrupted_payload_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_checkpoint(&path, &store(), serde_json::Value::Null, vec![], None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
    }
}
