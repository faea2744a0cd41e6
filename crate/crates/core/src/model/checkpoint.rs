//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "RETNCKPT"
//! version  u8       FORMAT_VERSION
//! crc32    u32      CRC-32 (IEEE) of the payload
//! length   u64      payload byte count
//! payload:
//!   spec       u32 length + UTF-8 JSON of the NetworkSpec
//!   epochs     u32
//!   seed       u64
//!   final_loss f64
//!   slots      u32 count, then per slot: layer u32, weight tensor, bias tensor
//!   tensor     u8 rank, rank × u32 extents, f32 values
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, NetworkSpec, Parameters, Result};
use crate::tensor::{LayerWeights, Tensor};

pub const MAGIC: &[u8; 8] = b"RETNCKPT";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 8 + 1 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_completed: u32,
    pub seed: u64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Parameters<f32>,
    pub meta: TrainingMeta,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let spec_json = serde_json::to_vec(&self.spec).expect("spec serializes");
        put_u32(&mut payload, spec_json.len() as u32);
        payload.extend_from_slice(&spec_json);
        put_u32(&mut payload, self.meta.epochs_completed);
        payload.extend_from_slice(&self.meta.seed.to_le_bytes());
        payload.extend_from_slice(&self.meta.final_loss.to_le_bytes());
        put_u32(&mut payload, self.params.slots().len() as u32);
        for (layer, w) in self.params.layer_indices().iter().zip(self.params.slots()) {
            put_u32(&mut payload, *layer as u32);
            put_tensor(&mut payload, &w.weight);
            put_tensor(&mut payload, &w.bias);
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let version = bytes[8];
        if version != FORMAT_VERSION {
            return Err(ModelError::VersionUnsupported { found: version, supported: FORMAT_VERSION });
        }
        let crc = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        let len = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != len {
            return Err(corrupt(format!("payload is {} bytes, header says {len}", payload.len())));
        }
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("CRC mismatch".into()));
        }

        let mut r = Reader { buf: payload, pos: 0 };
        let spec_len = r.u32()? as usize;
        let spec: NetworkSpec = serde_json::from_slice(r.take(spec_len)?)
            .map_err(|e| corrupt(format!("spec JSON: {e}")))?;
        spec.validate()?;
        let meta = TrainingMeta { epochs_completed: r.u32()?, seed: r.u64()?, final_loss: r.f64()? };
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        let mut slots = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            layers.push(r.u32()? as usize);
            let weight = r.tensor()?;
            let bias = r.tensor()?;
            slots.push(LayerWeights { weight, bias });
        }
        if r.pos != payload.len() {
            return Err(corrupt(format!("{} trailing bytes", payload.len() - r.pos)));
        }
        let params = Parameters::from_slots(&spec, slots)?;
        if params.layer_indices() != layers.as_slice() {
            return Err(ModelError::ShapeInconsistent(format!(
                "slot layer indices {layers:?} do not match spec {:?}",
                params.layer_indices()
            )));
        }
        Ok(Self { spec, params, meta })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
    Checkpoint::from_bytes(&bytes)
}

fn corrupt(msg: String) -> ModelError {
    ModelError::CorruptCheckpoint(msg)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor<f32>) {
    out.push(t.rank() as u8);
    for &e in t.shape() {
        put_u32(out, e as u32);
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            corrupt(format!("unexpected end of payload reading {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor<f32>> {
        let rank = self.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| self.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e)).ok_or_else(|| corrupt("tensor size overflows".into()))?;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| corrupt("tensor size overflows".into()))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Tensor::new(&shape, data).map_err(|e| corrupt(format!("tensor: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edlm_compact_spec, init_parameters};

    fn sample() -> Checkpoint {
        let spec = edlm_compact_spec([32, 32, 3], 5).unwrap();
        let params = init_parameters(&spec, 9).unwrap();
        Checkpoint { spec, params, meta: TrainingMeta { epochs_completed: 3, seed: 9, final_loss: 0.25 } }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [0, 5, HEADER_LEN, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(ModelError::CorruptCheckpoint(_))), "cut {cut}");
        }
    }

    #[test]
    fn flipped_payload_byte_fails_crc() {
        let mut bytes = sample().to_bytes();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("CRC"), "{err}");
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[8] += 1;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(ModelError::VersionUnsupported { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_checkpoint("/nonexistent/none.ckpt"), Err(ModelError::Io { .. })));
    }
}
