//! `ACTV` activation files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                        |
//! |-------:|-----:|------------------------------|
//! | 0      | 4    | magic `b"ACTV"`              |
//! | 4      | 2    | version (`u16`, = 1)         |
//! | 6      | 1    | dtype (`u8`, 0 = f32 LE)     |
//! | 7      | 2    | layer (`u16`)                |
//! | 9      | 4    | n rows (`u32`)               |
//! | 13     | 4    | d columns (`u32`)            |
//! | 17     | 4·n·d| row-major f32 payload        |
//!
//! Each file has a JSON sidecar at `{path}.meta.json` holding
//! `{task, prompt, model, layer, example_ids}`.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const MAGIC: [u8; 4] = *b"ACTV";
pub const VERSION: u16 = 1;
pub const DTYPE_F32_LE: u8 = 0;
pub const HEADER_LEN: usize = 17;

#[derive(Debug, thiserror::Error)]
pub enum TensorIoError {
    #[error("{0}: not an activation file")]
    NotActivationFile(String),
    #[error("unsupported activation file version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("payload length mismatch: header declares {expected} bytes, found {found}")]
    LengthMismatch { expected: u64, found: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TensorIoError> = std::result::Result<T, E>;

/// Residual-stream vectors for one (task, prompt, layer): row `i` is the
/// activation of statement `example_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBatch {
    pub layer: usize,
    pub n: usize,
    pub d: usize,
    pub data: Vec<f32>,
    pub example_ids: Vec<u64>,
    pub task: String,
    pub prompt: String,
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationFileHeader {
    pub version: u16,
    pub dtype: u8,
    pub layer: u16,
    pub n: u32,
    pub d: u32,
}

impl ActivationFileHeader {
    pub fn payload_len(&self) -> u64 {
        u64::from(self.n) * u64::from(self.d) * 4
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.dtype;
        b[7..9].copy_from_slice(&self.layer.to_le_bytes());
        b[9..13].copy_from_slice(&self.n.to_le_bytes());
        b[13..17].copy_from_slice(&self.d.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8], origin: &str) -> Result<Self> {
        if bytes.len() < 4 || bytes[0..4] != MAGIC {
            return Err(TensorIoError::NotActivationFile(origin.to_string()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(TensorIoError::LengthMismatch {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(TensorIoError::UnsupportedVersion(version));
        }
        let dtype = bytes[6];
        if dtype != DTYPE_F32_LE {
            return Err(TensorIoError::UnsupportedDtype(dtype));
        }
        Ok(Self {
            version,
            dtype,
            layer: u16::from_le_bytes([bytes[7], bytes[8]]),
            n: u32::from_le_bytes(bytes[9..13].try_into().unwrap()),
            d: u32::from_le_bytes(bytes[13..17].try_into().unwrap()),
        })
    }
}

/// The JSON sidecar next to every activation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub task: String,
    pub prompt: String,
    pub model: String,
    pub layer: usize,
    pub example_ids: Vec<u64>,
}

impl ActivationBatch {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.d)
    }

    /// Checks shape, finiteness and id uniqueness.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(TensorIoError::InvalidBatch("n·d must be positive".into()));
        }
        if self.data.len() != self.n * self.d {
            return Err(TensorIoError::InvalidBatch(format!(
                "data holds {} values, expected {}×{}",
                self.data.len(),
                self.n,
                self.d
            )));
        }
        if self.example_ids.len() != self.n {
            return Err(TensorIoError::InvalidBatch(format!(
                "{} example ids for {} rows",
                self.example_ids.len(),
                self.n
            )));
        }
        if self.layer > usize::from(u16::MAX) || self.n > u32::MAX as usize || self.d > u32::MAX as usize {
            return Err(TensorIoError::InvalidBatch("dimensions exceed header field widths".into()));
        }
        if let Some(pos) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(TensorIoError::NonFinite {
                row: pos / self.d,
                col: pos % self.d,
            });
        }
        let mut seen = HashSet::with_capacity(self.n);
        if let Some(dup) = self.example_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(TensorIoError::InvalidBatch(format!("duplicate example id {dup}")));
        }
        Ok(())
    }

    pub fn header(&self) -> ActivationFileHeader {
        ActivationFileHeader {
            version: VERSION,
            dtype: DTYPE_F32_LE,
            layer: self.layer as u16,
            n: self.n as u32,
            d: self.d as u32,
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            task: self.task.clone(),
            prompt: self.prompt.clone(),
            model: self.model.clone(),
            layer: self.layer,
            example_ids: self.example_ids.clone(),
        }
    }

    /// Keeps the rows whose index satisfies `keep`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> ActivationBatch {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        ActivationBatch {
            layer: self.layer,
            n: idx.len(),
            d: self.d,
            data,
            example_ids: idx.iter().map(|&i| self.example_ids[i]).collect(),
            task: self.task.clone(),
            prompt: self.prompt.clone(),
            model: self.model.clone(),
        }
    }
}

/// `"{task}.{prompt}.layer{ℓ:02}.actv"`.
pub fn activation_file_name(task: &str, prompt: &str, layer: usize) -> String {
    format!("{task}.{prompt}.layer{layer:02}.actv")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Header followed by the payload.
pub fn encode(batch: &ActivationBatch) -> Result<Vec<u8>> {
    batch.validate()?;
    let mut out = Vec::with_capacity(HEADER_LEN + batch.data.len() * 4);
    out.extend_from_slice(&batch.header().to_bytes());
    for x in &batch.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

/// Parses header and payload; rejects size mismatches and non-finite
/// values.
pub fn decode(bytes: &[u8], origin: &str) -> Result<(ActivationFileHeader, Vec<f32>)> {
    let header = ActivationFileHeader::parse(bytes, origin)?;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found != header.payload_len() {
        return Err(TensorIoError::LengthMismatch {
            expected: header.payload_len(),
            found,
        });
    }
    let d = header.d as usize;
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
        return Err(TensorIoError::NonFinite { row: pos / d, col: pos % d });
    }
    Ok((header, data))
}

pub fn write_activations(batch: &ActivationBatch, path: &Path) -> Result<()> {
    let bytes = encode(batch)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()?;
    let sidecar = serde_json::to_vec(&batch.sidecar()).expect("sidecar serializes");
    fs::write(sidecar_path(path), sidecar)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let sc_path = sidecar_path(path);
    let err = |message: String| TensorIoError::Sidecar {
        path: sc_path.display().to_string(),
        message,
    };
    let bytes = fs::read(&sc_path).map_err(|e| err(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))
}

pub fn read_activations(path: &Path) -> Result<ActivationBatch> {
    let bytes = fs::read(path)?;
    let (header, data) = decode(&bytes, &path.display().to_string())?;
    let sidecar = read_sidecar(path)?;
    let batch = ActivationBatch {
        layer: usize::from(header.layer),
        n: header.n as usize,
        d: header.d as usize,
        data,
        example_ids: sidecar.example_ids,
        task: sidecar.task,
        prompt: sidecar.prompt,
        model: sidecar.model,
    };
    if sidecar.layer != batch.layer {
        return Err(TensorIoError::Sidecar {
            path: sidecar_path(path).display().to_string(),
            message: format!("layer {} disagrees with header layer {}", sidecar.layer, batch.layer),
        });
    }
    batch.validate()?;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch(n: usize, d: usize) -> ActivationBatch {
        ActivationBatch {
            layer: 3,
            n,
            d,
            data: (0..n * d).map(|i| i as f32 * 0.5 - 1.0).collect(),
            example_ids: (0..n as u64).map(|i| i * 10).collect(),
            task: "F0".into(),
            prompt: "no-prompt".into(),
            model: "test-model".into(),
        }
    }

    #[test]
    fn two_by_three_file_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(activation_file_name("F0", "no-prompt", 3));
        assert!(path.ends_with("F0.no-prompt.layer03.actv"));
        write_activations(&batch(2, 3), &path).unwrap();
        let len = fs::metadata(&path).unwrap().len();
        assert_eq!(len, 4 + 13 + 24);
        let back = read_activations(&path).unwrap();
        assert_eq!(back, batch(2, 3));
        let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(sidecar_path(&path)).unwrap()).unwrap();
        for key in ["task", "prompt", "model", "layer", "example_ids"] {
            assert!(sidecar.get(key).is_some());
        }
    }

    #[test]
    fn header_declares_wide_model_shapes() {
        let h = ActivationFileHeader {
            version: 1,
            dtype: 0,
            layer: 31,
            n: 478,
            d: 4096,
        };
        let parsed = ActivationFileHeader::parse(&h.to_bytes(), "mem").unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.payload_len(), 478 * 4096 * 4);
    }

    #[test]
    fn corrupt_files_give_distinct_errors() {
        let good = encode(&batch(2, 3)).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic, "f"), Err(TensorIoError::NotActivationFile(_))));
        let msg = decode(&bad_magic, "f").unwrap_err().to_string();
        assert!(msg.contains("not an activation file"));

        let truncated = &good[..good.len() - 1];
        assert!(matches!(
            decode(truncated, "f"),
            Err(TensorIoError::LengthMismatch { expected: 24, found: 23 })
        ));
        let mut extended = good.clone();
        extended.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode(&extended, "f"), Err(TensorIoError::LengthMismatch { .. })));

        let mut nan = good.clone();
        nan[HEADER_LEN + 4 * 4..HEADER_LEN + 5 * 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan, "f"), Err(TensorIoError::NonFinite { row: 1, col: 1 })));

        let mut version = good.clone();
        version[4] = 2;
        assert!(matches!(decode(&version, "f"), Err(TensorIoError::UnsupportedVersion(2))));
        let mut dtype = good;
        dtype[6] = 1;
        assert!(matches!(decode(&dtype, "f"), Err(TensorIoError::UnsupportedDtype(1))));
    }

    #[test]
    fn invalid_batches_are_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.actv");
        let mut b = batch(2, 2);
        b.data[1] = f32::INFINITY;
        assert!(matches!(write_activations(&b, &path), Err(TensorIoError::NonFinite { row: 0, col: 1 })));
        let mut b = batch(2, 2);
        b.example_ids = vec![1, 1];
        assert!(matches!(write_activations(&b, &path), Err(TensorIoError::InvalidBatch(_))));
        let mut b = batch(1, 1);
        b.n = 0;
        b.data.clear();
        b.example_ids.clear();
        assert!(write_activations(&b, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn missing_sidecar_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.actv");
        write_activations(&batch(2, 2), &path).unwrap();
        fs::remove_file(sidecar_path(&path)).unwrap();
        assert!(matches!(read_activations(&path), Err(TensorIoError::Sidecar { .. })));
    }

    proptest! {
        #[test]
        fn encode_decode_is_bitwise_identity(
            n in 1usize..6,
            d in 1usize..6,
            seed in prop::collection::vec(-1.0e30f32..1.0e30, 36),
        ) {
            let mut b = batch(n, d);
            b.data = seed[..n * d].to_vec();
            let bytes = encode(&b).unwrap();
            let (h, data) = decode(&bytes, "mem").unwrap();
            prop_assert_eq!((h.n as usize, h.d as usize), (n, d));
            let same = data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same);
            let mut again = b.clone();
            again.data = data;
            prop_assert_eq!(encode(&again).unwrap(), bytes);
        }
    }
}
