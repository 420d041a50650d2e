//! Binary checkpoint: magic, version, architecture, normalizer, weights as
//! little-endian `f64`, trailing SHA-256 of everything before it.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use super::{Dense, Model, ModelArch, NeuralError, Normalizer, SkipPattern};

const MAGIC: &[u8; 8] = b"APOSNN\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, model: &Model, normalizer: &Normalizer) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let a = &model.arch;
    for d in [a.input_dim, a.hidden_width, a.n_hidden, a.output_dim] {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    buf.push(a.skip_pattern.tag());
    buf.extend_from_slice(&(normalizer.n_features() as u64).to_le_bytes());
    let floats = normalizer
        .feature_means
        .iter()
        .chain(normalizer.feature_stds.iter())
        .chain(normalizer.position_center.iter())
        .chain(normalizer.position_half_extent.iter())
        .chain(model.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter())));
    for v in floats {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NeuralError::CorruptFile("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize, NeuralError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| NeuralError::CorruptFile("dimension overflow".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NeuralError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NeuralError::CorruptFile("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(Model, Normalizer), NeuralError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(NeuralError::CorruptFile("missing checkpoint header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NeuralError::CorruptFile("checksum mismatch".into()));
    }
    let mut c = Cursor { bytes: body, pos: 12 };
    let (input_dim, hidden_width, n_hidden, output_dim) = (c.u64()?, c.u64()?, c.u64()?, c.u64()?);
    let skip_pattern = SkipPattern::from_tag(c.take(1)?[0])
        .ok_or_else(|| NeuralError::CorruptFile("unknown skip pattern".into()))?;
    let arch = ModelArch { input_dim, hidden_width, n_hidden, skip_pattern, output_dim };
    arch.validate().map_err(|e| NeuralError::CorruptFile(e.to_string()))?;
    let nf = c.u64()?;
    let means = c.f64s(nf)?;
    let stds = c.f64s(nf)?;
    let center = c.f64s(2)?;
    let half = c.f64s(2)?;
    let mut layers = Vec::new();
    for (i, o) in arch.layer_shapes() {
        let w = Array2::from_shape_vec((i, o), c.f64s(i * o)?).expect("shape matches length");
        let b = Array1::from(c.f64s(o)?);
        layers.push(Dense { w, b });
    }
    if c.pos != body.len() {
        return Err(NeuralError::CorruptFile("trailing bytes".into()));
    }
    let normalizer = Normalizer {
        feature_means: Array1::from(means),
        feature_stds: Array1::from(stds),
        position_center: [center[0], center[1]],
        position_half_extent: [half[0], half[1]],
    };
    Ok((Model { arch, layers }, normalizer))
}

pub fn save_checkpoint(model: &Model, normalizer: &Normalizer, path: &Path) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model, normalizer)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Normalizer), NeuralError> {
    read_checkpoint(std::fs::File::open(path)?)
}
