//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      b"PZCK"
//! version    u32 (= 1)
//! kind       u32 (0 base, 1 pzero, 2 cloze, 3 as, 4 as-pzero)
//! config     6 x u32: vocab_size, dim, max_len, layers, heads, ff_dim
//! seed       u64
//! hash       32 bytes (sha256 of the run configuration)
//! count      u32
//! tensors    count x { name_len u32, name utf-8, rows u32, cols u32, rows*cols f32 }
//! ```
//!
//! Tensors appear in [`Params::tensors`] order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{ModelConfig, Params};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PZCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Base,
    Pzero,
    Cloze,
    As,
    AsPzero,
}

impl ModelKind {
    fn code(self) -> u32 {
        self as u32
    }

    fn from_code(c: u32) -> Result<Self> {
        Ok(match c {
            0 => ModelKind::Base,
            1 => ModelKind::Pzero,
            2 => ModelKind::Cloze,
            3 => ModelKind::As,
            4 => ModelKind::AsPzero,
            _ => return Err(Error::Checkpoint(format!("unknown model kind code {c}"))),
        })
    }

    /// Encoder-only kinds a finetuning run may start from.
    pub fn is_pretrained(self) -> bool {
        matches!(self, ModelKind::Base | ModelKind::Pzero | ModelKind::Cloze)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Base => "base",
            ModelKind::Pzero => "pzero",
            ModelKind::Cloze => "cloze",
            ModelKind::As => "as",
            ModelKind::AsPzero => "as-pzero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub params: Params<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.params.config;
        let mut out = Vec::with_capacity(64 + 4 * self.params.num_parameters());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.kind.code()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [c.vocab_size, c.dim, c.max_len, c.layers, c.heads, c.ff_dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = ModelKind::from_code(r.u32()?)?;
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let config = ModelConfig {
            vocab_size: dims[0],
            dim: dims[1],
            max_len: dims[2],
            layers: dims[3],
            heads: dims[4],
            ff_dim: dims[5],
        };
        config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let seed = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let count = r.u32()? as usize;
        let mut params = Params::<f32>::zeros(config);
        {
            let mut tensors = params.tensors_mut();
            if count != tensors.len() {
                return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", tensors.len())));
            }
            for (name, t) in tensors.iter_mut() {
                let len = r.u32()? as usize;
                let got = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
                if got != name {
                    return Err(Error::Checkpoint(format!("expected tensor `{name}`, found `{got}`")));
                }
                let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
                if (rows, cols) != t.dim() {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{name}` has shape {rows}x{cols}, expected {}x{}",
                        t.nrows(),
                        t.ncols()
                    )));
                }
                for v in t.iter_mut() {
                    *v = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
                }
            }
        }
        if r.at != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::Checkpoint(format!("tensor `{name}` holds non-finite values")));
        }
        Ok(Checkpoint {
            kind,
            seed,
            config_hash,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Loads and checks that the checkpoint holds one of `allowed`.
    pub fn load_expecting(path: &Path, allowed: &[ModelKind]) -> Result<Self> {
        let ck = Self::load(path)?;
        if !allowed.contains(&ck.kind) {
            let names: Vec<String> = allowed.iter().map(|k| k.to_string()).collect();
            return Err(Error::Checkpoint(format!(
                "{}: checkpoint holds a `{}` model, expected {}",
                path.display(),
                ck.kind,
                names.join(" or ")
            )));
        }
        Ok(ck)
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.config_hash)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.at))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
