//! `WOPM` parameter checkpoints.
//!
//! Little-endian layout: magic `WOPM`, version `u16`, model kind `u8`,
//! parameter count `u32`, then per parameter a `u16` name length and UTF-8
//! name, `u8` rank and `u32` dims, `u8` complex flag, and the `f64` payload.

use std::path::Path;

use super::{ParameterStore, Result, Tensor};
use crate::binfmt::{FormatError, Reader};

const MAGIC: &[u8; 4] = b"WOPM";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fno,
    DeepOnet,
}

impl ModelKind {
    pub fn code(self) -> u8 {
        match self {
            ModelKind::Fno => 0,
            ModelKind::DeepOnet => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Fno),
            1 => Some(ModelKind::DeepOnet),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fno => "fno",
            ModelKind::DeepOnet => "deeponet",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub params: ParameterStore,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + 8 * self.params.scalar_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&len_u32(self.params.len(), "parameter count")?.to_le_bytes());
        for (name, t) in self.params.iter() {
            let nb = name.as_bytes();
            let nlen = u16::try_from(nb.len()).map_err(|_| FormatError::invalid(0, "name too long"))?;
            out.extend_from_slice(&nlen.to_le_bytes());
            out.extend_from_slice(nb);
            let rank = u8::try_from(t.shape().len()).map_err(|_| FormatError::invalid(0, "rank too large"))?;
            out.push(rank);
            for &d in t.shape() {
                out.extend_from_slice(&len_u32(d, "dimension")?.to_le_bytes());
            }
            out.push(u8::from(t.is_complex()));
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let kind_pos = r.pos();
        let kind = ModelKind::from_code(r.u8()?).ok_or_else(|| FormatError::invalid(kind_pos, "unknown model kind"))?;
        let count = r.u32()? as usize;
        let mut params = ParameterStore::new();
        for _ in 0..count {
            let name_pos = r.pos();
            let nlen = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(nlen)?)
                .map_err(|_| FormatError::invalid(name_pos, "parameter name is not UTF-8"))?
                .to_string();
            let rank = r.u8()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let flag_pos = r.pos();
            let complex = match r.u8()? {
                0 => false,
                1 => true,
                _ => return Err(FormatError::invalid(flag_pos, "complex flag must be 0 or 1").into()),
            };
            let numel: usize = shape.iter().product();
            let data = r.f64_vec(if complex { 2 * numel } else { numel })?;
            let tensor = Tensor::with_layout(shape, data, complex)?;
            params
                .insert(name, tensor)
                .map_err(|e| FormatError::invalid(name_pos, e.to_string()))?;
        }
        r.finish()?;
        Ok(Self { kind, params })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    crate::io::write_atomic(path, &ckpt.to_bytes()?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

fn len_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| FormatError::invalid(0, format!("{what} {v} exceeds u32")).into())
}
