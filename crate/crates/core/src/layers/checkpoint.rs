//! Binary model container. All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes   "GEDTAGCK"
//! version    u32       1
//! config     u32 length, then that many bytes of UTF-8 JSON (ModelConfig)
//! vocabulary u32 count, then per token: u32 length + UTF-8 bytes (id order)
//! parameters u32 count, then per parameter:
//!              u32 name length + UTF-8 name
//!              u32 rank, rank × u64 dimensions
//!              product(dimensions) × f64 values, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Model, ModelConfig};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

pub const MAGIC: &[u8; 8] = b"GEDTAGCK";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    let config = serde_json::to_vec(model.config())
        .map_err(|e| Error::Checkpoint(format!("cannot encode config: {e}")))?;
    put_bytes(&mut out, &config);
    put_u32(&mut out, model.vocab().len() as u32);
    for t in model.vocab().tokens() {
        put_bytes(&mut out, t.as_bytes());
    }
    put_u32(&mut out, model.params().len() as u32);
    for (_, name, t) in model.params().iter() {
        put_bytes(&mut out, name.as_bytes());
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("invalid UTF-8 before byte {}", self.pos)))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Model> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a gedtag checkpoint".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config_len = c.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(config_len)?)
        .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
    let n_tokens = c.u32()? as usize;
    let tokens = (0..n_tokens)
        .map(|_| c.string())
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_tokens(tokens)?;
    let n_params = c.u32()? as usize;
    let mut params = ParamSet::new();
    for _ in 0..n_params {
        let name = c.string()?;
        let rank = c.u32()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        params.insert(name, Tensor::new(shape, values)?)?;
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - c.pos
        )));
    }
    Model::from_parts(config, vocab, params)
}

pub fn save(model: &Model, mut w: impl Write) -> Result<()> {
    w.write_all(&to_bytes(model)?)?;
    Ok(())
}

pub fn load(mut r: impl Read) -> Result<Model> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

pub fn save_file(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_file(path: &Path) -> Result<Model> {
    from_bytes(&fs::read(path)?)
}
