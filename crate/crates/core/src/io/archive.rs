//! `VAPW` weight archives.
//!
//! ```text
//! magic "VAPW" | version u16 | flags u16
//! config_len u32 | config JSON (UTF-8)
//! tensor_count u32
//! per tensor: name_len u16 | name (UTF-8) | rank u8 | dims u32 * rank | f32 * prod(dims)
//! crc32 u32 of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::autograd::ParamStore;
use crate::error::{Error, Result};
use crate::model::{parameter_layout, ModelConfig, Network};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"VAPW";
pub const FORMAT_VERSION: u16 = 1;
const TENSOR_RANK: u8 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchiveError {
    #[error("truncated archive: {0}")]
    Truncated(&'static str),
    #[error("bad magic, not a VAPW archive")]
    BadMagic,
    #[error("crc mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("embedded config: {0}")]
    BadConfig(String),
    #[error("duplicate tensor {0:?}")]
    DuplicateName(String),
    #[error("tensor {name:?}: rank {rank}, expected 4")]
    BadRank { name: String, rank: u8 },
    #[error("tensor {name:?}: invalid dims {dims:?}")]
    BadDims { name: String, dims: Vec<u32> },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("unknown tensor {0:?}")]
    UnknownTensor(String),
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?}: shape {found:?}, config expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Shape,
        found: Shape,
    },
    #[error("archive holds {found:?} but {expected:?} was requested")]
    ConfigMismatch { expected: String, found: String },
}

/// Decoded archive contents, not yet checked against the config's layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub config: ModelConfig,
    pub tensors: ParamStore<f32>,
}

pub fn encode(config: &ModelConfig, params: &ParamStore<f32>) -> Vec<u8> {
    let json = serde_json::to_string(config).expect("config serializes");
    let mut out = Vec::with_capacity(16 + json.len() + params.scalar_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(TENSOR_RANK);
        for d in t.shape().dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ArchiveError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ArchiveError::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ArchiveError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ArchiveError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parses and integrity-checks an archive. Never panics on malformed input.
pub fn decode(bytes: &[u8]) -> Result<Archive, ArchiveError> {
    if bytes.len() < MAGIC.len() {
        return Err(ArchiveError::Truncated("magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(ArchiveError::Truncated("checksum"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ArchiveError::CrcMismatch { stored, computed });
    }

    let mut cur = Cursor { buf: body, pos: 4 };
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let flags = cur.u16("flags")?;
    if flags != 0 {
        return Err(ArchiveError::UnsupportedFlags(flags));
    }
    let json_len = cur.u32("config length")? as usize;
    let json = std::str::from_utf8(cur.take(json_len, "config")?)
        .map_err(|_| ArchiveError::InvalidUtf8("config"))?;
    let config =
        ModelConfig::from_json(json).map_err(|e| ArchiveError::BadConfig(e.to_string()))?;

    let count = cur.u32("tensor count")?;
    let mut tensors = ParamStore::new();
    for _ in 0..count {
        let name_len = cur.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| ArchiveError::InvalidUtf8("tensor name"))?
            .to_owned();
        if tensors.contains(&name) {
            return Err(ArchiveError::DuplicateName(name));
        }
        let rank = cur.u8("tensor rank")?;
        if rank != TENSOR_RANK {
            return Err(ArchiveError::BadRank { name, rank });
        }
        let mut dims = [0u32; 4];
        for d in &mut dims {
            *d = cur.u32("tensor dims")?;
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .filter(|&n| n > 0 && dims.iter().all(|&d| d > 0));
        let Some(numel) = numel else {
            return Err(ArchiveError::BadDims {
                name,
                dims: dims.to_vec(),
            });
        };
        if numel > cur.remaining() / 4 {
            return Err(ArchiveError::Truncated("tensor payload"));
        }
        let payload = cur.take(numel * 4, "tensor payload")?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let shape = Shape::new(dims[0] as usize, dims[1] as usize, dims[2] as usize, dims[3] as usize);
        let t = Tensor::from_values(shape, data).map_err(|_| ArchiveError::BadDims {
            name: name.clone(),
            dims: dims.to_vec(),
        })?;
        tensors
            .insert(name.clone(), t)
            .map_err(|_| ArchiveError::DuplicateName(name))?;
    }
    if cur.remaining() != 0 {
        return Err(ArchiveError::TrailingBytes(cur.remaining()));
    }
    Ok(Archive { config, tensors })
}

impl Archive {
    /// Checks the tensors against the embedded config's layout and builds the network.
    ///
    /// The embedded config is authoritative: if `expected` is given and differs,
    /// that is an error rather than an override.
    pub fn into_network(self, expected: Option<&ModelConfig>) -> Result<Network, ArchiveError> {
        if let Some(exp) = expected {
            if *exp != self.config {
                return Err(ArchiveError::ConfigMismatch {
                    expected: exp.variant_tag.clone(),
                    found: self.config.variant_tag.clone(),
                });
            }
        }
        let layout = parameter_layout(&self.config);
        if let Some(extra) = self
            .tensors
            .names()
            .find(|n| !layout.iter().any(|(l, _)| l == n))
        {
            return Err(ArchiveError::UnknownTensor(extra.to_owned()));
        }
        for (name, shape) in &layout {
            let t = self
                .tensors
                .get(name)
                .map_err(|_| ArchiveError::MissingTensor(name.clone()))?;
            if t.shape() != *shape {
                return Err(ArchiveError::ShapeMismatch {
                    name: name.clone(),
                    expected: *shape,
                    found: t.shape(),
                });
            }
        }
        // Store in layout order so re-encoding is canonical.
        let mut ordered = ParamStore::new();
        for (name, _) in &layout {
            let t = self.tensors.get(name).expect("checked above").clone();
            ordered.insert(name.clone(), t).expect("layout names are unique");
        }
        Ok(Network::from_params(self.config, ordered).expect("layout verified"))
    }
}

pub fn save_weights(path: &Path, net: &Network) -> Result<()> {
    std::fs::write(path, encode(net.config(), net.params())).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_weights(path: &Path, expected: Option<&ModelConfig>) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(decode(&bytes)?.into_network(expected)?)
}
