//! Versioned model container: a JSON header followed by little-endian
//! float64 blocks.
//!
//! ```text
//! magic "AUDITBM\0" | u32 version | u64 header length | header JSON | blocks
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"AUDITBM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    blocks: Vec<BlockInfo>,
}

/// In-memory form of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub meta: serde_json::Value,
    pub blocks: Vec<(BlockInfo, Vec<f64>)>,
}

impl ModelFile {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        ModelFile {
            kind: kind.to_string(),
            meta,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: &[usize], data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.blocks.push((
            BlockInfo {
                name: name.to_string(),
                shape: shape.to_vec(),
            },
            data,
        ));
    }

    pub fn block(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.blocks
            .iter()
            .find(|(b, _)| b.name == name)
            .map(|(b, d)| (b.shape.as_slice(), d.as_slice()))
            .ok_or_else(|| Error::ModelFormat(format!("missing block {name:?}")))
    }

    pub fn block_2d(&self, name: &str) -> Result<ndarray::Array2<f64>> {
        let (shape, data) = self.block(name)?;
        if shape.len() != 2 {
            return Err(Error::ModelFormat(format!("block {name:?} is not 2-d")));
        }
        ndarray::Array2::from_shape_vec((shape[0], shape[1]), data.to_vec())
            .map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn meta<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.meta.clone()).map_err(Error::from)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            blocks: self.blocks.iter().map(|(b, _)| b.clone()).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let io = |e| Error::io("<model file>", e);
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        out.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        out.write_all(&json).map_err(io)?;
        for (_, data) in &self.blocks {
            let mut buf = Vec::with_capacity(data.len() * 8);
            for v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let io = |e| Error::io("<model file>", e);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf).map_err(io)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf).map_err(io)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        let mut json = vec![0u8; len];
        input.read_exact(&mut json).map_err(io)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for info in header.blocks {
            let n: usize = info.shape.iter().product();
            let mut raw = vec![0u8; n * 8];
            input.read_exact(&mut raw).map_err(io)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push((info, data));
        }
        Ok(ModelFile {
            kind: header.kind,
            meta: header.meta,
            blocks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
