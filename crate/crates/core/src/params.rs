//! Named parameter table and its checkpoint file format.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic "PLCK" | version (1) | config length | config text (utf-8)
//! entry count | entries...
//! entry: name length | name (utf-8) | rows | cols | rows*cols f32 (row-major)
//! ```
//!
//! Parameters live in `f64` for computation but are kept representable in
//! `f32` (see [`ParamStore::round_to_f32`]) so a saved checkpoint reloads to
//! exactly the in-memory model.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PLCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

/// The four attention blocks of the encoder, in evaluation order.
pub const ATTENTION_BLOCKS: [&str; 4] = ["cross_query", "cross_video", "self_query", "self_video"];

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Fresh encoder parameters: Xavier-uniform weights, zero biases, unit
    /// layer-norm gains. Values are rounded to `f32` precision.
    pub fn init(config: &ExperimentConfig, rng: &mut impl Rng) -> Self {
        let d = config.model_dim;
        let mut store = Self::new();
        let mut xavier = |store: &mut Self, name: String, rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let w = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
            store.insert(name, w);
        };
        for modality in ["video_proj", "query_proj"] {
            xavier(&mut store, format!("{modality}.weight"), config.input_dim, d);
            store.insert(format!("{modality}.bias"), Array2::zeros((1, d)));
        }
        for block in ATTENTION_BLOCKS {
            for proj in ["q", "k", "v", "o"] {
                xavier(&mut store, format!("{block}.w{proj}"), d, d);
                store.insert(format!("{block}.b{proj}"), Array2::zeros((1, d)));
            }
            store.insert(format!("{block}.ln_gain"), Array2::ones((1, d)));
            store.insert(format!("{block}.ln_bias"), Array2::zeros((1, d)));
        }
        store.round_to_f32();
        store
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        if let Some(i) = self.names.iter().position(|n| *n == name) {
            self.values[i] = value;
        } else {
            self.names.push(name);
            self.values.push(value);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.values.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// Rounds every entry to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            v.mapv_inplace(|x| x as f32 as f64);
        }
    }

    /// Checks that every expected parameter exists with the right shape.
    pub fn check_shapes(&self, config: &ExperimentConfig) -> Result<()> {
        let reference = Self::init(config, &mut ChaCha8Rng::seed_from_u64(0));
        for (name, value) in reference.iter() {
            let got = self.get(name).ok_or_else(|| Error::Shape {
                what: format!("parameter {name}"),
                expected: format!("{:?}", value.dim()),
                got: "missing".into(),
            })?;
            if got.dim() != value.dim() {
                return Err(Error::Shape {
                    what: format!("parameter {name}"),
                    expected: format!("{:?}", value.dim()),
                    got: format!("{:?}", got.dim()),
                });
            }
        }
        Ok(())
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serializes config and parameters into the checkpoint byte layout.
pub fn encode_checkpoint(config: &ExperimentConfig, params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    let text = config.to_text();
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
    put_u32(&mut out, params.len() as u32);
    for (name, value) in params.iter() {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, value.nrows() as u32);
        put_u32(&mut out, value.ncols() as u32);
        for &x in value.iter() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
}

/// Parses checkpoint bytes back into config and parameters.
pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<(ExperimentConfig, ParamStore), String> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let config = ExperimentConfig::from_text(&cur.string()?).map_err(|e| e.to_string())?;
    let count = cur.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = cur.string()?;
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let raw = cur.take(rows * cols * 4)?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let value = Array2::from_shape_vec((rows, cols), data).map_err(|e| e.to_string())?;
        params.insert(name, value);
    }
    if cur.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
    }
    params.check_shapes(&config).map_err(|e| e.to_string())?;
    Ok((config, params))
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &ExperimentConfig, params: &ParamStore) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(config, params);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ExperimentConfig, ParamStore)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}
