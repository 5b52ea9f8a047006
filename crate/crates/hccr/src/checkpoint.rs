//! Checkpoints: a named-tensor archive tied to the model configuration.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "HZCK" | version u16 | config length u32 | config bytes | config digest u64
//! tensor count u32 | per tensor: name length u16 | name | rank u8 | rank x u32 dims | f64 data
//! ```
//!
//! The configuration is embedded so `eval` can rebuild the network; the digest
//! is FNV-1a 64 over the config bytes.

use std::path::Path;

use hccr_core::model::{ModelConfig, ModelParams};
use hccr_core::Tensor;

use crate::error::{Error, IoContext, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HZCK";
pub const CHECKPOINT_VERSION: u16 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_config(config: &ModelConfig) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, config.input_size);
    put_u32(&mut out, config.in_channels);
    put_u32(&mut out, config.conv_channels.len());
    for &c in &config.conv_channels {
        put_u32(&mut out, c);
    }
    put_u32(&mut out, config.kernel_size);
    put_u32(&mut out, config.conv_stride);
    put_u32(&mut out, config.conv_padding);
    put_u32(&mut out, config.fc_widths.len());
    for &w in &config.fc_widths {
        put_u32(&mut out, w);
    }
    out.extend_from_slice(&config.dropout_prob.to_le_bytes());
    put_u32(&mut out, config.num_classes);
    out.extend_from_slice(&config.leaky_slope.to_le_bytes());
    out
}

pub fn config_digest(config: &ModelConfig) -> u64 {
    fnv1a64(&encode_config(config))
}

/// Bounds-checked little-endian cursor.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated checkpoint: {what} at byte {} needs {n} bytes", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }
}

fn decode_config(bytes: &[u8]) -> Result<ModelConfig> {
    let mut c = Cursor { bytes, pos: 0 };
    let input_size = c.u32("input size")?;
    let in_channels = c.u32("input channels")?;
    let stages = c.u32("stage count")?;
    let conv_channels = (0..stages.min(bytes.len())).map(|_| c.u32("conv channels")).collect::<Result<_>>()?;
    let kernel_size = c.u32("kernel size")?;
    let conv_stride = c.u32("stride")?;
    let conv_padding = c.u32("padding")?;
    let layers = c.u32("layer count")?;
    let fc_widths = (0..layers.min(bytes.len())).map(|_| c.u32("fc widths")).collect::<Result<_>>()?;
    let config = ModelConfig {
        input_size,
        in_channels,
        conv_channels,
        kernel_size,
        conv_stride,
        conv_padding,
        fc_widths,
        dropout_prob: c.f64("dropout")?,
        num_classes: c.u32("classes")?,
        leaky_slope: c.f64("leaky slope")?,
    };
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing config bytes", bytes.len() - c.pos)));
    }
    Ok(config)
}

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let config = encode_config(params.config());
    let mut out = Vec::with_capacity(32 + config.len() + 8 * params.total_values());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, config.len());
    out.extend_from_slice(&config);
    out.extend_from_slice(&fnv1a64(&config).to_le_bytes());
    put_u32(&mut out, params.len());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            put_u32(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad magic {:02X?}, expected \"HZCK\"", &bytes[..4])));
    }
    let version = c.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version}, this build reads {CHECKPOINT_VERSION}")));
    }
    let config_len = c.u32("config length")?;
    let config_bytes = c.take(config_len, "config")?;
    let digest = c.u64("config digest")?;
    if fnv1a64(config_bytes) != digest {
        return Err(Error::Format(format!(
            "config digest mismatch: stored {digest:016x}, computed {:016x}",
            fnv1a64(config_bytes)
        )));
    }
    let config = decode_config(config_bytes)?;
    let count = c.u32("tensor count")?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u8("rank")? as usize;
        let shape = (0..rank).map(|_| c.u32("dims")).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len())).ok_or_else(|| {
            Error::Format(format!("tensor {name} shape {shape:?} exceeds file size"))
        })?;
        let data = (0..n).map(|_| c.f64("tensor data")).collect::<Result<Vec<_>>>()?;
        tensors.push((name, Tensor::new(&shape, data)?));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after tensors", bytes.len() - c.pos)));
    }
    ModelParams::from_tensors(&config, tensors).map_err(Into::into)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params)).at(path)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&std::fs::read(path).at(path)?)
}

/// Loads a checkpoint and rejects it unless it was written for `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<ModelParams> {
    let params = load_checkpoint(path)?;
    let (want, got) = (config_digest(expected), config_digest(params.config()));
    if want != got {
        return Err(Error::Format(format!("checkpoint config digest {got:016x} does not match {want:016x}")));
    }
    Ok(params)
}
