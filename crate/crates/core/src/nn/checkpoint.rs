//! Binary network checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "GOLDCKPT"            8 bytes magic
//! version               u32
//! layer count           u32
//! per layer:
//!   out, in             u32, u32
//!   activation tag      u8
//!   spectral flag       u8   (1 = u vector follows the bias)
//!   weights             out*in f64, row-major
//!   bias                out f64
//!   spectral u          out f64 (if flagged)
//! ```

use std::io::{Read, Write};

use super::layer::{Activation, DenseLayer, SpectralState};
use super::network::Mlp;
use super::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GOLDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_network<W: Write>(w: &mut W, net: &Mlp) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        w.write_all(&(l.out_dim() as u32).to_le_bytes())?;
        w.write_all(&(l.in_dim() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.tag(), u8::from(l.spectral.is_some())])?;
        for v in l.weight.data().iter().chain(&l.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(s) = &l.spectral {
            for v in &s.u {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Byte-counting reader so format errors can report where they happened.
pub(crate) struct Cursor<R> {
    inner: R,
    pub offset: u64,
}

impl<R: Read> Cursor<R> {
    pub fn new(inner: R) -> Self {
        Cursor { inner, offset: 0 }
    }

    pub fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Format {
            offset: self.offset,
            message: format!("truncated while reading {what}"),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    pub fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    pub fn f64_le(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>(what)?))
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64_le(what)).collect()
    }

    pub fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.into(),
        }
    }
}

pub fn read_network<R: Read>(r: R) -> Result<Mlp> {
    let mut c = Cursor::new(r);
    read_network_from(&mut c)
}

pub(crate) fn read_network_from<R: Read>(c: &mut Cursor<R>) -> Result<Mlp> {
    let magic = c.bytes::<8>("magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad checkpoint magic".into(),
        });
    }
    let version = c.u32_le("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(c.fail(format!("unsupported checkpoint version {version}")));
    }
    let count = c.u32_le("layer count")? as usize;
    if count == 0 {
        return Err(c.fail("checkpoint has no layers"));
    }
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let out = c.u32_le("layer dims")? as usize;
        let inp = c.u32_le("layer dims")? as usize;
        let [tag, flag] = c.bytes::<2>("layer tags")?;
        let activation = Activation::from_tag(tag)
            .ok_or_else(|| c.fail(format!("layer {i}: unknown activation tag {tag}")))?;
        let weights = c.f64_vec(out * inp, "weights")?;
        let bias = c.f64_vec(out, "bias")?;
        let spectral = match flag {
            0 => None,
            1 => Some(SpectralState {
                u: c.f64_vec(out, "spectral u")?,
            }),
            f => return Err(c.fail(format!("layer {i}: bad spectral flag {f}"))),
        };
        layers.push(DenseLayer {
            weight: Tensor::from_vec(out, inp, weights)?,
            bias,
            activation,
            spectral,
        });
    }
    Mlp::new(layers).map_err(|e| c.fail(e.to_string()))
}
