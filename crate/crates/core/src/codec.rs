//! Binary model format for [`Mlp`] / [`ScoreNet`] weights.
//!
//! All integers and floats are little-endian:
//!
//! | offset | size | field                                      |
//! |--------|------|--------------------------------------------|
//! | 0      | 4    | magic `b"SGNN"`                            |
//! | 4      | 2    | format version, currently 1                |
//! | 6      | 1    | hidden activation tag, 1 = ReLU            |
//! | 7      | 1    | reserved, 0                                |
//! | 8      | 4    | number of layer sizes `m` (u32)            |
//! | 12     | 4·m  | layer sizes (u32 each)                     |
//! | …      | 8·p  | parameters as IEEE-754 f64                 |
//!
//! Parameters follow [`Mlp::params`]: for each layer, the `out×in` weights in
//! row-major order and then the `out` biases. Trailing bytes are rejected.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::score_net::ScoreNet;

pub const MAGIC: [u8; 4] = *b"SGNN";
pub const VERSION: u16 = 1;
pub const ACTIVATION_RELU: u8 = 1;

pub fn encode_mlp(mlp: &Mlp) -> Vec<u8> {
    let sizes = mlp.sizes();
    let mut out = Vec::with_capacity(12 + 4 * sizes.len() + 8 * mlp.n_params());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(ACTIVATION_RELU);
    out.push(0);
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for p in mlp.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Parse {
                offset: self.pos,
                reason: what,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_mlp(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "truncated magic")? != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: "bad magic",
        });
    }
    let version = u16::from_le_bytes(r.take(2, "truncated version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let act_at = r.pos;
    let header = r.take(2, "truncated header")?;
    if header[0] != ACTIVATION_RELU {
        return Err(Error::Parse {
            offset: act_at,
            reason: "unknown activation",
        });
    }
    let count_at = r.pos;
    let m = r.u32("truncated layer count")? as usize;
    if m < 2 || m > (bytes.len() - r.pos) / 4 {
        return Err(Error::Parse {
            offset: count_at,
            reason: "invalid layer count",
        });
    }
    let mut sizes = Vec::with_capacity(m);
    for _ in 0..m {
        let at = r.pos;
        let s = r.u32("truncated layer sizes")? as usize;
        if s == 0 {
            return Err(Error::Parse {
                offset: at,
                reason: "zero layer size",
            });
        }
        sizes.push(s);
    }
    let n_params: usize = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
    let body_at = r.pos;
    if (bytes.len() - body_at) / 8 < n_params {
        return Err(Error::Parse {
            offset: bytes.len(),
            reason: "truncated parameters",
        });
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let at = r.pos;
        let v = f64::from_le_bytes(r.take(8, "truncated parameters")?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Parse {
                offset: at,
                reason: "non-finite parameter",
            });
        }
        params.push(v);
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse {
            offset: r.pos,
            reason: "trailing bytes",
        });
    }
    Mlp::from_params(&sizes, params)
}

pub fn encode(net: &ScoreNet) -> Vec<u8> {
    encode_mlp(net.mlp())
}

pub fn decode(bytes: &[u8]) -> Result<ScoreNet> {
    ScoreNet::new(decode_mlp(bytes)?)
}
