//! Binary snapshot format.
//!
//! Layout (little endian): magic `EZSN`, version `u32`, `N` `u32`, closure
//! id `u8`, step `u64`, time `f64`, seed `u64`, then `N²` entries as
//! `(re, im)` `f64` pairs in row-major order.

use std::fs;
use std::path::Path;

use crate::dynamics::ClosureKind;
use crate::error::{Error, Result};
use crate::matrix::ZMatrix;

pub const MAGIC: &[u8; 4] = b"EZSN";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 8 + 8 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub closure: ClosureKind,
    pub step: u64,
    pub time: f64,
    pub seed: u64,
    pub state: ZMatrix<f64>,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.state.n();
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * n * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.push(self.closure.id());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for (re, im) in self.state.re().iter().zip(self.state.im()) {
            out.extend_from_slice(&re.to_le_bytes());
            out.extend_from_slice(&im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("truncated header ({} bytes)", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err("bad magic, not a snapshot file".into());
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported version {version} (expected {VERSION})"));
        }
        let n = u32_at(8) as usize;
        if n < 2 {
            return Err(format!("invalid size N = {n}"));
        }
        let closure = ClosureKind::from_id(bytes[12]).ok_or(format!("unknown closure id {}", bytes[12]))?;
        let step = u64_at(13);
        let time = f64::from_bits(u64_at(21));
        let seed = u64_at(29);
        let body = &bytes[HEADER_LEN..];
        if body.len() != 16 * n * n {
            return Err(format!(
                "expected {} data bytes for N = {n}, found {}",
                16 * n * n,
                body.len()
            ));
        }
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for pair in body.chunks_exact(16) {
            re.push(f64::from_le_bytes(pair[..8].try_into().unwrap()));
            im.push(f64::from_le_bytes(pair[8..].try_into().unwrap()));
        }
        Ok(Snapshot {
            closure,
            step,
            time,
            seed,
            state: ZMatrix::from_parts(n, re, im).map_err(|e| e.to_string())?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| Error::format(path, reason))
    }
}
