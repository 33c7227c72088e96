//! Versioned little-endian checkpoint files.
//!
//! Layout: magic `HBKCKPT\0`, `u32` version, `u32` length plus UTF-8 grid
//! header line, `f64` alpha, `u64` step, `f64` time, `u64` count plus `f64`
//! field values, `u64` count plus `f64` running maximum, five `f64` initial
//! moments, `f64` Bony cumulative, rate and projection residual, three `u64`
//! counters, then a `u64` FNV-1a hash of everything before it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridHeader;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HBKCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a run bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: GridHeader,
    pub alpha: f64,
    pub step: u64,
    pub time: f64,
    pub data: Vec<f64>,
    pub running_max: Vec<f64>,
    pub initial_moments: [f64; 5],
    pub bony_cumulative: f64,
    pub bony_rate: f64,
    pub projection_residual: f64,
    pub sweeps: u64,
    pub unconverged: u64,
    pub limited: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + 8 * (self.data.len() + self.running_max.len()));
        b.extend_from_slice(CHECKPOINT_MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let line = self.header.to_line();
        b.extend_from_slice(&(line.len() as u32).to_le_bytes());
        b.extend_from_slice(line.as_bytes());
        b.extend_from_slice(&self.alpha.to_le_bytes());
        b.extend_from_slice(&self.step.to_le_bytes());
        b.extend_from_slice(&self.time.to_le_bytes());
        for v in [&self.data, &self.running_max] {
            b.extend_from_slice(&(v.len() as u64).to_le_bytes());
            for x in v.iter() {
                b.extend_from_slice(&x.to_le_bytes());
            }
        }
        for x in self
            .initial_moments
            .iter()
            .chain([self.bony_cumulative, self.bony_rate, self.projection_residual].iter())
        {
            b.extend_from_slice(&x.to_le_bytes());
        }
        for n in [self.sweeps, self.unconverged, self.limited] {
            b.extend_from_slice(&n.to_le_bytes());
        }
        let h = fnv1a(&b);
        b.extend_from_slice(&h.to_le_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err("not a checkpoint file".into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body).to_le_bytes() != tail {
            return Err("checksum mismatch".into());
        }
        let mut r = Reader { b: body, at: 8 };
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let line = std::str::from_utf8(r.take(len)?).map_err(|e| e.to_string())?;
        let header = GridHeader::parse_line(line).map_err(|e| e.to_string())?;
        let alpha = r.f64()?;
        let step = r.u64()?;
        let time = r.f64()?;
        let data = r.vec()?;
        let running_max = r.vec()?;
        let mut initial_moments = [0.0; 5];
        for m in initial_moments.iter_mut() {
            *m = r.f64()?;
        }
        let ck = Checkpoint {
            header,
            alpha,
            step,
            time,
            data,
            running_max,
            initial_moments,
            bony_cumulative: r.f64()?,
            bony_rate: r.f64()?,
            projection_residual: r.f64()?,
            sweeps: r.u64()?,
            unconverged: r.u64()?,
            limited: r.u64()?,
        };
        if r.at != body.len() {
            return Err("trailing bytes".into());
        }
        Ok(ck)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.b.len()).ok_or("truncated file")?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn vec(&mut self) -> std::result::Result<Vec<f64>, String> {
        let n = self.u64()? as usize;
        if n > (self.b.len() - self.at) / 8 {
            return Err("truncated file".into());
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, ck.to_bytes())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    Checkpoint::from_bytes(&bytes).map_err(|reason| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}
