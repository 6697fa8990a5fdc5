//! Raw filter-weight files for driving the deep-filter path.
//!
//! Layout (little endian): magic `MFW1`, `u32` order, `u32` bins, `u32`
//! frames, then `frames × bins × order` complex weights as interleaved `f32`
//! `(re, im)` pairs, tap index fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVec, MAX_ORDER};

pub const MAGIC: &[u8; 4] = b"MFW1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    order: usize,
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl WeightSequence {
    pub fn new(order: usize, bins: usize, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        if data.len() != order * bins * frames {
            return Err(Error::WeightFile(format!(
                "{} weights for {order} taps x {bins} bins x {frames} frames",
                data.len()
            )));
        }
        Ok(Self { order, bins, frames, data })
    }

    /// Selection filter `e` in every bin and frame.
    pub fn identity(order: usize, bins: usize, frames: usize, selection_index: usize) -> Result<Self> {
        let e = CVec::unit(order, selection_index)?;
        let data = (0..bins * frames).flat_map(|_| e.iter().copied()).collect();
        Self::new(order, bins, frames, data)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, frame: usize, bin: usize) -> Result<CVec> {
        if frame >= self.frames || bin >= self.bins {
            return Err(Error::WeightFile(format!(
                "no weights for frame {frame}, bin {bin} ({} frames x {} bins)",
                self.frames, self.bins
            )));
        }
        let start = (frame * self.bins + bin) * self.order;
        CVec::from_slice(&self.data[start..start + self.order])
    }

    pub fn set(&mut self, frame: usize, bin: usize, w: &CVec) -> Result<()> {
        if w.len() != self.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                got: w.len(),
            });
        }
        if frame >= self.frames || bin >= self.bins {
            return Err(Error::WeightFile(format!("frame {frame}, bin {bin} out of range")));
        }
        let start = (frame * self.bins + bin) * self.order;
        self.data[start..start + self.order].copy_from_slice(w);
        Ok(())
    }

    pub fn read_from(mut reader: impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        reader.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::WeightFile("bad magic".into()));
        }
        let field = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let (order, bins, frames) = (field(1), field(2), field(3));
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        let count = order
            .checked_mul(bins)
            .and_then(|n| n.checked_mul(frames))
            .ok_or_else(|| Error::WeightFile("dimensions overflow".into()))?;
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        if payload.len() != count * 8 {
            return Err(Error::WeightFile(format!(
                "expected {} payload bytes, found {}",
                count * 8,
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Self::new(order, bins, frames, data)
    }

    pub fn write_to(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(MAGIC)?;
        for v in [self.order, self.bins, self.frames] {
            writer.write_all(&(v as u32).to_le_bytes())?;
        }
        for c in &self.data {
            writer.write_all(&(c.re as f32).to_le_bytes())?;
            writer.write_all(&(c.im as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
