//! Little-endian binary container for codec models.
//!
//! Layout (version 1):
//!
//! ```text
//! "GVQC"  u32 version  u32 N  u32 M  u32 K  u32 W  u32 T
//! u32 sample_rate  u32 rvq_stages  u32 rvq_M
//! f64[K*T]              analysis, row-major
//! f64[T*K]              synthesis, row-major
//! f64[N*M*(K/N)]        GVQ codebooks in group order
//! f64[rvq_stages*rvq_M*K]  RVQ codebooks in stage order (absent if 0 stages)
//! ```

use ndarray::Array2;

use super::{Codebook, CodecBundle, GvqQuantizer, LinearCodecModel, RvqQuantizer};
use crate::error::{Error, Result};

pub const CODEC_MAGIC: &[u8; 4] = b"GVQC";
pub const CODEC_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("container field exceeds u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn matrix(&mut self, m: &Array2<f64>) {
        // `iter` walks in logical row-major order regardless of layout.
        self.f64s(m.iter());
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> &'a [u8] {
        &self.data[self.pos..]
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("matrix size overflow".into()))?;
        let raw = self.take(n)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite value in matrix".into()));
        }
        Ok(Array2::from_shape_vec((rows, cols), values).expect("shape matches length"))
    }
}

impl CodecBundle {
    pub(crate) fn write_to(&self, w: &mut ByteWriter) {
        let model = &self.model;
        let n = self.gvq.codebooks().len();
        let m = self.gvq.codebooks()[0].size();
        w.bytes(CODEC_MAGIC);
        w.u32(CODEC_VERSION as usize);
        w.u32(n);
        w.u32(m);
        w.u32(model.latent_dim());
        w.u32(model.half_window());
        w.u32(model.frame_samples());
        w.u32(model.sample_rate() as usize);
        match &self.rvq {
            Some(r) => {
                w.u32(r.stages().len());
                w.u32(r.stages()[0].size());
            }
            None => {
                w.u32(0);
                w.u32(0);
            }
        }
        w.matrix(model.analysis());
        w.matrix(model.synthesis());
        for cb in self.gvq.codebooks() {
            w.matrix(cb.entries());
        }
        if let Some(r) = &self.rvq {
            for cb in r.stages() {
                w.matrix(cb.entries());
            }
        }
    }

    /// Serializes the bundle.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        self.write_to(&mut w);
        w.buf
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>) -> Result<Self> {
        r.magic(CODEC_MAGIC)?;
        let version = r.u32()?;
        if version != CODEC_VERSION as usize {
            return Err(Error::Format(format!("unsupported codec version {version}")));
        }
        let (n, m, k, w, t) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let rate = r.u32()? as u32;
        let (stages, rvq_m) = (r.u32()?, r.u32()?);
        if n == 0 || m == 0 || k == 0 || k % n != 0 || t == 0 {
            return Err(Error::Format(format!("inconsistent header N={n} M={m} K={k} T={t}")));
        }
        let analysis = r.matrix(k, t)?;
        let synthesis = r.matrix(t, k)?;
        let model = LinearCodecModel::new(analysis, synthesis, w, t, rate)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut books = Vec::with_capacity(n);
        for _ in 0..n {
            books.push(Codebook::new(r.matrix(m, k / n)?)?);
        }
        let gvq = GvqQuantizer::new(books)?;
        let rvq = if stages > 0 {
            let mut books = Vec::with_capacity(stages);
            for _ in 0..stages {
                books.push(Codebook::new(r.matrix(rvq_m, k)?)?);
            }
            Some(RvqQuantizer::new(books)?)
        } else {
            None
        };
        Ok(Self { model, gvq, rvq })
    }

    /// Parses a bundle; trailing bytes are rejected.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        let bundle = Self::read_from(&mut r)?;
        if !r.remaining().is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after codec container",
                r.remaining().len()
            )));
        }
        Ok(bundle)
    }
}
