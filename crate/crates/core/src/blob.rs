//! Little-endian binary encoding shared by the model and matrix formats.
//!
//! Every blob starts with a four-byte magic, a `u16` version and the scalar
//! width in bytes, so a file written with `f32` is rejected when read as
//! `f64` rather than silently misparsed.

use crate::error::{Error, Result};
use crate::Real;

pub(crate) struct BlobWriter {
    buf: Vec<u8>,
}

impl BlobWriter {
    pub fn new<R: Real>(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        buf.push(R::BYTES);
        BlobWriter { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }

    pub fn reals<R: Real>(&mut self, vs: impl IntoIterator<Item = R>) {
        for v in vs {
            v.put_le(&mut self.buf);
        }
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> BlobReader<'a> {
    /// Check magic, version and scalar width.
    pub fn open<R: Real>(
        bytes: &'a [u8],
        magic: &[u8; 4],
        version: u16,
        what: &'static str,
    ) -> Result<Self> {
        let mut r = BlobReader {
            bytes,
            pos: 0,
            what,
        };
        let got = r.take(4)?;
        if got != magic {
            return Err(Error::format(format!("{what}: bad magic {got:?}")));
        }
        let v = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if v != version {
            return Err(Error::format(format!(
                "{what}: unsupported version {v} (expected {version})"
            )));
        }
        let width = r.u8()?;
        if width != R::BYTES {
            return Err(Error::format(format!(
                "{what}: stored with {width}-byte scalars, reading as {}-byte",
                R::BYTES
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(format!("{}: truncated at byte {}", self.what, self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length prefix, sanity-checked against the bytes that remain.
    pub fn len(&mut self, elem_bytes: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        let remaining = self.bytes.len() - self.pos;
        if n.saturating_mul(elem_bytes.max(1)) > remaining {
            return Err(Error::format(format!(
                "{}: length {n} exceeds remaining {remaining} bytes",
                self.what
            )));
        }
        Ok(n)
    }

    pub fn reals<R: Real>(&mut self, n: usize) -> Result<Vec<R>> {
        let w = R::BYTES as usize;
        let raw = self.take(
            n.checked_mul(w)
                .ok_or_else(|| Error::format("length overflow"))?,
        )?;
        Ok(raw.chunks_exact(w).map(R::get_le).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
