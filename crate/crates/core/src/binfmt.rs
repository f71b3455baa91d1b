//! Framing shared by the checkpoint and archive formats.
//!
//! ```text
//! magic      [u8; 4]
//! version    u32
//! length     u64   total file length in bytes, checksum included
//! body       ...
//! crc32      u32   over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use crate::error::{Error, Result};

const PREAMBLE: usize = 4 + 4 + 8;
const TRAILER: usize = 4;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        buf.extend_from_slice(&0u64.to_le_bytes());
        Writer { buf }
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

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn f32s(&mut self, values: &[f32]) {
        self.buf.reserve(values.len() * 4);
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let total = (self.buf.len() + TRAILER) as u64;
        self.buf[8..16].copy_from_slice(&total.to_le_bytes());
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    format: &'static str,
    body: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Validates magic, version, declared length and checksum, in that
    /// order, and positions the reader at the start of the body.
    pub fn open(format: &'static str, magic: &[u8; 4], version: u32, bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                format,
                detail: format!("{} bytes, shorter than the magic", bytes.len()),
            });
        }
        if &bytes[..4] != magic {
            return Err(Error::BadMagic {
                format,
                found: bytes[..4].try_into().unwrap(),
            });
        }
        if bytes.len() < PREAMBLE + TRAILER {
            return Err(Error::Truncated {
                format,
                detail: format!("{} bytes, shorter than the fixed header", bytes.len()),
            });
        }
        let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if found != version {
            return Err(Error::UnsupportedVersion {
                format,
                found,
                expected: version,
            });
        }
        let declared = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if declared != bytes.len() as u64 {
            return Err(Error::Truncated {
                format,
                detail: format!("header declares {declared} bytes, file has {}", bytes.len()),
            });
        }
        let split = bytes.len() - TRAILER;
        let stored = u32::from_le_bytes(bytes[split..].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..split]);
        if stored != computed {
            return Err(Error::ChecksumMismatch {
                format,
                stored,
                computed,
            });
        }
        Ok(Reader {
            format,
            body: &bytes[PREAMBLE..split],
            pos: 0,
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.body.len());
        match end {
            Some(end) => {
                let s = &self.body[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                format: self.format,
                detail: format!("body ends inside {what}"),
            }),
        }
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.corrupt(format!("{what} is not UTF-8")))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| self.corrupt(format!("{what} length overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn remaining(&self) -> usize {
        self.body.len() - self.pos
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.body.len() {
            return Err(self.corrupt(format!("{} unread bytes after the payload", self.remaining())));
        }
        Ok(())
    }

    pub fn corrupt(&self, message: String) -> Error {
        Error::Truncated {
            format: self.format,
            detail: message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut w = Writer::new(b"TEST", 3);
        w.u8(7);
        w.str("hello");
        w.f32s(&[1.5, -0.0, f32::MIN_POSITIVE]);
        w.finish()
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let mut r = Reader::open("test", b"TEST", 3, &bytes).unwrap();
        assert_eq!(r.u8("a").unwrap(), 7);
        assert_eq!(r.str("b").unwrap(), "hello");
        let v = r.f32s(3, "c").unwrap();
        assert_eq!(v[1].to_bits(), (-0.0f32).to_bits());
        r.finish().unwrap();
    }

    #[test]
    fn every_single_byte_flip_is_caught() {
        let bytes = sample();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x5a;
            assert!(Reader::open("test", b"TEST", 3, &bad).is_err(), "flip at {i} accepted");
        }
    }

    #[test]
    fn distinct_errors() {
        let bytes = sample();
        assert!(matches!(
            Reader::open("test", b"TEST", 3, &bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(Reader::open("test", b"NOPE", 3, &bytes), Err(Error::BadMagic { .. })));
        assert!(matches!(
            Reader::open("test", b"TEST", 4, &bytes),
            Err(Error::UnsupportedVersion { .. })
        ));
        let mut bad = bytes.clone();
        let mid = bad.len() - 6;
        bad[mid] ^= 1;
        assert!(matches!(
            Reader::open("test", b"TEST", 3, &bad),
            Err(Error::ChecksumMismatch { .. })
        ));
    }
}
