//! Little-endian header + payload helpers shared by every binary file format.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn eof(what: &str, e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format(format!("truncated file while reading {what}"))
    } else {
        Error::Io(e)
    }
}

pub struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf).map_err(|e| eof("magic", e))?;
        if &buf != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&buf),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn expect_version(&mut self, supported: u32) -> Result<()> {
        let v = self.u32("version")?;
        if v != supported {
            return Err(Error::Format(format!(
                "unsupported version {v} (this build reads {supported})"
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        self.inner.read_u8().map_err(|e| eof(what, e))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        self.inner.read_u32::<LittleEndian>().map_err(|e| eof(what, e))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        self.inner.read_u64::<LittleEndian>().map_err(|e| eof(what, e))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        self.inner.read_f64::<LittleEndian>().map_err(|e| eof(what, e))
    }

    pub fn f32_vec(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let mut out = vec![0f32; n];
        self.inner
            .read_f32_into::<LittleEndian>(&mut out)
            .map_err(|e| eof(what, e))?;
        Ok(out)
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = vec![0f64; n];
        self.inner
            .read_f64_into::<LittleEndian>(&mut out)
            .map_err(|e| eof(what, e))?;
        Ok(out)
    }

    pub fn u32_vec(&mut self, n: usize, what: &str) -> Result<Vec<u32>> {
        let mut out = vec![0u32; n];
        self.inner
            .read_u32_into::<LittleEndian>(&mut out)
            .map_err(|e| eof(what, e))?;
        Ok(out)
    }

    /// A `u64` length followed by that many bytes.
    pub fn blob(&mut self, what: &str) -> Result<Vec<u8>> {
        let len = self.u64(what)?;
        let mut out = Vec::new();
        (&mut self.inner).take(len).read_to_end(&mut out)?;
        if out.len() as u64 != len {
            return Err(Error::Format(format!("truncated file while reading {what}")));
        }
        Ok(out)
    }

    /// Fails if any bytes remain.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after payload".into())),
        }
    }
}

pub struct Writer<W> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        Ok(self.inner.write_all(magic)?)
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.inner.write_u8(v)?)
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.inner.write_u32::<LittleEndian>(v)?)
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.inner.write_u64::<LittleEndian>(v)?)
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.inner.write_f64::<LittleEndian>(v)?)
    }

    pub fn f32s(&mut self, vs: &[f32]) -> Result<()> {
        for &v in vs {
            self.inner.write_f32::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.inner.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn u32s(&mut self, vs: &[u32]) -> Result<()> {
        for &v in vs {
            self.inner.write_u32::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn blob(&mut self, bytes: &[u8]) -> Result<()> {
        self.u64(bytes.len() as u64)?;
        Ok(self.inner.write_all(bytes)?)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}
