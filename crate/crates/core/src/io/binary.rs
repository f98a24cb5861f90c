//! Little-endian cursor helpers shared by the file formats and the wire
//! protocol.

use crate::error::{Error, Result};
use crate::rotation::{Rotation, Vec3};
use nalgebra::Matrix3;

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], format: &'static str) -> Self {
        Self {
            buf,
            pos: 0,
            format,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated {
                format: self.format,
                offset: self.pos,
                needed: n,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if &found != expected {
            return Err(Error::BadMagic {
                expected: *expected,
                found,
            });
        }
        Ok(())
    }

    /// Reads a u32 version and rejects anything but `supported`.
    pub(crate) fn version(&mut self, supported: u32) -> Result<()> {
        let version = self.u32()?;
        if version != supported {
            return Err(Error::UnsupportedVersion {
                format: self.format,
                version,
            });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(self.malformed(format!("non-finite value at offset {}", self.pos - 4)));
        }
        Ok(v)
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(self.malformed(format!("non-finite value at offset {}", self.pos - 8)));
        }
        Ok(v)
    }

    pub(crate) fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(self.malformed(format!("flag byte {b}"))),
        }
    }

    /// A u32 count, bounded by `max` so corrupt headers cannot trigger huge
    /// allocations.
    pub(crate) fn count(&mut self, max: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > max {
            return Err(self.malformed(format!("count {n} exceeds limit {max}")));
        }
        Ok(n)
    }

    pub(crate) fn vec3_f32(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(
            self.f32()? as f64,
            self.f32()? as f64,
            self.f32()? as f64,
        ))
    }

    /// Nine row-major f32 entries, taken as-is (no re-orthonormalization, so
    /// files round-trip exactly).
    pub(crate) fn rotation_f32(&mut self) -> Result<Rotation> {
        let mut v = [0.0; 9];
        for x in &mut v {
            *x = self.f32()? as f64;
        }
        Ok(Rotation::from_matrix_unchecked(Matrix3::from_row_slice(&v)))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.malformed(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    pub(crate) fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::Malformed {
            format: self.format,
            reason: reason.into(),
        }
    }
}

pub(crate) trait WriteLe {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u32(&mut self, v: u32);
    fn put_u64(&mut self, v: u64);
    fn put_f32(&mut self, v: f32);
    fn put_f64(&mut self, v: f64);
    fn put_vec3_f32(&mut self, v: &Vec3);
    fn put_rotation_f32(&mut self, r: &Rotation);
}

impl WriteLe for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }

    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_u64(&mut self, v: u64) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_f32(&mut self, v: f32) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_f64(&mut self, v: f64) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_vec3_f32(&mut self, v: &Vec3) {
        for x in v.iter() {
            self.put_f32(*x as f32);
        }
    }

    fn put_rotation_f32(&mut self, r: &Rotation) {
        for x in r.to_row_major() {
            self.put_f32(x as f32);
        }
    }
}

/// Converts a length to the u32 used in headers.
pub(crate) fn len_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("{what} {n} does not fit in a u32 header")))
}
