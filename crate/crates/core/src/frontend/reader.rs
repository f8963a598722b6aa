//! Strict little-endian / LEB128 byte reader.
//!
//! Every read reports failures as `MalformedModule` at the offset of the first
//! byte of the item being read. Over-long encodings and non-zero unused bits
//! in the final LEB byte are rejected.

use super::error::ValidationError;

pub type Result<T> = std::result::Result<T, ValidationError>;

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    /// Absolute offset of `data[0]` in the module binary.
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0, base: 0 }
    }

    pub fn with_base(data: &'a [u8], base: usize) -> Reader<'a> {
        Reader { data, pos: 0, base }
    }

    /// Absolute offset of the next byte.
    pub fn offset(&self) -> u32 {
        (self.base + self.pos) as u32
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn eof(&self, what: &str) -> ValidationError {
        ValidationError::malformed(self.offset(), format!("unexpected end of input reading {what}"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.eof("byte"))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn peek_u8(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.eof("bytes"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64_le(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub fn var_u32(&mut self) -> Result<u32> {
        let start = self.offset();
        let mut result: u32 = 0;
        for i in 0..5 {
            let b = self.u8().map_err(|_| ValidationError::malformed(start, "truncated LEB128"))?;
            if i == 4 {
                if b & 0xF0 != 0 {
                    return Err(ValidationError::malformed(start, "LEB128 u32 too long or has non-zero padding"));
                }
                result |= (b as u32) << 28;
                return Ok(result);
            }
            result |= ((b & 0x7F) as u32) << (7 * i);
            if b & 0x80 == 0 {
                return Ok(result);
            }
        }
        unreachable!()
    }

    pub fn var_i32(&mut self) -> Result<i32> {
        let start = self.offset();
        let mut result: i32 = 0;
        let mut shift = 0;
        loop {
            let b = self.u8().map_err(|_| ValidationError::malformed(start, "truncated LEB128"))?;
            if shift == 28 {
                // Final byte: bits 4..6 must replicate the sign bit (bit 3).
                let sign_and_pad = b & 0x78;
                if b & 0x80 != 0 || (sign_and_pad != 0 && sign_and_pad != 0x78) {
                    return Err(ValidationError::malformed(start, "LEB128 i32 too long or has non-zero padding"));
                }
                result |= ((b & 0x0F) as i32) << 28;
                return Ok(result);
            }
            result |= ((b & 0x7F) as i32) << shift;
            shift += 7;
            if b & 0x80 == 0 {
                if b & 0x40 != 0 {
                    result |= -1i32 << shift;
                }
                return Ok(result);
            }
        }
    }

    pub fn var_i64(&mut self) -> Result<i64> {
        let start = self.offset();
        let mut result: i64 = 0;
        let mut shift = 0;
        loop {
            let b = self.u8().map_err(|_| ValidationError::malformed(start, "truncated LEB128"))?;
            if shift == 63 {
                // Final byte holds only bit 63; bits 1..6 must replicate it.
                let rest = b & 0x7F;
                if b & 0x80 != 0 || (rest != 0 && rest != 0x7F) {
                    return Err(ValidationError::malformed(start, "LEB128 i64 too long or has non-zero padding"));
                }
                result |= ((b & 0x01) as i64) << 63;
                return Ok(result);
            }
            result |= ((b & 0x7F) as i64) << shift;
            shift += 7;
            if b & 0x80 == 0 {
                if b & 0x40 != 0 {
                    result |= -1i64 << shift;
                }
                return Ok(result);
            }
        }
    }

    /// Signed 33-bit LEB as used by block types; returned widened.
    pub fn var_s33(&mut self) -> Result<i64> {
        let start = self.offset();
        let mut result: i64 = 0;
        let mut shift = 0;
        loop {
            let b = self.u8().map_err(|_| ValidationError::malformed(start, "truncated LEB128"))?;
            if shift == 28 {
                // Bits 33.. live in bits 5..6 of this byte and must replicate bit 4.
                let pad = b & 0x70;
                if b & 0x80 != 0 || (pad != 0 && pad != 0x70) {
                    return Err(ValidationError::malformed(start, "LEB128 s33 too long or has non-zero padding"));
                }
                result |= ((b & 0x7F) as i64) << 28;
                if b & 0x40 != 0 {
                    result |= -1i64 << 35;
                }
                return Ok(result);
            }
            result |= ((b & 0x7F) as i64) << shift;
            shift += 7;
            if b & 0x80 == 0 {
                if b & 0x40 != 0 {
                    result |= -1i64 << shift;
                }
                return Ok(result);
            }
        }
    }

    /// Length-prefixed byte string.
    pub fn name_bytes(&mut self) -> Result<&'a [u8]> {
        let start = self.offset();
        let len = self.var_u32()? as usize;
        if self.remaining() < len {
            return Err(ValidationError::malformed(start, "name length exceeds input"));
        }
        self.bytes(len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::error::ValidationCode;

    #[test]
    fn u32_roundtrip_and_padding() {
        assert_eq!(Reader::new(&[0x00]).var_u32().unwrap(), 0);
        assert_eq!(Reader::new(&[0xE5, 0x8E, 0x26]).var_u32().unwrap(), 624485);
        assert_eq!(Reader::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x0F]).var_u32().unwrap(), u32::MAX);
        // non-zero unused bits in the last byte
        let e = Reader::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x1F]).var_u32().unwrap_err();
        assert_eq!(e.code, ValidationCode::MalformedModule);
        // six bytes
        assert!(Reader::new(&[0x80, 0x80, 0x80, 0x80, 0x80, 0x00]).var_u32().is_err());
        // redundant but legal padding with zero bits
        assert_eq!(Reader::new(&[0x80, 0x80, 0x00]).var_u32().unwrap(), 0);
    }

    #[test]
    fn signed_leb() {
        assert_eq!(Reader::new(&[0x7F]).var_i32().unwrap(), -1);
        assert_eq!(Reader::new(&[0x80, 0x80, 0x80, 0x80, 0x78]).var_i32().unwrap(), i32::MIN);
        assert_eq!(Reader::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x07]).var_i32().unwrap(), i32::MAX);
        assert!(Reader::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x4F]).var_i32().is_err());
        assert_eq!(Reader::new(&[0x7F]).var_i64().unwrap(), -1);
        let min = [0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x7F];
        assert_eq!(Reader::new(&min).var_i64().unwrap(), i64::MIN);
        let bad = [0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x01 | 0x02];
        assert!(Reader::new(&bad).var_i64().is_err());
        assert_eq!(Reader::new(&[0x40]).var_s33().unwrap(), -64);
    }

    #[test]
    fn truncation_reports_item_start() {
        let mut r = Reader::with_base(&[0x01, 0x80], 100);
        r.u8().unwrap();
        let e = r.var_u32().unwrap_err();
        assert_eq!(e.offset, 101);
    }
}
