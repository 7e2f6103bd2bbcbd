//! Canonical byte encoding shared by every transcript-visible structure.
//!
//! Layout: fields are concatenated in declaration order, each prefixed by its
//! length as a big-endian `u32`. Fixed-width fields are length-prefixed too so
//! that a reader never needs out-of-band schema knowledge to split a record.

use super::CryptoError;

#[derive(Debug, Default, Clone)]
pub struct CanonicalWriter {
    buf: Vec<u8>,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct CanonicalReader<'a> {
    rest: &'a [u8],
}

impl<'a> CanonicalReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }

    pub fn field(&mut self) -> Result<&'a [u8], CryptoError> {
        if self.rest.len() < 4 {
            return Err(CryptoError::Malformed("truncated length prefix"));
        }
        let (len, tail) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().unwrap()) as usize;
        if tail.len() < len {
            return Err(CryptoError::Malformed("field runs past end of input"));
        }
        let (field, rest) = tail.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], CryptoError> {
        self.field()?
            .try_into()
            .map_err(|_| CryptoError::Malformed("fixed-width field has wrong length"))
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }

    pub fn finish(self) -> Result<(), CryptoError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(CryptoError::Malformed("trailing bytes after last field"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_big_endian_length_prefixed() {
        let mut w = CanonicalWriter::new();
        w.field(b"ab").field(&[]);
        assert_eq!(w.finish(), vec![0, 0, 0, 2, b'a', b'b', 0, 0, 0, 0]);
    }

    #[test]
    fn reader_rejects_truncation_and_trailing_bytes() {
        let mut r = CanonicalReader::new(&[0, 0, 0, 5, 1, 2]);
        assert!(r.field().is_err());
        let mut r = CanonicalReader::new(&[0, 0, 0, 1, 9, 7]);
        assert_eq!(r.field().unwrap(), &[9]);
        assert!(r.finish().is_err());
    }
}
