//! Canonical length-prefixed binary encoding.
//!
//! Every structure that is hashed, signed, exchanged between parties or
//! snapshotted uses this format: big-endian fixed-width integers,
//! `u32`-length-prefixed byte strings, `u32`-count-prefixed lists, and
//! big integers as length-prefixed big-endian magnitudes. Field order is
//! fixed by each type's `encode` implementation, so identical values always
//! produce identical bytes.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("trailing bytes after decode")]
    TrailingBytes,
    #[error("malformed field: {0}")]
    Malformed(&'static str),
}

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(u8::from(v))
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u128(&mut self, v: u128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Raw bytes without a length prefix; for fixed-width fields only.
    pub fn raw(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    /// Length-prefixed byte string.
    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.raw(v)
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    /// Big integer as a length-prefixed big-endian magnitude (empty = zero).
    pub fn biguint(&mut self, v: &BigUint) -> &mut Self {
        self.bytes(&v.to_bytes_be())
    }

    pub fn opt_u64(&mut self, v: Option<u64>) -> &mut Self {
        match v {
            None => self.u8(0),
            Some(x) => {
                self.u8(1);
                self.u64(x)
            }
        }
    }

    /// Count-prefixed list; the closure encodes each item.
    pub fn list<T>(&mut self, items: &[T], mut f: impl FnMut(&mut Self, &T)) -> &mut Self {
        self.u32(items.len() as u32);
        for it in items {
            f(self, it);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }
}

pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { rest: data }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.rest.len() < n {
            return Err(WireError::UnexpectedEof);
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self) -> Result<bool, WireError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(WireError::Malformed("bool")),
        }
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128, WireError> {
        Ok(u128::from_be_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        self.take(n)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, WireError> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    pub fn str(&mut self) -> Result<String, WireError> {
        String::from_utf8(self.bytes()?).map_err(|_| WireError::Malformed("utf8"))
    }

    pub fn biguint(&mut self) -> Result<BigUint, WireError> {
        Ok(BigUint::from_bytes_be(&self.bytes()?))
    }

    pub fn opt_u64(&mut self) -> Result<Option<u64>, WireError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.u64()?)),
            _ => Err(WireError::Malformed("option tag")),
        }
    }

    pub fn list<T>(
        &mut self,
        mut f: impl FnMut(&mut Self) -> Result<T, WireError>,
    ) -> Result<Vec<T>, WireError> {
        let n = self.u32()? as usize;
        // Guard against absurd counts from corrupt input.
        if n > self.rest.len() {
            return Err(WireError::Malformed("list count"));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(f(self)?);
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes)
        }
    }

    pub fn remaining(&self) -> usize {
        self.rest.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_trailing_bytes() {
        let mut enc = Encoder::new();
        enc.u32(5).u8(9);
        let buf = enc.finish();
        let mut dec = Decoder::new(&buf);
        assert_eq!(dec.u32().unwrap(), 5);
        assert_eq!(dec.finish(), Err(WireError::TrailingBytes));
    }

    proptest! {
        #[test]
        fn roundtrip_primitives(a: u64, b: Vec<u8>, c: Option<u64>, big in proptest::collection::vec(any::<u8>(), 0..64)) {
            let big = BigUint::from_bytes_be(&big);
            let mut enc = Encoder::new();
            enc.u64(a).bytes(&b).opt_u64(c).biguint(&big);
            let buf = enc.finish();
            let mut dec = Decoder::new(&buf);
            prop_assert_eq!(dec.u64().unwrap(), a);
            prop_assert_eq!(dec.bytes().unwrap(), b);
            prop_assert_eq!(dec.opt_u64().unwrap(), c);
            prop_assert_eq!(dec.biguint().unwrap(), big);
            dec.finish().unwrap();
        }

        #[test]
        fn roundtrip_lists(items in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..16), 0..8)) {
            let mut enc = Encoder::new();
            enc.list(&items, |e, it| { e.bytes(it); });
            let buf = enc.finish();
            let mut dec = Decoder::new(&buf);
            let back = dec.list(|d| d.bytes()).unwrap();
            dec.finish().unwrap();
            prop_assert_eq!(back, items);
        }
    }
}
