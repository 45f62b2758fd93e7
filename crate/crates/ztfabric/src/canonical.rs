//! Canonical byte encoding for everything that gets hashed or signed.
//!
//! The layout is a fixed wire contract shared by every module in this crate:
//!
//! * fields are encoded in declared order;
//! * every field is a 4-byte big-endian length followed by the raw bytes;
//! * integers are encoded as their 8-byte big-endian representation
//!   (so an integer field is `00 00 00 08` followed by 8 bytes);
//! * an absent optional field is encoded as a zero-length field.
//!
//! Two distinct field sequences can never encode to the same byte string:
//! the length prefixes make the encoding prefix-free per field.

use sha2::{Digest as _, Sha256};

/// A SHA-256 digest.
pub type Digest = [u8; 32];

/// Raw Ed25519 signature bytes.
pub type SignatureBytes = [u8; 64];

/// SHA-256 of `bytes`.
pub fn sha256(bytes: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}

/// Incremental builder for the canonical encoding.
///
/// ```
/// use ztfabric::canonical::CanonicalWriter;
///
/// let mut w = CanonicalWriter::new();
/// w.field_str("agent-1").field_u64(7);
/// let bytes = w.finish();
/// assert_eq!(&bytes[..4], &[0, 0, 0, 7]); // length of "agent-1"
/// ```
#[derive(Debug, Default)]
pub struct CanonicalWriter {
    buf: Vec<u8>,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a raw byte-string field.
    pub fn field_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("canonical field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    /// Append a UTF-8 string field.
    pub fn field_str(&mut self, s: &str) -> &mut Self {
        self.field_bytes(s.as_bytes())
    }

    /// Append an integer field as 8 big-endian bytes.
    pub fn field_u64(&mut self, v: u64) -> &mut Self {
        self.field_bytes(&v.to_be_bytes())
    }

    /// Append an optional byte-string field; `None` encodes as length 0.
    pub fn field_opt_bytes(&mut self, bytes: Option<&[u8]>) -> &mut Self {
        match bytes {
            Some(b) => self.field_bytes(b),
            None => self.field_bytes(&[]),
        }
    }

    /// Consume the writer and return the encoded bytes.
    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_frozen() {
        let mut w = CanonicalWriter::new();
        w.field_str("ab").field_u64(5).field_opt_bytes(None);
        assert_eq!(
            w.finish(),
            vec![
                0, 0, 0, 2, b'a', b'b', // "ab"
                0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 5, // u64 5
                0, 0, 0, 0, // absent optional
            ]
        );
    }

    #[test]
    fn empty_writer_is_empty() {
        assert!(CanonicalWriter::new().finish().is_empty());
    }

    #[test]
    fn field_boundaries_cannot_shift() {
        // ("ab", "c") and ("a", "bc") must encode differently.
        let mut w1 = CanonicalWriter::new();
        w1.field_str("ab").field_str("c");
        let mut w2 = CanonicalWriter::new();
        w2.field_str("a").field_str("bc");
        assert_ne!(w1.finish(), w2.finish());
    }

    #[test]
    fn sha256_matches_known_vector() {
        // SHA-256 of the empty string.
        assert_eq!(
            hex::encode(sha256(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    proptest! {
        #[test]
        fn encoding_is_injective_on_field_lists(
            a in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..16), 0..6),
            b in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..16), 0..6),
        ) {
            let enc = |fields: &[Vec<u8>]| {
                let mut w = CanonicalWriter::new();
                for f in fields {
                    w.field_bytes(f);
                }
                w.finish()
            };
            prop_assert_eq!(enc(&a) == enc(&b), a == b);
        }
    }
}
