//! Canonical, injective, self-delimiting encoding of mixed tuples.
//!
//! Every value is framed as `tag (1 byte) ‖ payload length (4 bytes, big endian) ‖ payload`.
//! Tuples nest by concatenating the framed encodings of their elements. All oracle inputs,
//! associated-data strings and wire messages go through this format.

use thiserror::Error;

pub const TAG_BOTTOM: u8 = 0x00;
pub const TAG_SCALAR: u8 = 0x01;
pub const TAG_ELEMENT: u8 = 0x02;
pub const TAG_BYTES: u8 = 0x03;
pub const TAG_U64: u8 = 0x04;
pub const TAG_PARTY: u8 = 0x05;
pub const TAG_LABEL: u8 = 0x06;
pub const TAG_TUPLE: u8 = 0x10;

/// Length of the `tag ‖ length` frame header.
pub const HEADER_LEN: usize = 5;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input truncated")]
    Truncated,
    #[error("unknown tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("invalid payload length for tag 0x{tag:02x}: {len}")]
    BadLength { tag: u8, len: usize },
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("nesting deeper than {MAX_DEPTH}")]
    TooDeep,
    #[error("payload exceeds 2^32-1 bytes")]
    Oversized,
    #[error("non-canonical scalar")]
    NonCanonicalScalar,
    #[error("non-canonical group element")]
    NonCanonicalElement,
    #[error("unexpected shape: {0}")]
    Shape(&'static str),
}

/// An encodable value.
///
/// `Scalar` and `Element` carry the canonical group encoding; canonicality is checked
/// by the group when converting to and from these variants. `Bottom` is the reserved
/// encoding of an absent (⊥) value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bottom,
    Scalar(Vec<u8>),
    Element(Vec<u8>),
    Bytes(Vec<u8>),
    U64(u64),
    Party(Vec<u8>),
    Label(Vec<u8>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn label(s: impl AsRef<[u8]>) -> Self {
        Value::Label(s.as_ref().to_vec())
    }

    pub fn bytes(s: impl AsRef<[u8]>) -> Self {
        Value::Bytes(s.as_ref().to_vec())
    }

    pub fn party(s: impl AsRef<[u8]>) -> Self {
        Value::Party(s.as_ref().to_vec())
    }

    pub fn tuple(items: impl Into<Vec<Value>>) -> Self {
        Value::Tuple(items.into())
    }

    pub fn tag(&self) -> u8 {
        match self {
            Value::Bottom => TAG_BOTTOM,
            Value::Scalar(_) => TAG_SCALAR,
            Value::Element(_) => TAG_ELEMENT,
            Value::Bytes(_) => TAG_BYTES,
            Value::U64(_) => TAG_U64,
            Value::Party(_) => TAG_PARTY,
            Value::Label(_) => TAG_LABEL,
            Value::Tuple(_) => TAG_TUPLE,
        }
    }

    /// Payload length, excluding this value's own header.
    pub fn payload_len(&self) -> usize {
        match self {
            Value::Bottom => 0,
            Value::U64(_) => 8,
            Value::Scalar(b)
            | Value::Element(b)
            | Value::Bytes(b)
            | Value::Party(b)
            | Value::Label(b) => b.len(),
            Value::Tuple(items) => items.iter().map(Value::encoded_len).sum(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload_len()
    }

    pub fn as_tuple(&self) -> Result<&[Value], CodecError> {
        match self {
            Value::Tuple(items) => Ok(items),
            _ => Err(CodecError::Shape("expected tuple")),
        }
    }

    /// The tuple's items, required to have exactly `n` entries.
    pub fn as_tuple_of(&self, n: usize) -> Result<&[Value], CodecError> {
        let items = self.as_tuple()?;
        if items.len() != n {
            return Err(CodecError::Shape("tuple arity mismatch"));
        }
        Ok(items)
    }

    pub fn as_bytes(&self) -> Result<&[u8], CodecError> {
        match self {
            Value::Bytes(b) => Ok(b),
            _ => Err(CodecError::Shape("expected byte string")),
        }
    }

    pub fn as_label(&self) -> Result<&[u8], CodecError> {
        match self {
            Value::Label(b) => Ok(b),
            _ => Err(CodecError::Shape("expected label")),
        }
    }

    pub fn as_party(&self) -> Result<&[u8], CodecError> {
        match self {
            Value::Party(b) => Ok(b),
            _ => Err(CodecError::Shape("expected party id")),
        }
    }

    pub fn as_u64(&self) -> Result<u64, CodecError> {
        match self {
            Value::U64(v) => Ok(*v),
            _ => Err(CodecError::Shape("expected u64")),
        }
    }

    pub fn is_label(&self, expected: &str) -> bool {
        matches!(self, Value::Label(l) if l == expected.as_bytes())
    }
}

pub fn write_header(out: &mut Vec<u8>, tag: u8, len: usize) {
    let len = u32::try_from(len).expect("codec payload exceeds u32 length field");
    out.push(tag);
    out.extend_from_slice(&len.to_be_bytes());
}

pub fn encode_into(value: &Value, out: &mut Vec<u8>) {
    write_header(out, value.tag(), value.payload_len());
    match value {
        Value::Bottom => {}
        Value::U64(v) => out.extend_from_slice(&v.to_be_bytes()),
        Value::Scalar(b)
        | Value::Element(b)
        | Value::Bytes(b)
        | Value::Party(b)
        | Value::Label(b) => out.extend_from_slice(b),
        Value::Tuple(items) => {
            for item in items {
                encode_into(item, out);
            }
        }
    }
}

pub fn encode(value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(value.encoded_len());
    encode_into(value, &mut out);
    out
}

pub fn decode(bytes: &[u8]) -> Result<Value, CodecError> {
    let (value, used) = decode_prefix(bytes, 0)?;
    if used != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - used));
    }
    Ok(value)
}

fn decode_prefix(bytes: &[u8], depth: usize) -> Result<(Value, usize), CodecError> {
    if depth > MAX_DEPTH {
        return Err(CodecError::TooDeep);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let tag = bytes[0];
    let len = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]) as usize;
    let end = HEADER_LEN.checked_add(len).ok_or(CodecError::Oversized)?;
    let payload = bytes.get(HEADER_LEN..end).ok_or(CodecError::Truncated)?;
    let value = match tag {
        TAG_BOTTOM => {
            if len != 0 {
                return Err(CodecError::BadLength { tag, len });
            }
            Value::Bottom
        }
        TAG_U64 => {
            let raw: [u8; 8] = payload
                .try_into()
                .map_err(|_| CodecError::BadLength { tag, len })?;
            Value::U64(u64::from_be_bytes(raw))
        }
        TAG_SCALAR => Value::Scalar(payload.to_vec()),
        TAG_ELEMENT => Value::Element(payload.to_vec()),
        TAG_BYTES => Value::Bytes(payload.to_vec()),
        TAG_PARTY => Value::Party(payload.to_vec()),
        TAG_LABEL => Value::Label(payload.to_vec()),
        TAG_TUPLE => {
            let mut items = Vec::new();
            let mut rest = payload;
            while !rest.is_empty() {
                let (item, used) = decode_prefix(rest, depth + 1)?;
                items.push(item);
                rest = &rest[used..];
            }
            Value::Tuple(items)
        }
        other => return Err(CodecError::UnknownTag(other)),
    };
    Ok((value, end))
}

/// Incremental builder for a tuple whose elements are already encoded.
///
/// Used on hot paths where a long common prefix is reused across many encodings.
#[derive(Debug, Clone, Default)]
pub struct TupleWriter {
    body: Vec<u8>,
}

impl TupleWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: &Value) -> &mut Self {
        encode_into(value, &mut self.body);
        self
    }

    pub fn push_encoded(&mut self, encoded: &[u8]) -> &mut Self {
        self.body.extend_from_slice(encoded);
        self
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    pub fn finish(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.body.len());
        write_header(&mut out, TAG_TUPLE, self.body.len());
        out.extend_from_slice(&self.body);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tuple() {
        assert_eq!(encode(&Value::Tuple(vec![])), vec![TAG_TUPLE, 0, 0, 0, 0]);
    }

    #[test]
    fn scalar_label_round_trip() {
        let v = Value::tuple(vec![Value::Scalar(vec![3]), Value::label("k31")]);
        let enc = encode(&v);
        assert_eq!(
            enc,
            vec![0x10, 0, 0, 0, 14, 0x01, 0, 0, 0, 1, 3, 0x06, 0, 0, 0, 3, b'k', b'3', b'1']
        );
        assert_eq!(decode(&enc).unwrap(), v);
    }

    #[test]
    fn rejects_trailing_and_truncated() {
        let mut enc = encode(&Value::U64(9));
        enc.push(0);
        assert_eq!(decode(&enc), Err(CodecError::TrailingBytes(1)));
        assert_eq!(decode(&[]), Err(CodecError::Truncated));
        assert_eq!(decode(&[TAG_BYTES, 0, 0, 0, 2, 1]), Err(CodecError::Truncated));
    }

    #[test]
    fn rejects_bad_u64_length_and_unknown_tag() {
        assert!(matches!(
            decode(&[TAG_U64, 0, 0, 0, 1, 7]),
            Err(CodecError::BadLength { .. })
        ));
        assert_eq!(decode(&[0x7f, 0, 0, 0, 0]), Err(CodecError::UnknownTag(0x7f)));
        assert!(decode(&[TAG_BOTTOM, 0, 0, 0, 1, 0]).is_err());
    }

    #[test]
    fn tuple_writer_matches_encode() {
        let items = vec![Value::bytes(b"sid"), Value::U64(5), Value::Bottom];
        let mut w = TupleWriter::new();
        for it in &items {
            w.push(it);
        }
        assert_eq!(w.finish(), encode(&Value::Tuple(items)));
    }

    #[test]
    fn deep_nesting_is_bounded() {
        let mut v = Value::Tuple(vec![]);
        for _ in 0..(MAX_DEPTH + 2) {
            v = Value::Tuple(vec![v]);
        }
        assert_eq!(decode(&encode(&v)), Err(CodecError::TooDeep));
    }
}
