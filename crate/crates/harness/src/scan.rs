//! Global no-export scan: resident KeyBox scalars must not occur in any surface the
//! harness ever emits. Surfaces are kept as raw bytes; textual ones are also matched
//! against the lowercase hex form of each secret.
//!
//! Meaningful only for the production group: toy scalars are one or two bytes wide and
//! collide with arbitrary data.

use std::collections::BTreeSet;

use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::keybox::KeyBox;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ScanHit {
    pub surface: String,
    pub secret_index: usize,
    pub hex: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ScanSummary {
    pub secrets: usize,
    pub surfaces: usize,
    pub bytes_scanned: usize,
    pub hits: Vec<ScanHit>,
}

impl ScanSummary {
    pub fn clean(&self) -> bool {
        self.hits.is_empty() && self.secrets > 0 && self.surfaces > 0
    }
}

struct Surface {
    label: String,
    bytes: Vec<u8>,
    text: bool,
}

#[derive(Default)]
pub struct LeakScanner {
    secrets: BTreeSet<Vec<u8>>,
    surfaces: Vec<Surface>,
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.len() >= needle.len() && hay.windows(needle.len()).any(|w| w == needle)
}

impl LeakScanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves all secrets and surfaces of `other` into `self`.
    pub fn absorb(&mut self, other: LeakScanner) {
        self.secrets.extend(other.secrets);
        self.surfaces.extend(other.surfaces);
    }

    pub fn secret_count(&self) -> usize {
        self.secrets.len()
    }

    pub fn add_resident<G: Group>(&mut self, kb: &KeyBox<G>) {
        self.secrets.extend(kb.audit_resident_encodings());
    }

    pub fn add_bytes(&mut self, label: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.surfaces.push(Surface {
            label: label.into(),
            bytes: bytes.into(),
            text: false,
        });
    }

    pub fn add_text(&mut self, label: impl Into<String>, text: impl Into<String>) {
        self.surfaces.push(Surface {
            label: label.into(),
            bytes: text.into().into_bytes(),
            text: true,
        });
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, label: impl Into<String>, v: &T) {
        self.add_text(label, serde_json::to_string(v).expect("serializable surface"));
    }

    pub fn scan(&self) -> ScanSummary {
        let mut hits = Vec::new();
        for (i, s) in self.secrets.iter().enumerate() {
            let h = hex::encode(s).into_bytes();
            for sf in &self.surfaces {
                if contains(&sf.bytes, s) {
                    hits.push(ScanHit { surface: sf.label.clone(), secret_index: i, hex: false });
                }
                if sf.text && contains(&sf.bytes, &h) {
                    hits.push(ScanHit { surface: sf.label.clone(), secret_index: i, hex: true });
                }
            }
        }
        ScanSummary {
            secrets: self.secrets.len(),
            surfaces: self.surfaces.len(),
            bytes_scanned: self.surfaces.iter().map(|s| s.bytes.len()).sum(),
            hits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_raw_and_hex() {
        let mut s = LeakScanner::new();
        s.secrets.insert(vec![0xde, 0xad, 0xbe, 0xef]);
        s.add_bytes("wire", vec![1, 0xde, 0xad, 0xbe, 0xef, 2]);
        s.add_text("json", "{\"x\":\"00deadbeef\"}");
        s.add_text("clean", "nothing here");
        let r = s.scan();
        assert_eq!(r.hits.len(), 2);
        assert!(!r.clean());
    }
}
