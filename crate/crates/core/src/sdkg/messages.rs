//! Wire messages. Each round is one labelled codec tuple.

use crate::algebra::Group;
use crate::codec::{decode, encode, CodecError, Value};
use crate::fischlin::{AffineProof, FischlinParams};
use crate::keybox::seal::SealedBlob;
use crate::oracle::Digest;
use crate::usv::{UsvCertificate, UsvTag};

const R1: &str = "SDKG.R1";
const R2: &str = "SDKG.R2";
const R3: &str = "SDKG.R3";
const PUB: &str = "SDKG.K";
const REG1: &str = "SDKG.Reg1";
const REG2: &str = "SDKG.Reg2";

fn digest(v: &Value) -> Result<Digest, CodecError> {
    v.as_bytes()?.try_into().map_err(|_| CodecError::Shape("digest length"))
}

/// `(C2, ζ2, B2, h32, σ21, sid, cid2, d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round1<G: Group> {
    pub sid: Vec<u8>,
    pub cid2: Vec<u8>,
    pub c2: G::Element,
    pub zeta2: UsvTag<G>,
    pub b2: G::Element,
    pub h32: Digest,
    pub s21: G::Scalar,
    pub d: Digest,
}

/// `(sid, X1, M1, B1, σ12, π_aff1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round2<G: Group> {
    pub sid: Vec<u8>,
    pub x1: G::Element,
    pub m1: G::Element,
    pub b1: G::Element,
    pub s12: G::Scalar,
    pub aff1: AffineProof<G>,
}

/// `(X2, π_aff2, K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round3<G: Group> {
    pub sid: Vec<u8>,
    pub x2: G::Element,
    pub aff2: AffineProof<G>,
    pub k: G::Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Publish<G: Group> {
    pub sid: Vec<u8>,
    pub k: G::Element,
}

/// Center to joiner: `(sid, ϖ1, K13, K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reg1<G: Group> {
    pub sid: Vec<u8>,
    pub blob: SealedBlob,
    pub k13: G::Element,
    pub k: G::Element,
}

/// Sponsor to joiner: `(sid, ϖ2a, ϖ2b, K13)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reg2<G: Group> {
    pub sid: Vec<u8>,
    pub blob_a: SealedBlob,
    pub blob_b: SealedBlob,
    pub k13: G::Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message<G: Group> {
    R1(Round1<G>),
    R2(Round2<G>),
    R3(Round3<G>),
    Pub(Publish<G>),
    Reg1(Reg1<G>),
    Reg2(Reg2<G>),
}

impl<G: Group> Round1<G> {
    /// `(C2, ζ2)` as it appears on the wire.
    pub fn cert_value(&self, grp: &G, params: &FischlinParams) -> Value {
        UsvCertificate {
            c: self.c2,
            tag: self.zeta2.clone(),
        }
        .to_value(grp, params)
    }

    fn fields(&self, grp: &G, params: &FischlinParams) -> Vec<Value> {
        vec![
            Value::bytes(&self.sid),
            Value::bytes(&self.cid2),
            self.cert_value(grp, params),
            grp.element_value(&self.b2),
            Value::bytes(self.h32),
            grp.scalar_value(&self.s21),
            Value::bytes(self.d),
        ]
    }

    fn parse(grp: &G, it: &[Value]) -> Result<Self, CodecError> {
        if it.len() != 7 {
            return Err(CodecError::Shape("round 1 arity"));
        }
        let cert = UsvCertificate::from_value(grp, &it[2])?;
        Ok(Self {
            sid: it[0].as_bytes()?.to_vec(),
            cid2: it[1].as_bytes()?.to_vec(),
            c2: cert.c,
            zeta2: cert.tag,
            b2: grp.parse_element(&it[3])?,
            h32: digest(&it[4])?,
            s21: grp.parse_scalar(&it[5])?,
            d: digest(&it[6])?,
        })
    }
}

impl<G: Group> Round2<G> {
    fn fields(&self, grp: &G, params: &FischlinParams) -> Vec<Value> {
        vec![
            Value::bytes(&self.sid),
            grp.element_value(&self.x1),
            grp.element_value(&self.m1),
            grp.element_value(&self.b1),
            grp.scalar_value(&self.s12),
            self.aff1.to_value(grp, params),
        ]
    }

    fn parse(grp: &G, it: &[Value]) -> Result<Self, CodecError> {
        if it.len() != 6 {
            return Err(CodecError::Shape("round 2 arity"));
        }
        Ok(Self {
            sid: it[0].as_bytes()?.to_vec(),
            x1: grp.parse_element(&it[1])?,
            m1: grp.parse_element(&it[2])?,
            b1: grp.parse_element(&it[3])?,
            s12: grp.parse_scalar(&it[4])?,
            aff1: AffineProof::from_value(grp, &it[5])?,
        })
    }
}

impl<G: Group> Round3<G> {
    fn fields(&self, grp: &G, params: &FischlinParams) -> Vec<Value> {
        vec![
            Value::bytes(&self.sid),
            grp.element_value(&self.x2),
            self.aff2.to_value(grp, params),
            grp.element_value(&self.k),
        ]
    }

    fn parse(grp: &G, it: &[Value]) -> Result<Self, CodecError> {
        if it.len() != 4 {
            return Err(CodecError::Shape("round 3 arity"));
        }
        Ok(Self {
            sid: it[0].as_bytes()?.to_vec(),
            x2: grp.parse_element(&it[1])?,
            aff2: AffineProof::from_value(grp, &it[2])?,
            k: grp.parse_element(&it[3])?,
        })
    }
}

fn labelled(label: &str, mut fields: Vec<Value>) -> Value {
    fields.insert(0, Value::label(label));
    Value::Tuple(fields)
}

impl<G: Group> Message<G> {
    pub fn to_value(&self, grp: &G, params: &FischlinParams) -> Value {
        match self {
            Message::R1(m) => labelled(R1, m.fields(grp, params)),
            Message::R2(m) => labelled(R2, m.fields(grp, params)),
            Message::R3(m) => labelled(R3, m.fields(grp, params)),
            Message::Pub(m) => labelled(PUB, vec![Value::bytes(&m.sid), grp.element_value(&m.k)]),
            Message::Reg1(m) => labelled(
                REG1,
                vec![
                    Value::bytes(&m.sid),
                    m.blob.to_value(),
                    grp.element_value(&m.k13),
                    grp.element_value(&m.k),
                ],
            ),
            Message::Reg2(m) => labelled(
                REG2,
                vec![
                    Value::bytes(&m.sid),
                    m.blob_a.to_value(),
                    m.blob_b.to_value(),
                    grp.element_value(&m.k13),
                ],
            ),
        }
    }

    pub fn from_value(grp: &G, v: &Value) -> Result<Self, CodecError> {
        let items = v.as_tuple()?;
        let (head, it) = items.split_first().ok_or(CodecError::Shape("empty message"))?;
        let label = head.as_label()?;
        let arity = |n: usize| {
            if it.len() == n {
                Ok(())
            } else {
                Err(CodecError::Shape("message arity"))
            }
        };
        match label {
            l if l == R1.as_bytes() => Ok(Message::R1(Round1::parse(grp, it)?)),
            l if l == R2.as_bytes() => Ok(Message::R2(Round2::parse(grp, it)?)),
            l if l == R3.as_bytes() => Ok(Message::R3(Round3::parse(grp, it)?)),
            l if l == PUB.as_bytes() => {
                arity(2)?;
                Ok(Message::Pub(Publish {
                    sid: it[0].as_bytes()?.to_vec(),
                    k: grp.parse_element(&it[1])?,
                }))
            }
            l if l == REG1.as_bytes() => {
                arity(4)?;
                Ok(Message::Reg1(Reg1 {
                    sid: it[0].as_bytes()?.to_vec(),
                    blob: SealedBlob::from_value(&it[1])?,
                    k13: grp.parse_element(&it[2])?,
                    k: grp.parse_element(&it[3])?,
                }))
            }
            l if l == REG2.as_bytes() => {
                arity(4)?;
                Ok(Message::Reg2(Reg2 {
                    sid: it[0].as_bytes()?.to_vec(),
                    blob_a: SealedBlob::from_value(&it[1])?,
                    blob_b: SealedBlob::from_value(&it[2])?,
                    k13: grp.parse_element(&it[3])?,
                }))
            }
            _ => Err(CodecError::Shape("unknown message label")),
        }
    }

    pub fn encode(&self, grp: &G, params: &FischlinParams) -> Vec<u8> {
        encode(&self.to_value(grp, params))
    }

    pub fn decode(grp: &G, bytes: &[u8]) -> Result<Self, CodecError> {
        Self::from_value(grp, &decode(bytes)?)
    }
}

/// `T = (T1, T2, T3)` as consumed by the acceptance predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdkgTranscript<G: Group> {
    pub t1: Round1<G>,
    pub t2: Round2<G>,
    pub t3: Round3<G>,
}

impl<G: Group> SdkgTranscript<G> {
    pub fn to_value(&self, grp: &G, params: &FischlinParams) -> Value {
        Value::tuple(vec![
            Message::R1(self.t1.clone()).to_value(grp, params),
            Message::R2(self.t2.clone()).to_value(grp, params),
            Message::R3(self.t3.clone()).to_value(grp, params),
        ])
    }

    pub fn from_value(grp: &G, v: &Value) -> Result<Self, CodecError> {
        let it = v.as_tuple_of(3)?;
        match (
            Message::from_value(grp, &it[0])?,
            Message::from_value(grp, &it[1])?,
            Message::from_value(grp, &it[2])?,
        ) {
            (Message::R1(t1), Message::R2(t2), Message::R3(t3)) => Ok(Self { t1, t2, t3 }),
            _ => Err(CodecError::Shape("transcript round order")),
        }
    }

    /// Encoded byte size of each round message, in order.
    pub fn round_sizes(&self, grp: &G, params: &FischlinParams) -> [usize; 3] {
        [
            Message::R1(self.t1.clone()).to_value(grp, params).encoded_len(),
            Message::R2(self.t2.clone()).to_value(grp, params).encoded_len(),
            Message::R3(self.t3.clone()).to_value(grp, params).encoded_len(),
        ]
    }
}
