use proptest::prelude::*;
use stardkg::codec::{decode, encode, Value};

fn leaf() -> impl Strategy<Value = Value> {
    let bytes = || prop::collection::vec(any::<u8>(), 0..40);
    prop_oneof![
        Just(Value::Bottom),
        bytes().prop_map(Value::Scalar),
        bytes().prop_map(Value::Element),
        bytes().prop_map(Value::Bytes),
        any::<u64>().prop_map(Value::U64),
        bytes().prop_map(Value::Party),
        bytes().prop_map(Value::Label),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(4, 64, 6, |inner| prop::collection::vec(inner, 0..6).prop_map(Value::Tuple))
}

proptest! {
    #[test]
    fn round_trip(v in value()) {
        let b = encode(&v);
        prop_assert_eq!(b.len(), v.encoded_len());
        prop_assert_eq!(decode(&b).unwrap(), v);
    }

    #[test]
    fn injective(a in value(), b in value()) {
        prop_assert_eq!(a == b, encode(&a) == encode(&b));
    }

    #[test]
    fn no_proper_prefix_decodes(v in value(), cut in any::<prop::sample::Index>()) {
        let b = encode(&v);
        let n = cut.index(b.len());
        prop_assert!(decode(&b[..n]).is_err());
    }

    #[test]
    fn trailing_bytes_rejected(v in value(), extra in prop::collection::vec(any::<u8>(), 1..8)) {
        let mut b = encode(&v);
        b.extend(extra);
        prop_assert!(decode(&b).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(b in prop::collection::vec(any::<u8>(), 0..128)) {
        if let Ok(v) = decode(&b) {
            prop_assert_eq!(encode(&v), b);
        }
    }
}
