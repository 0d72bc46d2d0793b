use proptest::prelude::*;

use ehll::harness::format::{deserialize, serialize};
use ehll::{AnySketch, BucketLayout, CardinalitySketch, SketchKind};

fn kind() -> impl Strategy<Value = SketchKind> {
    prop::sample::select(SketchKind::ALL.to_vec())
}

fn sketch(kind: SketchKind, b: u8, seed: u64, n: u64) -> AnySketch {
    let mut s = AnySketch::new(kind, BucketLayout::with_precision(b).unwrap(), seed).unwrap();
    for i in 0..n {
        s.insert(&i.to_le_bytes());
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip(kind in kind(), b in 4u8..=10, seed: u64, n in 0u64..20_000) {
        let s = sketch(kind, b, seed, n);
        let bytes = serialize(&s).unwrap();
        let back = deserialize(&bytes).unwrap();
        prop_assert_eq!(serialize(&back).unwrap(), bytes);
        prop_assert_eq!(back.estimate(), s.estimate());
        prop_assert_eq!(back, s);
    }

    // Any file the parser accepts re-serializes to the same bytes.
    #[test]
    fn accepted_mutations_are_canonical(
        kind in kind(), b in 4u8..=6, n in 0u64..300,
        flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..4)
    ) {
        let mut bytes = serialize(&sketch(kind, b, 11, n)).unwrap();
        for (i, v) in flips {
            let j = 15 + i.index(bytes.len() - 15);
            bytes[j] ^= v;
        }
        if let Ok(s) = deserialize(&bytes) {
            prop_assert_eq!(serialize(&s).unwrap(), bytes);
        }
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let mut framed = b"EHS1\x01".to_vec();
        framed.extend(bytes);
        if let Ok(s) = deserialize(&framed) {
            prop_assert_eq!(serialize(&s).unwrap(), framed);
        }
    }
}
