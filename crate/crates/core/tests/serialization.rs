use proptest::prelude::*;
use s2mlp::serialize::{decode_weights, encode_weights, parse_config, render_config};
use s2mlp::{
    BlockKind, Error, ModelConfig, NormKind, ParamStore, ShiftConfig, Tensor, WeightFileError,
};

/// Byte-level reference writer for the weight format.
fn reference_encode(store: &ParamStore<f32>) -> Vec<u8> {
    let mut entries: Vec<_> = store.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = b"S2MLPWTS".to_vec();
    out.extend(1u32.to_le_bytes());
    out.extend((entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend((name.len() as u16).to_le_bytes());
        out.extend(name.as_bytes());
        out.push(0);
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend((d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend(crc.to_le_bytes());
    out
}

fn store() -> impl Strategy<Value = ParamStore<f32>> {
    let tensor = prop::collection::vec(1usize..4, 1..4).prop_flat_map(|shape| {
        let n = shape.iter().product::<usize>();
        prop::collection::vec(-1e3f32..1e3, n)
            .prop_map(move |d| Tensor::from_vec(&shape, d).unwrap())
    });
    prop::collection::btree_map("[a-z][a-z0-9_.]{0,12}", tensor, 1..6).prop_map(|m| {
        let mut s = ParamStore::new();
        for (k, v) in m {
            s.insert(k, v);
        }
        s
    })
}

fn kind(r: s2mlp::Result<ParamStore<f32>>) -> WeightFileError {
    match r {
        Err(Error::Weights(e)) => e,
        other => panic!("expected a weight file error, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_matches_reference_and_round_trips(s in store()) {
        let bytes = encode_weights(&s).unwrap();
        prop_assert_eq!(&bytes, &reference_encode(&s));
        prop_assert_eq!(decode_weights::<f32>(&bytes).unwrap(), s);
    }

    #[test]
    fn any_byte_flip_is_detected(s in store(), pos in any::<prop::sample::Index>(), mask in 1u8..=255) {
        let mut bytes = encode_weights(&s).unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= mask;
        let e = kind(decode_weights(&bytes));
        if i < 8 {
            prop_assert_eq!(e, WeightFileError::BadMagic);
        } else {
            prop_assert!(matches!(e, WeightFileError::ChecksumMismatch { .. }), "{:?}", e);
        }
    }

    #[test]
    fn any_truncation_is_detected(s in store(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_weights(&s).unwrap();
        let len = cut.index(bytes.len());
        prop_assert!(decode_weights::<f32>(&bytes[..len]).is_err());
    }
}

fn model_config() -> impl Strategy<Value = ModelConfig> {
    let shift = prop_oneof![
        prop::sample::select(vec!["a", "b", "c", "g", "none"])
            .prop_map(|l| ShiftConfig::preset(l).unwrap()),
        Just(ShiftConfig::parse_custom("2,0;0,-1").unwrap()),
    ];
    (
        1usize..40,
        1usize..5,
        1usize..9,
        1usize..6,
        1usize..6,
        1usize..1001,
        any::<bool>(),
        any::<bool>(),
        shift,
        prop::option::of(1usize..64),
    )
        .prop_map(
            |(depth, per, ratio, patch, grid, classes, affine, mixer, shift, mixer_hidden)| {
                ModelConfig {
                    depth,
                    hidden: per * shift.groups().max(1) * 2,
                    ratio,
                    patch,
                    image_w: grid * patch,
                    image_h: (grid + 1) * patch,
                    classes,
                    norm: if affine {
                        NormKind::Affine
                    } else {
                        NormKind::LayerNorm
                    },
                    block: if mixer {
                        BlockKind::Mixer
                    } else {
                        BlockKind::S2Mlp
                    },
                    shift,
                    mixer_hidden,
                }
            },
        )
}

proptest! {
    #[test]
    fn config_text_round_trips(cfg in model_config()) {
        let text = render_config(&cfg);
        prop_assert_eq!(parse_config(&text).unwrap(), cfg.clone());
        // comments and blank lines are ignored, and keys can come in any order
        let mut lines: Vec<&str> = text.lines().collect();
        lines.reverse();
        let noisy = format!("# saved model\n\n{}\n", lines.join("\n  # --\n"));
        prop_assert_eq!(parse_config(&noisy).unwrap(), cfg);
    }
}

#[test]
fn config_errors_carry_line_numbers() {
    let text = "depth = 2\nhidden = 6\nratio = 2\npatch = 4\nimage_w = 8\nimage_h = 8\nclasses = 3\nshift = a\n";
    match parse_config(text) {
        Err(Error::ConfigLine { line, message }) => {
            assert_eq!(line, 8);
            assert!(message.contains("6 mod 4 = 2"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match parse_config("depth = 2\ndepth = 3\n") {
        Err(Error::ConfigLine { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    match parse_config("depht = 2\n") {
        Err(Error::ConfigLine { line, message }) => {
            assert_eq!((line, message.contains("depht")), (1, true))
        }
        other => panic!("{other:?}"),
    }
}
