use proptest::prelude::*;
use s2mlp::ops::{compare_shift_conv, spatial_shift_backward, spatial_shift_forward};
use s2mlp::{Displacement, ShiftConfig, Tensor};

/// Direct reading of the rule: channel group g moves by (dx, dy), and a
/// destination whose source falls off the map keeps its own value.
fn naive_shift(t: &Tensor<f64>, cfg: &ShiftConfig) -> Tensor<f64> {
    let (w, h, c) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = t.clone();
    for (range, d) in cfg.group_ranges(c) {
        for x in 0..w as i64 {
            for y in 0..h as i64 {
                let (sx, sy) = (x - d.dx as i64, y - d.dy as i64);
                if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                    continue;
                }
                for ch in range.clone() {
                    let v = t.get(&[sx as usize, sy as usize, ch]).unwrap();
                    let o = out.offset(&[x as usize, y as usize, ch]).unwrap();
                    out.data_mut()[o] = v;
                }
            }
        }
    }
    out
}

fn preset() -> impl Strategy<Value = ShiftConfig> {
    prop::sample::select(vec![
        "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "none",
    ])
    .prop_map(|l| ShiftConfig::preset(l).unwrap())
}

fn custom() -> impl Strategy<Value = ShiftConfig> {
    prop::collection::vec((-2i32..=2, -2i32..=2), 1..4).prop_map(|d| {
        ShiftConfig::custom(
            d.into_iter()
                .map(|(dx, dy)| Displacement::new(dx, dy))
                .collect(),
        )
    })
}

fn case() -> impl Strategy<Value = (ShiftConfig, Tensor<f64>)> {
    (
        prop_oneof![preset(), custom()],
        3usize..7,
        3usize..7,
        1usize..4,
    )
        .prop_flat_map(|(cfg, w, h, per)| {
            let c = cfg.groups().max(1) * per;
            prop::collection::vec(-1.0f64..1.0, w * h * c)
                .prop_map(move |data| (cfg.clone(), Tensor::from_vec(&[w, h, c], data).unwrap()))
        })
}

proptest! {
    #[test]
    fn forward_matches_naive_rule((cfg, t) in case()) {
        prop_assert_eq!(spatial_shift_forward(&t, &cfg).unwrap(), naive_shift(&t, &cfg));
    }

    #[test]
    fn backward_is_the_adjoint((cfg, t) in case(), seed in any::<u64>()) {
        let mut rng = s2mlp::rng::Xorshift64Star::new(seed);
        let dy = Tensor::from_fn(t.shape(), |_| rng.uniform(-1.0, 1.0)).unwrap();
        let lhs = dy.dot(&spatial_shift_forward(&t, &cfg).unwrap()).unwrap();
        let rhs = spatial_shift_backward(&cfg, &dy).unwrap().dot(&t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn shift_preserves_shape_and_values((cfg, t) in case()) {
        let y = spatial_shift_forward(&t, &cfg).unwrap();
        prop_assert_eq!(y.shape(), t.shape());
        // every output value is some input value of the same channel
        let c = t.shape()[2];
        for (i, v) in y.data().iter().enumerate() {
            let ch = i % c;
            prop_assert!(t.data().iter().skip(ch).step_by(c).any(|u| u == v));
        }
    }

    #[test]
    fn unit_presets_equal_conv_in_the_interior(
        label in prop::sample::select(vec!["a", "b", "c", "f", "g", "j"]),
        w in 3usize..8, h in 3usize..8, seed in any::<u64>()
    ) {
        let cfg = ShiftConfig::preset(label).unwrap();
        let c = cfg.groups() * 2;
        let mut rng = s2mlp::rng::Xorshift64Star::new(seed);
        let t = Tensor::from_fn(&[w, h, c], |_| rng.uniform(-1.0, 1.0)).unwrap();
        prop_assert_eq!(compare_shift_conv(&t, &cfg).unwrap().interior, 0.0);
    }

    #[test]
    fn oversized_moves_are_rejected(m in 2i32..6, extent in 1usize..6, horizontal in any::<bool>()) {
        let d = if horizontal { Displacement::new(m, 0) } else { Displacement::new(0, -m) };
        let cfg = ShiftConfig::custom(vec![d]);
        let t = Tensor::<f64>::zeros(&[extent, extent, 2]).unwrap();
        prop_assert_eq!(spatial_shift_forward(&t, &cfg).is_ok(), (m as usize) < extent);
    }
}
