use proptest::prelude::*;
use s2mlp::analysis::{closed_form_cost, empirical_cost, CostMode};
use s2mlp::model::init_params;
use s2mlp::{ModelConfig, NormKind, ParamStore, PresetName, ShiftConfig, Tensor};

/// The fully-connected layers of an S²-MLP as (fan_in, fan_out), each applied
/// to every patch.
fn fc_layers(cfg: &ModelConfig) -> Vec<(u64, u64)> {
    let (c, r, p, k) = (
        cfg.hidden as u64,
        cfg.ratio as u64,
        cfg.patch as u64,
        cfg.classes as u64,
    );
    let mut layers = vec![(3 * p * p, c)];
    for _ in 0..cfg.depth {
        layers.extend([(c, c), (c, c), (c, r * c), (r * c, c)]);
    }
    layers.push((c, k));
    layers
}

fn oracle(cfg: &ModelConfig) -> (u64, u64, u64) {
    let m = cfg.num_patches() as u64;
    let layers = fc_layers(cfg);
    let head = layers.last().unwrap();
    let params: u64 = layers.iter().map(|(i, o)| i * o + o).sum();
    let flops: u64 = layers.iter().map(|(i, o)| m * i * o).sum();
    (params - (head.0 * head.1 + head.1), params, flops)
}

fn config() -> impl Strategy<Value = ModelConfig> {
    (
        1usize..6,
        prop::sample::select(vec![4usize, 8, 12, 16, 32]),
        1usize..5,
        prop::sample::select(vec![1usize, 2, 4]),
        1usize..5,
        1usize..5,
        2usize..12,
        any::<bool>(),
    )
        .prop_map(
            |(depth, hidden, ratio, patch, gw, gh, classes, affine)| ModelConfig {
                depth,
                hidden,
                ratio,
                patch,
                image_w: gw * patch,
                image_h: gh * patch,
                classes,
                norm: if affine {
                    NormKind::Affine
                } else {
                    NormKind::LayerNorm
                },
                shift: ShiftConfig::preset("a").unwrap(),
                ..ModelConfig::micro()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_layer_walk(cfg in config()) {
        let report = closed_form_cost(&cfg, CostMode::PaperParity).unwrap();
        let (backbone, all, flops) = oracle(&cfg);
        prop_assert_eq!(report.params_total_paper_parity, backbone);
        prop_assert_eq!(report.params_total_full, all);
        prop_assert_eq!(report.flops_total, flops);
        prop_assert!(report.is_consistent());
    }

    #[test]
    fn params_ignore_image_size_and_flops_scale_with_patches(cfg in config(), scale in 1usize..4) {
        let big = cfg.clone().with_image(cfg.image_w * scale, cfg.image_h);
        for mode in [CostMode::PaperParity, CostMode::Full] {
            let a = closed_form_cost(&cfg, mode).unwrap();
            let b = closed_form_cost(&big, mode).unwrap();
            prop_assert_eq!(a.params_total_full, b.params_total_full);
            prop_assert_eq!(b.flops_pfl, a.flops_pfl * scale as u64);
            prop_assert_eq!(b.flops_blocks_total, a.flops_blocks_total * scale as u64);
        }
    }

    #[test]
    fn closed_form_matches_instrumented_model(cfg in config(), seed in any::<u64>()) {
        let params: ParamStore<f32> = init_params(&cfg, seed).unwrap();
        let probe = Tensor::from_fn(&[2, cfg.image_w, cfg.image_h, 3], |i| (i % 7) as f32 * 0.1).unwrap();
        for mode in [CostMode::PaperParity, CostMode::Full] {
            let closed = closed_form_cost(&cfg, mode).unwrap();
            let measured = empirical_cost(&cfg, &params, &probe, mode).unwrap();
            prop_assert_eq!(closed, measured);
        }
    }
}

#[test]
fn wide_preset_matches_layer_walk() {
    let cfg = ModelConfig::preset(PresetName::Wide);
    let report = closed_form_cost(&cfg, CostMode::PaperParity).unwrap();
    assert_eq!(
        (
            report.params_total_paper_parity,
            report.params_total_full,
            report.flops_total
        ),
        oracle(&cfg)
    );
}

#[test]
fn deeper_models_cost_proportionally_more() {
    let mut cfg = ModelConfig::preset(PresetName::Deep);
    let base = closed_form_cost(&cfg, CostMode::Full).unwrap();
    cfg.depth *= 2;
    let doubled = closed_form_cost(&cfg, CostMode::Full).unwrap();
    assert_eq!(doubled.params_blocks_total, 2 * base.params_blocks_total);
    assert_eq!(doubled.flops_blocks_total, 2 * base.flops_blocks_total);
    assert_eq!(doubled.params_pfl, base.params_pfl);
}
