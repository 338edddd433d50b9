//! Training on the relative-arrangement task with and without the shift.
//!
//! Each image holds a checkerboard patch and a bright patch in adjacent
//! cells; the label says which side the bright patch is on. A model without
//! the shift treats the image as an unordered bag of patches and cannot do
//! better than chance. A smaller budget than the full benchmark is used here
//! so the example finishes quickly.

use s2mlp::train::{self, TrainConfig};
use s2mlp::{BlockKind, ModelConfig, NormKind, Result, ShiftConfig};

fn config(shift: &str) -> Result<ModelConfig> {
    Ok(ModelConfig {
        depth: 4,
        hidden: 32,
        ratio: 2,
        patch: 4,
        image_w: 16,
        image_h: 16,
        classes: 4,
        norm: NormKind::LayerNorm,
        block: BlockKind::S2Mlp,
        shift: ShiftConfig::preset(shift)?,
        mixer_hidden: None,
    })
}

pub fn run_example() -> Result<()> {
    let tc = TrainConfig {
        epochs: 12,
        base_lr: 2e-3,
        train_count: 2400,
        test_count: 400,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut finals = Vec::new();
    for shift in ["a", "none"] {
        println!("shift preset {shift}:");
        let out = train::train_loop_with::<f32>(&config(shift)?, &tc, |m| println!("  {m}"))?;
        finals.push(out.final_acc());
    }
    println!(
        "held-out accuracy: with shift {:.3}, without {:.3}",
        finals[0], finals[1]
    );
    assert!(finals[0] >= 0.85, "the shifted model should solve the task");
    assert!(
        finals[1] <= 0.35,
        "a shift-free model should be near chance"
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
