//! Parameter and FLOPs accounting for the two presets.
//!
//! Prints the closed-form tables, then confirms them against a model built
//! from real tensors with the multiply counter switched on.

use s2mlp::analysis::{self, CostMode};
use s2mlp::model::init_params;
use s2mlp::{ModelConfig, ParamStore, PresetName, Result, Tensor};

pub fn run_example() -> Result<()> {
    for preset in [PresetName::Wide, PresetName::Deep] {
        let cfg = ModelConfig::preset(preset);
        let report = analysis::closed_form_cost(&cfg, CostMode::PaperParity)?;
        println!("== {preset} (N={}, c={}) ==", cfg.depth, cfg.hidden);
        print!("{}", analysis::render_report(&report));
        for note in analysis::reference_notes(preset, &report) {
            println!("note: {note}");
        }
        let full = analysis::closed_form_cost(&cfg, CostMode::Full)?;
        println!(
            "full accounting: {} params, {} multiplies\n",
            analysis::thousands(full.params_total_full),
            analysis::thousands(full.flops_total)
        );
    }

    // cross-check the wide preset against an instrumented forward pass
    let cfg = ModelConfig::preset(PresetName::Wide);
    let params: ParamStore<f32> = init_params(&cfg, 0)?;
    let probe = Tensor::full(&[cfg.image_w, cfg.image_h, 3], 0.5)?;
    let measured = analysis::empirical_cost(&cfg, &params, &probe, CostMode::PaperParity)?;
    let closed = analysis::closed_form_cost(&cfg, CostMode::PaperParity)?;
    println!("instrumented wide preset:");
    print!("{}", analysis::render_machine(&measured));
    assert_eq!(measured, closed, "counter and formulas disagree");
    println!("counter matches the closed form exactly");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
