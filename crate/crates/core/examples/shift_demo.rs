//! The spatial shift on tiny feature maps.

use s2mlp::ops::{spatial_shift_backward, spatial_shift_forward};
use s2mlp::shift::PRESET_LABELS;
use s2mlp::{Result, ShiftConfig, Tensor};

fn show(label: &str, t: &Tensor<f64>) {
    let values: Vec<String> = t.data().iter().map(|v| format!("{v:>2}")).collect();
    println!("{label:>8}: [{}]", values.join(" "));
}

pub fn run_example() -> Result<()> {
    // two pixels side by side, four channels, one channel per direction
    let cfg = ShiftConfig::preset("a")?;
    let x = Tensor::from_fn(&[2, 1, 4], |i| (i + 1) as f64)?;
    let y = spatial_shift_forward(&x, &cfg)?;
    show("input", &x);
    show("shifted", &y);
    assert_eq!(y.data(), &[1., 6., 3., 4., 1., 6., 7., 8.]);

    // the backward pass routes each output gradient to the input it came from
    let dy = Tensor::full(&[2, 1, 4], 1.0)?;
    show("dx", &spatial_shift_backward(&cfg, &dy)?);

    // a 3×3 map with a single hot pixel in the centre of every channel
    let cfg = ShiftConfig::preset("a")?;
    let mut hot = Tensor::zeros(&[3, 3, 4])?;
    for ch in 0..4 {
        hot.data_mut()[(3 + 1) * 4 + ch] = 1.0;
    }
    let moved = spatial_shift_forward(&hot, &cfg)?;
    for (range, d) in cfg.group_ranges(4) {
        let ch = range.start;
        let at: Vec<(usize, usize)> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&(x, y)| moved.data()[(x * 3 + y) * 4 + ch] == 1.0)
            .collect();
        println!(
            "channel {ch} moves by ({:>2},{:>2}): ones at {at:?}",
            d.dx, d.dy
        );
    }

    println!("\npresets:");
    for label in PRESET_LABELS {
        let cfg = ShiftConfig::preset(label)?;
        println!("  {label:>4}: {} groups  [{}]", cfg.groups(), cfg.render());
    }
    let custom = ShiftConfig::parse_custom("2, 0; 0, -1")?;
    println!(
        "  custom: {} groups  [{}]",
        custom.groups(),
        custom.render()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
