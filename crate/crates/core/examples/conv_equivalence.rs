//! The spatial shift as a depthwise 3×3 convolution with fixed one-hot
//! kernels. The two agree exactly away from the border; on the border the
//! shift keeps the original values while the convolution sees zero padding.

use s2mlp::ops::{build_shift_kernels, compare_shift_conv};
use s2mlp::rng::Xorshift64Star;
use s2mlp::{Result, ShiftConfig, Tensor};

pub fn run_example() -> Result<()> {
    let cfg = ShiftConfig::preset("a")?;
    let kernels: Tensor<f64> = build_shift_kernels(&cfg, 4)?;
    for (ch, k) in kernels.data().chunks(9).enumerate() {
        println!("kernel for channel {ch}:");
        for row in k.chunks(3) {
            println!("  {row:?}");
        }
    }

    let mut rng = Xorshift64Star::new(3);
    for label in ["a", "b"] {
        let cfg = ShiftConfig::preset(label)?;
        for (w, h, c) in [(6, 5, 8), (3, 3, 16), (8, 7, 8)] {
            let t = Tensor::from_fn(&[w, h, c], |_| rng.uniform(-1.0, 1.0))?;
            let d = compare_shift_conv(&t, &cfg)?;
            println!(
                "preset {label} on {w}×{h}×{c}: interior diff {} over {} positions, boundary diff {:.3}",
                d.interior, d.interior_positions, d.boundary
            );
            assert_eq!(d.interior, 0.0);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
