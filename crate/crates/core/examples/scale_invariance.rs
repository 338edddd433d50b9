//! One set of S²-MLP weights runs on any image size divisible by the patch
//! size, because no layer depends on the number of patches. The MLP-Mixer
//! baseline's token-mixing weights are sized by the patch count, so the same
//! experiment fails there.

use s2mlp::model::init_params;
use s2mlp::serialize::{decode_weights, encode_weights};
use s2mlp::{BlockKind, Error, Model, ModelConfig, ParamStore, Result, Tensor};

fn run_at(cfg: &ModelConfig, params: &ParamStore<f32>, side: usize) -> Result<Tensor<f32>> {
    let image = Tensor::from_fn(&[side, side, 3], |i| ((i % 17) as f32) / 17.0)?;
    Model::new(cfg, params)?.logits(&image)
}

pub fn run_example() -> Result<()> {
    let mut cfg = ModelConfig::micro().with_image(32, 32);
    cfg.classes = 5;
    let params: ParamStore<f32> = init_params(&cfg, 4)?;
    let reloaded: ParamStore<f32> = decode_weights(&encode_weights(&params)?)?;
    for side in [16, 32, 48, 64] {
        let logits = run_at(&cfg, &reloaded, side)?;
        println!("s2mlp at {side}×{side}: logits {:?}", logits.data());
    }

    let mixer_cfg = cfg.clone().with_block(BlockKind::Mixer);
    let mixer: ParamStore<f32> = init_params(&mixer_cfg, 4)?;
    println!(
        "mixer at 32×32: logits {:?}",
        run_at(&mixer_cfg, &mixer, 32)?.data()
    );
    for side in [16, 48] {
        match run_at(&mixer_cfg, &mixer, side) {
            Err(Error::Shape(msg)) => println!("mixer at {side}×{side}: {msg}"),
            other => panic!("expected a shape error, got {other:?}"),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
