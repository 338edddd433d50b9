//! Weight files and config files on disk.

use s2mlp::model::init_params;
use s2mlp::serialize::{
    decode_weights, encode_weights, read_config, read_weights, write_config, write_weights,
};
use s2mlp::{Error, ModelConfig, ParamStore, Result, ShiftConfig, WeightFileError};

pub fn run_example() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = ModelConfig::micro().with_shift(ShiftConfig::parse_custom("1,0;0,1")?);
    let params: ParamStore<f64> = init_params(&cfg, 11)?;

    let cfg_path = dir.path().join("micro.cfg");
    write_config(&cfg, &cfg_path)?;
    println!("{}", std::fs::read_to_string(&cfg_path)?);
    assert_eq!(read_config(&cfg_path)?, cfg);

    let weights_path = dir.path().join("micro.weights");
    let bytes = write_weights(&params, &weights_path)?;
    println!("wrote {} tensors, {bytes} bytes", params.len());
    let back: ParamStore<f64> = read_weights(&weights_path)?;
    assert_eq!(back, params);

    // corruption anywhere after the magic is caught by the checksum
    let mut raw = encode_weights(&params)?;
    raw[100] ^= 0x10;
    match decode_weights::<f64>(&raw) {
        Err(Error::Weights(e @ WeightFileError::ChecksumMismatch { .. })) => {
            println!("flipped bit: {e}")
        }
        other => panic!("corruption went unnoticed: {other:?}"),
    }
    raw[0] = b'?';
    match decode_weights::<f64>(&raw) {
        Err(Error::Weights(e)) => println!("bad header: {e}"),
        other => panic!("{other:?}"),
    }
    // a float64 file is not silently read as float32
    match decode_weights::<f32>(&encode_weights(&params)?) {
        Err(e) => println!("dtype check: {e}"),
        Ok(_) => panic!("dtype mismatch accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
