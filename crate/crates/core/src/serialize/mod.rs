//! On-disk formats: checksummed binary weight files and `key = value`
//! model configs.

mod config;
mod weights;

pub use config::{parse_config, read_config, render_config, write_config};
pub use weights::{
    decode_weights, encode_weights, load_weights, read_weights, save_weights, write_weights, MAGIC,
    VERSION,
};
