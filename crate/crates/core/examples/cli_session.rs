//! The `s2mlp` command line driven in-process: analyze a preset, train a
//! small model, evaluate the saved weights and classify a raw image.

use std::fs;

use s2mlp::cli::run_args;
use s2mlp::Result;

fn s2mlp(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_args(
        std::iter::once("s2mlp").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    let mut text = String::from_utf8_lossy(&out).into_owned();
    text.push_str(&String::from_utf8_lossy(&err));
    println!("$ s2mlp {}\n{text}(exit {code})\n", args.join(" "));
    (code, text)
}

pub fn run_example() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    s2mlp(&["analyze", "--preset", "wide"]);
    s2mlp(&[
        "equiv-check",
        "--preset-shift",
        "b",
        "--w",
        "6",
        "--h",
        "5",
        "--c",
        "8",
    ]);

    let cfg = path("toy.cfg");
    fs::write(
        &cfg,
        "# toy arrangement task\ndepth = 2\nhidden = 16\nratio = 2\npatch = 4\n\
         image_w = 16\nimage_h = 16\nclasses = 4\nshift = a\n",
    )?;
    let weights = path("toy.weights");
    let (code, trained) = s2mlp(&[
        "train",
        "--config",
        &cfg,
        "--toy-grid",
        "4",
        "--epochs",
        "2",
        "--train-count",
        "256",
        "--test-count",
        "64",
        "--seed",
        "3",
        "--out",
        &weights,
    ]);
    assert_eq!(code, 0);
    let final_acc = trained
        .lines()
        .find_map(|l| l.strip_prefix("final_acc="))
        .expect("final accuracy line")
        .to_string();

    let (_, evaluated) = s2mlp(&[
        "eval",
        "--config",
        &cfg,
        "--weights",
        &weights,
        "--seed",
        "3",
        "--test-count",
        "64",
    ]);
    assert_eq!(
        evaluated.trim_end().lines().next(),
        Some(format!("acc={final_acc}").as_str())
    );

    let image = path("zeros.f32");
    fs::write(&image, vec![0u8; 16 * 16 * 3 * 4])?;
    let (code, _) = s2mlp(&[
        "predict",
        "--config",
        &cfg,
        "--weights",
        &weights,
        "--input",
        &image,
    ]);
    assert_eq!(code, 0);

    // a config that disagrees with the weights is rejected with exit code 1
    fs::write(
        &cfg,
        fs::read_to_string(&cfg)?.replace("hidden = 16", "hidden = 8"),
    )?;
    let (code, _) = s2mlp(&["eval", "--config", &cfg, "--weights", &weights]);
    assert_eq!(code, 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
