//! Command surface of the `s2mlp` binary.
//!
//! Exit codes: 0 on success, 1 when input is rejected or a check fails,
//! 2 on an internal error. Set `S2MLP_THREADS` to cap worker threads
//! (0, the default, runs everything on the calling thread).

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::analysis::{self, CostMode};
use crate::error::{Error, Result};
use crate::gradcheck::{self, Scope};
use crate::model::{Model, ModelConfig, ParamStore, PresetName};
use crate::ops;
use crate::rng::Xorshift64Star;
use crate::serialize;
use crate::shift::ShiftConfig;
use crate::tensor::Tensor;
use crate::train::{self, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "s2mlp",
    version,
    about = "Spatial-shift MLP reference implementation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameter and FLOPs accounting for a configuration.
    Analyze(AnalyzeArgs),
    /// Finite-difference checks of every backward pass.
    Gradcheck(GradcheckArgs),
    /// Compare the spatial shift with its fixed-kernel depthwise convolution.
    EquivCheck(EquivArgs),
    /// Print a small feature map before and after the shift.
    ShiftDemo(ShiftDemoArgs),
    /// Train on the synthetic relative-arrangement task.
    Train(TrainArgs),
    /// Held-out accuracy of saved weights on the synthetic task.
    Eval(EvalArgs),
    /// Classify one raw float32 image.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `wide` or `deep`.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<PresetName>,
    /// `paper-parity` or `full`.
    #[arg(long, default_value = "paper-parity", value_parser = parse_mode)]
    pub mode: CostMode,
    /// Emit `key=value` lines instead of a table.
    #[arg(long)]
    pub machine: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// `ops`, `model` or `all`.
    #[arg(long, default_value = "all", value_parser = parse_scope)]
    pub scope: Scope,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    /// Preset label or custom `dx,dy;…` list.
    #[arg(long, default_value = "a")]
    pub preset_shift: String,
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub h: usize,
    #[arg(long)]
    pub c: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ShiftDemoArgs {
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub h: usize,
    #[arg(long)]
    pub c: usize,
    #[arg(long, default_value = "a")]
    pub shift: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Patches per side; must equal `image_w / patch` of the config.
    #[arg(long)]
    pub toy_grid: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 4000)]
    pub train_count: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_count: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub test_count: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Raw little-endian float32 values, laid out `[image_w, image_h, 3]`.
    #[arg(long)]
    pub input: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<PresetName, String> {
    PresetName::parse(s).ok_or_else(|| format!("unknown preset {s:?} (expected wide or deep)"))
}

fn parse_mode(s: &str) -> std::result::Result<CostMode, String> {
    CostMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (expected paper-parity or full)"))
}

fn parse_scope(s: &str) -> std::result::Result<Scope, String> {
    Scope::parse(s).ok_or_else(|| format!("unknown scope {s:?} (expected ops, model or all)"))
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A check ran and failed.
    CheckFailed,
}

/// Exit code for an error: 2 for I/O and numerical breakdowns, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::NonFinite { .. } | Error::Diverged { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match run(&cli.command, out) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command, out: &mut dyn Write) -> Result<Outcome> {
    match command {
        Command::Analyze(a) => analyze(a, out),
        Command::Gradcheck(a) => run_gradcheck(a, out),
        Command::EquivCheck(a) => equiv_check(a, out),
        Command::ShiftDemo(a) => shift_demo(a, out),
        Command::Train(a) => run_train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a, out),
    }
}

fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = match (&a.config, a.preset) {
        (Some(path), _) => serialize::read_config(path)?,
        (None, Some(p)) => ModelConfig::preset(p),
        (None, None) => return Err(Error::config("pass --config or --preset")),
    };
    let report = analysis::closed_form_cost(&cfg, a.mode)?;
    if a.machine {
        write!(out, "{}", analysis::render_machine(&report))?;
        if let Some(p) = a.preset {
            let (params, flops) = analysis::published_figures(p);
            writeln!(out, "published_params={params}")?;
            writeln!(out, "published_flops={flops}")?;
        }
    } else {
        if let Some(p) = a.preset {
            writeln!(out, "preset: {p}")?;
        }
        write!(out, "{}", analysis::render_report(&report))?;
        if let (Some(p), CostMode::PaperParity) = (a.preset, a.mode) {
            for note in analysis::reference_notes(p, &report) {
                writeln!(out, "note: {note}")?;
            }
        }
    }
    Ok(Outcome::Success)
}

fn run_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<Outcome> {
    let reports = gradcheck::run_suite(a.scope, a.seed)?;
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    writeln!(out, "checked={} failed={failed}", reports.len())?;
    Ok(if failed == 0 {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

fn equiv_check(a: &EquivArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = ShiftConfig::from_spec(&a.preset_shift)?;
    cfg.validate(a.w, a.h, a.c)?;
    let mut rng = Xorshift64Star::for_stream(a.seed, "equiv-check");
    let t: Tensor<f64> = Tensor::from_fn(&[a.w, a.h, a.c], |_| rng.uniform(-1.0, 1.0))?;
    let diff = ops::compare_shift_conv(&t, &cfg)?;
    writeln!(
        out,
        "shift={} w={} h={} c={}",
        cfg.spec_string(),
        a.w,
        a.h,
        a.c
    )?;
    writeln!(out, "interior_positions={}", diff.interior_positions)?;
    writeln!(out, "interior_max_abs_diff={}", diff.interior)?;
    writeln!(out, "boundary_max_abs_diff={}", diff.boundary)?;
    Ok(if diff.interior == 0.0 {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}

fn format_map(out: &mut dyn Write, t: &Tensor<f64>) -> Result<()> {
    let [w, h, c] = *t.shape() else {
        unreachable!("rank-3 map")
    };
    let flat: Vec<String> = t.data().iter().map(|v| v.to_string()).collect();
    writeln!(out, "  flat: [{}]", flat.join(", "))?;
    for x in 0..w {
        for y in 0..h {
            let at = (x * h + y) * c;
            let cell: Vec<String> = t.data()[at..at + c].iter().map(|v| v.to_string()).collect();
            writeln!(out, "  ({x},{y}): [{}]", cell.join(", "))?;
        }
    }
    Ok(())
}

fn shift_demo(a: &ShiftDemoArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = ShiftConfig::from_spec(&a.shift)?;
    cfg.validate(a.w, a.h, a.c)?;
    let t: Tensor<f64> = Tensor::from_fn(&[a.w, a.h, a.c], |i| (i + 1) as f64)?;
    let shifted = ops::spatial_shift_forward(&t, &cfg)?;
    writeln!(
        out,
        "shift {} on a {}×{}×{} map",
        cfg.spec_string(),
        a.w,
        a.h,
        a.c
    )?;
    for (range, d) in cfg.group_ranges(a.c) {
        writeln!(
            out,
            "  channels {}..{} move by ({},{})",
            range.start, range.end, d.dx, d.dy
        )?;
    }
    writeln!(out, "before:")?;
    format_map(out, &t)?;
    writeln!(out, "after:")?;
    format_map(out, &shifted)?;
    Ok(Outcome::Success)
}

fn run_train(a: &TrainArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = serialize::read_config(&a.config)?;
    let grid = cfg.image_w / cfg.patch;
    if let Some(g) = a.toy_grid {
        if g != grid || cfg.image_w != cfg.image_h {
            return Err(Error::config(format!(
                "--toy-grid {g} does not match the config ({}×{} image, patch {}, grid {grid})",
                cfg.image_w, cfg.image_h, cfg.patch
            )));
        }
    }
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        base_lr: a.lr,
        smoothing: a.smoothing,
        train_count: a.train_count,
        test_count: a.test_count,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let mut io_err = None;
    let outcome = train::train_loop_with::<f32>(&cfg, &tc, |m| {
        if let Err(e) = writeln!(out, "{m}") {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let bytes = serialize::write_weights(&outcome.params, &a.out)?;
    writeln!(out, "final_acc={:.4}", outcome.final_acc())?;
    writeln!(out, "weights={} bytes={bytes}", a.out.display())?;
    Ok(Outcome::Success)
}

fn load_model_inputs(
    config: &PathBuf,
    weights: &PathBuf,
) -> Result<(ModelConfig, ParamStore<f32>)> {
    let cfg = serialize::read_config(config)?;
    let params = serialize::read_weights::<f32>(weights)?;
    crate::model::check_store(&cfg, &params)?;
    Ok((cfg, params))
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (cfg, params) = load_model_inputs(&a.config, &a.weights)?;
    let tc = TrainConfig {
        seed: a.seed,
        test_count: a.test_count,
        ..TrainConfig::default()
    };
    let (_, test_cfg) = tc.toy_splits(&cfg)?;
    let test = train::generate_toy::<f32>(&test_cfg)?;
    let acc = train::evaluate(&cfg, &params, &test)?;
    writeln!(out, "acc={acc:.4}")?;
    Ok(Outcome::Success)
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (cfg, params) = load_model_inputs(&a.config, &a.weights)?;
    let raw = fs::read(&a.input)?;
    let expected = cfg.image_w * cfg.image_h * 3;
    if raw.len() != expected * 4 {
        return Err(Error::Data(format!(
            "input has {} bytes, a {}×{}×3 float32 image needs {}",
            raw.len(),
            cfg.image_w,
            cfg.image_h,
            expected * 4
        )));
    }
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let image = Tensor::from_vec(&[cfg.image_w, cfg.image_h, 3], values)?;
    let logits = Model::new(&cfg, &params)?.logits(&image)?;
    let class = train::argmax_rows(&logits)[0];
    let shown: Vec<String> = logits.data().iter().map(|v| format!("{v:.6}")).collect();
    writeln!(out, "class={class}")?;
    writeln!(out, "logits={}", shown.join(","))?;
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["s2mlp"];
        full.extend_from_slice(args);
        let code = run_args(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn analyze_wide_machine() {
        let (code, out, _) = run_str(&["analyze", "--preset", "wide", "--machine"]);
        assert_eq!(code, 0);
        assert!(out
            .lines()
            .any(|l| l == "params_total_paper_parity=71433984"));
    }

    #[test]
    fn analyze_deep_notes_the_gap() {
        let (code, out, _) = run_str(&["analyze", "--preset", "deep"]);
        assert_eq!(code, 0);
        assert!(out.contains("53,476,224"));
        assert!(out.contains("published 51M"), "{out}");
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run_str(&["analyze"]).0, 1);
        assert_eq!(run_str(&["analyze", "--preset", "huge"]).0, 1);
        assert_eq!(run_str(&["frobnicate"]).0, 1);
        assert_eq!(run_str(&["--help"]).0, 0);
    }

    #[test]
    fn shift_demo_worked_example() {
        let (code, out, _) = run_str(&[
            "shift-demo",
            "--w",
            "2",
            "--h",
            "1",
            "--c",
            "4",
            "--shift",
            "a",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("flat: [1, 6, 3, 4, 1, 6, 7, 8]"), "{out}");
    }

    #[test]
    fn equiv_check_interior_zero() {
        let (code, out, _) = run_str(&[
            "equiv-check",
            "--preset-shift",
            "a",
            "--w",
            "6",
            "--h",
            "5",
            "--c",
            "8",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("interior_max_abs_diff=0\n"));
        let (code, _, err) = run_str(&[
            "equiv-check",
            "--preset-shift",
            "a",
            "--w",
            "6",
            "--h",
            "5",
            "--c",
            "6",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("6 channels"));
    }

    #[test]
    fn missing_file_is_reported() {
        let (code, _, err) = run_str(&["analyze", "--config", "/nonexistent/cfg.txt"]);
        assert_eq!(code, 2);
        assert!(err.contains("error"));
    }
}
