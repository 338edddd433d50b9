//! Central finite-difference checks for every backward pass.
//!
//! Each check projects the op output onto a fixed random tensor `P`, so the
//! scalar under test is `L(x) = Σ P ⊙ f(x)`. The numeric derivative for a
//! coordinate is `Σ P ⊙ (f(x + h·e) − f(x − h·e)) / 2h`, differencing the
//! outputs elementwise before reducing. Unaffected outputs cancel exactly,
//! which keeps round-off far below the tolerances of the linear ops.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{init_params, BlockKind, Model, ModelConfig, ParamStore};
use crate::ops::{self, Linear, Norm, NormKind, REGISTERED_OPS};
use crate::rng::Xorshift64Star;
use crate::shift::{Displacement, ShiftConfig};
use crate::tensor::Tensor;

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Coordinates probed per op when it has more than this many.
pub const MAX_COORDS: usize = 200;

/// The spatial shift is a copy map, so differences are exact up to round-off.
pub const SHIFT_TOL: f64 = 1e-9;
/// Ops that are linear in each input separately.
pub const LINEAR_TOL: f64 = 1e-6;
/// Ops with curvature (normalization statistics, GELU, softmax).
pub const NONLINEAR_TOL: f64 = 1e-4;
/// End-to-end model loss.
pub const MODEL_TOL: f64 = 1e-3;

/// `|a − f| / max(|a|, |f|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub tensor: String,
    pub index: Vec<usize>,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.tensor, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub op: String,
    pub max_rel_error: f64,
    pub worst: Option<Coordinate>,
    pub tolerance: f64,
    pub checked: usize,
    pub pass: bool,
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "op={} max_rel_err={:.3e} tol={:.0e} coords={} worst={} {}",
            self.op,
            self.max_rel_error,
            self.tolerance,
            self.checked,
            self.worst
                .as_ref()
                .map_or("-".to_string(), ToString::to_string),
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// A named input of the function under test.
pub struct Input {
    pub name: String,
    pub value: Tensor<f64>,
}

impl Input {
    pub fn new(name: impl Into<String>, value: Tensor<f64>) -> Self {
        Input {
            name: name.into(),
            value,
        }
    }
}

/// Compares `analytic[i]` (one gradient per input) against central
/// differences of `Σ proj ⊙ f(inputs)`.
///
/// At most `max_coords` coordinates are probed, drawn without replacement
/// from a `seed`-keyed stream when there are more.
#[allow(clippy::too_many_arguments)]
pub fn check_gradients(
    op: &str,
    inputs: &[Input],
    proj: &Tensor<f64>,
    analytic: &[Tensor<f64>],
    f: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
    tolerance: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradReport> {
    if analytic.len() != inputs.len() {
        return Err(Error::shape(format!(
            "{op}: {} analytic gradients for {} inputs",
            analytic.len(),
            inputs.len()
        )));
    }
    for (input, grad) in inputs.iter().zip(analytic) {
        if input.value.shape() != grad.shape() {
            return Err(Error::shape(format!(
                "{op}: gradient of {} has shape {:?}, input has {:?}",
                input.name,
                grad.shape(),
                input.value.shape()
            )));
        }
    }
    let coordinate = |t: usize, flat: usize| Coordinate {
        tensor: inputs[t].name.clone(),
        index: inputs[t].value.unravel(flat),
    };

    for (t, grad) in analytic.iter().enumerate() {
        if let Some(flat) = grad.data().iter().position(|v| !v.is_finite()) {
            return Ok(GradReport {
                op: op.to_string(),
                max_rel_error: f64::INFINITY,
                worst: Some(coordinate(t, flat)),
                tolerance,
                checked: 0,
                pass: false,
            });
        }
    }

    let mut coords: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(t, input)| (0..input.value.numel()).map(move |i| (t, i)))
        .collect();
    if coords.len() > max_coords {
        let mut rng = Xorshift64Star::for_stream(seed, op);
        rng.shuffle(&mut coords);
        coords.truncate(max_coords);
        coords.sort_unstable();
    }

    let mut values: Vec<Tensor<f64>> = inputs.iter().map(|i| i.value.clone()).collect();
    let mut max_rel = 0.0;
    let mut worst = None;
    for &(t, i) in &coords {
        let original = values[t].data()[i];
        values[t].data_mut()[i] = original + STEP;
        let plus = f(&values)?;
        values[t].data_mut()[i] = original - STEP;
        let minus = f(&values)?;
        values[t].data_mut()[i] = original;
        if plus.shape() != proj.shape() {
            return Err(Error::shape(format!(
                "{op}: output {:?} does not match projection {:?}",
                plus.shape(),
                proj.shape()
            )));
        }
        let diff: f64 = proj
            .data()
            .iter()
            .zip(plus.data().iter().zip(minus.data()))
            .map(|(&p, (&a, &b))| p * (a - b))
            .sum();
        let numeric = diff / (2.0 * STEP);
        let rel = relative_error(analytic[t].data()[i], numeric);
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must count as worst
        if !(rel <= max_rel) {
            max_rel = rel;
            worst = Some(coordinate(t, i));
        }
    }
    Ok(GradReport {
        op: op.to_string(),
        max_rel_error: max_rel,
        worst,
        tolerance,
        checked: coords.len(),
        pass: max_rel < tolerance,
    })
}

fn random(shape: &[usize], rng: &mut Xorshift64Star, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(lo, hi)).expect("valid shape")
}

fn scalar(v: f64) -> Tensor<f64> {
    Tensor::from_vec(&[1], vec![v]).expect("valid shape")
}

/// Shift gradient check with a caller-supplied backward, so a deliberately
/// broken adjoint can be fed through the same harness.
pub fn check_shift_with(
    cfg: &ShiftConfig,
    shape: &[usize],
    seed: u64,
    backward: impl Fn(&ShiftConfig, &Tensor<f64>) -> Result<Tensor<f64>>,
) -> Result<GradReport> {
    let mut rng = Xorshift64Star::for_stream(seed, "spatial_shift");
    let x = random(shape, &mut rng, -1.0, 1.0);
    let proj = random(shape, &mut rng, -1.0, 1.0);
    let dx = backward(cfg, &proj)?;
    check_gradients(
        &format!("spatial_shift[{}]", cfg.name),
        &[Input::new("x", x)],
        &proj,
        &[dx],
        |v| ops::spatial_shift_forward(&v[0], cfg),
        SHIFT_TOL,
        MAX_COORDS,
        seed,
    )
}

pub fn check_shift(cfg: &ShiftConfig, shape: &[usize], seed: u64) -> Result<GradReport> {
    check_shift_with(cfg, shape, seed, ops::spatial_shift_backward)
}

/// A deliberately wrong shift adjoint whose horizontal displacements are off
/// by one. Used to confirm that the harness notices a broken backward.
pub fn skewed_shift_backward(cfg: &ShiftConfig, dy: &Tensor<f64>) -> Result<Tensor<f64>> {
    let skewed = ShiftConfig::custom(
        cfg.displacements
            .iter()
            .map(|d| Displacement::new(d.dx + 1, d.dy))
            .collect(),
    );
    ops::spatial_shift_backward(&skewed, dy)
}

/// Runs the standard check for one registered op.
pub fn check_op(name: &str, seed: u64) -> Result<GradReport> {
    let mut rng = Xorshift64Star::for_stream(seed, name);
    match name {
        "linear" => {
            let x = random(&[4, 3], &mut rng, -1.0, 1.0);
            let w = random(&[2, 3], &mut rng, -1.0, 1.0);
            let b = random(&[2], &mut rng, -1.0, 1.0);
            let proj = random(&[4, 2], &mut rng, -1.0, 1.0);
            let layer = Linear::new(&w, &b)?;
            let (_, cache) = layer.forward(&x)?;
            let (dx, g) = layer.backward(&cache, &proj)?;
            check_gradients(
                name,
                &[
                    Input::new("x", x),
                    Input::new("weight", w.clone()),
                    Input::new("bias", b.clone()),
                ],
                &proj,
                &[dx, g.weight, g.bias],
                |v| Linear::new(&v[1], &v[2])?.apply(&v[0]),
                LINEAR_TOL,
                MAX_COORDS,
                seed,
            )
        }
        "layernorm" | "affine" => {
            let kind = NormKind::parse(name).expect("registered norm");
            let x = random(&[4, 6], &mut rng, -2.0, 2.0);
            let gamma = random(&[6], &mut rng, 0.5, 1.5);
            let beta = random(&[6], &mut rng, -0.5, 0.5);
            let proj = random(&[4, 6], &mut rng, -1.0, 1.0);
            let norm = Norm::new(&gamma, &beta, kind)?;
            let (_, cache) = norm.forward(&x)?;
            let (dx, g) = norm.backward(&cache, &proj)?;
            let tol = if kind == NormKind::Affine {
                LINEAR_TOL
            } else {
                NONLINEAR_TOL
            };
            check_gradients(
                name,
                &[
                    Input::new("x", x),
                    Input::new("gamma", gamma.clone()),
                    Input::new("beta", beta.clone()),
                ],
                &proj,
                &[dx, g.gamma, g.beta],
                |v| Ok(Norm::new(&v[1], &v[2], kind)?.forward(&v[0])?.0),
                tol,
                MAX_COORDS,
                seed,
            )
        }
        "gelu" => {
            let x = random(&[3, 5], &mut rng, -3.0, 3.0);
            let proj = random(&[3, 5], &mut rng, -1.0, 1.0);
            let (_, cache) = ops::gelu_forward(&x);
            let dx = ops::gelu_backward(&cache, &proj)?;
            check_gradients(
                name,
                &[Input::new("x", x)],
                &proj,
                &[dx],
                |v| Ok(ops::gelu_forward(&v[0]).0),
                NONLINEAR_TOL,
                MAX_COORDS,
                seed,
            )
        }
        "spatial_shift" => check_shift(&ShiftConfig::preset("b")?, &[5, 4, 16], seed),
        "depthwise_conv3x3" => {
            let x = random(&[4, 5, 3], &mut rng, -1.0, 1.0);
            let k = random(&[3, 3, 3], &mut rng, -1.0, 1.0);
            let proj = random(&[4, 5, 3], &mut rng, -1.0, 1.0);
            let (dx, dk) = ops::depthwise_conv3x3_backward(&x, &k, &proj)?;
            check_gradients(
                name,
                &[Input::new("x", x), Input::new("kernels", k)],
                &proj,
                &[dx, dk],
                |v| ops::depthwise_conv3x3_forward(&v[0], &v[1]),
                LINEAR_TOL,
                MAX_COORDS,
                seed,
            )
        }
        "global_avg_pool" => {
            let x = random(&[2, 5, 3], &mut rng, -1.0, 1.0);
            let proj = random(&[2, 3], &mut rng, -1.0, 1.0);
            let dx = ops::global_avg_pool_backward(x.shape(), &proj)?;
            check_gradients(
                name,
                &[Input::new("x", x)],
                &proj,
                &[dx],
                |v| ops::global_avg_pool(&v[0]),
                LINEAR_TOL,
                MAX_COORDS,
                seed,
            )
        }
        "softmax_xent" => {
            let logits = random(&[4, 5], &mut rng, -2.0, 2.0);
            let labels: Vec<usize> = (0..4).map(|_| rng.below(5)).collect();
            let (_, dlogits) = ops::softmax_xent(&logits, &labels, 0.1)?;
            check_gradients(
                name,
                &[Input::new("logits", logits)],
                &scalar(1.0),
                &[dlogits],
                |v| Ok(scalar(ops::softmax_xent(&v[0], &labels, 0.1)?.0)),
                NONLINEAR_TOL,
                MAX_COORDS,
                seed,
            )
        }
        other => Err(Error::config(format!(
            "no gradient check registered for op {other}"
        ))),
    }
}

/// End-to-end check of the smoothed cross-entropy loss with respect to every
/// parameter of a small model.
///
/// Parameters start from the usual initializer plus uniform noise in
/// `[−0.5, 0.5]`, so no gradient is structurally tiny.
pub fn check_model(cfg: &ModelConfig, seed: u64, tolerance: f64) -> Result<GradReport> {
    let mut rng = Xorshift64Star::for_stream(seed, "model");
    let mut store: ParamStore<f64> = init_params(cfg, seed)?;
    for (_, t) in store.iter_mut() {
        for v in t.data_mut() {
            *v += rng.uniform(-0.5, 0.5);
        }
    }
    let batch = 2;
    let images = random(&[batch, cfg.image_w, cfg.image_h, 3], &mut rng, 0.0, 1.0);
    let labels: Vec<usize> = (0..batch).map(|_| rng.below(cfg.classes)).collect();
    let smoothing = 0.1;

    let model = Model::new(cfg, &store)?;
    let (_, grads) = model.loss_and_grads(&images, &labels, smoothing)?;
    let paths: Vec<String> = store.paths().map(str::to_string).collect();
    let inputs: Vec<Input> = paths
        .iter()
        .map(|p| Ok(Input::new(p.clone(), store.get(p)?.clone())))
        .collect::<Result<_>>()?;
    let analytic: Vec<Tensor<f64>> = paths
        .iter()
        .map(|p| grads.get(p).cloned())
        .collect::<Result<_>>()?;

    check_gradients(
        &format!("model[{}]", cfg.block.name()),
        &inputs,
        &scalar(1.0),
        &analytic,
        |values| {
            let mut probe = ParamStore::new();
            for (p, v) in paths.iter().zip(values) {
                probe.insert(p.clone(), v.clone());
            }
            Ok(scalar(
                Model::new(cfg, &probe)?.loss(&images, &labels, smoothing)?,
            ))
        },
        tolerance,
        usize::MAX,
        seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Ops,
    Model,
    All,
}

impl Scope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ops" => Some(Scope::Ops),
            "model" => Some(Scope::Model),
            "all" => Some(Scope::All),
            _ => None,
        }
    }
}

/// Registered ops without a report in `reports`.
pub fn missing_ops(reports: &[GradReport]) -> Vec<&'static str> {
    REGISTERED_OPS
        .iter()
        .copied()
        .filter(|name| {
            !reports.iter().any(|r| {
                r.op == *name
                    || r.op
                        .strip_prefix(name)
                        .is_some_and(|rest| rest.starts_with('['))
            })
        })
        .collect()
}

/// Every op check (plus the shift under several presets) and/or both micro
/// models, in a fixed order. A registered op without a check appears as a
/// failing report.
pub fn run_suite(scope: Scope, seed: u64) -> Result<Vec<GradReport>> {
    let mut reports = Vec::new();
    if matches!(scope, Scope::Ops | Scope::All) {
        for name in REGISTERED_OPS {
            reports.push(check_op(name, seed)?);
        }
        for label in ["a", "c", "g"] {
            reports.push(check_shift(
                &ShiftConfig::preset(label)?,
                &[2, 4, 3, 8],
                seed,
            )?);
        }
        reports.push(check_shift(
            &ShiftConfig::parse_custom("2,0;0,-1")?,
            &[5, 4, 6],
            seed,
        )?);
        for name in missing_ops(&reports) {
            reports.push(GradReport {
                op: name.to_string(),
                max_rel_error: f64::INFINITY,
                worst: None,
                tolerance: 0.0,
                checked: 0,
                pass: false,
            });
        }
    }
    if matches!(scope, Scope::Model | Scope::All) {
        for block in [BlockKind::S2Mlp, BlockKind::Mixer] {
            reports.push(check_model(
                &ModelConfig::micro().with_block(block),
                seed,
                MODEL_TOL,
            )?);
        }
    }
    Ok(reports)
}
