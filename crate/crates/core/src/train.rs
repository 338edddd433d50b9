//! Desk-scale training: AdamW, a warmup + cosine schedule, and a synthetic
//! task whose label depends only on how two patches are arranged.
//!
//! Without a spatial shift every layer before pooling acts on each patch
//! independently, so the pooled features are a symmetric function of the
//! bag of patches. The toy task is built so that this bag has the same
//! distribution for every class, which pins a shift-free model to chance.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{init_params, Model, ModelConfig, ParamStore};
use crate::rng::Xorshift64Star;
use crate::tensor::{Scalar, Tensor};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.05,
        }
    }
}

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimState<T> {
    pub hyper: AdamW,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
    pub step: u64,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(params: &ParamStore<T>, hyper: AdamW) -> Self {
        OptimState {
            hyper,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    /// One AdamW update at learning rate `lr`.
    ///
    /// Weight decay is decoupled: each parameter is first scaled by
    /// `1 − lr·wd`, then moved by the bias-corrected Adam direction. Decay
    /// applies to every parameter. All gradients are checked before anything
    /// is modified.
    pub fn update(
        &mut self,
        params: &mut ParamStore<T>,
        grads: &ParamStore<T>,
        lr: f64,
    ) -> Result<()> {
        for (path, p) in params.iter() {
            let g = grads
                .get(path)
                .map_err(|_| Error::config(format!("no gradient for parameter {path}")))?;
            if g.shape() != p.shape() {
                return Err(Error::shape(format!(
                    "gradient for {path} has shape {:?}, parameter has {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_string(),
                });
            }
        }
        self.step += 1;
        let AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.hyper;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;
        for (path, p) in params.iter_mut() {
            let g = grads.get(path)?.data();
            let m = self
                .m
                .get_mut(path)
                .expect("moment mirrors params")
                .data_mut();
            let v = self
                .v
                .get_mut(path)
                .expect("moment mirrors params")
                .data_mut();
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let gf = g.as_f64();
                let mf = beta1 * m.as_f64() + (1.0 - beta1) * gf;
                let vf = beta2 * v.as_f64() + (1.0 - beta2) * gf * gf;
                *m = T::from_f64(mf);
                *v = T::from_f64(vf);
                let step = lr * (mf / c1) / ((vf / c2).sqrt() + eps);
                *p = T::from_f64(p.as_f64() * decay - step);
            }
        }
        Ok(())
    }
}

/// Linear warmup from 0 to `base_lr`, then cosine decay to `min_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub min_lr: f64,
}

impl Schedule {
    pub fn new(base_lr: f64, warmup_steps: u64, total_steps: u64, min_lr: f64) -> Result<Self> {
        if warmup_steps > total_steps {
            return Err(Error::config(format!(
                "warmup of {warmup_steps} steps exceeds the {total_steps} total steps"
            )));
        }
        if !(base_lr >= 0.0 && min_lr >= 0.0) {
            return Err(Error::config("learning rates must be non-negative"));
        }
        Ok(Schedule {
            base_lr,
            warmup_steps,
            total_steps,
            min_lr,
        })
    }

    /// Learning rate for step `t` (1-based). The floor is `min(min_lr, base_lr)`.
    pub fn lr(&self, t: u64) -> f64 {
        let floor = self.min_lr.min(self.base_lr);
        if t <= self.warmup_steps {
            return self.base_lr * t as f64 / self.warmup_steps as f64;
        }
        let span = (self.total_steps - self.warmup_steps).max(1) as f64;
        let progress = ((t - self.warmup_steps) as f64 / span).min(1.0);
        floor + (self.base_lr - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// Relative arrangement of blob A with respect to blob B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    /// B is one cell further along the width axis.
    LeftOf = 0,
    /// B is one cell back along the width axis.
    RightOf = 1,
    /// B is one cell further along the height axis.
    Above = 2,
    /// B is one cell back along the height axis.
    Below = 3,
}

impl Arrangement {
    pub const ALL: [Arrangement; 4] = [
        Arrangement::LeftOf,
        Arrangement::RightOf,
        Arrangement::Above,
        Arrangement::Below,
    ];

    /// Cell offset from A to B.
    pub fn offset(self) -> (i64, i64) {
        match self {
            Arrangement::LeftOf => (1, 0),
            Arrangement::RightOf => (-1, 0),
            Arrangement::Above => (0, 1),
            Arrangement::Below => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Parameters of the relative-arrangement task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyConfig {
    /// Patches per side.
    pub grid: usize,
    /// Patch side length in pixels.
    pub patch: usize,
    /// Number of samples; must be a multiple of 4.
    pub count: usize,
    pub seed: u64,
    pub split: Split,
}

impl ToyConfig {
    pub fn side(&self) -> usize {
        self.grid * self.patch
    }
}

/// Images `[n, S, S, 3]` with values in `[0, 1]` and their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset<T> {
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> ToyDataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        let images = self.images.select_rows(indices)?;
        Ok((images, indices.iter().map(|&i| self.labels[i]).collect()))
    }
}

/// Background pixels are uniform in this range.
pub const BACKGROUND: (f64, f64) = (0.1, 0.2);

/// Draws the relative-arrangement dataset.
///
/// Each image holds one checkerboard patch (A, alternating 0.1 / 0.9) and one
/// flat bright patch (B, 0.85) in adjacent cells, on a background drawn
/// from [`BACKGROUND`]; pixels of A and B get ±0.05 noise. Sample `i` has label
/// `i mod 4`, so classes are exactly balanced. Only the relative position of
/// A and B depends on the label.
pub fn generate_toy<T: Scalar>(cfg: &ToyConfig) -> Result<ToyDataset<T>> {
    if cfg.grid < 2 {
        return Err(Error::config(format!(
            "toy grid must be at least 2, got {}",
            cfg.grid
        )));
    }
    if cfg.patch == 0 {
        return Err(Error::config("toy patch size must be positive"));
    }
    if !cfg.count.is_multiple_of(4) {
        return Err(Error::config(format!(
            "toy sample count {} is not divisible by 4",
            cfg.count
        )));
    }
    let label = match cfg.split {
        Split::Train => "toy/train",
        Split::Test => "toy/test",
    };
    let mut rng = Xorshift64Star::for_stream(cfg.seed, label);
    let (g, p, s) = (cfg.grid, cfg.patch, cfg.side());
    let mut data = Vec::with_capacity(cfg.count * s * s * 3);
    let mut labels = Vec::with_capacity(cfg.count);
    let mut image = vec![0.0f64; s * s * 3];
    for i in 0..cfg.count {
        let class = Arrangement::ALL[i % 4];
        let (ox, oy) = class.offset();
        // A's cell range so that B = A + offset stays on the grid
        let range = |o: i64| {
            if o > 0 {
                (0, g - 1)
            } else if o < 0 {
                (1, g)
            } else {
                (0, g)
            }
        };
        let (x0, x1) = range(ox);
        let (y0, y1) = range(oy);
        let ax = x0 + rng.below(x1 - x0);
        let ay = y0 + rng.below(y1 - y0);
        let bx = (ax as i64 + ox) as usize;
        let by = (ay as i64 + oy) as usize;

        for v in image.iter_mut() {
            *v = rng.uniform(BACKGROUND.0, BACKGROUND.1);
        }
        for i in 0..p {
            for j in 0..p {
                let a = ((ax * p + i) * s + ay * p + j) * 3;
                let b = ((bx * p + i) * s + by * p + j) * 3;
                let checker = if (i + j) % 2 == 0 { 0.9 } else { 0.1 };
                for ch in 0..3 {
                    image[a + ch] = checker + rng.uniform(-0.05, 0.05);
                    image[b + ch] = 0.85 + rng.uniform(-0.05, 0.05);
                }
            }
        }
        data.extend(image.iter().map(|&v| T::from_f64(v)));
        labels.push(class as usize);
    }
    Ok(ToyDataset {
        images: Tensor::from_vec(&[cfg.count, s, s, 3], data)?,
        labels,
    })
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub min_lr: f64,
    /// Fraction of all steps spent warming up.
    pub warmup_frac: f64,
    pub optimizer: AdamW,
    pub smoothing: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            base_lr: 1e-3,
            min_lr: 1e-5,
            warmup_frac: 0.05,
            optimizer: AdamW::default(),
            smoothing: 0.1,
            train_count: 4000,
            test_count: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The train and held-out task definitions for a model whose image is
    /// `grid · patch` pixels square.
    pub fn toy_splits(&self, cfg: &ModelConfig) -> Result<(ToyConfig, ToyConfig)> {
        if cfg.image_w != cfg.image_h {
            return Err(Error::config(format!(
                "the toy task needs square images, config has {}×{}",
                cfg.image_w, cfg.image_h
            )));
        }
        if cfg.classes != 4 {
            return Err(Error::config(format!(
                "the toy task has 4 classes, config has {}",
                cfg.classes
            )));
        }
        let base = ToyConfig {
            grid: cfg.image_w / cfg.patch,
            patch: cfg.patch,
            count: self.train_count,
            seed: self.seed,
            split: Split::Train,
        };
        let test = ToyConfig {
            count: self.test_count,
            split: Split::Test,
            ..base
        };
        Ok((base, test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch.
    pub loss: f64,
    /// Held-out accuracy after the epoch.
    pub acc: f64,
}

impl fmt::Display for EpochMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} acc={:.4}",
            self.epoch, self.loss, self.acc
        )
    }
}

pub struct TrainOutcome<T> {
    pub history: Vec<EpochMetrics>,
    pub params: ParamStore<T>,
}

impl<T> TrainOutcome<T> {
    pub fn final_acc(&self) -> f64 {
        self.history.last().map_or(0.0, |m| m.acc)
    }
}

/// Index of the largest logit in each row; ties go to the lower index.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let k = logits.shape()[logits.rank() - 1];
    logits
        .data()
        .chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, row[0]),
                    |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                )
                .0
        })
        .collect()
}

/// Accuracy of `params` on `data`.
pub fn evaluate<T: Scalar>(
    cfg: &ModelConfig,
    params: &ParamStore<T>,
    data: &ToyDataset<T>,
) -> Result<f64> {
    let model = Model::new(cfg, params)?;
    let mut correct = 0;
    let chunk = 250;
    for start in (0..data.len()).step_by(chunk) {
        let end = (start + chunk).min(data.len());
        let logits = model.infer(&data.images.slice_rows(start, end)?)?;
        correct += argmax_rows(&logits)
            .iter()
            .zip(&data.labels[start..end])
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

/// Trains from a fresh initialization on the toy task.
pub fn train_loop<T: Scalar>(cfg: &ModelConfig, tc: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_loop_with(cfg, tc, |_| {})
}

/// [`train_loop`] with a callback after every epoch.
pub fn train_loop_with<T: Scalar>(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<T>> {
    if tc.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    if !(0.0..=1.0).contains(&tc.warmup_frac) {
        return Err(Error::config("warmup fraction must be in [0, 1]"));
    }
    let (train_cfg, test_cfg) = tc.toy_splits(cfg)?;
    let train: ToyDataset<T> = generate_toy(&train_cfg)?;
    let test: ToyDataset<T> = generate_toy(&test_cfg)?;

    let mut params: ParamStore<T> = init_params(cfg, tc.seed)?;
    let mut state = OptimState::new(&params, tc.optimizer);
    let steps_per_epoch = train.len().div_ceil(tc.batch_size) as u64;
    let total = steps_per_epoch * tc.epochs as u64;
    let warmup = (tc.warmup_frac * total as f64).round() as u64;
    let schedule = Schedule::new(tc.base_lr, warmup, total, tc.min_lr)?;
    let mut order_rng = Xorshift64Star::for_stream(tc.seed, "batch-order");
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let (images, labels) = train.batch(batch)?;
            let (loss, grads) =
                Model::new(cfg, &params)?.loss_and_grads(&images, &labels, tc.smoothing)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            let lr = schedule.lr(state.step + 1);
            state.update(&mut params, &grads, lr)?;
        }
        let metrics = EpochMetrics {
            epoch,
            loss: loss_sum / train.len() as f64,
            acc: evaluate(cfg, &params, &test)?,
        };
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok(TrainOutcome { history, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(&[1], vec![v]).unwrap());
        s
    }

    #[test]
    fn zero_grads_without_decay_is_a_fixed_point() {
        let mut p = scalar_store(0.7);
        let g = scalar_store(0.0);
        let mut st = OptimState::new(
            &p,
            AdamW {
                weight_decay: 0.0,
                ..AdamW::default()
            },
        );
        st.update(&mut p, &g, 0.1).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[0.7]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_grads_with_decay_shrink_exactly() {
        let mut p = scalar_store(0.7);
        let g = scalar_store(0.0);
        let mut st = OptimState::new(&p, AdamW::default());
        st.update(&mut p, &g, 0.1).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[0.7 * (1.0 - 0.1 * 0.05)]);
    }

    #[test]
    fn two_step_trace() {
        // hand trace, g = 0.5 both steps, lr = 0.01, wd = 0.05
        let (lr, wd, g, eps) = (0.01, 0.05, 0.5, 1e-8);
        let mut p = scalar_store(1.0);
        let grads = scalar_store(g);
        let mut st = OptimState::new(&p, AdamW::default());
        st.update(&mut p, &grads, lr).unwrap();
        // step 1: m̂ = g, v̂ = g², direction = g / (|g| + eps)
        let p1 = 1.0 * (1.0 - lr * wd) - lr * g / (g + eps);
        assert!((p.get("w").unwrap().data()[0] - p1).abs() < 1e-15);
        st.update(&mut p, &grads, lr).unwrap();
        // step 2: m = 0.19·g / 0.19, v = 0.001999·g² / 0.001999
        let m2: f64 = 0.9 * 0.1 * g + 0.1 * g;
        let v2: f64 = 0.999 * 0.001 * g * g + 0.001 * g * g;
        let p2 = p1 * (1.0 - lr * wd)
            - lr * (m2 / 0.19) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + eps);
        assert!((p.get("w").unwrap().data()[0] - p2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_path() {
        let mut p = scalar_store(1.0);
        let g = scalar_store(f64::NAN);
        let mut st = OptimState::new(&p, AdamW::default());
        match st.update(&mut p, &g, 0.1) {
            Err(Error::NonFinite { path }) => assert_eq!(path, "w"),
            other => panic!("{other:?}"),
        }
        assert_eq!(st.step, 0);
    }

    #[test]
    fn schedule_shape() {
        let s = Schedule::new(1.0, 10, 110, 0.01).unwrap();
        assert_eq!(s.lr(0), 0.0);
        assert!((s.lr(5) - 0.5).abs() < 1e-12);
        assert_eq!(s.lr(10), 1.0);
        assert!((s.lr(60) - (0.01 + 0.99 * 0.5)).abs() < 1e-12);
        assert!((s.lr(110) - 0.01).abs() < 1e-12);
        for t in 11..110 {
            assert!(s.lr(t + 1) <= s.lr(t));
        }
        assert!(Schedule::new(1.0, 20, 10, 0.0).is_err());
        assert_eq!(Schedule::new(0.0, 0, 10, 1e-5).unwrap().lr(3), 0.0);
    }

    fn toy(count: usize, seed: u64) -> ToyConfig {
        ToyConfig {
            grid: 4,
            patch: 4,
            count,
            seed,
            split: Split::Train,
        }
    }

    #[test]
    fn toy_is_deterministic_and_balanced() {
        let a: ToyDataset<f32> = generate_toy(&toy(40, 1)).unwrap();
        let b: ToyDataset<f32> = generate_toy(&toy(40, 1)).unwrap();
        assert_eq!(a, b);
        let c: ToyDataset<f32> = generate_toy(&ToyConfig {
            split: Split::Test,
            ..toy(40, 1)
        })
        .unwrap();
        assert_ne!(a, c);
        for k in 0..4 {
            assert_eq!(a.labels.iter().filter(|&&l| l == k).count(), 10);
        }
        assert!(a.images.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a.images.shape(), &[40, 16, 16, 3]);
    }

    #[test]
    fn toy_rejects_bad_configs() {
        assert!(generate_toy::<f32>(&toy(42, 0)).is_err());
        assert!(generate_toy::<f32>(&ToyConfig {
            grid: 1,
            ..toy(4, 0)
        })
        .is_err());
    }

    #[test]
    fn zero_lr_keeps_loss_constant() {
        let mut cfg = ModelConfig::micro();
        cfg.classes = 4;
        let tc = TrainConfig {
            epochs: 3,
            base_lr: 0.0,
            train_count: 64,
            test_count: 32,
            ..TrainConfig::default()
        };
        let out = train_loop::<f64>(&cfg, &tc).unwrap();
        let first = out.history[0];
        for m in &out.history {
            assert!((m.loss - first.loss).abs() < 1e-12, "{m}");
            assert_eq!(m.acc, first.acc);
        }
        assert_eq!(out.params, init_params(&cfg, 0).unwrap());
    }

    #[test]
    fn metric_line_format() {
        let m = EpochMetrics {
            epoch: 3,
            loss: 0.5,
            acc: 0.25,
        };
        assert_eq!(m.to_string(), "epoch=3 loss=0.500000 acc=0.2500");
    }
}
