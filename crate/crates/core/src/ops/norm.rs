use crate::error::{Error, Result};
use crate::flops::{self, Kind};
use crate::tensor::{Scalar, Tensor};

/// Epsilon added to the variance in layer normalization.
pub const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// Per-row standardization followed by a per-channel affine map.
    LayerNorm,
    /// Per-channel affine map only, `γ·x + β`.
    Affine,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::LayerNorm => "layernorm",
            NormKind::Affine => "affine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "layernorm" => Some(NormKind::LayerNorm),
            "affine" => Some(NormKind::Affine),
            _ => None,
        }
    }
}

/// Borrowed normalization parameters over the last axis of `x[M×c]`.
#[derive(Debug, Clone, Copy)]
pub struct Norm<'a, T> {
    pub gamma: &'a Tensor<T>,
    pub beta: &'a Tensor<T>,
    pub kind: NormKind,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub enum NormCache<T> {
    LayerNorm { xhat: Tensor<T>, inv_std: Vec<T> },
    Affine { input: Tensor<T> },
}

#[derive(Debug, Clone)]
pub struct NormGrads<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<'a, T: Scalar> Norm<'a, T> {
    pub fn new(gamma: &'a Tensor<T>, beta: &'a Tensor<T>, kind: NormKind) -> Result<Self> {
        if gamma.rank() != 1 || gamma.shape() != beta.shape() {
            return Err(Error::shape(format!(
                "norm: gamma {:?} and beta {:?} must be equal-length vectors",
                gamma.shape(),
                beta.shape()
            )));
        }
        Ok(Norm {
            gamma,
            beta,
            kind,
            eps: LAYERNORM_EPS,
        })
    }

    pub fn layernorm(gamma: &'a Tensor<T>, beta: &'a Tensor<T>) -> Result<Self> {
        Self::new(gamma, beta, NormKind::LayerNorm)
    }

    pub fn affine(gamma: &'a Tensor<T>, beta: &'a Tensor<T>) -> Result<Self> {
        Self::new(gamma, beta, NormKind::Affine)
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    fn channels(&self) -> usize {
        self.gamma.numel()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.rank() != 2 || x.shape()[1] != self.channels() {
            return Err(Error::shape(format!(
                "{}: input {:?} does not have {} channels",
                self.kind.name(),
                x.shape(),
                self.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, NormCache<T>)> {
        match self.kind {
            NormKind::LayerNorm => self.layernorm_forward(x),
            NormKind::Affine => self.affine_forward(x),
        }
    }

    /// `γ·(x − μ)/√(σ² + ε) + β` per row, with the biased variance.
    pub fn layernorm_forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, NormCache<T>)> {
        self.check_input(x)?;
        let c = self.channels();
        let rows = x.shape()[0];
        flops::record(Kind::Elementwise, (rows * (3 * c + 3)) as u64);
        let inv_c = T::one() / T::from_f64(c as f64);
        let eps = T::from_f64(self.eps);
        let mut xhat = Vec::with_capacity(x.numel());
        let mut inv_std = Vec::with_capacity(rows);
        for row in x.data().chunks(c) {
            let mean = row.iter().fold(T::zero(), |a, &v| a + v) * inv_c;
            let var = row
                .iter()
                .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
                * inv_c;
            let r = T::one() / (var + eps).sqrt();
            inv_std.push(r);
            xhat.extend(row.iter().map(|&v| (v - mean) * r));
        }
        let xhat = Tensor::from_vec(x.shape(), xhat)?;
        let y = self.scale_shift(&xhat);
        Ok((y, NormCache::LayerNorm { xhat, inv_std }))
    }

    /// `γ·x + β` per row, no statistics.
    pub fn affine_forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, NormCache<T>)> {
        self.check_input(x)?;
        flops::record(Kind::Elementwise, x.numel() as u64);
        Ok((self.scale_shift(x), NormCache::Affine { input: x.clone() }))
    }

    fn scale_shift(&self, x: &Tensor<T>) -> Tensor<T> {
        let c = self.channels();
        let (g, b) = (self.gamma.data(), self.beta.data());
        Tensor::from_fn(x.shape(), |i| x.data()[i] * g[i % c] + b[i % c]).expect("same shape")
    }

    pub fn backward(
        &self,
        cache: &NormCache<T>,
        dy: &Tensor<T>,
    ) -> Result<(Tensor<T>, NormGrads<T>)> {
        let c = self.channels();
        let basis = match cache {
            NormCache::LayerNorm { xhat, .. } => xhat,
            NormCache::Affine { input } => input,
        };
        if dy.shape() != basis.shape() {
            return Err(Error::shape(format!(
                "{} backward: gradient {:?} does not match output {:?}",
                self.kind.name(),
                dy.shape(),
                basis.shape()
            )));
        }
        let dgamma = dy.mul(basis)?.sum_axis(0)?;
        let dbeta = dy.sum_axis(0)?;
        let g = self.gamma.data();
        let dx = match cache {
            NormCache::Affine { .. } => Tensor::from_fn(dy.shape(), |i| dy.data()[i] * g[i % c])?,
            NormCache::LayerNorm { xhat, inv_std } => {
                let inv_c = T::one() / T::from_f64(c as f64);
                let mut dx = Vec::with_capacity(dy.numel());
                for ((dy_row, xh_row), &r) in
                    dy.data().chunks(c).zip(xhat.data().chunks(c)).zip(inv_std)
                {
                    let dxhat: Vec<T> = dy_row.iter().zip(g).map(|(&d, &gi)| d * gi).collect();
                    let mean_d = dxhat.iter().fold(T::zero(), |a, &v| a + v) * inv_c;
                    let mean_dx = dxhat
                        .iter()
                        .zip(xh_row)
                        .fold(T::zero(), |a, (&d, &xh)| a + d * xh)
                        * inv_c;
                    dx.extend(
                        dxhat
                            .iter()
                            .zip(xh_row)
                            .map(|(&d, &xh)| r * (d - mean_d - xh * mean_dx)),
                    );
                }
                Tensor::from_vec(dy.shape(), dx)?
            }
        };
        Ok((
            dx,
            NormGrads {
                gamma: dgamma,
                beta: dbeta,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xorshift64Star;

    fn ones(c: usize) -> Tensor<f64> {
        Tensor::full(&[c], 1.0).unwrap()
    }

    #[test]
    fn constant_row_normalizes_to_beta() {
        let (g, b) = (ones(3), Tensor::zeros(&[3]).unwrap());
        let x = Tensor::from_vec(&[1, 3], vec![5.0, 5.0, 5.0]).unwrap();
        let (y, _) = Norm::layernorm(&g, &b).unwrap().forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn direct_formula_without_eps() {
        // μ = 2, σ = √(2/3): (x − μ)/σ = ±√(3/2)
        let (g, b) = (ones(3), Tensor::zeros(&[3]).unwrap());
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let norm = Norm::layernorm(&g, &b).unwrap().with_eps(0.0);
        let (y, _) = norm.forward(&x).unwrap();
        let expected = [-1.224745, 0.0, 1.224745];
        for (a, e) in y.data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let g = Tensor::zeros(&[4]).unwrap();
        let b = Tensor::from_vec(&[4], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let x = Tensor::from_fn(&[3, 4], |i| (i * i) as f64).unwrap();
        let (y, _) = Norm::layernorm(&g, &b).unwrap().forward(&x).unwrap();
        for row in y.data().chunks(4) {
            assert_eq!(row, b.data());
        }
    }

    #[test]
    fn affine_examples() {
        let (g, b) = (ones(2), Tensor::zeros(&[2]).unwrap());
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(Norm::affine(&g, &b).unwrap().forward(&x).unwrap().0, x);
        let g2 = Tensor::full(&[2], 2.0).unwrap();
        let b1 = Tensor::full(&[2], 1.0).unwrap();
        let (y, _) = Norm::affine(&g2, &b1).unwrap().forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn layernorm_rows_are_standardized() {
        let mut rng = Xorshift64Star::new(1);
        let (g, b) = (ones(16), Tensor::zeros(&[16]).unwrap());
        let x = Tensor::from_fn(&[8, 16], |_| rng.uniform(-10.0, 10.0)).unwrap();
        let (y, _) = Norm::layernorm(&g, &b).unwrap().forward(&x).unwrap();
        for row in y.data().chunks(16) {
            let mean = row.iter().sum::<f64>() / 16.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let (g, b) = (ones(3), Tensor::zeros(&[3]).unwrap());
        let x = Tensor::zeros(&[2, 4]).unwrap();
        assert!(Norm::layernorm(&g, &b).unwrap().forward(&x).is_err());
        assert!(Norm::new(&g, &Tensor::zeros(&[2]).unwrap(), NormKind::Affine).is_err());
    }
}
