use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::flops::{self, Kind};
use crate::tensor::{Scalar, Tensor};

/// Standard normal CDF via the exact error function.
fn phi_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// `x·Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    x * phi_cdf(x)
}

/// `d/dx [x·Φ(x)] = Φ(x) + x·φ(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    phi_cdf(x) + x * density
}

#[derive(Debug, Clone)]
pub struct GeluCache<T> {
    input: Tensor<T>,
}

pub fn gelu_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, GeluCache<T>) {
    flops::record(Kind::Elementwise, 3 * x.numel() as u64);
    let y = x.map(|v| T::from_f64(gelu(v.as_f64())));
    (y, GeluCache { input: x.clone() })
}

pub fn gelu_backward<T: Scalar>(cache: &GeluCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.shape() != cache.input.shape() {
        return Err(Error::shape(format!(
            "gelu backward: gradient {:?} does not match {:?}",
            dy.shape(),
            cache.input.shape()
        )));
    }
    cache.input.zip_map(dy, "gelu backward", |x, d| {
        T::from_f64(gelu_grad(x.as_f64())) * d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        // Φ(1) = 0.841344746...
        assert!((gelu(1.0) - 0.841_344_746).abs() < 1e-7);
        // |GELU(−10)| = 10·Φ(−10) ≈ 7.6e−23
        assert!(gelu(-10.0).abs() < 1e-6);
        // erf-based, not the tanh approximation (which gives 0.841192 at 1)
        assert!((gelu(1.0) - 0.841_192).abs() > 1e-4);
    }

    #[test]
    fn shape_of_the_curve() {
        let mut prev = 0.0;
        for i in 0..=400 {
            let x = i as f64 * 0.025;
            let y = gelu(x);
            assert!(y >= prev);
            assert!(y <= x);
            prev = y;
        }
        assert!(gelu(-40.0).abs() < 1e-300);
    }

    #[test]
    fn tensor_forward_and_backward_shapes() {
        let x = Tensor::from_vec(&[2, 2], vec![-1.0f32, 0.0, 0.5, 2.0]).unwrap();
        let (y, cache) = gelu_forward(&x);
        assert_eq!(y.shape(), &[2, 2]);
        assert!(gelu_backward(&cache, &Tensor::zeros(&[4]).unwrap()).is_err());
        let dx = gelu_backward(&cache, &Tensor::full(&[2, 2], 1.0).unwrap()).unwrap();
        assert!((dx.data()[1] - 0.5).abs() < 1e-7);
    }
}
