use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Borrowed fully-connected layer parameters: `weight[out×in]`, `bias[out]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear<'a, T> {
    pub weight: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct LinearCache<T> {
    input: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<'a, T: Scalar> Linear<'a, T> {
    pub fn new(weight: &'a Tensor<T>, bias: &'a Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::shape(format!(
                "linear: weight {:?} and bias {:?} are inconsistent",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    /// `y[m] = weight · x[m] + bias` for every row of `x[M×in]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LinearCache<T>)> {
        let y = self.apply(x)?;
        Ok((y, LinearCache { input: x.clone() }))
    }

    /// Forward without keeping a cache.
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 2 || x.shape()[1] != self.in_features() {
            return Err(Error::shape(format!(
                "linear: input {:?} does not match weight {:?}",
                x.shape(),
                self.weight.shape()
            )));
        }
        let mut y = x.matmul(&self.weight.transpose()?)?;
        let out = self.out_features();
        let bias = self.bias.data();
        for row in y.data_mut().chunks_mut(out) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v = *v + b;
            }
        }
        Ok(y)
    }

    pub fn backward(
        &self,
        cache: &LinearCache<T>,
        dy: &Tensor<T>,
    ) -> Result<(Tensor<T>, LinearGrads<T>)> {
        let rows = cache.input.shape()[0];
        if dy.shape() != [rows, self.out_features()] {
            return Err(Error::shape(format!(
                "linear backward: gradient {:?} does not match output [{rows}, {}]",
                dy.shape(),
                self.out_features()
            )));
        }
        let dx = dy.matmul(self.weight)?;
        let dw = dy.transpose()?.matmul(&cache.input)?;
        let db = dy.sum_axis(0)?;
        Ok((
            dx,
            LinearGrads {
                weight: dw,
                bias: db,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xorshift64Star;

    #[test]
    fn identity_weight_is_identity() {
        let w = Tensor::<f64>::eye(3).unwrap();
        let b = Tensor::zeros(&[3]).unwrap();
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5).unwrap();
        let (y, _) = Linear::new(&w, &b).unwrap().forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn small_arithmetic() {
        let w = Tensor::from_vec(&[1, 2], vec![1.0f64, 1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.5]).unwrap();
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let y = Linear::new(&w, &b).unwrap().apply(&x).unwrap();
        assert_eq!(y.data(), &[3.5]);
    }

    #[test]
    fn matches_matmul_plus_bias_oracle() {
        let mut rng = Xorshift64Star::new(5);
        let mut rand =
            |shape: &[usize]| Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0)).unwrap();
        let (w, b, x) = (rand(&[4, 6]), rand(&[4]), rand(&[5, 6]));
        let y = Linear::new(&w, &b).unwrap().apply(&x).unwrap();
        let xw = x.matmul(&w.transpose().unwrap()).unwrap();
        let expected = Tensor::from_fn(&[5, 4], |i| xw.data()[i] + b.data()[i % 4]).unwrap();
        assert_eq!(y, expected);
    }

    #[test]
    fn shape_errors() {
        let w = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2]).unwrap();
        let lin = Linear::new(&w, &b).unwrap();
        assert!(lin.apply(&Tensor::zeros(&[4, 2]).unwrap()).is_err());
        let bad_bias = Tensor::<f32>::zeros(&[3]).unwrap();
        assert!(Linear::new(&w, &bad_bias).is_err());
        let (_, cache) = lin.forward(&Tensor::zeros(&[4, 3]).unwrap()).unwrap();
        assert!(lin
            .backward(&cache, &Tensor::zeros(&[4, 3]).unwrap())
            .is_err());
    }
}
