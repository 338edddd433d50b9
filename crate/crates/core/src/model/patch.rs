use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn image_dims(image: &Tensor<impl Scalar>) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [w, h, 3] => Ok((1, w, h)),
        [b, w, h, 3] => Ok((b, w, h)),
        _ => Err(Error::shape(format!(
            "expected an image [W, H, 3] or batch [B, W, H, 3], got {:?}",
            image.shape()
        ))),
    }
}

/// Unfolds an image (or batch) into patch rows `[B·M, 3p²]`.
///
/// Patches are enumerated width-major: patch `(x, y)` of a `w × h` grid is
/// row `x·h + y`. Inside a patch, pixel `(i, j, ch)` lands at
/// `(i·p + j)·3 + ch`.
pub fn patchify<T: Scalar>(image: &Tensor<T>, p: usize) -> Result<Tensor<T>> {
    let (batch, w_img, h_img) = image_dims(image)?;
    if p == 0 || w_img % p != 0 || h_img % p != 0 {
        return Err(Error::shape(format!(
            "image {w_img}×{h_img} is not divisible by patch size {p}"
        )));
    }
    let (gw, gh) = (w_img / p, h_img / p);
    let dim = 3 * p * p;
    let src = image.data();
    let mut out = Vec::with_capacity(image.numel());
    for b in 0..batch {
        let base = b * w_img * h_img * 3;
        for x in 0..gw {
            for y in 0..gh {
                for i in 0..p {
                    let row = base + ((x * p + i) * h_img + y * p) * 3;
                    out.extend_from_slice(&src[row..row + p * 3]);
                }
            }
        }
    }
    Tensor::from_vec(&[batch * gw * gh, dim], out)
}

/// Inverse of [`patchify`] for a single image.
pub fn unpatchify<T: Scalar>(
    patches: &Tensor<T>,
    w_img: usize,
    h_img: usize,
    p: usize,
) -> Result<Tensor<T>> {
    if p == 0 || !w_img.is_multiple_of(p) || !h_img.is_multiple_of(p) {
        return Err(Error::shape(format!(
            "image {w_img}×{h_img} is not divisible by patch size {p}"
        )));
    }
    let (gw, gh) = (w_img / p, h_img / p);
    if patches.shape() != [gw * gh, 3 * p * p] {
        return Err(Error::shape(format!(
            "patches {:?} do not tile a {w_img}×{h_img} image with patch size {p}",
            patches.shape()
        )));
    }
    let mut out = Tensor::zeros(&[w_img, h_img, 3])?;
    let src = patches.data();
    let dst = out.data_mut();
    for x in 0..gw {
        for y in 0..gh {
            let patch = &src[(x * gh + y) * 3 * p * p..];
            for i in 0..p {
                let row = ((x * p + i) * h_img + y * p) * 3;
                dst[row..row + p * 3].copy_from_slice(&patch[i * p * 3..(i + 1) * p * 3]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_patch_is_flat_copy() {
        let img = Tensor::from_fn(&[4, 4, 3], |i| i as f32).unwrap();
        let p = patchify(&img, 4).unwrap();
        assert_eq!(p.shape(), &[1, 48]);
        assert_eq!(p.data(), img.data());
    }

    #[test]
    fn two_patches_partition_the_image() {
        let img = Tensor::from_fn(&[4, 2, 3], |i| i as f64).unwrap();
        let p = patchify(&img, 2).unwrap();
        assert_eq!(p.shape(), &[2, 12]);
        // width-major 2p×p image: the rows of patch 0 come first in memory
        assert_eq!(&p.data()[..12], &img.data()[..12]);
        assert_eq!(&p.data()[12..], &img.data()[12..]);
    }

    #[test]
    fn pixel_layout_inside_patch() {
        let img = Tensor::from_fn(&[4, 6, 3], |i| i as f64).unwrap();
        let p = patchify(&img, 2).unwrap();
        // patch (x=1, y=2) is row 1·3 + 2 = 5; pixel (i=1, j=0, ch=2)
        let v = p.get(&[5, (2) * 3 + 2]).unwrap();
        assert_eq!(v, img.get(&[3, 4, 2]).unwrap());
    }

    #[test]
    fn round_trip() {
        let img = Tensor::from_fn(&[8, 12, 3], |i| (i as f64).sin()).unwrap();
        let back = unpatchify(&patchify(&img, 4).unwrap(), 8, 12, 4).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn errors() {
        let img = Tensor::<f32>::zeros(&[6, 4, 3]).unwrap();
        assert!(patchify(&img, 4).is_err());
        assert!(patchify(&Tensor::<f32>::zeros(&[4, 4, 2]).unwrap(), 2).is_err());
    }
}
