//! The full network: patchify → embed → N blocks → pool → linear head.

mod block;
mod config;
mod params;
mod patch;

pub use block::{Embed, Layout, MixerBlock, S2Block};
pub use config::{BlockKind, ModelConfig, PresetName};
pub use params::{
    check_store, init_params, param_specs, Component, ParamRole, ParamSpec, ParamStore, INIT_STD,
};
pub use patch::{patchify, unpatchify};

use crate::error::{Error, Result};
use crate::flops::{self, Tally};
use crate::ops::{global_avg_pool, global_avg_pool_backward, softmax_xent, Linear, LinearCache};
use crate::tensor::{Scalar, Tensor};

use block::{EmbedCache, MixerBlockCache, S2BlockCache};

/// Where the classifier sits relative to global average pooling.
///
/// Both orders give the same logits up to rounding (the head is affine);
/// they differ in cost: `PerPatch` runs the head on all M patch features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadOrder {
    #[default]
    PoolFirst,
    PerPatch,
}

enum BlockRef<'s, T> {
    S2(S2Block<'s, T>),
    Mixer(MixerBlock<'s, T>),
}

enum BlockCache<T> {
    S2(S2BlockCache<T>),
    Mixer(MixerBlockCache<T>),
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache<T> {
    embed: EmbedCache<T>,
    blocks: Vec<BlockCache<T>>,
    layout: Layout,
    hidden: usize,
    head: LinearCache<T>,
}

/// Multiplies recorded per network component during one forward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentTally {
    pub embed: Tally,
    pub blocks: Vec<Tally>,
    pub head: Tally,
}

/// A configuration bound to a matching parameter store.
pub struct Model<'a, T> {
    cfg: &'a ModelConfig,
    params: &'a ParamStore<T>,
    embed: Embed<'a, T>,
    blocks: Vec<BlockRef<'a, T>>,
    head: Linear<'a, T>,
    head_order: HeadOrder,
}

impl<'a, T: Scalar> Model<'a, T> {
    /// Validates `cfg` and checks that `params` has exactly the expected
    /// paths and shapes.
    pub fn new(cfg: &'a ModelConfig, params: &'a ParamStore<T>) -> Result<Self> {
        cfg.validate()?;
        check_store(cfg, params)?;
        let blocks = (0..cfg.depth)
            .map(|i| match cfg.block {
                BlockKind::S2Mlp => {
                    S2Block::from_store(params, i, cfg.norm, &cfg.shift).map(BlockRef::S2)
                }
                BlockKind::Mixer => {
                    MixerBlock::from_store(params, i, cfg.norm).map(BlockRef::Mixer)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Model {
            cfg,
            params,
            embed: Embed::from_store(params)?,
            blocks,
            head: block::linear(params, "head")?,
            head_order: HeadOrder::PoolFirst,
        })
    }

    pub fn with_head_order(mut self, order: HeadOrder) -> Self {
        self.head_order = order;
        self
    }

    pub fn config(&self) -> &ModelConfig {
        self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        self.params
    }

    fn layout(&self, images: &Tensor<T>) -> Result<Layout> {
        let (batch, w_img, h_img) = match *images.shape() {
            [w, h, 3] => (1, w, h),
            [b, w, h, 3] => (b, w, h),
            _ => {
                return Err(Error::shape(format!(
                    "expected an image [W, H, 3] or batch [B, W, H, 3], got {:?}",
                    images.shape()
                )))
            }
        };
        let p = self.cfg.patch;
        if w_img % p != 0 || h_img % p != 0 {
            return Err(Error::shape(format!(
                "image {w_img}×{h_img} is not divisible by patch size {p}"
            )));
        }
        let layout = Layout {
            batch,
            w: w_img / p,
            h: h_img / p,
        };
        if self.cfg.block == BlockKind::Mixer && layout.patches() != self.cfg.num_patches() {
            return Err(Error::shape(format!(
                "mixer model was built for {} patches ({}×{} image), got {} patches ({w_img}×{h_img}); \
                 its token-mixing weights fix the input size",
                self.cfg.num_patches(),
                self.cfg.image_w,
                self.cfg.image_h,
                layout.patches()
            )));
        }
        Ok(layout)
    }

    fn run(
        &self,
        images: &Tensor<T>,
        keep: bool,
    ) -> Result<(Tensor<T>, Option<ForwardCache<T>>, ComponentTally)> {
        let layout = self.layout(images)?;
        let mut tally = ComponentTally::default();

        let (embedded, t) = flops::measure(|| -> Result<_> {
            let patches = patchify(images, self.cfg.patch)?;
            self.embed.forward(&patches)
        });
        tally.embed = t;
        let (mut x, embed_cache) = embedded?;

        let mut caches = Vec::with_capacity(if keep { self.blocks.len() } else { 0 });
        for block in &self.blocks {
            let (out, t) = flops::measure(|| -> Result<_> {
                Ok(match block {
                    BlockRef::S2(b) => {
                        let (y, c) = b.forward(&x, layout)?;
                        (y, BlockCache::S2(c))
                    }
                    BlockRef::Mixer(b) => {
                        let (y, c) = b.forward(&x, layout)?;
                        (y, BlockCache::Mixer(c))
                    }
                })
            });
            tally.blocks.push(t);
            let (y, cache) = out?;
            if keep {
                caches.push(cache);
            }
            x = y;
        }

        let c = self.cfg.hidden;
        let m = layout.patches();
        let (head_out, t) = flops::measure(|| -> Result<_> {
            match self.head_order {
                HeadOrder::PoolFirst => {
                    let pooled = global_avg_pool(&x.reshape(&[layout.batch, m, c])?)?;
                    self.head.forward(&pooled)
                }
                HeadOrder::PerPatch => {
                    let (per_patch, cache) = self.head.forward(&x)?;
                    let k = per_patch.shape()[1];
                    let logits = global_avg_pool(&per_patch.into_shape(&[layout.batch, m, k])?)?;
                    Ok((logits, cache))
                }
            }
        });
        tally.head = t;
        let (logits, head_cache) = head_out?;
        let logits = logits.into_shape(&[layout.batch, self.cfg.classes])?;

        let cache = keep.then_some(ForwardCache {
            embed: embed_cache,
            blocks: caches,
            layout,
            hidden: c,
            head: head_cache,
        });
        Ok((logits, cache, tally))
    }

    /// Logits `[B, k]` for a batch `[B, W, H, 3]` (or `[1, k]` for a single
    /// `[W, H, 3]` image), plus the cache for [`Model::backward`].
    pub fn forward(&self, images: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let (logits, cache, _) = self.run(images, true)?;
        Ok((logits, cache.expect("cache kept")))
    }

    /// Forward pass that keeps no caches.
    pub fn infer(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(images, false)?.0)
    }

    /// Logits `[k]` for one `[W, H, 3]` image.
    pub fn logits(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        if image.rank() != 3 {
            return Err(Error::shape(format!(
                "logits expects a single [W, H, 3] image, got {:?}",
                image.shape()
            )));
        }
        self.infer(image)?.into_shape(&[self.cfg.classes])
    }

    /// Forward pass recording multiplies per component.
    pub fn forward_profiled(&self, images: &Tensor<T>) -> Result<(Tensor<T>, ComponentTally)> {
        let (logits, _, tally) = self.run(images, false)?;
        Ok((logits, tally))
    }

    /// Gradients of every parameter given `dlogits[B, k]`.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &Tensor<T>) -> Result<ParamStore<T>> {
        let layout = cache.layout;
        let (m, c, k) = (layout.patches(), cache.hidden, self.cfg.classes);
        if dlogits.shape() != [layout.batch, k] {
            return Err(Error::shape(format!(
                "logit gradient {:?} does not match [{}, {k}]",
                dlogits.shape(),
                layout.batch
            )));
        }
        let mut grads = ParamStore::new();
        let dx = match self.head_order {
            HeadOrder::PoolFirst => {
                let (dpooled, g) = self.head.backward(&cache.head, dlogits)?;
                grads.insert("head.weight", g.weight);
                grads.insert("head.bias", g.bias);
                global_avg_pool_backward(&[layout.batch, m, c], &dpooled)?
            }
            HeadOrder::PerPatch => {
                let dper = global_avg_pool_backward(&[layout.batch, m, k], dlogits)?
                    .into_shape(&[layout.batch * m, k])?;
                let (dx, g) = self.head.backward(&cache.head, &dper)?;
                grads.insert("head.weight", g.weight);
                grads.insert("head.bias", g.bias);
                dx
            }
        };
        let mut dx = dx.into_shape(&[layout.batch * m, c])?;
        for (block, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = match (block, bc) {
                (BlockRef::S2(b), BlockCache::S2(bc)) => b.backward(bc, &dx, &mut grads)?,
                (BlockRef::Mixer(b), BlockCache::Mixer(bc)) => b.backward(bc, &dx, &mut grads)?,
                _ => unreachable!("cache built by this model"),
            };
        }
        self.embed.backward(&cache.embed, &dx, &mut grads)?;
        Ok(grads)
    }

    /// Mean smoothed cross-entropy over the batch and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        images: &Tensor<T>,
        labels: &[usize],
        smoothing: f64,
    ) -> Result<(T, ParamStore<T>)> {
        let (logits, cache) = self.forward(images)?;
        let (loss, dlogits) = softmax_xent(&logits, labels, smoothing)?;
        Ok((loss, self.backward(&cache, &dlogits)?))
    }

    /// Loss only, without caches.
    pub fn loss(&self, images: &Tensor<T>, labels: &[usize], smoothing: f64) -> Result<T> {
        let logits = self.infer(images)?;
        Ok(softmax_xent(&logits, labels, smoothing)?.0)
    }
}
