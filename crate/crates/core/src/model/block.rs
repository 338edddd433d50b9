//! Embedding and block layers with their backward passes.

use crate::error::{Error, Result};
use crate::ops::{
    gelu_backward, gelu_forward, spatial_shift_backward, spatial_shift_forward, GeluCache, Linear,
    LinearCache, Norm, NormCache, NormKind,
};
use crate::shift::ShiftConfig;
use crate::tensor::{Scalar, Tensor};

use super::params::ParamStore;

pub(crate) fn linear<'s, T: Scalar>(
    store: &'s ParamStore<T>,
    prefix: &str,
) -> Result<Linear<'s, T>> {
    Linear::new(
        store.get(&format!("{prefix}.weight"))?,
        store.get(&format!("{prefix}.bias"))?,
    )
}

pub(crate) fn norm<'s, T: Scalar>(
    store: &'s ParamStore<T>,
    prefix: &str,
    kind: NormKind,
) -> Result<Norm<'s, T>> {
    Norm::new(
        store.get(&format!("{prefix}.gamma"))?,
        store.get(&format!("{prefix}.beta"))?,
        kind,
    )
}

fn put_linear<T: Scalar>(grads: &mut ParamStore<T>, prefix: &str, g: crate::ops::LinearGrads<T>) {
    grads.insert(format!("{prefix}.weight"), g.weight);
    grads.insert(format!("{prefix}.bias"), g.bias);
}

fn put_norm<T: Scalar>(grads: &mut ParamStore<T>, prefix: &str, g: crate::ops::NormGrads<T>) {
    grads.insert(format!("{prefix}.gamma"), g.gamma);
    grads.insert(format!("{prefix}.beta"), g.beta);
}

/// Patch-wise fully-connected layer followed by layer normalization.
pub struct Embed<'s, T> {
    fc: Linear<'s, T>,
    norm: Norm<'s, T>,
}

pub struct EmbedCache<T> {
    fc: LinearCache<T>,
    norm: NormCache<T>,
}

impl<'s, T: Scalar> Embed<'s, T> {
    pub fn from_store(store: &'s ParamStore<T>) -> Result<Self> {
        Ok(Embed {
            fc: linear(store, "embed.fc")?,
            norm: norm(store, "embed.norm", NormKind::LayerNorm)?,
        })
    }

    pub fn forward(&self, patches: &Tensor<T>) -> Result<(Tensor<T>, EmbedCache<T>)> {
        let (a, fc) = self.fc.forward(patches)?;
        let (e, norm) = self.norm.forward(&a)?;
        Ok((e, EmbedCache { fc, norm }))
    }

    pub fn backward(
        &self,
        cache: &EmbedCache<T>,
        dy: &Tensor<T>,
        grads: &mut ParamStore<T>,
    ) -> Result<Tensor<T>> {
        let (da, gn) = self.norm.backward(&cache.norm, dy)?;
        let (dp, gf) = self.fc.backward(&cache.fc, &da)?;
        put_norm(grads, "embed.norm", gn);
        put_linear(grads, "embed.fc", gf);
        Ok(dp)
    }
}

/// Batch layout of the patch rows flowing through the blocks: `batch`
/// images, each a `w × h` grid, stored as `[batch·w·h, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub batch: usize,
    pub w: usize,
    pub h: usize,
}

impl Layout {
    pub fn patches(&self) -> usize {
        self.w * self.h
    }
}

/// One S²-MLP block:
///
/// ```text
/// u = x + fc2(shift(gelu(fc1(norm1(x)))))
/// y = u + fc4(gelu(fc3(norm2(u))))
/// ```
pub struct S2Block<'s, T> {
    prefix: String,
    norm1: Norm<'s, T>,
    fc1: Linear<'s, T>,
    fc2: Linear<'s, T>,
    norm2: Norm<'s, T>,
    fc3: Linear<'s, T>,
    fc4: Linear<'s, T>,
    shift: &'s ShiftConfig,
}

pub struct S2BlockCache<T> {
    norm1: NormCache<T>,
    fc1: LinearCache<T>,
    gelu1: GeluCache<T>,
    fc2: LinearCache<T>,
    norm2: NormCache<T>,
    fc3: LinearCache<T>,
    gelu2: GeluCache<T>,
    fc4: LinearCache<T>,
    layout: Layout,
}

impl<'s, T: Scalar> S2Block<'s, T> {
    pub fn from_store(
        store: &'s ParamStore<T>,
        index: usize,
        kind: NormKind,
        shift: &'s ShiftConfig,
    ) -> Result<Self> {
        let p = format!("block.{index}");
        Ok(S2Block {
            norm1: norm(store, &format!("{p}.norm1"), kind)?,
            fc1: linear(store, &format!("{p}.fc1"))?,
            fc2: linear(store, &format!("{p}.fc2"))?,
            norm2: norm(store, &format!("{p}.norm2"), kind)?,
            fc3: linear(store, &format!("{p}.fc3"))?,
            fc4: linear(store, &format!("{p}.fc4"))?,
            shift,
            prefix: p,
        })
    }

    pub fn forward(&self, x: &Tensor<T>, layout: Layout) -> Result<(Tensor<T>, S2BlockCache<T>)> {
        let c = x.shape()[1];
        let (n1, norm1) = self.norm1.forward(x)?;
        let (a1, fc1) = self.fc1.forward(&n1)?;
        let (g1, gelu1) = gelu_forward(&a1);
        let grid = g1.into_shape(&[layout.batch, layout.w, layout.h, c])?;
        let shifted = spatial_shift_forward(&grid, self.shift)?
            .into_shape(&[layout.batch * layout.patches(), c])?;
        let (a2, fc2) = self.fc2.forward(&shifted)?;
        let u = x.add(&a2)?;

        let (n2, norm2) = self.norm2.forward(&u)?;
        let (a3, fc3) = self.fc3.forward(&n2)?;
        let (g3, gelu2) = gelu_forward(&a3);
        let (a4, fc4) = self.fc4.forward(&g3)?;
        let y = u.add(&a4)?;
        Ok((
            y,
            S2BlockCache {
                norm1,
                fc1,
                gelu1,
                fc2,
                norm2,
                fc3,
                gelu2,
                fc4,
                layout,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &S2BlockCache<T>,
        dy: &Tensor<T>,
        grads: &mut ParamStore<T>,
    ) -> Result<Tensor<T>> {
        let p = &self.prefix;
        let layout = cache.layout;
        let c = dy.shape()[1];

        let (dg3, g_fc4) = self.fc4.backward(&cache.fc4, dy)?;
        let da3 = gelu_backward(&cache.gelu2, &dg3)?;
        let (dn2, g_fc3) = self.fc3.backward(&cache.fc3, &da3)?;
        let (du_branch, g_norm2) = self.norm2.backward(&cache.norm2, &dn2)?;
        let du = dy.add(&du_branch)?;

        let (ds, g_fc2) = self.fc2.backward(&cache.fc2, &du)?;
        let ds = ds.into_shape(&[layout.batch, layout.w, layout.h, c])?;
        let dg1 = spatial_shift_backward(self.shift, &ds)?
            .into_shape(&[layout.batch * layout.patches(), c])?;
        let da1 = gelu_backward(&cache.gelu1, &dg1)?;
        let (dn1, g_fc1) = self.fc1.backward(&cache.fc1, &da1)?;
        let (dx_branch, g_norm1) = self.norm1.backward(&cache.norm1, &dn1)?;
        let dx = du.add(&dx_branch)?;

        put_linear(grads, &format!("{p}.fc4"), g_fc4);
        put_linear(grads, &format!("{p}.fc3"), g_fc3);
        put_norm(grads, &format!("{p}.norm2"), g_norm2);
        put_linear(grads, &format!("{p}.fc2"), g_fc2);
        put_linear(grads, &format!("{p}.fc1"), g_fc1);
        put_norm(grads, &format!("{p}.norm1"), g_norm1);
        Ok(dx)
    }
}

/// MLP-Mixer baseline block, channel mixing first, then token mixing:
///
/// ```text
/// P̂ = P + W₂·gelu(W₁·norm1(P))            (per patch, over channels)
/// P̄ = P̂ + gelu(norm2(P̂)·W₃)·W₄           (per channel, over patches)
/// ```
pub struct MixerBlock<'s, T> {
    prefix: String,
    norm1: Norm<'s, T>,
    channel_fc1: Linear<'s, T>,
    channel_fc2: Linear<'s, T>,
    norm2: Norm<'s, T>,
    token_fc1: Linear<'s, T>,
    token_fc2: Linear<'s, T>,
}

pub struct MixerBlockCache<T> {
    norm1: NormCache<T>,
    channel_fc1: LinearCache<T>,
    gelu1: GeluCache<T>,
    channel_fc2: LinearCache<T>,
    norm2: NormCache<T>,
    token_fc1: LinearCache<T>,
    gelu2: GeluCache<T>,
    token_fc2: LinearCache<T>,
    layout: Layout,
}

/// `[B·M, c] -> [B·c, M]`.
fn to_token_major<T: Scalar>(x: &Tensor<T>, batch: usize, m: usize) -> Result<Tensor<T>> {
    let c = x.shape()[1];
    x.reshape(&[batch, m, c])?
        .transpose_last2()?
        .into_shape(&[batch * c, m])
}

/// `[B·c, M] -> [B·M, c]`.
fn to_patch_major<T: Scalar>(x: &Tensor<T>, batch: usize, c: usize) -> Result<Tensor<T>> {
    let m = x.shape()[1];
    x.reshape(&[batch, c, m])?
        .transpose_last2()?
        .into_shape(&[batch * m, c])
}

impl<'s, T: Scalar> MixerBlock<'s, T> {
    pub fn from_store(store: &'s ParamStore<T>, index: usize, kind: NormKind) -> Result<Self> {
        let p = format!("block.{index}");
        Ok(MixerBlock {
            norm1: norm(store, &format!("{p}.norm1"), kind)?,
            channel_fc1: linear(store, &format!("{p}.channel_fc1"))?,
            channel_fc2: linear(store, &format!("{p}.channel_fc2"))?,
            norm2: norm(store, &format!("{p}.norm2"), kind)?,
            token_fc1: linear(store, &format!("{p}.token_fc1"))?,
            token_fc2: linear(store, &format!("{p}.token_fc2"))?,
            prefix: p,
        })
    }

    /// Number of patches the token-mixing weights were built for.
    pub fn tokens(&self) -> usize {
        self.token_fc1.in_features()
    }

    pub fn forward(
        &self,
        x: &Tensor<T>,
        layout: Layout,
    ) -> Result<(Tensor<T>, MixerBlockCache<T>)> {
        let m = layout.patches();
        if m != self.tokens() {
            return Err(Error::shape(format!(
                "mixer block {} was built for {} patches, input has {m}; \
                 token-mixing weights depend on the feature-map size",
                self.prefix,
                self.tokens()
            )));
        }
        let c = x.shape()[1];
        let (n1, norm1) = self.norm1.forward(x)?;
        let (a1, channel_fc1) = self.channel_fc1.forward(&n1)?;
        let (g1, gelu1) = gelu_forward(&a1);
        let (a2, channel_fc2) = self.channel_fc2.forward(&g1)?;
        let mixed = x.add(&a2)?;

        let (n2, norm2) = self.norm2.forward(&mixed)?;
        let t = to_token_major(&n2, layout.batch, m)?;
        let (a3, token_fc1) = self.token_fc1.forward(&t)?;
        let (g3, gelu2) = gelu_forward(&a3);
        let (a4, token_fc2) = self.token_fc2.forward(&g3)?;
        let y = mixed.add(&to_patch_major(&a4, layout.batch, c)?)?;
        Ok((
            y,
            MixerBlockCache {
                norm1,
                channel_fc1,
                gelu1,
                channel_fc2,
                norm2,
                token_fc1,
                gelu2,
                token_fc2,
                layout,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &MixerBlockCache<T>,
        dy: &Tensor<T>,
        grads: &mut ParamStore<T>,
    ) -> Result<Tensor<T>> {
        let p = &self.prefix;
        let layout = cache.layout;
        let c = dy.shape()[1];

        let da4 = to_token_major(dy, layout.batch, layout.patches())?;
        let (dg3, g_t2) = self.token_fc2.backward(&cache.token_fc2, &da4)?;
        let da3 = gelu_backward(&cache.gelu2, &dg3)?;
        let (dt, g_t1) = self.token_fc1.backward(&cache.token_fc1, &da3)?;
        let dn2 = to_patch_major(&dt, layout.batch, c)?;
        let (dm_branch, g_norm2) = self.norm2.backward(&cache.norm2, &dn2)?;
        let dmixed = dy.add(&dm_branch)?;

        let (dg1, g_c2) = self.channel_fc2.backward(&cache.channel_fc2, &dmixed)?;
        let da1 = gelu_backward(&cache.gelu1, &dg1)?;
        let (dn1, g_c1) = self.channel_fc1.backward(&cache.channel_fc1, &da1)?;
        let (dx_branch, g_norm1) = self.norm1.backward(&cache.norm1, &dn1)?;
        let dx = dmixed.add(&dx_branch)?;

        put_linear(grads, &format!("{p}.token_fc2"), g_t2);
        put_linear(grads, &format!("{p}.token_fc1"), g_t1);
        put_norm(grads, &format!("{p}.norm2"), g_norm2);
        put_linear(grads, &format!("{p}.channel_fc2"), g_c2);
        put_linear(grads, &format!("{p}.channel_fc1"), g_c1);
        put_norm(grads, &format!("{p}.norm1"), g_norm1);
        Ok(dx)
    }
}
