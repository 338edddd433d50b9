use std::fmt;

use crate::error::{Error, Result};
use crate::ops::NormKind;
use crate::shift::ShiftConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Spatial-shift MLP block: `fc → gelu → shift → fc` plus a channel MLP.
    S2Mlp,
    /// MLP-Mixer baseline block with a token-mixing MLP over the patch axis.
    Mixer,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::S2Mlp => "s2mlp",
            BlockKind::Mixer => "mixer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "s2mlp" => Some(BlockKind::S2Mlp),
            "mixer" => Some(BlockKind::Mixer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    /// 12 blocks, hidden 768, layer normalization.
    Wide,
    /// 36 blocks, hidden 384, affine normalization.
    Deep,
}

impl PresetName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wide" => Some(PresetName::Wide),
            "deep" => Some(PresetName::Deep),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PresetName::Wide => "wide",
            PresetName::Deep => "deep",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Number of blocks, N.
    pub depth: usize,
    /// Channel width, c.
    pub hidden: usize,
    /// Expansion ratio of the channel MLP, r.
    pub ratio: usize,
    /// Patch side length, p.
    pub patch: usize,
    pub image_w: usize,
    pub image_h: usize,
    /// Number of classes, k.
    pub classes: usize,
    pub norm: NormKind,
    pub block: BlockKind,
    pub shift: ShiftConfig,
    /// Token-mixing hidden width of the mixer baseline; `None` means 2M.
    pub mixer_hidden: Option<usize>,
}

impl ModelConfig {
    /// The wide or deep configuration at 224×224 with 1000 classes.
    pub fn preset(name: PresetName) -> Self {
        let (depth, hidden, norm) = match name {
            PresetName::Wide => (12, 768, NormKind::LayerNorm),
            PresetName::Deep => (36, 384, NormKind::Affine),
        };
        ModelConfig {
            depth,
            hidden,
            ratio: 4,
            patch: 16,
            image_w: 224,
            image_h: 224,
            classes: 1000,
            norm,
            block: BlockKind::S2Mlp,
            shift: ShiftConfig::preset("a").expect("built-in preset"),
            mixer_hidden: None,
        }
    }

    /// Small configuration used for end-to-end gradient checks.
    pub fn micro() -> Self {
        ModelConfig {
            depth: 2,
            hidden: 8,
            ratio: 2,
            patch: 4,
            image_w: 8,
            image_h: 8,
            classes: 3,
            norm: NormKind::LayerNorm,
            block: BlockKind::S2Mlp,
            shift: ShiftConfig::preset("a").expect("built-in preset"),
            mixer_hidden: None,
        }
    }

    pub fn with_image(mut self, w: usize, h: usize) -> Self {
        self.image_w = w;
        self.image_h = h;
        self
    }

    pub fn with_block(mut self, block: BlockKind) -> Self {
        self.block = block;
        self
    }

    pub fn with_shift(mut self, shift: ShiftConfig) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("depth", self.depth),
            ("hidden", self.hidden),
            ("ratio", self.ratio),
            ("patch", self.patch),
            ("image_w", self.image_w),
            ("image_h", self.image_h),
            ("classes", self.classes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if !self.image_w.is_multiple_of(self.patch) || !self.image_h.is_multiple_of(self.patch) {
            return Err(Error::config(format!(
                "image {}×{} is not divisible by patch size {}",
                self.image_w, self.image_h, self.patch
            )));
        }
        if self.mixer_hidden == Some(0) {
            return Err(Error::config("mixer_hidden must be positive"));
        }
        if self.block == BlockKind::S2Mlp {
            self.shift.validate_channels(self.hidden)?;
        }
        Ok(())
    }

    /// Patch grid `(w, h)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.image_w / self.patch, self.image_h / self.patch)
    }

    /// Number of patches, M.
    pub fn num_patches(&self) -> usize {
        let (w, h) = self.grid();
        w * h
    }

    /// Length of an unfolded patch, 3p².
    pub fn patch_dim(&self) -> usize {
        3 * self.patch * self.patch
    }

    /// Token-mixing hidden width N̄ of the mixer baseline.
    pub fn token_hidden(&self) -> usize {
        self.mixer_hidden.unwrap_or(2 * self.num_patches())
    }
}
