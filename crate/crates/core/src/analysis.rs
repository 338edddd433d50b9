//! Parameter and FLOPs accounting.
//!
//! FLOPs here means multiplications, as is conventional for this family of
//! models. Two counting modes exist:
//!
//! - [`CostMode::PaperParity`]: only fully-connected weights and biases count
//!   as parameters and only fully-connected multiplies count as FLOPs. The
//!   classifier head is applied to every patch before pooling, so its cost is
//!   `M·c·k`.
//! - [`CostMode::Full`]: every learnable tensor and every multiply the forward
//!   pass performs (normalization, GELU, pooling), with the head applied after
//!   pooling as in training.
//!
//! [`closed_form_cost`] evaluates formulas; [`empirical_cost`] sums tensor
//! sizes and counts multiplies during a real forward pass. The two agree
//! exactly in both modes.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::model::{
    param_specs, BlockKind, Component, HeadOrder, Model, ModelConfig, ParamStore, PresetName,
};
use crate::ops::NormKind;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostMode {
    PaperParity,
    Full,
}

impl CostMode {
    pub fn name(self) -> &'static str {
        match self {
            CostMode::PaperParity => "paper-parity",
            CostMode::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper-parity" => Some(CostMode::PaperParity),
            "full" => Some(CostMode::Full),
            _ => None,
        }
    }
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameter and multiply counts per component, all under one [`CostMode`].
///
/// `params_total_paper_parity` is the backbone (embedding plus blocks,
/// without the classifier); `params_total_full` adds the classifier.
/// `flops_total` includes the classifier; see
/// [`CostReport::flops_without_head`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub mode: CostMode,
    pub depth: u64,
    pub params_pfl: u64,
    pub params_per_block: u64,
    pub params_blocks_total: u64,
    pub params_fcl: u64,
    pub params_total_paper_parity: u64,
    pub params_total_full: u64,
    pub flops_pfl: u64,
    pub flops_per_block: u64,
    pub flops_blocks_total: u64,
    pub flops_fcl: u64,
    pub flops_total: u64,
}

impl CostReport {
    fn assemble(
        mode: CostMode,
        depth: u64,
        params: [u64; 3],
        flops: [u64; 3],
        blocks_total: (u64, u64),
    ) -> Self {
        let [params_pfl, params_per_block, params_fcl] = params;
        let [flops_pfl, flops_per_block, flops_fcl] = flops;
        let (params_blocks_total, flops_blocks_total) = blocks_total;
        let backbone = params_pfl + params_blocks_total;
        CostReport {
            mode,
            depth,
            params_pfl,
            params_per_block,
            params_blocks_total,
            params_fcl,
            params_total_paper_parity: backbone,
            params_total_full: backbone + params_fcl,
            flops_pfl,
            flops_per_block,
            flops_blocks_total,
            flops_fcl,
            flops_total: flops_pfl + flops_blocks_total + flops_fcl,
        }
    }

    pub fn flops_without_head(&self) -> u64 {
        self.flops_total - self.flops_fcl
    }

    /// Whether every total is the exact sum of its components.
    pub fn is_consistent(&self) -> bool {
        self.params_total_paper_parity == self.params_pfl + self.params_blocks_total
            && self.params_total_full == self.params_total_paper_parity + self.params_fcl
            && self.flops_total == self.flops_pfl + self.flops_blocks_total + self.flops_fcl
    }

    /// `(key, value)` pairs in emission order.
    pub fn fields(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("depth", self.depth),
            ("params_pfl", self.params_pfl),
            ("params_per_block", self.params_per_block),
            ("params_blocks_total", self.params_blocks_total),
            ("params_fcl", self.params_fcl),
            ("params_total_paper_parity", self.params_total_paper_parity),
            ("params_total_full", self.params_total_full),
            ("flops_pfl", self.flops_pfl),
            ("flops_per_block", self.flops_per_block),
            ("flops_blocks_total", self.flops_blocks_total),
            ("flops_fcl", self.flops_fcl),
            ("flops_total", self.flops_total),
            ("flops_total_without_head", self.flops_without_head()),
        ]
    }
}

fn u(v: usize) -> u64 {
    v as u64
}

/// Cost of an S²-MLP configuration from closed-form expressions:
///
/// ```text
/// Params_PFL = (3p² + 1)c          FLOPs_PFL = 3Mcp²
/// Params_blk = c²(2r + 2) + c(3 + r)   FLOPs_blk = Mc²(2r + 2)
/// Params_FCL = (c + 1)k            FLOPs_FCL = Mck
/// ```
///
/// with `M = (W/p)(H/p)`. Full mode adds normalization parameters and the
/// non-FC multiplies, and charges the head `ck + c` (pool, then project).
pub fn closed_form_cost(cfg: &ModelConfig, mode: CostMode) -> Result<CostReport> {
    if cfg.block != BlockKind::S2Mlp {
        return Err(Error::config(format!(
            "closed-form cost covers s2mlp blocks only, not {}",
            cfg.block.name()
        )));
    }
    cfg.validate()?;
    let (n, c, r, p, k) = (
        u(cfg.depth),
        u(cfg.hidden),
        u(cfg.ratio),
        u(cfg.patch),
        u(cfg.classes),
    );
    let m = u(cfg.num_patches());

    let mut params = [
        (3 * p * p + 1) * c,
        c * c * (2 * r + 2) + c * (3 + r),
        (c + 1) * k,
    ];
    let mut flops = [3 * m * c * p * p, m * c * c * (2 * r + 2), m * c * k];

    if mode == CostMode::Full {
        let layernorm = m * (3 * c + 3);
        let block_norm = match cfg.norm {
            NormKind::LayerNorm => layernorm,
            NormKind::Affine => m * c,
        };
        let gelu = 3 * m * c + 3 * m * r * c;
        params[0] += 2 * c;
        params[1] += 4 * c;
        flops[0] += layernorm;
        flops[1] += 2 * block_norm + gelu;
        flops[2] = c * k + c;
    }
    Ok(CostReport::assemble(
        mode,
        n,
        params,
        flops,
        (n * params[1], n * flops[1]),
    ))
}

/// Cost measured on a constructed model: parameters by summing tensor sizes,
/// FLOPs by counting multiplies during one forward pass on `probe`.
///
/// `probe` is one `[W, H, 3]` image or a batch; FLOPs are reported per image.
pub fn empirical_cost<T: Scalar>(
    cfg: &ModelConfig,
    params: &ParamStore<T>,
    probe: &Tensor<T>,
    mode: CostMode,
) -> Result<CostReport> {
    let order = match mode {
        CostMode::PaperParity => HeadOrder::PerPatch,
        CostMode::Full => HeadOrder::PoolFirst,
    };
    let model = Model::new(cfg, params)?.with_head_order(order);
    let batch = if probe.rank() == 4 {
        u(probe.shape()[0])
    } else {
        1
    };
    let (_, tally) = model.forward_profiled(probe)?;
    let count = |t: &crate::flops::Tally| {
        let v = match mode {
            CostMode::PaperParity => t.fc,
            CostMode::Full => t.total(),
        };
        v / batch.max(1)
    };

    let mut embed = 0;
    let mut per_block = vec![0u64; cfg.depth];
    let mut head = 0;
    for spec in param_specs(cfg) {
        if mode == CostMode::PaperParity && !spec.is_fc() {
            continue;
        }
        let size = u(params.get(&spec.path)?.numel());
        match spec.component {
            Component::Embed => embed += size,
            Component::Block(i) => per_block[i] += size,
            Component::Head => head += size,
        }
    }
    let block_flops: Vec<u64> = tally.blocks.iter().map(count).collect();
    Ok(CostReport::assemble(
        mode,
        u(cfg.depth),
        [embed, per_block.first().copied().unwrap_or(0), head],
        [
            count(&tally.embed),
            block_flops.first().copied().unwrap_or(0),
            count(&tally.head),
        ],
        (per_block.iter().sum(), block_flops.iter().sum()),
    ))
}

/// `1234567` → `"1,234,567"`.
pub fn thousands(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Fixed-width table: one row per component plus totals.
pub fn render_report(report: &CostReport) -> String {
    let rows = [
        (
            "patch embedding".to_string(),
            report.params_pfl,
            report.flops_pfl,
        ),
        (
            format!("blocks ({} x)", report.depth),
            report.params_blocks_total,
            report.flops_blocks_total,
        ),
        (
            "  per block".to_string(),
            report.params_per_block,
            report.flops_per_block,
        ),
        (
            "classifier".to_string(),
            report.params_fcl,
            report.flops_fcl,
        ),
    ];
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", report.mode);
    let _ = writeln!(out, "{:<26}{:>18}{:>22}", "component", "params", "FLOPs");
    let _ = writeln!(out, "{}", "-".repeat(66));
    for (name, p, f) in &rows {
        let _ = writeln!(
            out,
            "{:<26}{:>18}{:>22}",
            name,
            thousands(*p),
            thousands(*f)
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(66));
    let _ = writeln!(
        out,
        "{:<26}{:>18}{:>22}",
        "total without classifier",
        thousands(report.params_total_paper_parity),
        thousands(report.flops_without_head())
    );
    let _ = writeln!(
        out,
        "{:<26}{:>18}{:>22}",
        "total with classifier",
        thousands(report.params_total_full),
        thousands(report.flops_total)
    );
    out
}

/// `key=value` lines, starting with `mode=`.
pub fn render_machine(report: &CostReport) -> String {
    let mut out = format!("mode={}\n", report.mode);
    for (k, v) in report.fields() {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

/// Headline figures published for the presets: (params, FLOPs), rounded.
pub fn published_figures(preset: PresetName) -> (f64, f64) {
    match preset {
        PresetName::Wide => (71e6, 14e9),
        PresetName::Deep => (51e6, 10.5e9),
    }
}

/// Notes comparing a paper-parity report against the published headline
/// figures for `preset`.
pub fn reference_notes(preset: PresetName, report: &CostReport) -> Vec<String> {
    let (params, flops) = published_figures(preset);
    let pct = |ours: u64, theirs: f64| (ours as f64 - theirs) / theirs * 100.0;
    let mut notes = vec![
        format!(
            "published: {:.1}M params, {:.1}B FLOPs",
            params / 1e6,
            flops / 1e9
        ),
        format!(
            "FLOPs vs published: {:+.2}% with classifier, {:+.2}% without",
            pct(report.flops_total, flops),
            pct(report.flops_without_head(), flops)
        ),
    ];
    let param_gap = pct(report.params_total_paper_parity, params);
    if param_gap.abs() > 1.0 {
        notes.push(format!(
            "params differ from the published {:.0}M by {:+.1}%: the per-component formulas give {}, \
             and the published figure cannot be recovered from them",
            params / 1e6,
            param_gap,
            thousands(report.params_total_paper_parity)
        ));
    }
    notes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn thousands_separators() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(1000), "1,000");
        assert_eq!(thousands(71_433_984), "71,433,984");
    }

    #[test]
    fn degenerate_ones() {
        let mut cfg = ModelConfig::micro();
        cfg.depth = 1;
        cfg.hidden = 1;
        cfg.ratio = 1;
        cfg.patch = 1;
        cfg.image_w = 1;
        cfg.image_h = 1;
        cfg.classes = 1;
        cfg.shift = crate::shift::ShiftConfig::preset("none").unwrap();
        let r = closed_form_cost(&cfg, CostMode::PaperParity).unwrap();
        assert_eq!(r.params_per_block, 8);
        assert_eq!(r.params_pfl, 4);
        assert!(r.is_consistent());
    }

    #[test]
    fn mixer_is_rejected() {
        let cfg = ModelConfig::micro().with_block(BlockKind::Mixer);
        let err = closed_form_cost(&cfg, CostMode::PaperParity).unwrap_err();
        assert!(err.to_string().contains("s2mlp"));
    }

    #[test]
    fn empirical_matches_closed_form_in_both_modes() {
        for norm in [NormKind::LayerNorm, NormKind::Affine] {
            let mut cfg = ModelConfig::micro();
            cfg.norm = norm;
            let store: ParamStore<f32> = init_params(&cfg, 1).unwrap();
            let probe = Tensor::zeros(&[2, 8, 8, 3]).unwrap();
            for mode in [CostMode::PaperParity, CostMode::Full] {
                let closed = closed_form_cost(&cfg, mode).unwrap();
                let measured = empirical_cost(&cfg, &store, &probe, mode).unwrap();
                assert_eq!(closed, measured, "{mode} {norm:?}");
            }
        }
    }

    #[test]
    fn full_mode_counts_more() {
        let cfg = ModelConfig::micro();
        let pp = closed_form_cost(&cfg, CostMode::PaperParity).unwrap();
        let full = closed_form_cost(&cfg, CostMode::Full).unwrap();
        assert!(full.params_total_full > pp.params_total_full);
        assert!(full.params_total_paper_parity > pp.params_total_paper_parity);
        let store: ParamStore<f32> = init_params(&cfg, 0).unwrap();
        assert_eq!(u(store.numel()), full.params_total_full);
    }

    #[test]
    fn render_is_stable() {
        let r = closed_form_cost(
            &ModelConfig::preset(PresetName::Wide),
            CostMode::PaperParity,
        )
        .unwrap();
        let a = render_report(&r);
        assert_eq!(a, render_report(&r));
        assert!(a.contains("71,433,984"));
        assert!(render_machine(&r).contains("params_total_paper_parity=71433984\n"));
    }
}
