use serde::{Deserialize, Serialize};

use super::{Fusion, TcnConfig};

/// How a frame span is reported: `Inclusive` counts frames, `Span` counts
/// the distance between first and last frame (inclusive minus one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovConvention {
    Inclusive,
    Span,
}

/// Input frames that influence one output frame of the full model.
pub fn receptive_field(cfg: &TcnConfig) -> usize {
    fov_after_blocks(cfg, cfg.n_blocks())
}

fn fov_after_blocks(cfg: &TcnConfig, blocks: usize) -> usize {
    let dil: usize = (0..blocks).map(|i| cfg.dilation(i)).sum();
    cfg.init_kernel + cfg.init_stride * (cfg.dw_kernel - 1) * dil
}

/// Field of view of the shared encoder for latent fusion modes (`None` for
/// modes without one).
pub fn encoder_fov(cfg: &TcnConfig, convention: FovConvention) -> Option<usize> {
    let inclusive = fov_after_blocks(cfg, cfg.fusion.encoder_blocks()?);
    Some(match convention {
        FovConvention::Inclusive => inclusive,
        FovConvention::Span => inclusive - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: usize,
    pub flops_per_output_frame: usize,
    pub playback_mode: bool,
    pub fusion: Fusion,
}

/// Learnable parameter count and `2 x MAC` per output frame (post-stride
/// rate) of the convolution and dense layers. Batch norm is treated as folded
/// into the neighbouring convolutions; activations, biases and the mask
/// product are free.
pub fn count_cost(cfg: &TcnConfig, playback_mode: bool) -> CostReport {
    let (f, d, h, c) = (cfg.in_features, cfg.bottleneck_d, cfg.hidden_h, cfg.n_classes);
    let k0 = cfg.init_kernel;
    let kd = cfg.dw_kernel;
    let bn = |ch: usize| 2 * ch;
    let block_params = (d * h + h) + 1 + bn(h) + (kd * h + h) + 1 + bn(h) + (h * d + d);
    let block_macs = d * h + kd * h + h * d;
    let head_params = d * c + c;
    let head_macs = d * c;

    let n_blocks = cfg.n_blocks();
    let (mut params, mut macs);
    match cfg.fusion {
        Fusion::ConcatInput => {
            params = 2 * bn(f) + (k0 * 2 * f * d + d);
            macs = k0 * 2 * f * d;
        }
        Fusion::Baseline => {
            params = bn(f) + (k0 * f * d + d);
            macs = k0 * f * d;
        }
        _ => {
            params = 2 * bn(f) + (k0 * f * d + d) + (2 * d * d + d);
            macs = k0 * f * d;
        }
    }
    params += n_blocks * block_params + head_params;
    macs += n_blocks * block_macs + head_macs;
    if let Some(k) = cfg.fusion.encoder_blocks() {
        if playback_mode {
            // reference encoder pass plus the 2D -> D projection
            macs += k0 * f * d + k * block_macs + 2 * d * d;
        } else if cfg.fusion != Fusion::MaskD2 {
            // concat modes still run the encoder on the constant reference
            macs += k0 * f * d + k * block_macs + 2 * d * d;
        }
    }
    CostReport {
        params,
        flops_per_output_frame: 2 * macs,
        playback_mode,
        fusion: cfg.fusion,
    }
}
