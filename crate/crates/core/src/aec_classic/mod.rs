//! Classical echo cancellers used as baselines: a subband NLMS adaptive
//! filter and an oracle non-causal time-domain Wiener filter.

mod nlms;
mod wiener;

use thiserror::Error;

use crate::dsp::DspError;

pub use nlms::{nlms_cancel, NlmsCanceller, NlmsConfig};
pub use wiener::{wiener_oracle_cancel, wiener_oracle_filter, WienerConfig};

#[derive(Debug, Error)]
pub enum AecError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("signal lengths differ: {0}")]
    Length(String),
    #[error("normal equations could not be factored")]
    Singular,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Echo return loss enhancement: `10 log10(P_before / P_after)`.
pub fn erle_db(before: &[f64], after: &[f64]) -> f64 {
    let p = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    10.0 * (p(before) / p(after)).log10()
}
