//! The acoustic model: score embedding and pre-net, previous-spectrum
//! pre-net, stripe pooling and the SU-net.
//!
//! Layout conventions: spectra are `(bins, T)` with frequency on rows; the
//! SU-net sees `(C, H = bins, W = T)`, so row stripes follow one frequency
//! over time and column stripes cover one frame's full spectrum.

mod acoustic;
mod config;
mod gradsuite;
mod params;
mod stripe;
mod sunet;

pub use acoustic::{
    acoustic_backward, acoustic_backward_with, acoustic_forward, acoustic_forward_cached,
    embed_score, score_prenet, spec_prenet, AcousticCache,
};
pub use config::{EmbedderConfig, ModelConfig, SUNetConfig};
pub use gradsuite::{
    gradient_suite, mini_sunet_config, GradCheckRow, GRADCHECK_EPS, GRADCHECK_TOL,
};
pub use params::{Grads, ModelParams};
pub use stripe::{
    stripe_pool, stripe_pool_backward, stripe_pool_forward, StripeCache, StripeGrads,
    StripePoolParams,
};
pub use sunet::{
    pyramid_sizes, sunet_backward, sunet_backward_with, sunet_forward, sunet_forward_cached,
    ClampGrad, SUNetCache, SUNetOutput,
};
