//! Simulation toolkit for a base station that serves users and senses targets
//! through a hybrid active/passive simultaneously transmitting and reflecting
//! surface.

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrays;
pub mod channels;
pub mod config;
pub mod linalg;
pub mod link_metrics;
pub mod optimizer;
pub mod sdp;
pub mod sensing_crb;
pub mod star_ris;
pub mod waveforms;

pub use arrays::AnglePair;
pub use channels::{draw_channels, trial_rng, ChannelDraw};
pub use config::{load_scenario, reference_scenario, ConfigError, NoiseRegime, Scenario, Side, SystemConfig};
pub use linalg::{CMat, CVec, C64};
pub use link_metrics::{evaluate, MetricsReport, NoiseModel};
pub use star_ris::{StarRisError, StarRisState};
