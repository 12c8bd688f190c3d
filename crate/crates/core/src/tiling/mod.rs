//! Tiled inference, the noise-amplitude sweep and frozen-activation
//! impulse responses.

mod dfv;
mod infer;
mod plan;
mod sweep;

pub use dfv::{dfv_difference_quotient, dfv_impulse_response, Linearization};
pub use infer::tiled_infer;
pub use plan::{plan_tiles, BlendWindow, TilePlan, TileSettings};
pub use sweep::{sweep_noise, vn_statistics, SweepRow};
