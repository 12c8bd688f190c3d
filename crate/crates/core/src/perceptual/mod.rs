//! Natural-image statistics layer, multiscale discriminator and losses.

mod discriminator;
mod loss;
mod vnsc;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use loss::{
    cycle_loss_var, factor_pyramid, high_fidelity_loss, high_fidelity_loss_var, rsgan_losses, rsgan_losses_var,
    total_perceptual_loss, ContextualLoss, LossWeights, NoContextual, PerceptualTerms,
};
pub use vnsc::{
    luminance_bt609, luminance_var, variance_normalize, variance_normalize_var, vnsc, vnsc_var, VnscConfig, BT609,
};
