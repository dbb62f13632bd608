//! Networks, losses and optimizers with hand-written backward passes.

mod checkpoint;
mod encoder;
pub mod layers;
pub mod loss;
mod mlp;
pub mod optim;
mod params;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use encoder::{Encoder, EncoderConfig, EncoderTape};
pub use mlp::{build_discriminator, build_head, Mlp, MlpConfig, MlpTape};
pub use params::{Gradients, Param, ParamId, ParamStore};
