//! Generator topology: configuration, module identities and the unfolded
//! back-projection recursion.

mod checkpoint;
mod config;
mod ibp;
mod network;
mod tag;
mod trace;

pub use checkpoint::{config_digest, read_params, write_params, CHECKPOINT_MAGIC};
pub use config::{Dims, MgbpConfig};
pub use ibp::{ibp_classic, LinearConv};
pub use network::{ModuleDef, NetworkGraph};
pub(crate) use network::Unfolder;
pub use tag::{ModuleKind, ModuleTag};
pub use trace::{trace_shapes, BlockShape, ModuleShape, ShapeTrace};
