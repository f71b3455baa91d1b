pub mod arch;
pub mod bench;
mod binfmt;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod rng;
pub mod tensor;
pub mod train;

pub use arch::{build_network, ArchId, Network};
pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{ReduceMode, Scalar, Tensor};
