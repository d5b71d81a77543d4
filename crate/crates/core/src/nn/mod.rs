//! Dense feed-forward networks with exact reverse-mode gradients, Adam and
//! Polyak averaging. Parameters live in one flat `f64` buffer per network so
//! optimizers, target updates and serialization work on plain slices.

mod adam;
mod io;
mod loss;
mod matrix;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use io::{decode_weights, encode_weights, load_network, load_weights, save_network, save_weights, WeightFile, WEIGHTS_FORMAT_VERSION};
pub use loss::Loss;
pub use matrix::Matrix;
pub use network::{polyak_update, Activation, Architecture, ForwardCache, Gradient, Network};
