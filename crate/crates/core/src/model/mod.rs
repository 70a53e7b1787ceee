//! Signals, network configuration and random generation of the projection
//! matrix `A`, the fading matrix `H`, the effective matrix `B = H ⊙ A` and
//! the received vector `y = B x + v`.

mod ensemble;
mod network;
pub mod sampling;
mod signal;

pub use ensemble::{awgn_ensemble, generate_ensemble, MeasurementEnsemble};
pub use network::NetworkConfig;
pub use signal::{generate_signal, SparseSignal};
