//! Multiuser-MIMO downlink precoding toolkit.
//!
//! Implements the block-diagonalization precoder family (BD, RBD), the
//! channel-inversion family (GZI, S-GMI) and their lattice-reduction-aided
//! ZF/MMSE variants, together with an uncoded QPSK link simulator, sum-rate
//! and condition-number analysis, and closed-form FLOP models.
//!
//! The numeric kernels are generic over the real scalar (`f32`/`f64`)
//! through [`Scalar`]; the unimodular lattice transforms use exact
//! Gaussian-integer arithmetic and the FLOP models exact rationals. The
//! aliases below fix `f64`, the precision the simulator runs at.

pub mod channel;
pub mod harness;
pub mod matkernel;
pub mod metrics;
pub mod precoding;
pub mod rng;
pub mod scalar;
pub mod transceiver;

pub use scalar::Scalar;

/// Complex matrix over `f64`, the working precision of the simulator.
pub type CMat = matkernel::ComplexMatrix<f64>;
/// Complex matrix over `f32`.
pub type CMat32 = matkernel::ComplexMatrix<f32>;
/// System configuration over `f64`.
pub type SysConfig = channel::SystemConfig<f64>;
/// Channel set over `f64`.
pub type Channels = channel::ChannelSet<f64>;
/// Precoding solution over `f64`.
pub type Solution = precoding::PrecodingSolution<f64>;
