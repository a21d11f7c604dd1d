//! Photocounting statistics for click detectors with nonparalyzable dead time
//! and afterpulses.
//!
//! The analytic modules are generic over [`Real`] (`f32` or `f64`); the
//! simulator, the timing fit and the reconstruction pipeline work in `f64`.

pub mod detector;
pub mod distribution;
pub mod error;
mod expr;
pub mod fock_map;
pub mod montecarlo;
pub mod multiwindow;
pub mod optimize;
pub mod povm_cw;
pub mod povm_independent;
pub mod reconstruction;
pub mod scalar;
pub mod special;
pub mod states;
pub mod timing;
pub mod validation;

pub use detector::{DetectorConfig, Geometry};
pub use distribution::{mandel_q, total_variation, CountDistribution, PhotonDistribution, PulseDistribution};
pub use error::{Error, Result};
pub use fock_map::{FockMap, FockPart};
pub use multiwindow::{Kernels, MemoryState};
pub use scalar::Real;
pub use states::StateSpec;

pub type DetectorConfigF32 = DetectorConfig<f32>;
pub type DetectorConfigF64 = DetectorConfig<f64>;
pub type PulseDistributionF32 = PulseDistribution<f32>;
pub type PulseDistributionF64 = PulseDistribution<f64>;
pub type PhotonDistributionF32 = PhotonDistribution<f32>;
pub type PhotonDistributionF64 = PhotonDistribution<f64>;
pub type FockMapF32 = FockMap<f32>;
pub type FockMapF64 = FockMap<f64>;
