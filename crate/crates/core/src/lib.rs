//! Pilot assignment for cell-free massive MIMO networks.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod assignment;
pub mod bnp;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod maxmin;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type CircularWindow = geometry::CircularWindow<f64>;
pub type PointSet = geometry::PointSet<f64>;
pub type PathlossParams = channel::PathlossParams<f64>;
pub type ChannelState = channel::ChannelState<f64>;
pub type SeConfig = channel::SeConfig<f64>;
pub type SinrReport = channel::SinrReport<f64>;
pub type PilotAssignment = assignment::PilotAssignment<f64>;
pub type SensingConfig = assignment::SensingConfig<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type DensityModel = theory::DensityModel<f64>;
pub type AssignmentProbabilityInputs = theory::AssignmentProbabilityInputs<f64>;
pub type PartitionInstance = maxmin::PartitionInstance<f64>;
pub type PartitionResult = maxmin::PartitionResult<f64>;
pub type BipartiteGainGraph = spectral::BipartiteGainGraph<f64>;
pub type ClusterResult = spectral::ClusterResult<f64>;
pub type BnpInstance = bnp::BnpInstance<f64>;
pub type BnpOutcome = bnp::BnpOutcome<f64>;
pub type LpProblem = lp::LpProblem<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub use experiment::{ExperimentConfig, Scheme};
