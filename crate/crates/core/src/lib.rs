//! Numerics for stochastic continuity equations: drift fields under the
//! Ladyzhenskaya-Prodi-Serrin integrability condition, deterministic
//! Brownian paths, forward/backward characteristic flows, and weak-form
//! residual verification of transported solutions.
//!
//! Everything is generic over the floating scalar through [`Scalar`];
//! the aliases below fix `f64` as the working precision.

pub mod brownian;
pub mod drift;
pub mod error;
pub mod flow;
pub mod fmtnum;
pub mod geom;
pub mod rng;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Working precision for the concrete aliases.
pub type Real = f64;

pub type Point = geom::Point<Real>;
pub type AxisBox = geom::AxisBox<Real>;
pub type LpsExponents = drift::LpsExponents<Real>;
pub type DriftField = drift::DriftField<Real>;
pub type MollifierKernel = drift::MollifierKernel<Real>;
pub type BrownianPath = brownian::BrownianPath<Real>;
pub type FlowTrajectory = flow::FlowTrajectory<Real>;
pub type JacobianSample = flow::JacobianSample<Real>;
pub type InitialDatum = transport::InitialDatum<Real>;
pub type TestFunction = transport::TestFunction<Real>;
pub type WeakSolution = transport::WeakSolution<Real>;
pub type QuadratureSpec = transport::QuadratureSpec<Real>;
pub type SolutionTable = transport::SolutionTable<Real>;
