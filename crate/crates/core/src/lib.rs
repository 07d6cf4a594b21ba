//! Deterministic multi-agent simulator of peer-to-peer wireless power
//! transfer between electric vehicles and charging infrastructure.
//!
//! The crate is split into layers:
//!
//! - [`linkmodels`] — steady-state link-efficiency models for the five
//!   transfer technologies (LED optical, laser optical, RF beam, inductive,
//!   capacitive), generic over the scalar type.
//! - [`world`] — 3-D poses, spherical obstacles, line-of-sight geometry,
//!   boresight tracking and safe-distance policy.
//! - [`storage`] — hybrid battery + supercapacitor store with power limits,
//!   conversion efficiencies and supercap-first routing.
//! - [`market`] — discrete double auction for energy contracts backed by a
//!   SHA-256 hash-chained append-only ledger.
//! - [`formation`] — second-order consensus formation controller.
//! - [`engine`] — fixed-timestep simulation loop tying the above together.
//! - [`scenario`] — strict JSON scenario schema, validation and state
//!   construction.
//!
//! The math modules are generic over [`Real`]; the simulation, market and
//! file-output layers are fixed to `f64` because their outputs are
//! byte-deterministic (hash chains, CSV, JSON) and therefore
//! precision-specific. Concrete `f64` aliases for the generic types are
//! exported at the crate root.

pub mod engine;
pub mod formation;
pub mod linkmodels;
pub mod market;
pub mod real;
pub mod scenario;
pub mod storage;
pub mod world;

pub use real::Real;

/// Scalar type used by the simulation layers.
pub type Scalar = f64;

// Concrete `f64` aliases for the generic math types.
pub type EfficiencyChain = linkmodels::EfficiencyChain<f64>;
pub type EmissionSpectrum = linkmodels::EmissionSpectrum<f64>;
pub type OwptLedParams = linkmodels::OwptLedParams<f64>;
pub type LaserParams = linkmodels::LaserParams<f64>;
pub type RfParams = linkmodels::RfParams<f64>;
pub type IwptParams = linkmodels::IwptParams<f64>;
pub type CwptParams = linkmodels::CwptParams<f64>;
pub type LinkTechnologyParams = linkmodels::LinkTechnologyParams<f64>;
pub type LinkGeometry = linkmodels::LinkGeometry<f64>;
pub type EnvEfficiency = linkmodels::EnvEfficiency<f64>;
pub type Gain = linkmodels::Gain<f64>;

pub type Pose = world::Pose<f64>;
pub type Obstacle = world::Obstacle<f64>;
pub type SafetyPolicy = world::SafetyPolicy<f64>;

pub type Reservoir = storage::Reservoir<f64>;
pub type HybridStore = storage::HybridStore<f64>;

pub type FormationSpec = formation::FormationSpec<f64>;

pub type Vec3 = nalgebra::Vector3<f64>;
