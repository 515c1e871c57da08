//! Early-wildfire detection with a UAV-assisted IoT sensor network.
//!
//! Sensors scattered as a Poisson field flag a fire within their detection
//! radius; UAVs hover over random spots, collect the flags of the sensors
//! they cover and raise an alarm at `M` or more positives. The crate
//! computes the resulting detection probability over time with an absorbing
//! Markov chain, checks it by Monte Carlo simulation and searches budgeted
//! designs of sensor density, fleet size and threshold.
//!
//! The analytical modules are generic over [`Scalar`] (`f32` or `f64`);
//! simulation and planning run in `f64`.

// `!(x > 0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection_model;
pub mod dtmc_engine;
pub mod error;
pub mod geometry;
pub mod link_budget;
pub mod monte_carlo;
pub mod planner;
pub mod report;
pub mod scalar;
pub mod scenario;

pub use detection_model::{QuadratureSpec, StepProbabilities};
pub use dtmc_engine::{detection_curve, CurveRecord, DetectionCurve, StateVector, StepTransition};
pub use error::{Error, Result};
pub use geometry::FireGeometry;
pub use link_budget::{AltitudeDesign, ChannelParams, LinkQuality};
pub use monte_carlo::{BoundaryMode, TrialConfig, TrialOutcome, VerificationScope};
pub use planner::{CostModel, Grid, PlanResult};
pub use scalar::Scalar;
pub use scenario::{load_scenario, Scenario, ScenarioParams};

pub type FireGeometry64 = FireGeometry<f64>;
pub type FireGeometry32 = FireGeometry<f32>;
pub type StepProbabilities64 = StepProbabilities<f64>;
pub type StepProbabilities32 = StepProbabilities<f32>;
pub type StateVector64 = StateVector<f64>;
pub type StepTransition64 = StepTransition<f64>;
pub type DetectionCurve64 = DetectionCurve<f64>;
pub type DetectionCurve32 = DetectionCurve<f32>;
pub type LinkQuality64 = LinkQuality<f64>;
pub type AltitudeDesign64 = AltitudeDesign<f64>;
