//! Brownian fractures in cylinders and balls: exact spectral series for heat
//! content and torsional rigidity, and walk-on-spheres estimators for the
//! rigidity lost to a fracture and the capacity of Brownian traces.

pub mod experiments;
pub mod geometry;
pub mod potential;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use geometry::{BallSpec, CylinderSpec, DiscSpec, Domain, Point2, Point3, TracePolyline};
pub use report::{BoundEntry, BoundsReport};
pub use rng::RngStream;
pub use stats::Estimate;
