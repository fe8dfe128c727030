//! Nonholonomic parking maneuvers by successive convexification.
//!
//! A maneuver is three stitched curve sections of a kinematic car whose
//! joints force the car to stop, so direction reversals (cusps) can appear
//! at the joints. Obstacles are state-triggered constraints. Each iteration
//! solves one second-order cone program.
//!
//! ```no_run
//! use parking_scvx::{scenarios, scvx};
//!
//! let scenario = scenarios::reverse_parking().with_seed(7).unwrap();
//! let solution = scvx::scvx_run(&scenario, &scenario.params).unwrap();
//! println!("{} iterations, {:.2} s", solution.iterations, solution.duration());
//! ```

pub mod batch;
pub mod conic;
pub mod discretization;
pub mod par;
pub mod reeds_shepp;
pub mod scenarios;
pub mod scvx;
pub mod stc;
pub mod trajectory;
pub mod validate;
pub mod vehicle;

pub use scenarios::Scenario;
pub use scvx::{scvx_run, MultiSegmentSolution, ScvxParams};
pub use trajectory::SegmentTrajectory;
pub use vehicle::{CarControl, CarState, ModelParams};
