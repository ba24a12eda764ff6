//! Simulation bench for planar-mirror attacks on LiDAR scan-matching
//! odometry.
//!
//! The pieces compose as a pipeline: [`world`] raycasts raw scans along a
//! route, [`mirror`] removes occluded returns and injects ghost points,
//! [`odometry`] runs the victim ICP, and [`metrics`] scores the drift. The
//! attacker side is [`objective`] (a victim-agnostic placement score) and
//! [`optimizer`] (black-box search over mirror placement).

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mirror;
pub mod objective;
pub mod odometry;
pub mod optimizer;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Frame, PointCloud, Polyline, RigidPose, Vec3};
