//! Plain-text persistence: ASCII PLY for clouds, TUM for trajectories.

pub mod ply;
pub mod tum;
