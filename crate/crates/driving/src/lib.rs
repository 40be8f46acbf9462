//! Automated driving on top of `arbitration-core`: lane-graph world model,
//! corridor and trajectory maneuvers, behavior blocks, the assembled driving
//! graph and a kinematic closed-loop simulator with scenario files.

pub mod arcline;
pub mod assembly;
pub mod behaviors;
pub mod estimate;
pub mod export;
pub mod geometry;
pub mod maneuver;
pub mod params;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod world;
