//! Desk-scale benchmark for planar deformable rearrangement: a
//! position-based simulator for cables, fabrics, and bag proxies; a task
//! suite with scripted demonstrators; dataset tooling; and pick-and-place
//! policies (attention + transport heat maps, goal-conditioned variants,
//! and ground-truth-state baselines) trained from scratch on CPU.

pub mod error;
pub mod geom;
pub mod render;
pub mod scene;
pub mod sim;
pub mod spatial;

pub use error::{Error, Result};
pub use render::{ObservationImage, SegmentationMask};
pub use scene::Scene;
pub use sim::{GraspHandle, MotionParams, PickPlaceAction};
pub use spatial::{ImageSE2, Pixel, Pose2, Vec2, WorkspaceCalib};
