//! Per-atom features for fixed-camera footage: activity, blob size, color,
//! persistence and motion.

mod background;
mod color;
mod components;
mod extract;
mod flow;

pub use background::{init_background, ActivityMask, BackgroundModel, PersistenceAccumulator};
pub(crate) use background::median_u8;
pub use color::{color_bins, rgb_to_hsl};
pub use components::{connected_components, Blob, Labeling};
pub use extract::{
    extract_atom_features, motion_bin, CctvAtomFeatures, CctvExtractor, DocumentAccumulator,
    DocumentInputs,
};
pub use flow::{horn_schunck, FlowField};

use serde::{Deserialize, Serialize};

/// Tunables for the fixed-camera pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CctvParams {
    /// Frames whose per-pixel median seeds the background.
    pub background_init_frames: usize,
    /// Max-channel absolute difference (gray levels) above which a pixel is active.
    pub activity_threshold: f32,
    /// Running-average rate for inactive pixels.
    pub learning_rate: f32,
    /// Flow magnitude (px/frame) below which a vector counts as idle.
    pub idle_threshold: f32,
    pub flow_smoothness: f32,
    pub flow_iterations: u32,
}

impl Default for CctvParams {
    fn default() -> Self {
        CctvParams {
            background_init_frames: 500,
            activity_threshold: 20.0,
            learning_rate: 0.05,
            idle_threshold: 0.5,
            flow_smoothness: 1.0,
            flow_iterations: 100,
        }
    }
}
