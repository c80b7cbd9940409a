//! Person and frame identifiers.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a tracked person. Frames are sampled video frames; persons
/// keep their id across frames (ground truth) or approximately (a tracker).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct PersonId(pub u32);

/// 1-based index of a sampled video frame.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct FrameId(pub u32);

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FrameId {
    pub fn next(self) -> FrameId {
        FrameId(self.0 + 1)
    }
}
