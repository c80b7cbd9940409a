//! Dynamic human-group detection over synthetic trajectory scenes.
//!
//! The pipeline turns per-frame pairwise groupness probabilities into a
//! temporal groupness graph (nodes are person-frame pairs, same-frame edges
//! carry the groupness probability `P_g`, consecutive-frame edges carry the
//! identity probability `P_t`), clusters that graph by modularity
//! maximization to recover dynamically changing groups, converts the dynamic
//! groups to a single static group set, and evaluates both against ground
//! truth with the half-overlap matching criterion.
//!
//! Modules, in pipeline order:
//!
//! * [`sim`] — seeded synthetic scenarios with ground-truth group structure
//!   (splits, merges, entries, exits, occlusion) and simulated tracking noise.
//! * [`groupness`] — the pairwise `(P_i, P_g)` probability head: handcrafted
//!   trajectory features, a trainable softmax head, and score-file ingestion.
//! * [`graph`] — framewise and temporal groupness graph construction, k-NN
//!   pair pruning, and the static aggregated-graph baseline.
//! * [`clustering`] — modularity, Louvain, label propagation, CNM greedy
//!   merging, and a brute-force optimal-partition oracle for tiny graphs.
//! * [`groups`] — partitions to per-frame dynamic groups, and dynamic groups
//!   to one static group set by frame-count selection.
//! * [`eval`] — precision / recall / F1 under half-overlap matching.
//! * [`pipeline`] — end-to-end orchestration, artifact files, benchmarks.

pub mod clustering;
pub mod error;
pub mod eval;
pub mod graph;
pub mod groupness;
pub mod groups;
pub mod ids;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use ids::{FrameId, PersonId};
