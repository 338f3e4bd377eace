//! Feature-driven coreset selection: per-key-frame feature extraction and
//! dilation, Morton-ordered occupancy grids, the feature bounding box and the
//! final training coreset.

mod coreset;
mod extract;
mod fbb;
pub mod morton;
mod occupancy;

pub use coreset::{build_coreset, Coreset, CoresetSelection, KeyFrameFeature, Sample};
pub use extract::{dilate_feature, extract_feature, FeatureSpec, VertexSet};
pub use fbb::{fuse_fbb, to_fbb_coords, FeatureBoundingBox, VoxelBox};
pub use morton::{morton_decode, morton_encode};
pub use occupancy::{build_occupancy, interp_occupancy, merge_occupancy, OccupancyGrid};
