use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{linear_index, unlinear_index, ScalarGrid};

/// Feature-of-interest definition applied to each key frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    /// Vertices with `lo <= v <= hi`.
    Interval { lo: f32, hi: f32 },
    /// Vertices within `epsilon` of `isovalue`, plus every corner of a cell
    /// whose corner values bracket the isovalue.
    Isosurface { isovalue: f32, epsilon: f32 },
    /// Vertices with `v >= threshold` belonging to a 6-connected component of
    /// at least `min_component` vertices.
    Segmentation {
        threshold: f32,
        #[serde(default = "default_min_component")]
        min_component: usize,
    },
}

fn default_min_component() -> usize {
    1
}

impl FeatureSpec {
    pub fn segmentation(threshold: f32) -> Self {
        FeatureSpec::Segmentation { threshold, min_component: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f32| (0.0..=1.0).contains(&v);
        match *self {
            FeatureSpec::Interval { lo, hi } if unit(lo) && unit(hi) && lo <= hi => Ok(()),
            FeatureSpec::Isosurface { isovalue, epsilon } if unit(isovalue) && epsilon >= 0.0 => Ok(()),
            FeatureSpec::Segmentation { threshold, .. } if unit(threshold) => Ok(()),
            _ => Err(Error::argument(format!("invalid feature spec {self:?}"))),
        }
    }
}

/// A set of grid vertices, stored by linear index for hash-based membership.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    dims: [usize; 3],
    members: HashSet<usize>,
}

impl VertexSet {
    pub fn new(dims: [usize; 3]) -> Self {
        VertexSet { dims, members: HashSet::new() }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn insert(&mut self, v: [usize; 3]) -> bool {
        debug_assert!((0..3).all(|a| v[a] < self.dims[a]));
        self.members.insert(linear_index(self.dims, v))
    }

    pub fn contains(&self, v: [usize; 3]) -> bool {
        self.members.contains(&linear_index(self.dims, v))
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.members.is_subset(&other.members)
    }

    /// Members in ascending linear order (x fastest).
    pub fn sorted(&self) -> Vec<[usize; 3]> {
        let mut ids: Vec<usize> = self.members.iter().copied().collect();
        ids.sort_unstable();
        ids.into_iter().map(|i| unlinear_index(self.dims, i)).collect()
    }

    /// Members in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.members.iter().map(|&i| unlinear_index(self.dims, i))
    }

    /// Inclusive per-axis bounds, `None` when empty.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut it = self.iter();
        let first = it.next()?;
        Some(it.fold((first, first), |(mut lo, mut hi), v| {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
            (lo, hi)
        }))
    }
}

/// Extracts the feature vertex set of one frame.
pub fn extract_feature(frame: &ScalarGrid, spec: &FeatureSpec) -> VertexSet {
    let dims = frame.dims;
    let mut out = VertexSet::new(dims);
    match *spec {
        FeatureSpec::Interval { lo, hi } => {
            for (i, &v) in frame.data.iter().enumerate() {
                if v >= lo && v <= hi {
                    out.members.insert(i);
                }
            }
        }
        FeatureSpec::Isosurface { isovalue, epsilon } => {
            for (i, &v) in frame.data.iter().enumerate() {
                if (v - isovalue).abs() <= epsilon {
                    out.members.insert(i);
                }
            }
            for z in 0..dims[2] - 1 {
                for y in 0..dims[1] - 1 {
                    for x in 0..dims[0] - 1 {
                        let corners = cell_corners([x, y, z]);
                        let (lo, hi) = corners.iter().fold((f32::MAX, f32::MIN), |(lo, hi), &c| {
                            let v = frame.get(c);
                            (lo.min(v), hi.max(v))
                        });
                        if lo <= isovalue && isovalue <= hi {
                            for c in corners {
                                out.insert(c);
                            }
                        }
                    }
                }
            }
        }
        FeatureSpec::Segmentation { threshold, min_component } => {
            let above: Vec<bool> = frame.data.iter().map(|&v| v >= threshold).collect();
            if min_component <= 1 {
                out.members.extend(above.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i));
            } else {
                for comp in components(dims, &above) {
                    if comp.len() >= min_component {
                        out.members.extend(comp);
                    }
                }
            }
        }
    }
    out
}

fn cell_corners(v: [usize; 3]) -> [[usize; 3]; 8] {
    std::array::from_fn(|c| [v[0] + (c & 1), v[1] + (c >> 1 & 1), v[2] + (c >> 2 & 1)])
}

/// 6-connected components of the marked vertices.
fn components(dims: [usize; 3], mask: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            let v = unlinear_index(dims, i);
            for a in 0..3 {
                for step in [-1i64, 1] {
                    let n = v[a] as i64 + step;
                    if n < 0 || n >= dims[a] as i64 {
                        continue;
                    }
                    let mut w = v;
                    w[a] = n as usize;
                    let j = linear_index(dims, w);
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Adds the 26-neighbourhood of every feature vertex (clamped at the grid
/// boundary).
pub fn dilate_feature(f_k: &VertexSet) -> VertexSet {
    let dims = f_k.dims;
    let mut d = f_k.clone();
    for v in f_k.iter() {
        let lo = [0, 1, 2].map(|a| v[a].saturating_sub(1));
        let hi = [0, 1, 2].map(|a| (v[a] + 1).min(dims[a] - 1));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    d.insert([x, y, z]);
                }
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(dims: [usize; 3], v: f32) -> ScalarGrid {
        ScalarGrid { dims, data: vec![v; dims.iter().product()] }
    }

    #[test]
    fn interval_extremes() {
        let spec = FeatureSpec::Interval { lo: 0.4, hi: 0.6 };
        assert!(extract_feature(&constant([3, 3, 3], 0.0), &spec).is_empty());
        assert_eq!(extract_feature(&constant([3, 3, 3], 0.5), &spec).len(), 27);
    }

    #[test]
    fn isosurface_on_ramp() {
        let ramp = [0.0f32, 0.25, 0.5, 0.75, 1.0];
        let frame = ScalarGrid::from_fn([5, 2, 2], |[x, _, _]| ramp[x]);
        let f = extract_feature(&frame, &FeatureSpec::Isosurface { isovalue: 0.5, epsilon: 0.0 });
        let mut xs: Vec<usize> = f.iter().map(|v| v[0]).collect();
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs, vec![1, 2, 3]);
        assert_eq!(f.len(), 12);
    }

    #[test]
    fn segmentation_component_filter() {
        let mut frame = constant([6, 6, 6], 0.0);
        frame.set([0, 0, 0], 1.0);
        for x in 2..5 {
            frame.set([x, 3, 3], 0.9);
        }
        let all = extract_feature(&frame, &FeatureSpec::segmentation(0.5));
        assert_eq!(all.len(), 4);
        let big = extract_feature(&frame, &FeatureSpec::Segmentation { threshold: 0.5, min_component: 2 });
        assert_eq!(big.len(), 3);
        assert!(!big.contains([0, 0, 0]));
    }

    #[test]
    fn dilation_counts() {
        let dims = [5, 5, 5];
        assert!(dilate_feature(&VertexSet::new(dims)).is_empty());
        let mut one = VertexSet::new(dims);
        one.insert([2, 2, 2]);
        assert_eq!(dilate_feature(&one).len(), 27);
        let mut corner = VertexSet::new(dims);
        corner.insert([0, 0, 4]);
        assert_eq!(dilate_feature(&corner).len(), 8);
    }

    #[test]
    fn dilation_covers_incident_cells() {
        let mut f = VertexSet::new([6, 5, 4]);
        f.insert([0, 2, 1]);
        f.insert([5, 4, 3]);
        f.insert([3, 1, 2]);
        let d = dilate_feature(&f);
        assert!(f.is_subset(&d));
        for v in f.iter() {
            // every cell having v as a corner must have all corners in d
            for c in 0..8usize {
                let base: Option<[usize; 3]> = (0..3)
                    .map(|a| v[a].checked_sub(c >> a & 1).filter(|&b| b + 1 < f.dims()[a]))
                    .collect::<Option<Vec<_>>>()
                    .map(|b| [b[0], b[1], b[2]]);
                if let Some(b) = base {
                    for corner in cell_corners(b) {
                        assert!(d.contains(corner));
                    }
                }
            }
        }
    }

    #[test]
    fn bounding_box_and_validation() {
        let mut f = VertexSet::new([6, 6, 6]);
        assert_eq!(f.bounding_box(), None);
        f.insert([1, 4, 2]);
        f.insert([3, 0, 5]);
        assert_eq!(f.bounding_box(), Some(([1, 0, 2], [3, 4, 5])));
        assert!(FeatureSpec::Interval { lo: 0.7, hi: 0.2 }.validate().is_err());
        assert!(FeatureSpec::Isosurface { isovalue: 0.5, epsilon: -1.0 }.validate().is_err());
        assert!(FeatureSpec::segmentation(0.5).validate().is_ok());
    }
}
