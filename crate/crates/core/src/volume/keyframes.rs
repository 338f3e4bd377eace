use serde::{Deserialize, Serialize};

use super::Volume4D;
use crate::error::{Error, Result};

/// Strictly increasing key-frame indices, at least two of them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct KeyFrameSet {
    indices: Vec<usize>,
}

impl KeyFrameSet {
    /// Validates explicit indices against a frame count.
    pub fn new(indices: Vec<usize>, num_frames: usize) -> Result<Self> {
        let set = Self::try_from(indices)?;
        if let Some(&last) = set.indices.last() {
            if last >= num_frames {
                return Err(Error::argument(format!("key frame {last} outside [0, {num_frames})")));
            }
        }
        Ok(set)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Normalized time of the k-th key frame, `-1 + 2k/(n-1)`.
    pub fn time(&self, k: usize) -> f64 {
        key_time(k, self.len())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Normalized time of a (possibly fractional) frame index: linear between
    /// the bracketing key frames, clamped outside the first and last.
    pub fn frame_time(&self, frame: f64) -> f64 {
        let idx = &self.indices;
        let n = idx.len();
        if frame <= idx[0] as f64 {
            return -1.0;
        }
        if frame >= idx[n - 1] as f64 {
            return 1.0;
        }
        let k = idx.partition_point(|&i| i as f64 <= frame) - 1;
        let (a, b) = (idx[k] as f64, idx[k + 1] as f64);
        let (ta, tb) = (key_time(k, n), key_time(k + 1, n));
        ta + (frame - a) / (b - a) * (tb - ta)
    }
}

pub(crate) fn key_time(k: usize, n: usize) -> f64 {
    if k + 1 == n {
        1.0
    } else {
        -1.0 + 2.0 * k as f64 / (n - 1) as f64
    }
}

impl TryFrom<Vec<usize>> for KeyFrameSet {
    type Error = Error;

    fn try_from(indices: Vec<usize>) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::argument("at least two key frames are required"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::argument(format!("key frames must be strictly increasing, got {indices:?}")));
        }
        Ok(KeyFrameSet { indices })
    }
}

impl From<KeyFrameSet> for Vec<usize> {
    fn from(k: KeyFrameSet) -> Self {
        k.indices
    }
}

fn frame_distance(vol: &Volume4D, a: usize, b: usize) -> f64 {
    vol.frames[a]
        .data
        .iter()
        .zip(&vol.frames[b].data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Farthest-point key-frame selection: keeps the first and last frame, then
/// repeatedly adds the frame whose nearest selected frame is farthest away
/// (L2 over all voxels), breaking ties towards the lower index.
pub fn select_key_frames(vol: &Volume4D, budget: usize) -> Result<KeyFrameSet> {
    let n = vol.num_frames();
    if budget < 2 || budget > n {
        return Err(Error::argument(format!("key-frame budget {budget} outside [2, {n}]")));
    }
    let mut selected = vec![0, n - 1];
    let mut nearest: Vec<f64> = (0..n).map(|j| frame_distance(vol, j, 0).min(frame_distance(vol, j, n - 1))).collect();
    let mut taken = vec![false; n];
    taken[0] = true;
    taken[n - 1] = true;
    while selected.len() < budget {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            if best.is_none_or(|(_, d)| nearest[j] > d) {
                best = Some((j, nearest[j]));
            }
        }
        let (j, _) = best.expect("budget <= frame count");
        taken[j] = true;
        selected.push(j);
        for (i, d) in nearest.iter_mut().enumerate() {
            if !taken[i] {
                *d = d.min(frame_distance(vol, i, j));
            }
        }
    }
    selected.sort_unstable();
    KeyFrameSet::new(selected, n)
}
