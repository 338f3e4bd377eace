//! Bit-packed, Morton-ordered occupancy grids over the cells of a volume.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::morton::{morton_decode, morton_encode_unchecked};
use super::VertexSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TVOG";
const VERSION: u32 = 1;

/// One bit per cell. A vertex grid of `n` vertices along an axis has `n - 1`
/// cells; bit positions are the Morton codes of the cell indices.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    dims: [u32; 3],
    frame_time: f64,
    words: Vec<u64>,
}

impl OccupancyGrid {
    /// Empty grid covering the cells of a volume with `vertex_dims` vertices.
    pub fn for_vertices(vertex_dims: [usize; 3], frame_time: f64) -> Self {
        Self::empty([0, 1, 2].map(|a| (vertex_dims[a] - 1) as u32), frame_time)
    }

    pub fn empty(dims: [u32; 3], frame_time: f64) -> Self {
        let words = if dims.contains(&0) {
            0
        } else {
            let last = morton_encode_unchecked(dims[0] - 1, dims[1] - 1, dims[2] - 1);
            (last / 64 + 1) as usize
        };
        OccupancyGrid { dims, frame_time, words: vec![0; words] }
    }

    pub fn full(dims: [u32; 3], frame_time: f64) -> Self {
        let mut g = Self::empty(dims, frame_time);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    g.set([x, y, z], true);
                }
            }
        }
        g
    }

    /// Cell counts per axis.
    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    /// The same cells stamped with another time.
    pub fn with_frame_time(mut self, frame_time: f64) -> Self {
        self.frame_time = frame_time;
        self
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    #[inline]
    pub fn get(&self, c: [u32; 3]) -> bool {
        let m = morton_encode_unchecked(c[0], c[1], c[2]);
        self.words[(m >> 6) as usize] >> (m & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, c: [u32; 3], on: bool) {
        debug_assert!((0..3).all(|a| c[a] < self.dims[a]));
        let m = morton_encode_unchecked(c[0], c[1], c[2]);
        let w = &mut self.words[(m >> 6) as usize];
        if on {
            *w |= 1 << (m & 63);
        } else {
            *w &= !(1 << (m & 63));
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupied cells in Morton order.
    pub fn iter_set(&self) -> impl Iterator<Item = [u32; 3]> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as u64;
                bits &= bits - 1;
                let (x, y, z) = morton_decode(wi as u64 * 64 + b);
                Some([x, y, z])
            })
        })
    }

    /// Cell containing a normalized position in `[-1, 1]^3`, if inside.
    #[inline]
    pub fn cell_of(&self, p: [f64; 3]) -> Option<[u32; 3]> {
        let mut c = [0u32; 3];
        for a in 0..3 {
            let n = self.dims[a] as f64;
            let pos = (p[a] + 1.0) * 0.5 * n;
            if !(pos >= 0.0 && pos <= n) {
                return None;
            }
            c[a] = (pos.floor() as u32).min(self.dims[a] - 1);
        }
        Some(c)
    }

    /// Occupancy at a normalized position; outside the grid counts as empty.
    #[inline]
    pub fn occupied_at(&self, p: [f64; 3]) -> bool {
        self.cell_of(p).is_some_and(|c| self.get(c))
    }

    /// Normalized-coordinate bounds of a cell.
    pub fn cell_bounds(&self, c: [u32; 3]) -> ([f64; 3], [f64; 3]) {
        let lo = [0, 1, 2].map(|a| -1.0 + 2.0 * c[a] as f64 / self.dims[a] as f64);
        let hi = [0, 1, 2].map(|a| -1.0 + 2.0 * (c[a] + 1) as f64 / self.dims[a] as f64);
        (lo, hi)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e| Error::io("<occupancy>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
        for d in self.dims {
            w.write_u32::<LittleEndian>(d).map_err(io)?;
        }
        w.write_f32::<LittleEndian>(0.0).map_err(io)?;
        w.write_f64::<LittleEndian>(self.frame_time).map_err(io)?;
        w.write_u64::<LittleEndian>(self.words.len() as u64).map_err(io)?;
        for &word in &self.words {
            w.write_u64::<LittleEndian>(word).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut off = 0u64;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::format(off, "truncated header"))?;
        if &magic != MAGIC {
            return Err(Error::format(off, "not an occupancy grid file"));
        }
        off += 4;
        let version = r.read_u32::<LittleEndian>().map_err(|_| Error::format(off, "truncated header"))?;
        if version != VERSION {
            return Err(Error::format(off, format!("unsupported occupancy version {version}")));
        }
        off += 4;
        let mut dims = [0u32; 3];
        for d in &mut dims {
            *d = r.read_u32::<LittleEndian>().map_err(|_| Error::format(off, "truncated dims"))?;
            off += 4;
        }
        r.read_f32::<LittleEndian>().map_err(|_| Error::format(off, "truncated header"))?;
        off += 4;
        let frame_time = r.read_f64::<LittleEndian>().map_err(|_| Error::format(off, "truncated header"))?;
        off += 8;
        let count = r.read_u64::<LittleEndian>().map_err(|_| Error::format(off, "truncated header"))?;
        let mut grid = OccupancyGrid::empty(dims, frame_time);
        if count != grid.words.len() as u64 {
            return Err(Error::format(
                off,
                format!("payload holds {count} words, dims {dims:?} need {}", grid.words.len()),
            ));
        }
        off += 8;
        for word in grid.words.iter_mut() {
            *word = r.read_u64::<LittleEndian>().map_err(|_| Error::format(off, "truncated payload"))?;
            off += 8;
        }
        Ok(grid)
    }
}

/// Sets every cell that has at least one of its 8 corner vertices in `d_k`.
pub fn build_occupancy(d_k: &VertexSet, frame_time: f64) -> OccupancyGrid {
    let vd = d_k.dims();
    let mut grid = OccupancyGrid::for_vertices(vd, frame_time);
    let cd = grid.dims;
    for v in d_k.iter() {
        for c in 0..8u32 {
            let mut cell = [0u32; 3];
            let mut ok = true;
            for a in 0..3 {
                // cell i has corners i and i + 1
                let shift = (c >> a & 1) as usize;
                if v[a] < shift || v[a] - shift >= cd[a] as usize {
                    ok = false;
                    break;
                }
                cell[a] = (v[a] - shift) as u32;
            }
            if ok {
                grid.set(cell, true);
            }
        }
    }
    grid
}

fn check_same_dims(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::argument(format!("occupancy dims differ: {:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(())
}

/// Bitwise OR of grids with identical dims.
pub fn merge_occupancy(grids: &[OccupancyGrid]) -> Result<OccupancyGrid> {
    let first = grids.first().ok_or_else(|| Error::argument("no grids to merge"))?;
    let mut out = first.clone();
    for g in &grids[1..] {
        check_same_dims(first, g)?;
        for (o, w) in out.words.iter_mut().zip(&g.words) {
            *o |= w;
        }
    }
    Ok(out)
}

/// Occupancy at time `t` between two key grids: a cell is set iff
/// `(1 - w) * a + w * b >= 0.5` with `w = (t - t_a) / (t_b - t_a)`.
pub fn interp_occupancy(a: &OccupancyGrid, b: &OccupancyGrid, t: f64) -> Result<OccupancyGrid> {
    check_same_dims(a, b)?;
    let (ta, tb) = (a.frame_time, b.frame_time);
    if !(ta < tb) || !(t >= ta && t <= tb) {
        return Err(Error::argument(format!("time {t} not inside key interval [{ta}, {tb}]")));
    }
    let w = (t - ta) / (tb - ta);
    // a-only cells survive while 1 - w >= 0.5, b-only cells once w >= 0.5
    let keep_a = 1.0 - w >= 0.5;
    let keep_b = w >= 0.5;
    let words = a
        .words
        .iter()
        .zip(&b.words)
        .map(|(&wa, &wb)| {
            let both = wa & wb;
            let mut out = both;
            if keep_a {
                out |= wa;
            }
            if keep_b {
                out |= wb;
            }
            out
        })
        .collect();
    Ok(OccupancyGrid { dims: a.dims, frame_time: t, words })
}
