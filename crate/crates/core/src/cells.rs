//! Linked-cell neighbour search on the periodic box.

use crate::geometry::PeriodicBox;

/// Particles binned into cubic cells of side at least `cutoff`.
///
/// Cells are stored in counting-sort order so that iteration order depends only on
/// particle indices, never on thread scheduling.
#[derive(Debug, Clone)]
pub struct CellList {
    pub cells_per_axis: usize,
    d: usize,
    cell_side: f64,
    /// Start offset of each cell in `members`; `len = cells + 1`.
    starts: Vec<usize>,
    members: Vec<usize>,
    cell_of: Vec<usize>,
}

impl CellList {
    /// Returns `None` when fewer than three cells fit per axis; callers then fall back
    /// to all pairs.
    pub fn build(positions: &[f64], domain: &PeriodicBox, cutoff: f64) -> Option<Self> {
        let d = domain.d;
        let per_axis = (domain.length / cutoff).floor() as usize;
        if per_axis < 3 {
            return None;
        }
        let cell_side = domain.length / per_axis as f64;
        let n = positions.len() / d;
        let total = per_axis.pow(d as u32);
        let cell_of: Vec<usize> = positions
            .chunks_exact(d)
            .map(|x| {
                x.iter().fold(0usize, |acc, &xi| {
                    let c = ((xi / cell_side) as usize).min(per_axis - 1);
                    acc * per_axis + c
                })
            })
            .collect();
        let mut counts = vec![0usize; total + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut members = vec![0usize; n];
        for (k, &c) in cell_of.iter().enumerate() {
            members[fill[c]] = k;
            fill[c] += 1;
        }
        Some(Self { cells_per_axis: per_axis, d, cell_side, starts, members, cell_of })
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    /// Calls `visit(l)` for every particle in the 3^d cells around particle `k`'s cell
    /// (including `k` itself).
    #[inline]
    pub fn for_each_candidate<F: FnMut(usize)>(&self, k: usize, mut visit: F) {
        let p = self.cells_per_axis as isize;
        let mut coord = [0isize; 3];
        let mut c = self.cell_of[k];
        for axis in (0..self.d).rev() {
            coord[axis] = (c % self.cells_per_axis) as isize;
            c /= self.cells_per_axis;
        }
        let reach = 3usize.pow(self.d as u32);
        for code in 0..reach {
            let mut flat = 0usize;
            let mut rem = code;
            for &base in coord.iter().take(self.d) {
                let off = (rem % 3) as isize - 1;
                rem /= 3;
                flat = flat * self.cells_per_axis + (base + off).rem_euclid(p) as usize;
            }
            for &l in &self.members[self.starts[flat]..self.starts[flat + 1]] {
                visit(l);
            }
        }
    }
}
