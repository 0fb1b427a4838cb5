//! Periodic box and uniform grids on it.

/// Periodic box `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBox {
    pub d: usize,
    pub length: f64,
}

impl PeriodicBox {
    pub fn new(d: usize, length: f64) -> Self {
        Self { d, length }
    }

    /// Shortest periodic representative of a coordinate difference.
    #[inline]
    pub fn min_image(&self, dx: f64) -> f64 {
        // `round` is symmetric, so min_image(-dx) == -min_image(dx) bit for bit
        dx - self.length * (dx / self.length).round()
    }

    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let y = x.rem_euclid(self.length);
        if y >= self.length {
            0.0
        } else {
            y
        }
    }

    /// Minimum-image displacement `a - b` written into `out`.
    #[inline]
    pub fn displacement(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = self.min_image(x - y);
        }
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }
}

/// Uniform periodic grid with `m` nodes per axis, nodes at `i * h`.
///
/// Flat storage is row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub m: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(d: usize, m: usize, length: f64) -> Self {
        Self { d, m, length }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.m as f64
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn domain(&self) -> PeriodicBox {
        PeriodicBox::new(self.d, self.length)
    }

    /// Stride of `axis` in flat storage.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.d - 1 - axis) as u32)
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    #[inline]
    pub fn unflat(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.d).rev() {
            out[axis] = flat % self.m;
            flat /= self.m;
        }
    }

    /// Flat index of the neighbour `offset` cells away along `axis`, periodic.
    #[inline]
    pub fn shift(&self, flat: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let i = (flat / stride) % self.m;
        let j = (i as isize + offset).rem_euclid(self.m as isize) as usize;
        flat - i * stride + j * stride
    }

    /// Position of node `flat`.
    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut idx = [0usize; 3];
        self.unflat(flat, &mut idx[..self.d]);
        for (o, &i) in out.iter_mut().zip(&idx[..self.d]) {
            *o = i as f64 * h;
        }
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut x = [0.0; 3];
        (0..self.len())
            .map(|k| {
                self.node(k, &mut x[..self.d]);
                f(&x[..self.d])
            })
            .collect()
    }

    /// Grid quadrature `Σ f h^d`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_volume()
    }

    /// Signed lattice frequency index in `(-m/2, m/2]` for DFT bin `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let m = self.m as i64;
        let i = i as i64;
        if i > m / 2 {
            i - m
        } else {
            i
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_image_is_odd_and_short() {
        let b = PeriodicBox::new(2, 3.0);
        for &dx in &[0.1, 1.4, 1.6, 2.9, -2.2, 4.7] {
            let a = b.min_image(dx);
            assert_eq!(b.min_image(-dx), -a);
            assert!(a.abs() <= 1.5 + 1e-12);
        }
    }

    #[test]
    fn wrap_stays_in_box() {
        let b = PeriodicBox::new(1, 2.0);
        assert_eq!(b.wrap(-1e-20), 0.0);
        assert!((b.wrap(5.5) - 1.5).abs() < 1e-15);
        assert!(b.wrap(-0.5) < 2.0);
    }

    #[test]
    fn flat_roundtrip_and_shift() {
        let g = Grid::new(3, 5, 1.0);
        let mut idx = [0; 3];
        for k in 0..g.len() {
            g.unflat(k, &mut idx);
            assert_eq!(g.flat(&idx), k);
        }
        let k = g.flat(&[4, 0, 2]);
        assert_eq!(g.shift(k, 0, 1), g.flat(&[0, 0, 2]));
        assert_eq!(g.shift(k, 1, -1), g.flat(&[4, 4, 2]));
        assert_eq!(g.shift(k, 2, 2), g.flat(&[4, 0, 4]));
    }
}
