//! Uniform tensor grids, masked scalar fields and the discrete calculus used
//! throughout the crate.
//!
//! Points are stored row-major with the last axis varying fastest. For every
//! half-space domain the last axis is the extension variable `λ`.

mod calculus;
mod domain;
mod dump;
mod field;

pub use calculus::{gradient, integrate, laplacian_residual, partial, trapezoid_weights, Integral};
pub(crate) use domain::sphere_area;
pub use domain::{BaseShape, CylinderDomain, WedgeDomain};
pub use dump::{read_field, read_field_dump, write_field, write_field_dump};
pub use field::ScalarField;

use crate::error::{Error, Result};

/// Largest supported number of axes.
pub const MAX_DIM: usize = 4;

/// One axis of a uniform grid: coordinates are `origin + i * spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Self {
        Axis {
            origin,
            spacing,
            count,
        }
    }

    /// Axis covering `[lo, hi]` with spacing `h`; `(hi - lo) / h` must be an
    /// integer up to rounding.
    pub fn spanning(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {h}"
            )));
        }
        let steps = (hi - lo) / h;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "interval [{lo}, {hi}] is not a positive multiple of h = {h}"
            )));
        }
        Ok(Axis::new(lo, h, rounded as usize + 1))
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.coord(self.count - 1)
    }

    /// Index of the grid coordinate equal to `x`, if `x` lies on the axis.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.origin) / self.spacing;
        let r = t.round();
        if (t - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.count {
            None
        } else {
            Some(r as usize)
        }
    }
}

/// A uniform tensor grid in 1 to 4 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    axes: Vec<Axis>,
    strides: [usize; MAX_DIM],
    len: usize,
}

impl UniformGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let d = axes.len();
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..=4, got {d}"
            )));
        }
        for (a, ax) in axes.iter().enumerate() {
            if !(ax.spacing > 0.0) || !ax.spacing.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: spacing must be positive"
                )));
            }
            if ax.count < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need at least 2 points"
                )));
            }
            if !ax.origin.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: origin is not finite"
                )));
            }
        }
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..d).rev() {
            strides[a] = s;
            s *= axes[a].count;
        }
        Ok(UniformGrid {
            axes,
            strides,
            len: s,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    #[inline]
    pub fn count(&self, a: usize) -> usize {
        self.axes[a].count
    }

    #[inline]
    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing
    }

    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        self.strides[a]
    }

    /// Product of all spacings.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in idx.iter().enumerate() {
            f += i * self.strides[a];
        }
        f
    }

    #[inline]
    pub fn unflatten(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim() {
            idx[a] = flat / self.strides[a];
            flat -= idx[a] * self.strides[a];
        }
        idx
    }

    /// Index along one axis of a flat point index.
    #[inline]
    pub fn index_along(&self, flat: usize, a: usize) -> usize {
        (flat / self.strides[a]) % self.axes[a].count
    }

    #[inline]
    pub fn coord(&self, a: usize, i: usize) -> f64 {
        self.axes[a].coord(i)
    }

    /// Coordinates of a flat point index; unused trailing slots are zero.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = self.axes[a].coord(idx[a]);
        }
        x
    }

    /// Neighbour of `flat` one step along axis `a`, in direction `+1` or `-1`.
    #[inline]
    pub fn neighbor(&self, flat: usize, a: usize, forward: bool) -> Option<usize> {
        let i = self.index_along(flat, a);
        if forward {
            (i + 1 < self.axes[a].count).then(|| flat + self.strides[a])
        } else {
            (i > 0).then(|| flat - self.strides[a])
        }
    }

    /// Grid with every spacing halved over the same extents.
    pub fn refined(&self) -> UniformGrid {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis::new(a.origin, a.spacing / 2.0, 2 * (a.count - 1) + 1))
            .collect();
        UniformGrid::new(axes).expect("refining a valid grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_axes() {
        assert!(UniformGrid::new(vec![Axis::new(0.0, 1.0, 1), Axis::new(0.0, 1.0, 3)]).is_err());
        assert!(UniformGrid::new(vec![Axis::new(0.0, 0.0, 4), Axis::new(0.0, 1.0, 3)]).is_err());
        assert!(UniformGrid::new(vec![]).is_err());
        assert!(UniformGrid::new(vec![Axis::new(0.0, 1.0, 2); 5]).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let g = UniformGrid::new(vec![
            Axis::new(-1.0, 0.5, 5),
            Axis::new(0.0, 0.25, 3),
            Axis::new(2.0, 1.0, 4),
        ])
        .unwrap();
        for f in 0..g.len() {
            let idx = g.unflatten(f);
            assert_eq!(g.flat(&idx[..3]), f);
        }
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(0), 12);
    }

    #[test]
    fn coordinates_are_origin_plus_multiple() {
        let ax = Axis::spanning(-2.0, 2.0, 0.1).unwrap();
        assert_eq!(ax.count, 41);
        assert_eq!(ax.coord(7), -2.0 + 7.0 * 0.1);
        assert!(Axis::spanning(0.0, 1.0, 0.3).is_err());
    }
}
