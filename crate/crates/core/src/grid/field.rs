use super::UniformGrid;
use crate::error::{Error, Result};

/// Real values on a uniform grid together with an inside/outside mask.
///
/// Values at masked-out points carry no meaning and are kept at zero by the
/// constructors in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: UniformGrid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: UniformGrid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field storage has {} values and {} mask entries for a grid of {} points",
                values.len(),
                mask.len(),
                grid.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| mask[i] && !values[i].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {} at masked-in point {i}",
                values[i]
            )));
        }
        Ok(ScalarField { grid, values, mask })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        let n = grid.len();
        ScalarField {
            grid,
            values: vec![0.0; n],
            mask: vec![true; n],
        }
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Self {
        let n = grid.len();
        ScalarField {
            grid,
            values: vec![c; n],
            mask: vec![true; n],
        }
    }

    /// Sample `f` at every grid point; the mask is all-inside.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: UniformGrid, f: F) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..d])
            })
            .collect();
        let n = grid.len();
        ScalarField {
            grid,
            values,
            mask: vec![true; n],
        }
    }

    /// Sample `f` on the masked-in points only.
    pub fn from_fn_masked<F: Fn(&[f64]) -> f64>(
        grid: UniformGrid,
        mask: Vec<bool>,
        f: F,
    ) -> Result<Self> {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                if mask[i] {
                    let x = grid.point(i);
                    f(&x[..d])
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField::new(grid, values, mask)
    }

    #[inline]
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.grid.len() {
            return Err(Error::InvalidArgument(
                "mask length does not match grid".into(),
            ));
        }
        for (v, &m) in self.values.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
        self.mask = mask;
        Ok(self)
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { f(v) } else { 0.0 })
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
            mask: self.mask.clone(),
        }
    }

    /// `a * self + b * other` on the intersection of both masks.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.same_grid(other)?;
        let mask: Vec<bool> = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(&p, &q)| p && q)
            .collect();
        let values = (0..self.values.len())
            .map(|i| {
                if mask[i] {
                    a * self.values[i] + b * other.values[i]
                } else {
                    0.0
                }
            })
            .collect();
        Ok(ScalarField {
            grid: self.grid.clone(),
            values,
            mask,
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// Largest absolute value over the mask (zero for an empty mask).
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on(&self.mask)
    }

    pub fn sup_norm_on(&self, region: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(region)
            .filter(|(_, &m)| m)
            .fold(0.0f64, |acc, (&v, _)| acc.max(v.abs()))
    }

    /// `(min, max)` over the masked-in points.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.range_on(&self.mask)
    }

    pub fn range_on(&self, region: &[bool]) -> Option<(f64, f64)> {
        let mut it = self
            .values
            .iter()
            .zip(region)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Multilinear interpolation at `z`, with coordinates clamped to the grid
    /// box. Mask is ignored.
    pub fn interpolate(&self, z: &[f64]) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        let mut lo = [0usize; super::MAX_DIM];
        let mut t = [0.0; super::MAX_DIM];
        for a in 0..d {
            let ax = g.axis(a);
            let s = ((z[a] - ax.origin) / ax.spacing).clamp(0.0, (ax.count - 1) as f64);
            let i = (s.floor() as usize).min(ax.count - 2);
            lo[a] = i;
            t[a] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut idx = [0usize; super::MAX_DIM];
            let mut w = 1.0;
            for a in 0..d {
                let up = corner >> a & 1 == 1;
                idx[a] = lo[a] + usize::from(up);
                w *= if up { t[a] } else { 1.0 - t[a] };
            }
            if w != 0.0 {
                acc += w * self.values[g.flat(&idx[..d])];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn interpolation_is_exact_for_bilinear_functions() {
        let g = UniformGrid::new(vec![Axis::new(-1.0, 0.25, 9), Axis::new(0.0, 0.5, 5)]).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let v = ScalarField::from_fn(g, f);
        for &z in &[[0.1, 0.3], [-1.0, 0.0], [1.0, 2.0], [0.33, 1.77]] {
            assert!((v.interpolate(&z) - f(&z)).abs() < 1e-13);
        }
        assert!((v.interpolate(&[5.0, 0.0]) - f(&[1.0, 0.0])).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_finite_values_inside_the_mask() {
        let g = UniformGrid::new(vec![Axis::new(0.0, 1.0, 2)]).unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0, f64::NAN], vec![true, true]).is_err());
        assert!(ScalarField::new(g, vec![0.0, f64::NAN], vec![true, false]).is_ok());
    }
}
