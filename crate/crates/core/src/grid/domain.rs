use super::{Axis, ScalarField, UniformGrid};
use crate::error::{Error, Result};

/// Cross-section of a cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseShape {
    /// Staircase approximation of the Euclidean ball `|x| <= R`.
    Ball,
    /// The cube `[-R, R]^n` (or an explicit box).
    Box,
}

impl std::str::FromStr for BaseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(BaseShape::Ball),
            "box" => Ok(BaseShape::Box),
            other => Err(Error::InvalidArgument(format!(
                "unknown base shape `{other}`"
            ))),
        }
    }
}

/// Discretised cylinder `base x [0, height]` in `R^{n+1}_+`.
///
/// Boundary bookkeeping: the bottom `λ = 0` (including its rim), the lateral
/// and top boundary for `λ > 0`, and the interior. The three sets are
/// disjoint and cover the domain.
#[derive(Debug, Clone)]
pub struct CylinderDomain {
    pub n: usize,
    pub radius: f64,
    pub height: f64,
    pub base_shape: BaseShape,
    center: Vec<f64>,
    grid: UniformGrid,
    inside: Vec<bool>,
    base_rim: Vec<bool>,
    bottom: Vec<bool>,
    plus: Vec<bool>,
    interior: Vec<bool>,
}

impl CylinderDomain {
    /// `C_R = B_R x (0, R)`.
    pub fn new(n: usize, radius: f64, h: f64, base_shape: BaseShape) -> Result<Self> {
        Self::with_height(n, radius, radius, h, base_shape)
    }

    pub fn with_height(
        n: usize,
        radius: f64,
        height: f64,
        h: f64,
        base_shape: BaseShape,
    ) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidGrid(format!(
                "base dimension must be 1..=3, got {n}"
            )));
        }
        if !(radius > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidGrid(
                "radius and height must be positive".into(),
            ));
        }
        let extents = vec![(-radius, radius); n];
        Self::build(
            &extents,
            height,
            &vec![h; n + 1],
            base_shape,
            radius,
            vec![0.0; n],
        )
    }

    /// Box base `Π [lo_i, hi_i]`, e.g. a long channel for sliding experiments.
    pub fn from_extents(extents: &[(f64, f64)], height: f64, h: f64) -> Result<Self> {
        if extents.is_empty() || extents.len() > 3 {
            return Err(Error::InvalidGrid("base dimension must be 1..=3".into()));
        }
        let radius = extents
            .iter()
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .fold(f64::INFINITY, f64::min);
        let center = extents.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        Self::build(
            extents,
            height,
            &vec![h; extents.len() + 1],
            BaseShape::Box,
            radius,
            center,
        )
    }

    /// Box base with one spacing per axis (base axes, then `λ`).
    pub fn with_spacings(extents: &[(f64, f64)], height: f64, spacings: &[f64]) -> Result<Self> {
        if extents.is_empty() || extents.len() > 3 || spacings.len() != extents.len() + 1 {
            return Err(Error::InvalidGrid(
                "need 1..=3 base extents and one spacing per axis".into(),
            ));
        }
        let radius = extents
            .iter()
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .fold(f64::INFINITY, f64::min);
        let center = extents.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        Self::build(extents, height, spacings, BaseShape::Box, radius, center)
    }

    fn build(
        extents: &[(f64, f64)],
        height: f64,
        spacings: &[f64],
        base_shape: BaseShape,
        radius: f64,
        center: Vec<f64>,
    ) -> Result<Self> {
        let n = extents.len();
        let mut axes = Vec::with_capacity(n + 1);
        for (&(lo, hi), &h) in extents.iter().zip(spacings) {
            axes.push(Axis::spanning(lo, hi, h)?);
        }
        axes.push(Axis::spanning(0.0, height, spacings[n])?);
        let grid = UniformGrid::new(axes)?;
        let len = grid.len();
        let base_in = |p: usize| -> bool {
            match base_shape {
                BaseShape::Box => true,
                BaseShape::Ball => {
                    let x = grid.point(p);
                    let r2: f64 = (0..n).map(|a| (x[a] - center[a]).powi(2)).sum();
                    r2 <= radius * radius * (1.0 + 1e-12)
                }
            }
        };
        let inside: Vec<bool> = (0..len).map(base_in).collect();
        let base_rim: Vec<bool> = (0..len)
            .map(|p| {
                inside[p]
                    && (0..n).any(|a| {
                        [true, false]
                            .iter()
                            .any(|&fwd| !matches!(grid.neighbor(p, a, fwd), Some(q) if inside[q]))
                    })
            })
            .collect();
        let top = grid.count(n) - 1;
        let mut bottom = vec![false; len];
        let mut plus = vec![false; len];
        let mut interior = vec![false; len];
        for p in 0..len {
            if !inside[p] {
                continue;
            }
            let k = grid.index_along(p, n);
            if k == 0 {
                bottom[p] = true;
            } else if k == top || base_rim[p] {
                plus[p] = true;
            } else {
                interior[p] = true;
            }
        }
        Ok(CylinderDomain {
            n,
            radius,
            height,
            base_shape,
            center,
            grid,
            inside,
            base_rim,
            bottom,
            plus,
            interior,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    /// All points of the closed cylinder.
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// `λ = 0` points, rim included.
    pub fn bottom(&self) -> &[bool] {
        &self.bottom
    }

    /// Lateral and top boundary, `λ > 0`.
    pub fn plus(&self) -> &[bool] {
        &self.plus
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    /// Points whose base position lies on the rim of the base.
    pub fn base_rim(&self) -> &[bool] {
        &self.base_rim
    }

    /// Unknowns of the variational problem: interior points and bottom points
    /// off the rim. The rim of the bottom is pinned together with `∂⁺`.
    pub fn free(&self) -> Vec<bool> {
        (0..self.grid.len())
            .map(|p| self.interior[p] || (self.bottom[p] && !self.base_rim[p]))
            .collect()
    }

    /// Pinned points: `∂⁺` plus the rim of the bottom.
    pub fn pinned(&self) -> Vec<bool> {
        (0..self.grid.len())
            .map(|p| self.plus[p] || (self.bottom[p] && self.base_rim[p]))
            .collect()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Distance of a base point from the base centre in the norm matching the
    /// base shape (Euclidean for balls, max-norm for boxes).
    pub fn base_radius_of(&self, x: &[f64]) -> f64 {
        let it = (0..self.n).map(|a| x[a] - self.center[a]);
        match self.base_shape {
            BaseShape::Ball => it.map(|d| d * d).sum::<f64>().sqrt(),
            BaseShape::Box => it.fold(0.0, |m, d| m.max(d.abs())),
        }
    }

    /// Region mask of the sub-cylinder of radius `r` and height `r` centred
    /// at `center` (base coordinates), in the shape of this domain's base.
    pub fn sub_cylinder(&self, r: f64, center: &[f64]) -> Vec<bool> {
        let n = self.n;
        let tol = 1e-9 * self.grid.spacing(0);
        (0..self.grid.len())
            .map(|p| {
                if !self.inside[p] {
                    return false;
                }
                let x = self.grid.point(p);
                if x[n] > r + tol {
                    return false;
                }
                match self.base_shape {
                    BaseShape::Ball => {
                        let r2: f64 = (0..n).map(|a| (x[a] - center[a]).powi(2)).sum();
                        r2 <= r * r * (1.0 + 1e-12)
                    }
                    BaseShape::Box => (0..n).all(|a| (x[a] - center[a]).abs() <= r + tol),
                }
            })
            .collect()
    }

    /// Field on this domain sampled from `f(x, λ)`.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> ScalarField {
        ScalarField::from_fn_masked(self.grid.clone(), self.inside.clone(), f)
            .expect("finite samples")
    }

    /// Base trace `v(·, 0)` as a field on the base grid (`n >= 2`).
    pub fn trace(&self, field: &ScalarField) -> Result<ScalarField> {
        field.same_grid(&ScalarField::zeros(self.grid.clone()))?;
        if self.n < 2 {
            return Err(Error::Unsupported(
                "traces of n = 1 cylinders are one-dimensional".into(),
            ));
        }
        let base = UniformGrid::new(self.grid.axes()[..self.n].to_vec())?;
        let kcount = self.grid.count(self.n);
        let mut values = vec![0.0; base.len()];
        let mut mask = vec![false; base.len()];
        for b in 0..base.len() {
            let p = b * kcount;
            values[b] = field.get(p);
            mask[b] = field.mask()[p] && self.inside[p];
        }
        ScalarField::new(base, values, mask)
    }
}

/// The wedge `{0 <= t <= s, s² + t² < R²} x (0, L)` in the `(s, t, λ)`
/// variables of `R^{2m}`, carrying the weight `s^{m-1} t^{m-1}`.
#[derive(Debug, Clone)]
pub struct WedgeDomain {
    pub m: usize,
    pub radius: f64,
    pub height: f64,
    grid: UniformGrid,
    inside: Vec<bool>,
    diagonal: Vec<bool>,
    pinned: Vec<bool>,
    bottom: Vec<bool>,
}

impl WedgeDomain {
    pub fn new(m: usize, radius: f64, height: f64, h: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("m must be at least 1".into()));
        }
        let s_axis = Axis::spanning(0.0, radius, h)?;
        let t_steps = (radius / std::f64::consts::SQRT_2 / h).ceil() as usize + 1;
        let t_axis = Axis::new(0.0, h, t_steps + 1);
        let l_axis = Axis::spanning(0.0, height, h)?;
        let grid = UniformGrid::new(vec![s_axis, t_axis, l_axis])?;
        let len = grid.len();
        let r2 = radius * radius * (1.0 + 1e-12);
        let in_disk = |s: f64, t: f64| s * s + t * t <= r2;
        let mut inside = vec![false; len];
        let mut diagonal = vec![false; len];
        let mut pinned = vec![false; len];
        let mut bottom = vec![false; len];
        let top = grid.count(2) - 1;
        for p in 0..len {
            let idx = grid.unflatten(p);
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let s = grid.coord(0, i);
            let t = grid.coord(1, j);
            if j > i || !in_disk(s, t) {
                continue;
            }
            inside[p] = true;
            diagonal[p] = i == j;
            let s_next = grid.coord(0, i + 1);
            let t_next = grid.coord(1, j + 1);
            let arc = i + 1 >= grid.count(0)
                || j + 1 >= grid.count(1)
                || !in_disk(s_next, t)
                || !in_disk(s, t_next);
            pinned[p] = diagonal[p] || arc || k == top;
            bottom[p] = k == 0;
        }
        Ok(WedgeDomain {
            m,
            radius,
            height,
            grid,
            inside,
            diagonal,
            pinned,
            bottom,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// Points on the Simons cone `s = t`.
    pub fn diagonal(&self) -> &[bool] {
        &self.diagonal
    }

    /// Cone, arc and top points, where the saddle problem imposes `v = 0`.
    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn bottom(&self) -> &[bool] {
        &self.bottom
    }

    pub fn free(&self) -> Vec<bool> {
        (0..self.grid.len())
            .map(|p| self.inside[p] && !self.pinned[p])
            .collect()
    }

    /// Coordinate used when evaluating the weight: the grid value, or the
    /// centre `h/4` of the half dual cell on the degenerate axis.
    #[inline]
    pub fn weight_coord(&self, a: usize, x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            0.25 * self.grid.spacing(a)
        }
    }

    /// `s^{m-1} t^{m-1}` evaluated with [`Self::weight_coord`].
    #[inline]
    pub fn weight_at(&self, s: f64, t: f64) -> f64 {
        if self.m == 1 {
            return 1.0;
        }
        let e = (self.m - 1) as i32;
        (self.weight_coord(0, s) * self.weight_coord(1, t)).powi(e)
    }

    /// Pointwise weight field `s^{m-1} t^{m-1}` (exact values, zero on the
    /// axes when `m >= 2`).
    pub fn weight_field(&self) -> ScalarField {
        let e = self.m as i32 - 1;
        ScalarField::from_fn_masked(self.grid.clone(), self.inside.clone(), |x| {
            if e == 0 {
                1.0
            } else {
                (x[0] * x[1]).powi(e)
            }
        })
        .expect("finite weight")
    }

    /// Total surface measure factor turning wedge integrals into integrals
    /// over the full ball of `R^{2m}`: `2 |S^{m-1}|²`.
    pub fn symmetry_factor(&self) -> f64 {
        let sphere = sphere_area(self.m);
        2.0 * sphere * sphere
    }
}

/// Surface area of the unit sphere `S^{m-1} ⊂ R^m` (`|S^0| = 2`).
pub(crate) fn sphere_area(m: usize) -> f64 {
    use std::f64::consts::PI;
    match m {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        // |S^{m-1}| = 2π/(m-2) |S^{m-3}|
        _ => 2.0 * PI / (m as f64 - 2.0) * sphere_area(m - 2),
    }
}
