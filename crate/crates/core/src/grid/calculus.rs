use rayon::prelude::*;

use super::{ScalarField, UniformGrid};
use crate::error::{Error, Result};
use crate::reduce::{det_sum, CHUNK};

/// Partial derivatives along every axis.
///
/// Central differences where both neighbours are inside the mask, one-sided
/// second-order differences at mask edges, first-order where only one
/// neighbour exists and zero for isolated points.
pub fn gradient(field: &ScalarField) -> Result<Vec<ScalarField>> {
    let grid = field.grid();
    (0..grid.dim())
        .map(|a| {
            if grid.count(a) < 2 {
                return Err(Error::InvalidGrid(format!("axis {a} is degenerate")));
            }
            Ok(partial(field, a))
        })
        .collect()
}

/// Derivative along one axis with the same stencils as [`gradient`].
pub fn partial(field: &ScalarField, a: usize) -> ScalarField {
    let grid = field.grid();
    let v = field.values();
    let m = field.mask();
    let h = grid.spacing(a);
    let inside = |p: Option<usize>| p.filter(|&q| m[q]);
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let p = c * CHUNK + k;
                if !m[p] {
                    continue;
                }
                let fwd = inside(grid.neighbor(p, a, true));
                let bwd = inside(grid.neighbor(p, a, false));
                *o = match (bwd, fwd) {
                    (Some(b), Some(f)) => (v[f] - v[b]) / (2.0 * h),
                    (None, Some(f)) => match inside(grid.neighbor(f, a, true)) {
                        Some(ff) => (-3.0 * v[p] + 4.0 * v[f] - v[ff]) / (2.0 * h),
                        None => (v[f] - v[p]) / h,
                    },
                    (Some(b), None) => match inside(grid.neighbor(b, a, false)) {
                        Some(bb) => (3.0 * v[p] - 4.0 * v[b] + v[bb]) / (2.0 * h),
                        None => (v[p] - v[b]) / h,
                    },
                    (None, None) => 0.0,
                };
            }
        });
    ScalarField::new(grid.clone(), out, m.to_vec()).expect("finite derivative")
}

/// True when every axis neighbour of `p` exists and lies in `mask`.
#[inline]
pub(crate) fn is_interior(grid: &UniformGrid, mask: &[bool], p: usize) -> bool {
    if !mask[p] {
        return false;
    }
    (0..grid.dim()).all(|a| {
        matches!(grid.neighbor(p, a, true), Some(q) if mask[q])
            && matches!(grid.neighbor(p, a, false), Some(q) if mask[q])
    })
}

/// Standard `(2d+1)`-point Laplacian at mask-interior points, zero elsewhere.
pub fn laplacian_residual(field: &ScalarField) -> ScalarField {
    let grid = field.grid();
    let v = field.values();
    let m = field.mask();
    let d = grid.dim();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let p = c * CHUNK + k;
                if !is_interior(grid, m, p) {
                    continue;
                }
                let mut s = 0.0;
                for a in 0..d {
                    let st = grid.stride(a);
                    let h = grid.spacing(a);
                    s += (v[p + st] - 2.0 * v[p] + v[p - st]) / (h * h);
                }
                *o = s;
            }
        });
    ScalarField::new(grid.clone(), out, m.to_vec()).expect("finite residual")
}

/// Per-axis trapezoid factor of point `p` within `region`: `h/2` for every
/// in-region neighbour along the axis.
#[inline]
pub(crate) fn axis_factor(grid: &UniformGrid, region: &[bool], p: usize, a: usize) -> f64 {
    let h = grid.spacing(a);
    let mut c = 0.0;
    if matches!(grid.neighbor(p, a, false), Some(q) if region[q]) {
        c += 0.5 * h;
    }
    if matches!(grid.neighbor(p, a, true), Some(q) if region[q]) {
        c += 0.5 * h;
    }
    c
}

/// Tensor-product trapezoid weights of every point of `region`.
pub fn trapezoid_weights(grid: &UniformGrid, region: &[bool]) -> Vec<f64> {
    let d = grid.dim();
    let mut w = vec![0.0; grid.len()];
    w.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        for (k, o) in chunk.iter_mut().enumerate() {
            let p = c * CHUNK + k;
            if region[p] {
                *o = (0..d).map(|a| axis_factor(grid, region, p, a)).product();
            }
        }
    });
    w
}

/// Result of [`integrate`]; `empty` is set when the region had no points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub empty: bool,
}

/// Trapezoid-type quadrature of `field` over `region` (default: the field
/// mask), optionally multiplied pointwise by `weight`.
pub fn integrate(
    field: &ScalarField,
    region: Option<&[bool]>,
    weight: Option<&ScalarField>,
) -> Result<Integral> {
    let grid = field.grid();
    let region = region.unwrap_or(field.mask());
    if region.len() != grid.len() {
        return Err(Error::InvalidArgument(
            "region length does not match grid".into(),
        ));
    }
    if let Some(p) = (0..grid.len()).find(|&p| region[p] && !field.mask()[p]) {
        return Err(Error::InvalidArgument(format!(
            "integration region leaves the field mask at point {p}"
        )));
    }
    if let Some(w) = weight {
        field.same_grid(w)?;
    }
    if !region.iter().any(|&r| r) {
        log::warn!("integrate: empty region");
        return Ok(Integral {
            value: 0.0,
            empty: true,
        });
    }
    let tw = trapezoid_weights(grid, region);
    let v = field.values();
    let value = match weight {
        Some(w) => {
            let wv = w.values();
            det_sum(grid.len(), |p| {
                if region[p] {
                    tw[p] * v[p] * wv[p]
                } else {
                    0.0
                }
            })
        }
        None => det_sum(grid.len(), |p| if region[p] { tw[p] * v[p] } else { 0.0 }),
    };
    Ok(Integral {
        value,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Axis;
    use super::*;

    fn grid2(lo: [f64; 2], hi: [f64; 2], h: f64) -> UniformGrid {
        UniformGrid::new(vec![
            Axis::spanning(lo[0], hi[0], h).unwrap(),
            Axis::spanning(lo[1], hi[1], h).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = ScalarField::constant(grid2([-1.0, 0.0], [1.0, 1.0], 0.1), 3.5);
        for g in gradient(&f).unwrap() {
            assert_eq!(g.sup_norm(), 0.0);
        }
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let f = ScalarField::from_fn(grid2([-1.0, 0.0], [1.0, 1.0], 0.1), |x| x[0]);
        let g = gradient(&f).unwrap();
        for p in 0..f.grid().len() {
            assert!((g[0].get(p) - 1.0).abs() < 1e-12);
            assert!(g[1].get(p).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_one_sided_at_mask_edge_is_second_order() {
        // Quadratic profile: the one-sided second-order stencil is exact.
        let f = ScalarField::from_fn(grid2([0.0, 0.0], [1.0, 1.0], 0.125), |x| x[0] * x[0] + x[1]);
        let g = gradient(&f).unwrap();
        for p in 0..f.grid().len() {
            let x = f.grid().point(p);
            assert!((g[0].get(p) - 2.0 * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_harmonic_quadratic_vanishes() {
        let f = ScalarField::from_fn(grid2([-1.0, 0.0], [1.0, 1.0], 0.05), |x| {
            x[0] * x[0] - x[1] * x[1]
        });
        assert!(laplacian_residual(&f).sup_norm() < 1e-9);
        let g = ScalarField::from_fn(grid2([-1.0, 0.0], [1.0, 1.0], 0.05), |x| x[0] * x[0]);
        let r = laplacian_residual(&g);
        let grid = g.grid();
        for p in 0..grid.len() {
            if is_interior(grid, g.mask(), p) {
                assert!((r.get(p) - 2.0).abs() < 1e-9);
            } else {
                assert_eq!(r.get(p), 0.0);
            }
        }
    }

    #[test]
    fn integrate_constant_over_rectangle() {
        let f = ScalarField::constant(grid2([-1.0, 0.0], [1.0, 1.0], 0.1), 1.0);
        let i = integrate(&f, None, None).unwrap();
        assert!((i.value - 2.0).abs() < 1e-12);
        assert!(!i.empty);
    }

    #[test]
    fn integrate_disk_area() {
        let grid = grid2([-1.0, -1.0], [1.0, 1.0], 0.01);
        let mask: Vec<bool> = (0..grid.len())
            .map(|p| {
                let x = grid.point(p);
                x[0] * x[0] + x[1] * x[1] <= 1.0
            })
            .collect();
        let f = ScalarField::constant(grid, 1.0).with_mask(mask).unwrap();
        let area = integrate(&f, None, None).unwrap().value;
        assert!(
            (area / std::f64::consts::PI - 1.0).abs() < 0.02,
            "area {area}"
        );
    }

    #[test]
    fn integrate_empty_region_flags() {
        let f = ScalarField::constant(grid2([0.0, 0.0], [1.0, 1.0], 0.5), 1.0);
        let region = vec![false; f.grid().len()];
        let i = integrate(&f, Some(&region), None).unwrap();
        assert!(i.empty);
        assert_eq!(i.value, 0.0);
    }

    #[test]
    fn integrate_rejects_region_outside_mask() {
        let grid = grid2([0.0, 0.0], [1.0, 1.0], 0.5);
        let mut mask = vec![true; grid.len()];
        mask[0] = false;
        let f = ScalarField::constant(grid, 1.0).with_mask(mask).unwrap();
        let region = vec![true; f.grid().len()];
        assert!(integrate(&f, Some(&region), None).is_err());
    }

    fn layer_grid(h: f64) -> ScalarField {
        ScalarField::from_fn(grid2([-2.0, 0.0], [2.0, 2.0], h), |x| {
            crate::layer::sine_layer(x[0], x[1])
        })
    }

    #[test]
    fn layer_gradient_error_is_second_order() {
        let err = |h: f64| {
            let f = layer_grid(h);
            let g = gradient(&f).unwrap();
            (0..f.grid().len())
                .map(|p| {
                    let x = f.grid().point(p);
                    let (gx, gl) = crate::layer::sine_layer_gradient(x[0], x[1]);
                    (g[0].get(p) - gx).abs().max((g[1].get(p) - gl).abs())
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.04), err(0.02));
        let c = e2 / (0.02 * 0.02);
        assert!(e1 / e2 > 3.0 && e1 / e2 < 5.0, "{e1} {e2}");
        assert!(c < 100.0, "C = {c}");
    }

    #[test]
    fn layer_laplacian_residual_converges_at_second_order() {
        let r1 = laplacian_residual(&layer_grid(0.04)).sup_norm();
        let r2 = laplacian_residual(&layer_grid(0.02)).sup_norm();
        assert!(r1 / r2 >= 3.0 && r1 / r2 <= 5.0, "{r1} {r2}");
    }

    #[test]
    fn affine_fields_have_zero_residual() {
        let f = ScalarField::from_fn(grid2([-1.0, 0.0], [1.0, 1.0], 0.1), |x| {
            3.0 * x[0] - 2.0 * x[1] + 0.5
        });
        assert!(laplacian_residual(&f).sup_norm() < 1e-10);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 0.5f64..4.0) {
            let grid = grid2([-1.0, 0.0], [1.0, 1.0], 0.05);
            let f = ScalarField::from_fn(grid.clone(), |x| (k * x[0]).sin() + x[1]);
            let g = ScalarField::from_fn(grid, |x| (k * x[1]).cos() * x[0]);
            let combo = f.axpby(a, &g, b).unwrap();
            let lhs = integrate(&combo, None, None).unwrap().value;
            let rhs = a * integrate(&f, None, None).unwrap().value + b * integrate(&g, None, None).unwrap().value;
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn integrate_is_bit_reproducible_across_thread_counts() {
        let f = ScalarField::from_fn(grid2([-1.0, 0.0], [1.0, 1.0], 0.005), |x| {
            (7.0 * x[0]).sin() * x[1].exp()
        });
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| integrate(&f, None, None).unwrap().value)
        };
        let a = run(1);
        assert_eq!(a.to_bits(), run(3).to_bits());
        assert_eq!(a.to_bits(), run(1).to_bits());
    }
}
