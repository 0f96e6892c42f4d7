//! One-dimensional symmetry diagnostics.
//!
//! For a solution `v` that is monotone along some axis, `φ = ∂_axis v` is a
//! positive stability witness and the quotients `σ_i = ∂_i v / φ` satisfy
//! `div(φ² ∇σ_i) = 0`. A one-dimensional solution has constant `σ_i`; the
//! report measures how far the field is from that.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, partial, BaseShape, CylinderDomain, ScalarField};

/// Witness values at or below this are treated as zero.
pub const PHI_FLOOR: f64 = 1e-8;
/// Fraction of core points allowed to violate monotonicity.
pub const MONOTONE_SLACK: f64 = 0.01;
/// Inner fraction of each base half-width kept in the core.
pub const CORE_BASE_FRACTION: f64 = 0.6;
/// Fraction of the height kept in the core.
pub const CORE_HEIGHT_FRACTION: f64 = 0.8;

/// Core of the cylinder: the inner 60% of each base half-width and the
/// lower 80% of the height, bottom included.
pub fn core_region(domain: &CylinderDomain) -> Vec<bool> {
    let g = domain.grid();
    let n = domain.n;
    let c = domain.center();
    let half: Vec<f64> = (0..n)
        .map(|a| 0.5 * (g.axis(a).end() - g.axis(a).origin))
        .collect();
    let top = CORE_HEIGHT_FRACTION * domain.height * (1.0 + 1e-12);
    (0..g.len())
        .map(|p| {
            if !domain.inside()[p] {
                return false;
            }
            let x = g.point(p);
            if x[n] > top {
                return false;
            }
            match domain.base_shape {
                BaseShape::Box => (0..n)
                    .all(|a| (x[a] - c[a]).abs() <= CORE_BASE_FRACTION * half[a] * (1.0 + 1e-12)),
                BaseShape::Ball => {
                    let r2: f64 = (0..n).map(|a| (x[a] - c[a]).powi(2)).sum();
                    r2.sqrt() <= CORE_BASE_FRACTION * domain.radius * (1.0 + 1e-12)
                }
            }
        })
        .collect()
}

/// `φ = ∂_axis v`, after checking that `v` increases along `axis` on the
/// core.
pub fn stability_witness(
    domain: &CylinderDomain,
    v: &ScalarField,
    axis: usize,
) -> Result<ScalarField> {
    let g = domain.grid();
    if v.grid() != g {
        return Err(Error::GridMismatch);
    }
    if axis >= domain.n {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} is not a base axis"
        )));
    }
    let v = v.clone().with_mask(domain.inside().to_vec())?;
    let phi = partial(&v, axis);
    let core = core_region(domain);
    let mut checked = 0usize;
    let mut bad = 0usize;
    for p in (0..g.len()).filter(|&p| core[p]) {
        checked += 1;
        let step_ok = match g.neighbor(p, axis, true) {
            Some(q) if domain.inside()[q] => v.get(q) - v.get(p) > 0.0,
            _ => true,
        };
        if !step_ok || phi.get(p) <= PHI_FLOOR {
            bad += 1;
        }
    }
    let fraction = if checked == 0 {
        1.0
    } else {
        bad as f64 / checked as f64
    };
    if fraction > MONOTONE_SLACK {
        return Err(Error::NotMonotone {
            axis,
            violation_fraction: fraction,
        });
    }
    Ok(phi)
}

/// Diagnostics of [`liouville_check`]. Vectors are indexed by base axis.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    /// `σ_i`, masked to the points with `φ > PHI_FLOOR`.
    pub sigma: Vec<ScalarField>,
    /// `max - min` of `σ_i` over the core.
    pub osc: Vec<f64>,
    pub mean_abs: Vec<f64>,
    /// Sup of `|div(φ² ∇σ_i)|` over core points whose neighbours carry `σ`.
    pub div_residual: Vec<f64>,
    /// Sup of `|σ_i ∂_λ σ_i|` on the core bottom.
    pub bottom_flux: Vec<f64>,
    /// `(r, ∫_{C_r} (φ σ_i)² / (r² log r))` for `r = R, R/2, ...`, `r >= 2`.
    pub growth: Vec<(f64, Vec<f64>)>,
    /// Largest over smallest growth ratio, per axis.
    pub growth_spread: Vec<f64>,
    pub direction: Option<Vec<f64>>,
    pub deviation: Option<f64>,
    /// Core points where the witness is not positive.
    pub phi_floor_violations: usize,
    pub h: f64,
    /// All oscillations at most `10 h`.
    pub one_d: bool,
}

impl SymmetryReport {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(s, "h={}", self.h);
        let _ = writeln!(s, "osc={}", join(&self.osc));
        let _ = writeln!(s, "mean_abs_sigma={}", join(&self.mean_abs));
        let _ = writeln!(s, "div_residual={}", join(&self.div_residual));
        let _ = writeln!(s, "bottom_flux={}", join(&self.bottom_flux));
        for (r, ratios) in &self.growth {
            let _ = writeln!(s, "growth_r{}={}", r, join(ratios));
        }
        let _ = writeln!(s, "growth_spread={}", join(&self.growth_spread));
        if let Some(a) = &self.direction {
            let _ = writeln!(s, "direction={}", join(a));
        }
        if let Some(d) = self.deviation {
            let _ = writeln!(s, "deviation={d}");
        }
        let _ = writeln!(s, "phi_floor_violations={}", self.phi_floor_violations);
        let _ = writeln!(s, "one_d={}", self.one_d);
        s
    }
}

pub fn liouville_check(
    domain: &CylinderDomain,
    v: &ScalarField,
    phi: &ScalarField,
) -> Result<SymmetryReport> {
    let g = domain.grid();
    if v.grid() != g || phi.grid() != g {
        return Err(Error::GridMismatch);
    }
    let n = domain.n;
    let d = g.dim();
    let core = core_region(domain);
    let v = v.clone().with_mask(domain.inside().to_vec())?;
    let defined: Vec<bool> = (0..g.len())
        .map(|p| domain.inside()[p] && phi.get(p) > PHI_FLOOR)
        .collect();
    let phi_floor_violations = (0..g.len()).filter(|&p| core[p] && !defined[p]).count();
    let h = (0..n).map(|a| g.spacing(a)).fold(0.0, f64::max);
    let hl = g.spacing(n);
    let klen = g.count(n);

    let mut sigma = Vec::with_capacity(n);
    let mut osc = Vec::with_capacity(n);
    let mut mean_abs = Vec::with_capacity(n);
    let mut div_residual = Vec::with_capacity(n);
    let mut bottom_flux = Vec::with_capacity(n);
    let mut squares = Vec::with_capacity(n);
    for i in 0..n {
        let di = partial(&v, i);
        let vals: Vec<f64> = (0..g.len())
            .map(|p| {
                if defined[p] {
                    di.get(p) / phi.get(p)
                } else {
                    0.0
                }
            })
            .collect();
        let s = ScalarField::new(g.clone(), vals, defined.clone())?;
        let core_vals: Vec<f64> = (0..g.len())
            .filter(|&p| core[p] && defined[p])
            .map(|p| s.get(p))
            .collect();
        let (lo, hi) = core_vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        osc.push(if core_vals.is_empty() {
            f64::INFINITY
        } else {
            hi - lo
        });
        mean_abs
            .push(core_vals.iter().map(|x| x.abs()).sum::<f64>() / core_vals.len().max(1) as f64);

        let mut res: f64 = 0.0;
        for p in (0..g.len()).filter(|&p| core[p] && defined[p]) {
            let mut acc = 0.0;
            let mut complete = true;
            for a in 0..d {
                let ha = g.spacing(a);
                match (g.neighbor(p, a, true), g.neighbor(p, a, false)) {
                    (Some(f), Some(b)) if defined[f] && defined[b] => {
                        let pf = 0.5 * (phi.get(p).powi(2) + phi.get(f).powi(2));
                        let pb = 0.5 * (phi.get(p).powi(2) + phi.get(b).powi(2));
                        acc +=
                            (pf * (s.get(f) - s.get(p)) - pb * (s.get(p) - s.get(b))) / (ha * ha);
                    }
                    _ => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                res = res.max(acc.abs());
            }
        }
        div_residual.push(res);

        let mut flux: f64 = 0.0;
        for p in (0..g.len())
            .step_by(klen)
            .filter(|&p| core[p] && defined[p])
        {
            if defined[p + 1] {
                flux = flux.max((s.get(p) * (s.get(p + 1) - s.get(p)) / hl).abs());
            }
        }
        bottom_flux.push(flux);

        let sq: Vec<f64> = (0..g.len())
            .map(|p| {
                if defined[p] {
                    (phi.get(p) * s.get(p)).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        squares.push(ScalarField::new(g.clone(), sq, defined.clone())?);
        sigma.push(s);
    }

    let mut growth = Vec::new();
    let mut r = domain.radius.min(domain.height);
    while r >= 2.0 && r >= 4.0 * h {
        let region = domain.sub_cylinder(r, domain.center());
        let ratios = squares
            .iter()
            .map(|sq| Ok(integrate(sq, Some(&region), None)?.value / (r * r * r.ln())))
            .collect::<Result<Vec<f64>>>()?;
        growth.push((r, ratios));
        r /= 2.0;
    }
    growth.reverse();
    let growth_spread = (0..n)
        .map(|i| {
            let vals: Vec<f64> = growth
                .iter()
                .map(|(_, v)| v[i])
                .filter(|x| *x > 0.0)
                .collect();
            if vals.is_empty() {
                1.0
            } else {
                vals.iter().copied().fold(0.0, f64::max)
                    / vals.iter().copied().fold(f64::INFINITY, f64::min)
            }
        })
        .collect();

    let (direction, deviation) = if n >= 2 {
        match one_d_direction(&domain.trace(&v)?) {
            Ok((a, dev)) => (Some(a), Some(dev)),
            Err(Error::UndefinedDirection) => (None, None),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };
    let one_d = osc.iter().all(|&o| o <= 10.0 * h);
    Ok(SymmetryReport {
        sigma,
        osc,
        mean_abs,
        div_residual,
        bottom_flux,
        growth,
        growth_spread,
        direction,
        deviation,
        phi_floor_violations,
        h,
        one_d,
    })
}

/// Direction `a` of a trace and the largest angle between `∇u` and `a` on
/// the core (inner 60% of the grid box). `a` is the normalised mean
/// gradient, or the principal axis of `Σ ∇u ∇uᵀ` when the mean cancels.
pub fn one_d_direction(u: &ScalarField) -> Result<(Vec<f64>, f64)> {
    let g = u.grid();
    let n = g.dim();
    let grads = gradient(u)?;
    let core: Vec<usize> = (0..g.len())
        .filter(|&p| {
            u.mask()[p] && {
                let x = g.point(p);
                (0..n).all(|a| {
                    let ax = g.axis(a);
                    let mid = 0.5 * (ax.origin + ax.end());
                    (x[a] - mid).abs()
                        <= CORE_BASE_FRACTION * 0.5 * (ax.end() - ax.origin) * (1.0 + 1e-12)
                })
            }
        })
        .collect();
    let grad_at = |p: usize| -> Vec<f64> { grads.iter().map(|c| c.get(p)).collect() };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let active: Vec<usize> = core
        .iter()
        .copied()
        .filter(|&p| norm(&grad_at(p)) > 1e-6)
        .collect();
    if core.is_empty() || 2 * active.len() < core.len() {
        return Err(Error::UndefinedDirection);
    }
    let mut mean = vec![0.0; n];
    let mut mean_norm = 0.0;
    let mut moment = vec![vec![0.0; n]; n];
    for &p in &active {
        let gp = grad_at(p);
        mean_norm += norm(&gp);
        for a in 0..n {
            mean[a] += gp[a];
            for b in 0..n {
                moment[a][b] += gp[a] * gp[b];
            }
        }
    }
    let a = if norm(&mean) >= 1e-3 * mean_norm {
        let m = norm(&mean);
        mean.iter().map(|x| x / m).collect::<Vec<_>>()
    } else {
        principal_axis(&moment)
    };
    let deviation = active
        .iter()
        .map(|&p| {
            let gp = grad_at(p);
            let c = gp.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>() / norm(&gp);
            c.clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max);
    Ok((a, deviation))
}

/// Leading eigenvector of a symmetric positive semidefinite matrix.
fn principal_axis(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    for _ in 0..500 {
        let y: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[i][j] * x[j]).sum())
            .collect();
        let len = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            break;
        }
        x = y.iter().map(|v| v / len).collect();
    }
    let len = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter().map(|v| v / len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, UniformGrid};
    use crate::layer::{sine_layer, tilted_sine_layer};
    use proptest::prelude::*;

    const E: [f64; 2] = [0.6, 0.8];

    fn tilted(h: f64) -> (CylinderDomain, ScalarField) {
        let d = CylinderDomain::new(2, 2.0, h, BaseShape::Box).unwrap();
        let v = d.sample(|x| tilted_sine_layer(x, &E, 0.0));
        (d, v)
    }

    #[test]
    fn witness_of_embedded_layer_is_positive() {
        let (d, v) = tilted(0.1);
        let phi = stability_witness(&d, &v, 1).unwrap();
        let core = core_region(&d);
        assert!((0..phi.grid().len())
            .filter(|&p| core[p])
            .all(|p| phi.get(p) > 0.0));
    }

    #[test]
    fn constant_field_has_no_witness() {
        let (d, _) = tilted(0.25);
        let c = d.sample(|_| 0.5);
        assert!(matches!(
            stability_witness(&d, &c, 0),
            Err(Error::NotMonotone { axis: 0, .. })
        ));
    }

    #[test]
    fn witness_of_explicit_layer_peaks_at_the_interface() {
        let d = CylinderDomain::new(1, 4.0, 0.05, BaseShape::Box).unwrap();
        let v = d.sample(|x| sine_layer(x[0], x[1]));
        let phi = stability_witness(&d, &v, 0).unwrap();
        let g = d.grid();
        let klen = g.count(1);
        let bottom: Vec<(f64, f64)> = (0..g.len())
            .step_by(klen)
            .map(|p| (g.point(p)[0], phi.get(p)))
            .collect();
        let (xmax, _) =
            bottom.iter().copied().fold(
                (0.0, f64::NEG_INFINITY),
                |b, c| if c.1 > b.1 { c } else { b },
            );
        assert_eq!(xmax, 0.0);
        for &(x, p) in &bottom {
            if x.abs() < 3.0 {
                let exact = 2.0 / (1.0 + (std::f64::consts::PI * x).powi(2));
                assert!((p - exact).abs() < 0.05 * 2.0, "{x}: {p} vs {exact}");
            }
        }
    }

    #[test]
    fn quotients_are_exact_on_a_matched_anisotropic_grid() {
        // h_1 e_1 = h_2 e_2: central differences sample the profile at the same
        // offsets along both axes.
        let h = 0.02;
        let d =
            CylinderDomain::with_spacings(&[(-2.0, 2.0), (-2.0, 2.0)], 1.0, &[4.0 * h / 3.0, h, h])
                .unwrap();
        let v = d.sample(|x| tilted_sine_layer(x, &E, 0.0));
        let phi = stability_witness(&d, &v, 1).unwrap();
        let rep = liouville_check(&d, &v, &phi).unwrap();
        assert!(rep.osc[0] <= 1e-6 && rep.osc[1] <= 1e-12, "{:?}", rep.osc);
        assert!((rep.mean_abs[0] - 0.75).abs() < 1e-9);
        let a = rep.direction.unwrap();
        assert!((a[0] - 0.6).abs() < 1e-9 && (a[1] - 0.8).abs() < 1e-9);
        assert!(rep.deviation.unwrap() <= 1e-6);
        assert!(rep.one_d);
    }

    #[test]
    fn embedded_layer_is_one_dimensional() {
        let (d, v) = tilted(0.05);
        let phi = stability_witness(&d, &v, 1).unwrap();
        let rep = liouville_check(&d, &v, &phi).unwrap();
        assert!(rep.osc.iter().all(|&o| o <= 10.0 * 0.05), "{:?}", rep.osc);
        assert!(rep.one_d);
        assert!(rep.bottom_flux.iter().all(|&f| f <= 10.0 * 0.05));
        assert_eq!(rep.phi_floor_violations, 0);
        let a = rep.direction.clone().unwrap();
        let angle = (a[0] * E[0] + a[1] * E[1]).clamp(-1.0, 1.0).acos();
        assert!(angle < 1e-3);
        assert!(rep.report().contains("one_d=true"));
    }

    #[test]
    fn radial_bump_is_flagged() {
        let (d, _) = tilted(0.05);
        let bump = d.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp() / (1.0 + x[2]));
        let phi = d.sample(|_| 1.0);
        let rep = liouville_check(&d, &bump, &phi).unwrap();
        assert!(!rep.one_d);
        assert!(rep.osc.iter().all(|&o| o > 0.5));
        assert!(rep.deviation.unwrap() > 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn relative_oscillation_ignores_witness_scale(c in 0.1f64..10.0) {
            let (d, v) = tilted(0.1);
            let phi = stability_witness(&d, &v, 1).unwrap();
            let a = liouville_check(&d, &v, &phi).unwrap();
            let b = liouville_check(&d, &v, &phi.scale(c)).unwrap();
            for i in 0..2 {
                let ra = a.osc[i] / a.mean_abs[i];
                let rb = b.osc[i] / b.mean_abs[i];
                prop_assert!((ra - rb).abs() <= 1e-9 * ra + 1e-12);
            }
        }

        #[test]
        fn embedded_profiles_at_rational_angles(p in 1u32..5, q in 1u32..5, w in 0.5f64..2.0) {
            let len = ((p * p + q * q) as f64).sqrt();
            let e = [p as f64 / len, q as f64 / len];
            let h = 0.1;
            let d = CylinderDomain::new(2, 2.0, h, BaseShape::Box).unwrap();
            let v = d.sample(|x| ((e[0] * x[0] + e[1] * x[1]) / w).tanh());
            let phi = stability_witness(&d, &v, 1).unwrap();
            let rep = liouville_check(&d, &v, &phi).unwrap();
            prop_assert!(rep.osc.iter().all(|&o| o <= 10.0 * h), "{:?}", rep.osc);
        }
    }

    #[test]
    fn direction_of_traces() {
        let h = 0.02;
        let matched = UniformGrid::new(vec![
            Axis::spanning(-2.0, 2.0, 4.0 * h / 3.0).unwrap(),
            Axis::spanning(-2.0, 2.0, h).unwrap(),
        ])
        .unwrap();
        let u = ScalarField::from_fn(matched, |x| (E[0] * x[0] + E[1] * x[1]).tanh());
        let (a, dev) = one_d_direction(&u).unwrap();
        assert!((a[0] - 0.6).abs() < 1e-9 && (a[1] - 0.8).abs() < 1e-9);
        assert!(dev <= 1e-6);
        let g = UniformGrid::new(vec![Axis::spanning(-2.0, 2.0, h).unwrap(); 2]).unwrap();
        let saddle = ScalarField::from_fn(g.clone(), |x| (x[0]).tanh() * (x[1]).tanh());
        assert!(one_d_direction(&saddle).unwrap().1 > 1.0);
        let flat = ScalarField::constant(g, 1.0);
        assert!(matches!(
            one_d_direction(&flat),
            Err(Error::UndefinedDirection)
        ));
    }

    #[test]
    fn growth_ratios_are_reported_for_the_layer() {
        let d = CylinderDomain::new(2, 16.0, 0.5, BaseShape::Box).unwrap();
        let v = d.sample(|x| tilted_sine_layer(x, &E, 0.0));
        let phi = stability_witness(&d, &v, 1).unwrap();
        let rep = liouville_check(&d, &v, &phi).unwrap();
        let radii: Vec<f64> = rep.growth.iter().map(|(r, _)| *r).collect();
        assert_eq!(radii, vec![2.0, 4.0, 8.0, 16.0]);
        // A layer has ∫_{C_r} |∇v|² ~ r log r, so the quotient by r² log r decays.
        for i in 0..2 {
            let first = rep.growth[0].1[i];
            assert!(rep
                .growth
                .iter()
                .all(|(_, v)| v[i].is_finite() && v[i] <= first));
        }
    }
}
