//! `H^{1/2}` norms of traces by direct double-sum quadrature.
//!
//! A [`TraceDomain`] is a cloud of cell centres with cell measures, living
//! either on a flat set `Q_1 = (-1, 1)^n` or on the boundary of a box
//! cylinder. The squared seminorm
//! `∫∫ |w(z) - w(z̄)|² / |z - z̄|^{k+1}` (with `k` the dimension of the set)
//! is summed over all ordered pairs of distinct cells using ambient chord
//! distances.

use log::warn;
use rayon::prelude::*;

use crate::energy::{dirichlet_energy, fit_two_term, LinearFit};
use crate::error::{Error, Result};
use crate::extension::dirichlet_solve;
use crate::grid::{Axis, BaseShape, CylinderDomain, ScalarField, UniformGrid};
use crate::reduce::pairwise_sum;

/// Flat piece of a trace domain: `origin + s e1 + t e2` for
/// `(s, t) ∈ [0, len1] x [0, len2]`.
struct Facet {
    origin: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    len: [f64; 2],
    /// Negative side of the interface.
    negative: bool,
}

/// Discretised set `A` with a marked interface `Γ`.
#[derive(Debug, Clone)]
pub struct TraceDomain {
    pub name: String,
    /// Dimension `k` of the set.
    pub dim: usize,
    pub h: f64,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Ambient distance to `Γ`.
    pub dist: Vec<f64>,
    /// Distance carrying the side of `Γ`; `None` when `Γ` has one side.
    pub signed: Option<Vec<f64>>,
    /// Index pairs of cells adjacent within a facet.
    pub neighbors: Vec<(usize, usize)>,
}

fn cells(len: f64, h: f64) -> Result<usize> {
    let m = (len / h).round();
    if m < 2.0 || ((len / h) - m).abs() > 1e-6 * m {
        return Err(Error::InvalidGrid(format!(
            "length {len} is not a multiple of h = {h} with at least 2 cells"
        )));
    }
    Ok(m as usize)
}

impl TraceDomain {
    fn from_facets(
        name: &str,
        dim: usize,
        h: f64,
        facets: &[Facet],
        dist_of: impl Fn(&[f64; 3]) -> f64,
    ) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut signed = Vec::new();
        let mut neighbors = Vec::new();
        for f in facets {
            let m1 = cells(f.len[0], h)?;
            let m2 = if dim == 2 { cells(f.len[1], h)? } else { 1 };
            let (h1, h2) = (
                f.len[0] / m1 as f64,
                if dim == 2 { f.len[1] / m2 as f64 } else { 1.0 },
            );
            let start = points.len();
            for i in 0..m1 {
                for j in 0..m2 {
                    let s = (i as f64 + 0.5) * h1;
                    let t = if dim == 2 { (j as f64 + 0.5) * h2 } else { 0.0 };
                    let z = [0, 1, 2].map(|c| f.origin[c] + s * f.e1[c] + t * f.e2[c]);
                    let d = dist_of(&z);
                    points.push(z);
                    weights.push(h1 * h2);
                    signed.push(if f.negative { -d } else { d });
                    let p = start + i * m2 + j;
                    if i + 1 < m1 {
                        neighbors.push((p, p + m2));
                    }
                    if j + 1 < m2 {
                        neighbors.push((p, p + 1));
                    }
                }
            }
        }
        let dist = signed.iter().map(|d: &f64| d.abs()).collect();
        Ok(TraceDomain {
            name: name.to_string(),
            dim,
            h,
            points,
            weights,
            dist,
            signed: Some(signed),
            neighbors,
        })
    }

    /// `Q_1 = (-1, 1)^n`, `n ∈ {1, 2}`, with `Γ = {x_n = 0}`.
    pub fn cube(n: usize, h: f64) -> Result<Self> {
        let (e1, e2) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let facets = |origin: [f64; 3], negative: bool| Facet {
            origin,
            e1,
            e2,
            len: [if n == 1 { 1.0 } else { 2.0 }, 1.0],
            negative,
        };
        match n {
            1 => Self::from_facets(
                "Q_1 in R^1",
                1,
                h,
                &[
                    facets([-1.0, 0.0, 0.0], true),
                    facets([0.0, 0.0, 0.0], false),
                ],
                |z| z[0].abs(),
            ),
            2 => Self::from_facets(
                "Q_1 in R^2",
                2,
                h,
                &[
                    facets([-1.0, -1.0, 0.0], true),
                    facets([-1.0, 0.0, 0.0], false),
                ],
                |z| z[1].abs(),
            ),
            _ => Err(Error::Unsupported(format!("Q_1 in dimension {n}"))),
        }
    }

    /// Boundary of the box cylinder `[-r, r]^n x [0, height]`, `n ∈ {1, 2}`,
    /// with `Γ` the rim of the bottom; the bottom lies on the negative side.
    pub fn cylinder_boundary(n: usize, r: f64, height: f64, h: f64) -> Result<Self> {
        let z0 = [0.0; 3];
        match n {
            1 => {
                let facets = [
                    Facet {
                        origin: [-r, 0.0, 0.0],
                        e1: [1.0, 0.0, 0.0],
                        e2: z0,
                        len: [2.0 * r, 0.0],
                        negative: true,
                    },
                    Facet {
                        origin: [r, 0.0, 0.0],
                        e1: [0.0, 1.0, 0.0],
                        e2: z0,
                        len: [height, 0.0],
                        negative: false,
                    },
                    Facet {
                        origin: [-r, 0.0, 0.0],
                        e1: [0.0, 1.0, 0.0],
                        e2: z0,
                        len: [height, 0.0],
                        negative: false,
                    },
                    Facet {
                        origin: [-r, height, 0.0],
                        e1: [1.0, 0.0, 0.0],
                        e2: z0,
                        len: [2.0 * r, 0.0],
                        negative: false,
                    },
                ];
                Self::from_facets("boundary of C_1 (n = 1)", 1, h, &facets, |z| {
                    let dx = r - z[0].abs();
                    dx.hypot(z[1])
                })
            }
            2 => {
                let (ex, ey, el) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
                let facets = [
                    Facet {
                        origin: [-r, -r, 0.0],
                        e1: ex,
                        e2: ey,
                        len: [2.0 * r, 2.0 * r],
                        negative: true,
                    },
                    Facet {
                        origin: [-r, -r, height],
                        e1: ex,
                        e2: ey,
                        len: [2.0 * r, 2.0 * r],
                        negative: false,
                    },
                    Facet {
                        origin: [-r, -r, 0.0],
                        e1: ex,
                        e2: el,
                        len: [2.0 * r, height],
                        negative: false,
                    },
                    Facet {
                        origin: [-r, r, 0.0],
                        e1: ex,
                        e2: el,
                        len: [2.0 * r, height],
                        negative: false,
                    },
                    Facet {
                        origin: [-r, -r, 0.0],
                        e1: ey,
                        e2: el,
                        len: [2.0 * r, height],
                        negative: false,
                    },
                    Facet {
                        origin: [r, -r, 0.0],
                        e1: ey,
                        e2: el,
                        len: [2.0 * r, height],
                        negative: false,
                    },
                ];
                Self::from_facets("boundary of C_1 (n = 2, box base)", 2, h, &facets, |z| {
                    // Distance to the boundary curve of the bottom square.
                    let (ax, ay) = (z[0].abs(), z[1].abs());
                    let planar = if ax <= r && ay <= r {
                        r - ax.max(ay)
                    } else {
                        (ax - r).max(0.0).hypot((ay - r).max(0.0))
                    };
                    planar.hypot(z[2])
                })
            }
            _ => Err(Error::Unsupported(format!("cylinder boundary for n = {n}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total measure of the set.
    pub fn measure(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Values of `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
        self.points.iter().map(f).collect()
    }
}

/// Trace values with the amplitude bound `c0` and profile width `eps`.
#[derive(Debug, Clone)]
pub struct TraceFunction {
    pub values: Vec<f64>,
    pub c0: f64,
    pub eps: f64,
}

impl TraceFunction {
    /// Checks `|w| ≤ c0` and, on adjacent cells, the difference quotient
    /// bound `c0 min{1/ε, 1/dist(·, Γ)} (1 + 3h)`.
    pub fn satisfies_bounds(&self, domain: &TraceDomain) -> bool {
        let tol = 1e-12 * self.c0.max(1.0);
        if self.values.iter().any(|v| v.abs() > self.c0 + tol) {
            return false;
        }
        domain.neighbors.iter().all(|&(p, q)| {
            let dz: f64 = (0..3)
                .map(|c| (domain.points[p][c] - domain.points[q][c]).powi(2))
                .sum::<f64>()
                .sqrt();
            let quotient = (self.values[p] - self.values[q]).abs() / dz;
            let dmin = domain.dist[p].min(domain.dist[q]);
            let bound = self.c0 * (1.0 / self.eps).min(1.0 / dmin) * (1.0 + 3.0 * domain.h);
            quotient <= bound + tol
        })
    }
}

/// `clamp(d_Γ/ε, -1, 1)` with the signed distance, or `clamp(d_Γ/ε, 0, 1)`
/// when `Γ` has one side.
pub fn ramp_profile(domain: &TraceDomain, eps: f64) -> Result<TraceFunction> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "ε = {eps} must lie in (0, 1/2)"
        )));
    }
    let values = match &domain.signed {
        Some(s) => s.iter().map(|d| (d / eps).clamp(-1.0, 1.0)).collect(),
        None => domain
            .dist
            .iter()
            .map(|d| (d / eps).clamp(0.0, 1.0))
            .collect(),
    };
    Ok(TraceFunction {
        values,
        c0: 1.0,
        eps,
    })
}

/// Squared seminorm by the cell-centre double sum; pairs closer than `h/2`
/// are skipped.
pub fn h_half_seminorm(domain: &TraceDomain, w: &[f64]) -> Result<f64> {
    if w.len() != domain.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values for {} trace points",
            w.len(),
            domain.len()
        )));
    }
    let expo = (domain.dim + 1) as f64 / 2.0;
    let cut2 = 0.25 * domain.h * domain.h;
    let pts = &domain.points;
    let wt = &domain.weights;
    let rows: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let zi = pts[i];
            let mut s = 0.0;
            for j in 0..pts.len() {
                let d2 = (zi[0] - pts[j][0]).powi(2)
                    + (zi[1] - pts[j][1]).powi(2)
                    + (zi[2] - pts[j][2]).powi(2);
                if d2 < cut2 {
                    continue;
                }
                let diff = w[i] - w[j];
                if diff != 0.0 {
                    s += wt[j] * diff * diff / d2.powf(expo);
                }
            }
            wt[i] * s
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

/// `∫ w²`.
pub fn l2_squared(domain: &TraceDomain, w: &[f64]) -> f64 {
    let terms: Vec<f64> = w
        .iter()
        .zip(&domain.weights)
        .map(|(v, a)| a * v * v)
        .collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRow {
    pub eps: f64,
    pub l2: f64,
    pub seminorm: f64,
    pub total: f64,
}

/// Fit of the full squared norm against `|log ε|`.
#[derive(Debug, Clone)]
pub struct LogBoundReport {
    pub rows: Vec<NormRow>,
    /// Values of `ε` below `4h`, left out.
    pub dropped: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogBoundReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("eps,l2_part,seminorm,total\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.eps, r.l2, r.seminorm, r.total));
        }
        s
    }

    pub fn report(&self) -> String {
        format!(
            "model=s*|log(eps)|+b\ns={}\nb={}\nr_squared={}\ndropped={}\n",
            self.slope,
            self.intercept,
            self.r_squared,
            self.dropped
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// [`log_bound_experiment_with`] for the ramp profiles.
pub fn log_bound_experiment(domain: &TraceDomain, eps: &[f64]) -> Result<LogBoundReport> {
    log_bound_experiment_with(domain, eps, |d, e| Ok(ramp_profile(d, e)?.values))
}

/// Full squared norm of `profile(ε)` for each `ε` and the fit
/// `s |log ε| + b`.
pub fn log_bound_experiment_with(
    domain: &TraceDomain,
    eps: &[f64],
    profile: impl Fn(&TraceDomain, f64) -> Result<Vec<f64>>,
) -> Result<LogBoundReport> {
    if eps.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
        return Err(Error::InvalidArgument(
            "every ε must lie in (0, 1/2)".into(),
        ));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "ε values must decrease strictly".into(),
        ));
    }
    let (kept, dropped): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .partition(|&&e| e >= 4.0 * domain.h * (1.0 - 1e-12));
    if !dropped.is_empty() {
        warn!(
            "dropping under-resolved ε values {dropped:?} (need ε >= 4h = {})",
            4.0 * domain.h
        );
    }
    if kept.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 resolvable ε values, got {}",
            kept.len()
        )));
    }
    let rows = kept
        .iter()
        .map(|&e| {
            let w = profile(domain, e)?;
            let l2 = l2_squared(domain, &w);
            let seminorm = h_half_seminorm(domain, &w)?;
            Ok(NormRow {
                eps: e,
                l2,
                seminorm,
                total: l2 + seminorm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln().abs()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.total).collect();
    let LinearFit {
        a, b, r_squared, ..
    } = fit_two_term(&x, &vec![1.0; x.len()], &y)?;
    Ok(LogBoundReport {
        rows,
        dropped,
        slope: a,
        intercept: b,
        r_squared,
    })
}

/// `∫|∇w̄|²` of the discrete harmonic extension against the squared
/// `H^{1/2}` norm of its boundary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionRatio {
    pub dirichlet: f64,
    pub l2: f64,
    pub seminorm: f64,
    pub ratio: f64,
}

/// Solves the Dirichlet problem with the boundary values of `boundary` on a
/// box cylinder and compares `∫|∇w̄|²` with `‖w‖²_{H^{1/2}(∂Ω)}`. The trace
/// is sampled at facet cell centres by linear interpolation between
/// boundary nodes.
pub fn extension_inequality_check(
    domain: &CylinderDomain,
    boundary: &ScalarField,
) -> Result<ExtensionRatio> {
    if domain.base_shape != BaseShape::Box || domain.n > 2 {
        return Err(Error::Unsupported(
            "extension inequality needs a box cylinder with n <= 2".into(),
        ));
    }
    let g = domain.grid();
    let c = domain.center();
    if c.iter().any(|&x| x != 0.0)
        || (0..domain.n).any(|a| (g.axis(a).end() - domain.radius).abs() > 1e-9)
    {
        return Err(Error::Unsupported(
            "extension inequality needs the centred cube base [-R, R]^n".into(),
        ));
    }
    let h = g.spacing(0);
    let sol = dirichlet_solve(domain, boundary)?;
    let dirichlet = 2.0 * dirichlet_energy(domain, &sol.field)?;
    let trace = TraceDomain::cylinder_boundary(domain.n, domain.radius, domain.height, h)?;
    let w: Vec<f64> = trace
        .points
        .iter()
        .map(|z| {
            let mut q = [0.0; 4];
            q[..=domain.n].copy_from_slice(&z[..=domain.n]);
            boundary.interpolate(&q[..=domain.n])
        })
        .collect();
    let l2 = l2_squared(&trace, &w);
    let seminorm = h_half_seminorm(&trace, &w)?;
    let norm = l2 + seminorm;
    let ratio = if dirichlet == 0.0 {
        0.0
    } else if norm > 0.0 {
        dirichlet / norm
    } else {
        f64::INFINITY
    };
    Ok(ExtensionRatio {
        dirichlet,
        l2,
        seminorm,
        ratio,
    })
}

/// The same nodal values on `C_1`: the grid of `domain` scaled by `1/R`.
pub fn rescale_to_unit(
    domain: &CylinderDomain,
    v: &ScalarField,
) -> Result<(CylinderDomain, ScalarField)> {
    let r = domain.radius;
    let g = domain.grid();
    let h = g.spacing(0) / r;
    let unit = CylinderDomain::with_height(domain.n, 1.0, domain.height / r, h, domain.base_shape)?;
    if unit.grid().len() != g.len() {
        return Err(Error::GridMismatch);
    }
    let axes: Vec<Axis> = g
        .axes()
        .iter()
        .map(|a| Axis::new(a.origin / r, a.spacing / r, a.count))
        .collect();
    debug_assert_eq!(UniformGrid::new(axes).map(|x| x.len()).ok(), Some(g.len()));
    let field = ScalarField::new(unit.grid().clone(), v.values().to_vec(), v.mask().to_vec())?;
    Ok((unit, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::build_comparison;
    use crate::layer::sine_layer;
    use proptest::prelude::*;

    #[test]
    fn facet_measures_add_up() {
        assert!((TraceDomain::cube(1, 0.05).unwrap().measure() - 2.0).abs() < 1e-12);
        assert!((TraceDomain::cube(2, 0.1).unwrap().measure() - 4.0).abs() < 1e-12);
        assert!(
            (TraceDomain::cylinder_boundary(1, 1.0, 1.0, 0.05)
                .unwrap()
                .measure()
                - 6.0)
                .abs()
                < 1e-12
        );
        assert!(
            (TraceDomain::cylinder_boundary(2, 1.0, 1.0, 0.25)
                .unwrap()
                .measure()
                - 16.0)
                .abs()
                < 1e-12
        );
        let d = TraceDomain::cylinder_boundary(2, 1.0, 1.0, 0.25).unwrap();
        assert!(d.dist.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn seminorm_of_constants_and_identity() {
        let d = TraceDomain::cube(1, 0.01).unwrap();
        assert_eq!(h_half_seminorm(&d, &vec![0.3; d.len()]).unwrap(), 0.0);
        let x = d.sample(|z| z[0]);
        let s = h_half_seminorm(&d, &x).unwrap();
        assert!((s / 4.0 - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn ramp_values_and_bounds() {
        let d = TraceDomain::cube(1, 0.01).unwrap();
        assert!(ramp_profile(&d, 1.0).is_err());
        assert!(ramp_profile(&d, 0.5).is_err());
        let r = ramp_profile(&d, 0.25).unwrap();
        let first = r.values[0];
        let last = *r.values.last().unwrap();
        assert_eq!((first, last), (-1.0, 1.0));
        assert!(r.satisfies_bounds(&d));
        let c = TraceDomain::cylinder_boundary(1, 1.0, 1.0, 0.02).unwrap();
        let r = ramp_profile(&c, 0.2).unwrap();
        for (z, v) in c.points.iter().zip(&r.values) {
            if (z[1] - 1.0).abs() < 0.05 {
                assert_eq!(*v, 1.0);
            }
        }
        assert!(r.satisfies_bounds(&c));
    }

    #[test]
    fn ramp_slope_is_one_over_eps_inside_the_layer() {
        let d = TraceDomain::cube(1, 0.01).unwrap();
        let eps = 0.125;
        let r = ramp_profile(&d, eps).unwrap();
        for &(p, q) in &d.neighbors {
            let slope = (r.values[q] - r.values[p]) / (d.points[q][0] - d.points[p][0]);
            let mid = 0.5 * (d.points[p][0] + d.points[q][0]);
            if mid.abs() < eps - d.h {
                assert!((slope - 1.0 / eps).abs() < 1e-9);
            } else if mid.abs() > eps + d.h {
                assert_eq!(slope, 0.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn seminorm_scales_quadratically(c in -3.0f64..3.0, eps in 0.05f64..0.45) {
            let d = TraceDomain::cube(1, 0.02).unwrap();
            let w = ramp_profile(&d, eps).unwrap().values;
            let cw: Vec<f64> = w.iter().map(|v| c * v).collect();
            let a = h_half_seminorm(&d, &w).unwrap();
            let b = h_half_seminorm(&d, &cw).unwrap();
            prop_assert!((b - c * c * a).abs() <= 1e-12 * a.max(1.0) * c.abs().max(1.0).powi(2));
        }

        #[test]
        fn seminorm_is_reflection_and_translation_invariant(eps in 0.05f64..0.45, shift in -0.3f64..0.3) {
            let d = TraceDomain::cube(1, 0.02).unwrap();
            let w = d.sample(|z| ((z[0] - shift) / eps).clamp(-1.0, 1.0));
            let mirrored: Vec<f64> = w.iter().rev().copied().collect();
            let a = h_half_seminorm(&d, &w).unwrap();
            let b = h_half_seminorm(&d, &mirrored).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a);
            // Translating the whole picture leaves pair distances unchanged.
            let mut moved = d.clone();
            for z in &mut moved.points {
                z[0] += 7.0;
            }
            let c = h_half_seminorm(&moved, &w).unwrap();
            prop_assert!((a - c).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn refinement_changes_ramp_norms_little() {
        for &eps in &[0.25, 0.125] {
            let coarse = TraceDomain::cube(1, eps / 8.0).unwrap();
            let fine = TraceDomain::cube(1, eps / 16.0).unwrap();
            let a = h_half_seminorm(&coarse, &ramp_profile(&coarse, eps).unwrap().values).unwrap();
            let b = h_half_seminorm(&fine, &ramp_profile(&fine, eps).unwrap().values).unwrap();
            assert!((a / b - 1.0).abs() <= 0.05, "{a} {b}");
        }
    }

    #[test]
    fn log_experiment_on_a_constant_profile() {
        let d = TraceDomain::cube(1, 1.0 / 256.0).unwrap();
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let rep = log_bound_experiment_with(&d, &eps, |d, _| Ok(vec![0.5; d.len()])).unwrap();
        assert!(rep.slope.abs() < 1e-12);
        assert!((rep.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn doubling_amplitude_quadruples_norms() {
        let d = TraceDomain::cube(1, 1.0 / 128.0).unwrap();
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let one = log_bound_experiment(&d, &eps).unwrap();
        let two = log_bound_experiment_with(&d, &eps, |d, e| {
            Ok(ramp_profile(d, e)?.values.iter().map(|v| 2.0 * v).collect())
        })
        .unwrap();
        for (a, b) in one.rows.iter().zip(&two.rows) {
            assert_eq!(4.0 * a.total, b.total);
        }
    }

    #[test]
    fn log_experiment_rejects_bad_input() {
        let d = TraceDomain::cube(1, 1.0 / 64.0).unwrap();
        assert!(log_bound_experiment(&d, &[0.25, 0.3, 0.1, 0.05]).is_err());
        assert!(log_bound_experiment(&d, &[0.6, 0.25, 0.125, 0.0625]).is_err());
        // Two of five values fall below 4h, leaving three.
        assert!(log_bound_experiment(&d, &[0.25, 0.125, 0.0625, 0.03125, 0.015625]).is_err());
        let rep = log_bound_experiment(&d, &[0.4, 0.25, 0.125, 0.0625, 0.03125]).unwrap();
        assert_eq!(rep.dropped, vec![0.03125]);
        assert!(rep.csv().starts_with("eps,l2_part,seminorm,total\n"));
    }

    #[test]
    fn ramp_eps_pair_difference_matches_slope() {
        let d = TraceDomain::cube(1, 1.0 / 1024.0).unwrap();
        let eps: Vec<f64> = (3..=8).map(|k| 0.5f64.powi(k)).collect();
        let rep = log_bound_experiment(&d, &eps).unwrap();
        let s4 = rep.rows.iter().find(|r| r.eps == 0.0625).unwrap().seminorm;
        let s6 = rep
            .rows
            .iter()
            .find(|r| r.eps == 0.015625)
            .unwrap()
            .seminorm;
        let predicted = rep.slope * 2.0 * 2f64.ln();
        assert!(
            ((s6 - s4) / predicted - 1.0).abs() < 0.1,
            "{} vs {predicted}",
            s6 - s4
        );
        // Same differences from a quadrature at one quarter of the spacing.
        let fine = TraceDomain::cube(1, 1.0 / 4096.0).unwrap();
        let f4 = h_half_seminorm(&fine, &ramp_profile(&fine, 0.0625).unwrap().values).unwrap();
        let f6 = h_half_seminorm(&fine, &ramp_profile(&fine, 0.015625).unwrap().values).unwrap();
        assert!(((s6 - s4) / (f6 - f4) - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_boundary_has_zero_ratio() {
        let d = CylinderDomain::new(1, 1.0, 1.0 / 16.0, BaseShape::Box).unwrap();
        let one = d.sample(|_| 1.0);
        let r = extension_inequality_check(&d, &one).unwrap();
        assert!(r.dirichlet < 1e-15);
        assert!(r.ratio < 1e-15);
        assert!((r.l2 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn extension_ratio_of_a_smooth_trace_is_finite() {
        let d = CylinderDomain::new(1, 1.0, 1.0 / 32.0, BaseShape::Box).unwrap();
        let w = d.sample(|x| (2.0 * x[0] + x[1]).sin());
        let r = extension_inequality_check(&d, &w).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
    }

    #[test]
    fn rescaled_comparison_chain() {
        // Cutoff competitor of the explicit layer on C_R, moved to C_1.
        let mut norms = Vec::new();
        for &r in &[4.0, 8.0] {
            let d = CylinderDomain::new(1, r, r / 32.0, BaseShape::Box).unwrap();
            let v = d.sample(|x| sine_layer(x[0], x[1]));
            let comp = build_comparison(&d, &v, 1.0).unwrap();
            let (unit, w1) = rescale_to_unit(&d, &comp.w_bar).unwrap();
            let rep = extension_inequality_check(&unit, &w1).unwrap();
            let e = 2.0 * dirichlet_energy(&d, &comp.w_bar).unwrap();
            assert!((e / rep.dirichlet - 1.0).abs() < 1e-9);
            assert!(rep.ratio.is_finite() && rep.ratio < 10.0);
            norms.push(rep.l2 + rep.seminorm);
        }
        // Profile width after rescaling is ε = 1/R: norm / |log ε| stays bounded.
        assert!(
            norms[1] / 8f64.ln() <= 1.1 * norms[0] / 4f64.ln(),
            "{norms:?}"
        );
    }
}
