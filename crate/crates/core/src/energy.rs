//! Energy accounting on cylinders, nested scans, the two-term scaling fit
//! and the gradient-decay diagnostic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::EnergyFunctional;
use crate::grid::{gradient, CylinderDomain, ScalarField};
use crate::nonlinearity::{c_u_of, Nonlinearity};

/// Potential offset `c` in `∫ (G(u) - c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Offset {
    /// `c_u`: the minimum of `G` over the range of the trace.
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
    pub c_u: f64,
    pub radius: f64,
    pub n: usize,
}

fn breakdown_on(
    domain: &CylinderDomain,
    region: &[bool],
    v: &ScalarField,
    nl: &Nonlinearity,
    offset: Offset,
    radius: f64,
) -> Result<EnergyBreakdown> {
    let grid = domain.grid();
    let c_u = match offset {
        Offset::Explicit(c) => c,
        Offset::Auto => {
            let klen = grid.count(domain.n);
            let (lo, hi) = (0..grid.len())
                .step_by(klen)
                .filter(|&p| region[p])
                .map(|p| v.get(p))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x), b.max(x))
                });
            if lo > hi {
                0.0
            } else {
                c_u_of(nl, lo, hi)?.0
            }
        }
    };
    let func = EnergyFunctional::new(grid, region, None, nl.clone(), c_u)?;
    let parts = func.parts(v.values());
    Ok(EnergyBreakdown {
        dirichlet: parts.dirichlet,
        potential: parts.potential,
        total: parts.total(),
        c_u,
        radius,
        n: domain.n,
    })
}

fn check_field(domain: &CylinderDomain, v: &ScalarField) -> Result<()> {
    if v.grid() != domain.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(p) = (0..v.grid().len()).find(|&p| domain.inside()[p] && !v.mask()[p]) {
        return Err(Error::InvalidArgument(format!(
            "field undefined at cylinder point {p}"
        )));
    }
    Ok(())
}

/// Dirichlet part `½ ∫ |∇v|²` on the whole cylinder.
pub fn dirichlet_energy(domain: &CylinderDomain, v: &ScalarField) -> Result<f64> {
    check_field(domain, v)?;
    let zero = Nonlinearity::polynomial(vec![0.0])?;
    let func = EnergyFunctional::new(domain.grid(), domain.inside(), None, zero, 0.0)?;
    Ok(func.parts(v.values()).dirichlet)
}

/// Energy of `v` on the whole cylinder.
pub fn energy_breakdown(
    domain: &CylinderDomain,
    v: &ScalarField,
    nl: &Nonlinearity,
    offset: Offset,
) -> Result<EnergyBreakdown> {
    check_field(domain, v)?;
    breakdown_on(domain, domain.inside(), v, nl, offset, domain.radius)
}

/// One breakdown per concentric sub-cylinder `C_r` (radius and height `r`).
pub fn energy_scan(
    domain: &CylinderDomain,
    v: &ScalarField,
    nl: &Nonlinearity,
    radii: &[f64],
    offset: Offset,
) -> Result<Vec<EnergyBreakdown>> {
    check_field(domain, v)?;
    let h = domain.grid().spacing(0);
    for &r in radii {
        if r < 3.0 * h {
            return Err(Error::InvalidArgument(format!(
                "radius {r} is below 3h = {}",
                3.0 * h
            )));
        }
        if r > domain.radius * (1.0 + 1e-12) || r > domain.height * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "radius {r} exceeds the computed cylinder"
            )));
        }
    }
    radii
        .par_iter()
        .map(|&r| {
            let region = domain.sub_cylinder(r, domain.center());
            breakdown_on(domain, &region, v, nl, offset, r)
        })
        .collect()
}

/// Least-squares fit `y ≈ a φ₁ + b φ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_two_term(phi1: &[f64], phi2: &[f64], y: &[f64]) -> Result<LinearFit> {
    let k = y.len();
    if phi1.len() != k || phi2.len() != k || k < 2 {
        return Err(Error::InvalidArgument(
            "fit needs matching inputs with at least two points".into(),
        ));
    }
    let s11: f64 = phi1.iter().map(|x| x * x).sum();
    let s22: f64 = phi2.iter().map(|x| x * x).sum();
    let s12: f64 = phi1.iter().zip(phi2).map(|(x, z)| x * z).sum();
    let t1: f64 = phi1.iter().zip(y).map(|(x, z)| x * z).sum();
    let t2: f64 = phi2.iter().zip(y).map(|(x, z)| x * z).sum();
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-12 * s11 * s22) {
        return Err(Error::InvalidArgument("singular normal equations".into()));
    }
    let a = (t1 * s22 - t2 * s12) / det;
    let b = (s11 * t2 - s12 * t1) / det;
    let residuals: Vec<f64> = (0..k).map(|i| y[i] - a * phi1[i] - b * phi2[i]).collect();
    let mean = y.iter().sum::<f64>() / k as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit {
        a,
        b,
        r_squared,
        residuals,
    })
}

/// `E(R) ≈ a R^{n-1} log R + b R^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub radii: Vec<f64>,
    pub n: usize,
    /// Misfit with growth beyond the model: last residual positive and
    /// `R² < 0.999`.
    pub trend: bool,
}

impl ScalingFit {
    /// `key=value` report.
    pub fn report(&self) -> String {
        format!(
            "model=a*R^(n-1)*log(R)+b*R^(n-1)\nn={}\na={}\nb={}\nr_squared={}\ntrend={}\nradii={}\n",
            self.n,
            self.a,
            self.b,
            self.r_squared,
            self.trend,
            self.radii.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
        )
    }
}

pub fn scaling_fit(scan: &[EnergyBreakdown]) -> Result<ScalingFit> {
    if scan.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 4 radii, got {}",
            scan.len()
        )));
    }
    let n = scan[0].n;
    if scan.iter().any(|e| e.n != n) {
        return Err(Error::InvalidArgument(
            "mixed base dimensions in scan".into(),
        ));
    }
    let radii: Vec<f64> = scan.iter().map(|e| e.radius).collect();
    if radii.iter().any(|&r| r <= 2.0) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must exceed 2 and increase strictly".into(),
        ));
    }
    let e = (n - 1) as i32;
    let phi1: Vec<f64> = radii.iter().map(|r| r.powi(e) * r.ln()).collect();
    let phi2: Vec<f64> = radii.iter().map(|r| r.powi(e)).collect();
    let y: Vec<f64> = scan.iter().map(|e| e.total).collect();
    let fit = fit_two_term(&phi1, &phi2, &y)?;
    let trend = fit.residuals.last().is_some_and(|&r| r > 0.0) && fit.r_squared < 0.999;
    Ok(ScalingFit {
        a: fit.a,
        b: fit.b,
        r_squared: fit.r_squared,
        residuals: fit.residuals,
        radii,
        n,
        trend,
    })
}

/// Log–log slope of the potential part against `R`.
pub fn potential_exponent(scan: &[EnergyBreakdown]) -> Result<f64> {
    let x: Vec<f64> = scan.iter().map(|e| e.radius.ln()).collect();
    let y: Vec<f64> = scan
        .iter()
        .map(|e| {
            if e.potential > 0.0 {
                Ok(e.potential.ln())
            } else {
                Err(Error::InvalidArgument(
                    "potential must be positive for a log fit".into(),
                ))
            }
        })
        .collect::<Result<_>>()?;
    let ones = vec![1.0; x.len()];
    Ok(fit_two_term(&x, &ones, &y)?.a)
}

/// `λ ↦ sup_x |∇v(·, λ)|` together with the bound `C/(1+λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub levels: Vec<(f64, f64)>,
    /// Smallest `C` with `sup ≤ C/(1+λ)` on every level.
    pub c: f64,
    /// `max / min` of `sup · (1+λ)` over levels with nonzero gradient.
    pub ratio: Option<f64>,
}

/// Decay profile of the discrete gradient over the masked points of `v`
/// (last axis `λ`).
pub fn gradient_decay_profile(v: &ScalarField) -> Result<DecayProfile> {
    let grads = gradient(v)?;
    let g = v.grid();
    let d = g.dim();
    let klen = g.count(d - 1);
    let mut sup = vec![0.0f64; klen];
    for p in 0..g.len() {
        if !v.mask()[p] {
            continue;
        }
        let norm = grads.iter().map(|c| c.get(p).powi(2)).sum::<f64>().sqrt();
        let k = p % klen;
        sup[k] = sup[k].max(norm);
    }
    let levels: Vec<(f64, f64)> = (0..klen).map(|k| (g.coord(d - 1, k), sup[k])).collect();
    let q: Vec<f64> = levels.iter().map(|&(l, s)| s * (1.0 + l)).collect();
    let c = q.iter().copied().fold(0.0, f64::max);
    let positive: Vec<f64> = q.into_iter().filter(|&x| x > 0.0).collect();
    let ratio = if positive.is_empty() {
        None
    } else {
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
        Some(c / lo)
    };
    Ok(DecayProfile { levels, c, ratio })
}

/// CSV with columns `R,dirichlet,potential,total,c_u`.
pub fn scan_csv(scan: &[EnergyBreakdown]) -> String {
    let mut s = String::from("R,dirichlet,potential,total,c_u\n");
    for e in scan {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.radius, e.dirichlet, e.potential, e.total, e.c_u
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, BaseShape, UniformGrid};
    use crate::layer::sine_layer;
    use std::f64::consts::{FRAC_1_PI, PI};

    #[test]
    fn well_has_zero_energy() {
        let d = CylinderDomain::new(1, 2.0, 0.1, BaseShape::Box).unwrap();
        let one = d.sample(|_| 1.0);
        let e = energy_breakdown(&d, &one, &Nonlinearity::allen_cahn(), Offset::Auto).unwrap();
        assert_eq!((e.dirichlet, e.potential, e.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_field_dirichlet_part() {
        let d = CylinderDomain::from_extents(&[(-1.0, 1.0)], 1.0, 0.05).unwrap();
        let v = d.sample(|x| x[0]);
        // Zero reaction term: G ≡ 0.
        let zero = crate::nonlinearity::builtin("poly:0").unwrap();
        let e = energy_breakdown(&d, &v, &zero, Offset::Auto).unwrap();
        assert!((e.dirichlet - 1.0).abs() < 1e-12);
        assert_eq!(e.potential, 0.0);
    }

    #[test]
    fn constant_zero_potential_part() {
        let d = CylinderDomain::new(1, 2.0, 0.1, BaseShape::Ball).unwrap();
        let v = d.sample(|_| 0.0);
        let e =
            energy_breakdown(&d, &v, &Nonlinearity::allen_cahn(), Offset::Explicit(0.0)).unwrap();
        assert!((e.potential - 1.0).abs() < 1e-12);
        assert_eq!(e.total, e.dirichlet + e.potential);
    }

    #[test]
    fn scan_of_layer_increases_and_follows_log() {
        let d = CylinderDomain::new(1, 32.0, 0.05, BaseShape::Box).unwrap();
        let v = d.sample(|x| sine_layer(x[0], x[1]));
        let scan = energy_scan(
            &d,
            &v,
            &Nonlinearity::sine(),
            &[4.0, 8.0, 16.0, 32.0],
            Offset::Explicit(0.0),
        )
        .unwrap();
        for w in scan.windows(2) {
            assert!(w[1].total > w[0].total);
        }
        let per_log: Vec<f64> = scan[1..].iter().map(|e| e.total / e.radius.ln()).collect();
        let mean = per_log.iter().sum::<f64>() / 3.0;
        assert!(
            per_log.iter().all(|x| (x / mean - 1.0).abs() < 0.15),
            "{per_log:?}"
        );
        let fit = scaling_fit(&scan).unwrap();
        assert!(fit.a > 0.0 && fit.r_squared >= 0.98);
        assert!(energy_scan(&d, &v, &Nonlinearity::sine(), &[0.1], Offset::Auto).is_err());
        assert!(energy_scan(&d, &v, &Nonlinearity::sine(), &[40.0], Offset::Auto).is_err());
    }

    #[test]
    fn constant_scan_is_zero() {
        let d = CylinderDomain::new(1, 8.0, 0.25, BaseShape::Box).unwrap();
        let v = d.sample(|_| -1.0);
        let scan = energy_scan(
            &d,
            &v,
            &Nonlinearity::allen_cahn(),
            &[2.0, 4.0, 8.0],
            Offset::Auto,
        )
        .unwrap();
        assert!(scan.iter().all(|e| e.total == 0.0));
    }

    fn synthetic(n: usize, f: impl Fn(f64) -> f64) -> Vec<EnergyBreakdown> {
        [4.0, 8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&r| EnergyBreakdown {
                dirichlet: 0.0,
                potential: 0.0,
                total: f(r),
                c_u: 0.0,
                radius: r,
                n,
            })
            .collect()
    }

    #[test]
    fn fit_recovers_model_data() {
        let fit = scaling_fit(&synthetic(2, |r| 3.0 * r * r.ln() + 2.0 * r)).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-10 && (fit.b - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.trend);
    }

    #[test]
    fn fit_flags_quadratic_growth() {
        let fit = scaling_fit(&synthetic(2, |r| r * r)).unwrap();
        assert!(fit.r_squared < 0.999);
        assert!(fit.trend);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(scaling_fit(&synthetic(1, |r| r)[..3]).is_err());
        let mut s = synthetic(1, |r| r);
        s[1].radius = s[0].radius;
        assert!(scaling_fit(&s).is_err());
    }

    #[test]
    fn decay_profile_of_layer_matches_closed_form() {
        let g = UniformGrid::new(vec![
            Axis::spanning(-4.0, 4.0, 0.01).unwrap(),
            Axis::spanning(0.0, 4.0, 0.01).unwrap(),
        ])
        .unwrap();
        let v = ScalarField::from_fn(g, |x| sine_layer(x[0], x[1]));
        let prof = gradient_decay_profile(&v).unwrap();
        for &(l, s) in prof.levels.iter().step_by(20) {
            let exact = 2.0 * FRAC_1_PI / (l + FRAC_1_PI);
            assert!((s / exact - 1.0).abs() < 0.02, "λ = {l}: {s} vs {exact}");
        }
        assert!(prof.ratio.unwrap() < 1.0 + PI);
        let c = ScalarField::constant(v.grid().clone(), 2.0);
        let prof = gradient_decay_profile(&c).unwrap();
        assert!(prof.levels.iter().all(|&(_, s)| s == 0.0));
        assert_eq!(prof.ratio, None);
    }

    #[test]
    fn scan_csv_schema() {
        let csv = scan_csv(&synthetic(1, |r| r));
        assert!(csv.starts_with("R,dirichlet,potential,total,c_u\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
