//! Reaction terms `f`, their derivatives and potentials `G` with `G' = -f`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    AllenCahn,
    Sine,
    /// `f(u) = Σ c_k u^k`.
    Polynomial(Vec<f64>),
}

/// A reaction term with its derivative and potential.
///
/// The potential is normalised by `G(1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    name: String,
    kind: Kind,
    /// Hölder exponent of `f'`; metadata only.
    pub beta: f64,
}

/// Outcome of [`check_hypotheses`]. Each flag is computed on a probe grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    pub odd: bool,
    pub double_well: bool,
    pub fprime_decreasing: bool,
    pub probe_points: usize,
    pub tolerance: f64,
}

impl HypothesisReport {
    pub fn all(&self) -> bool {
        self.odd && self.double_well && self.fprime_decreasing
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * u + ck)
}

impl Nonlinearity {
    pub fn allen_cahn() -> Self {
        Nonlinearity {
            name: "allen-cahn".into(),
            kind: Kind::AllenCahn,
            beta: 1.0,
        }
    }

    pub fn sine() -> Self {
        Nonlinearity {
            name: "sine".into(),
            kind: Kind::Sine,
            beta: 1.0,
        }
    }

    /// `f(u) = c_0 + c_1 u + c_2 u² + ...`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "polynomial needs finite coefficients".into(),
            ));
        }
        let name = format!(
            "poly:{}",
            coeffs
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        Ok(Nonlinearity {
            name,
            kind: Kind::Polynomial(coeffs),
            beta: 1.0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::AllenCahn => u - u * u * u,
            Kind::Sine => (PI * u).sin(),
            Kind::Polynomial(c) => horner(c, u),
        }
    }

    #[inline]
    pub fn fprime(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::AllenCahn => 1.0 - 3.0 * u * u,
            Kind::Sine => PI * (PI * u).cos(),
            Kind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * u + k as f64 * ck),
        }
    }

    /// Potential `G(u) = ∫_u^1 f`.
    #[inline]
    pub fn potential(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::AllenCahn => {
                let w = 1.0 - u * u;
                0.25 * w * w
            }
            Kind::Sine => (1.0 + (PI * u).cos()) / PI,
            Kind::Polynomial(c) => {
                let anti = |x: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (k, &ck)| acc * x + ck / (k + 1) as f64)
                        * x
                };
                anti(1.0) - anti(u)
            }
        }
    }

    /// `G'' = -f'`.
    #[inline]
    pub fn potential_second(&self, u: f64) -> f64 {
        -self.fprime(u)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Look up a nonlinearity by name: `allen-cahn`, `sine`, `poly:c0,c1,...` or
/// `cubic-custom:c0,c1,c2,c3` (coefficients of `f` in increasing degree).
pub fn builtin(name: &str) -> Result<Nonlinearity> {
    let parse = |list: &str| -> Result<Vec<f64>> {
        list.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::UnknownNonlinearity(name.to_string()))
            })
            .collect()
    };
    match name {
        "allen-cahn" => Ok(Nonlinearity::allen_cahn()),
        "sine" => Ok(Nonlinearity::sine()),
        _ => {
            if let Some(rest) = name.strip_prefix("poly:") {
                Nonlinearity::polynomial(parse(rest)?)
            } else if let Some(rest) = name.strip_prefix("cubic-custom:") {
                let c = parse(rest)?;
                if c.len() > 4 {
                    return Err(Error::UnknownNonlinearity(name.to_string()));
                }
                Nonlinearity::polynomial(c)
            } else {
                Err(Error::UnknownNonlinearity(name.to_string()))
            }
        }
    }
}

/// Minimum of `G` over `[lo, hi]`, returned as `(c_u, argmin)`.
///
/// Dense scan on 4096 points followed by one Newton step from the best
/// point, kept only if it stays in range and lowers `G`.
pub fn c_u_of(nl: &Nonlinearity, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
    }
    const SCAN: usize = 4096;
    let mut best = (nl.potential(lo), lo);
    if hi > lo {
        for i in 1..SCAN {
            let s = if i == SCAN - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (SCAN - 1) as f64
            };
            let g = nl.potential(s);
            if g < best.0 {
                best = (g, s);
            }
        }
        let (g0, s0) = best;
        let curv = nl.potential_second(s0);
        if curv > 0.0 {
            let s1 = s0 + nl.f(s0) / curv;
            if (lo..=hi).contains(&s1) {
                let g1 = nl.potential(s1);
                if g1 < g0 {
                    best = (g1, s1);
                }
            }
        }
    }
    Ok(best)
}

/// Probe-grid evaluation of oddness, the double-well shape of `G` and
/// monotonicity of `f'` on `(0, 1)`.
pub fn check_hypotheses(nl: &Nonlinearity) -> HypothesisReport {
    const PROBE: usize = 801;
    const TOL: f64 = 1e-9;
    let probe =
        |lo: f64, hi: f64| (0..PROBE).map(move |i| lo + (hi - lo) * i as f64 / (PROBE - 1) as f64);

    let odd = probe(-2.0, 2.0).all(|u| (nl.f(u) + nl.f(-u)).abs() <= TOL * (1.0 + nl.f(u).abs()));

    let wells = nl.potential(1.0).abs() <= TOL && nl.potential(-1.0).abs() <= TOL;
    let nonneg = probe(-2.0, 2.0).all(|u| nl.potential(u) >= -TOL);
    let positive_inside = probe(-1.0, 1.0)
        .skip(1)
        .take(PROBE - 2)
        .all(|u| nl.potential(u) > TOL);
    let double_well = wells && nonneg && positive_inside;

    let inner: Vec<f64> = probe(0.0, 1.0)
        .skip(1)
        .take(PROBE - 2)
        .map(|u| nl.fprime(u))
        .collect();
    let fprime_decreasing = inner.windows(2).all(|w| w[1] < w[0] + TOL * 1e-3);

    HypothesisReport {
        odd,
        double_well,
        fprime_decreasing,
        probe_points: PROBE,
        tolerance: TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_builtins() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::allen_cahn(),
            Nonlinearity::sine(),
            builtin("poly:0,1,0,-1").unwrap(),
            builtin("cubic-custom:0.1,2,-0.5,-3").unwrap(),
        ]
    }

    #[test]
    fn potential_values() {
        let ac = Nonlinearity::allen_cahn();
        assert_eq!(ac.potential(1.0), 0.0);
        assert_eq!(ac.potential(0.0), 0.25);
        assert_eq!(ac.f(0.0), 0.0);
        assert_eq!(ac.f(1.0), 0.0);
        assert_eq!(ac.f(-1.0), 0.0);
        let s = Nonlinearity::sine();
        assert!(s.potential(1.0).abs() < 1e-16);
        assert!((s.potential(0.0) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn potential_derivative_matches_f() {
        let step = 1e-4;
        for nl in all_builtins() {
            for i in 0..=400 {
                let u = -2.0 + 4.0 * i as f64 / 400.0;
                let dg = (nl.potential(u + step) - nl.potential(u - step)) / (2.0 * step);
                assert!((dg + nl.f(u)).abs() <= 1e-6, "{} at {u}", nl.name());
                let df = (nl.f(u + step) - nl.f(u - step)) / (2.0 * step);
                assert!(
                    (df - nl.fprime(u)).abs() <= 1e-6 * (1.0 + df.abs()),
                    "{} at {u}",
                    nl.name()
                );
            }
        }
    }

    #[test]
    fn polynomial_cubic_equals_allen_cahn() {
        let p = builtin("poly:0,1,0,-1").unwrap();
        let ac = Nonlinearity::allen_cahn();
        for i in 0..=20 {
            let u = -1.5 + 0.15 * i as f64;
            assert!((p.potential(u) - ac.potential(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            builtin("tanh"),
            Err(Error::UnknownNonlinearity(_))
        ));
        assert!(builtin("poly:1,x").is_err());
        assert!(builtin("cubic-custom:1,2,3,4,5").is_err());
    }

    #[test]
    fn c_u_examples() {
        let ac = Nonlinearity::allen_cahn();
        let (c, s) = c_u_of(&ac, -1.0, 1.0).unwrap();
        assert_eq!(c, 0.0);
        assert!(s == -1.0 || s == 1.0);
        let (c, s) = c_u_of(&ac, -0.5, 0.5).unwrap();
        // G(±1/2) = (3/4)²/4
        assert!((c - 9.0 / 64.0).abs() < 1e-15);
        assert!((s.abs() - 0.5).abs() < 1e-15);
        let (c, _) = c_u_of(&Nonlinearity::sine(), -1.0, 1.0).unwrap();
        assert!(c.abs() < 1e-16);
        assert!(c_u_of(&ac, 1.0, 0.0).is_err());
    }

    #[test]
    fn c_u_newton_step_refines_interior_minimum() {
        // f = 0.3 - u has G minimised at u = 0.3 with G'' = 1.
        let nl = builtin("poly:0.3,-1").unwrap();
        let (c, s) = c_u_of(&nl, -1.0, 1.0).unwrap();
        assert!((s - 0.3).abs() < 1e-12);
        assert!((c - nl.potential(0.3)).abs() < 1e-14);
    }

    #[test]
    fn hypotheses_of_builtins() {
        let r = check_hypotheses(&Nonlinearity::allen_cahn());
        assert!(r.odd && r.double_well && r.fprime_decreasing);
        assert!(check_hypotheses(&Nonlinearity::sine()).all());
        let lin = builtin("poly:0,1").unwrap();
        let r = check_hypotheses(&lin);
        assert!(r.odd);
        assert!(!r.double_well);
    }

    proptest! {
        #[test]
        fn c_u_is_below_sampled_potential(a in -1.5f64..1.5, w in 0.0f64..1.5, seeds in proptest::collection::vec(0.0f64..1.0, 100)) {
            let b = a + w;
            for nl in [Nonlinearity::allen_cahn(), Nonlinearity::sine()] {
                let (c, s) = c_u_of(&nl, a, b).unwrap();
                prop_assert!(s >= a && s <= b);
                for &t in &seeds {
                    prop_assert!(c <= nl.potential(a + t * w) + 1e-12);
                }
            }
        }

        #[test]
        fn c_u_is_monotone_under_inclusion(a in -1.5f64..1.5, w in 0.0f64..1.0, da in 0.0f64..0.5, db in 0.0f64..0.5) {
            let b = a + w;
            for nl in [Nonlinearity::allen_cahn(), Nonlinearity::sine()] {
                let inner = c_u_of(&nl, a, b).unwrap().0;
                let outer = c_u_of(&nl, a - da, b + db).unwrap().0;
                prop_assert!(outer <= inner + 1e-10);
            }
        }
    }
}
