//! Experiment configuration: TOML sections of flat `key = value` pairs.
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use halflap::nonlinearity::{builtin, Nonlinearity};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub problem: Problem,
    pub solver: Solver,
    pub saddle: Saddle,
    pub hhalf: Hhalf,
    pub extend: Extend,
    pub symmetry: Symmetry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    pub nonlinearity: String,
    pub n: usize,
    pub radius: f64,
    pub radii: Vec<f64>,
    /// Defaults to `radius`.
    pub height: Option<f64>,
    pub h: f64,
    pub base_shape: String,
    /// Layer direction in the base variables; defaults to `e_1`.
    pub direction: Option<Vec<f64>>,
}

impl Default for Problem {
    fn default() -> Self {
        Problem {
            nonlinearity: "sine".into(),
            n: 1,
            radius: 8.0,
            radii: vec![4.0, 8.0, 16.0, 32.0],
            height: None,
            h: 0.05,
            base_shape: "box".into(),
            direction: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub max_iterations: usize,
    pub el_tol: f64,
    pub energy_tol: f64,
    pub cascade_levels: usize,
    /// `layer` or `constant`.
    pub init: String,
    pub init_value: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            max_iterations: 20_000,
            el_tol: 1e-6,
            energy_tol: 1e-15,
            cascade_levels: 0,
            init: "layer".into(),
            init_value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Saddle {
    pub nonlinearity: String,
    pub m: usize,
    pub radius: f64,
    pub height: f64,
    pub h: f64,
    pub radii: Vec<f64>,
}

impl Default for Saddle {
    fn default() -> Self {
        Saddle {
            nonlinearity: "allen-cahn".into(),
            m: 1,
            radius: 16.0,
            height: 8.0,
            h: 0.1,
            radii: vec![3.0, 4.0, 6.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hhalf {
    /// `cube` or `cylinder-boundary`.
    pub geometry: String,
    pub n: usize,
    pub h: f64,
    pub eps: Vec<f64>,
    pub radius: f64,
    pub height: f64,
}

impl Default for Hhalf {
    fn default() -> Self {
        Hhalf {
            geometry: "cube".into(),
            n: 1,
            h: 1.0 / 1024.0,
            eps: (3..=8).map(|k| 2f64.powi(-k)).collect(),
            radius: 1.0,
            height: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Extend {
    /// `poisson` or `mollifier`.
    pub method: String,
    /// `layer` or `random`.
    pub data: String,
    pub modes: usize,
}

impl Default for Extend {
    fn default() -> Self {
        Extend {
            method: "poisson".into(),
            data: "layer".into(),
            modes: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Symmetry {
    /// `layer` or `bump`.
    pub profile: String,
    /// Base axis along which the layer is monotone.
    pub axis: usize,
}

impl Default for Symmetry {
    fn default() -> Self {
        Symmetry {
            profile: "layer".into(),
            axis: 0,
        }
    }
}

pub fn load(path: &Path) -> Result<Config, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Config, String> {
    toml::from_str(text).map_err(|e| e.to_string().replace('\n', " "))
}

fn positive(name: &str, x: f64) -> Result<(), String> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {x}"))
    }
}

impl Config {
    /// Checks every field used by any subcommand.
    pub fn validate(&self) -> Result<(), String> {
        let p = &self.problem;
        self.nonlinearity()?;
        if !(1..=3).contains(&p.n) {
            return Err(format!("problem.n must be 1, 2 or 3, got {}", p.n));
        }
        positive("problem.radius", p.radius)?;
        positive("problem.h", p.h)?;
        if let Some(ht) = p.height {
            positive("problem.height", ht)?;
        }
        if p.h > p.radius / 2.0 {
            return Err("problem.h must be at most radius/2".into());
        }
        for &r in &p.radii {
            positive("problem.radii", r)?;
        }
        if p.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err("problem.radii must increase strictly".into());
        }
        if !matches!(p.base_shape.as_str(), "box" | "ball") {
            return Err(format!(
                "problem.base_shape must be box or ball, got {}",
                p.base_shape
            ));
        }
        if let Some(d) = &p.direction {
            if d.len() != p.n {
                return Err(format!("problem.direction needs {} components", p.n));
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err("problem.direction must be a nonzero vector".into());
            }
        }

        let s = &self.solver;
        positive("solver.el_tol", s.el_tol)?;
        if !(s.energy_tol.is_finite() && s.energy_tol >= 0.0) {
            return Err("solver.energy_tol must be nonnegative".into());
        }
        if s.max_iterations == 0 {
            return Err("solver.max_iterations must be positive".into());
        }
        if !matches!(s.init.as_str(), "layer" | "constant") {
            return Err(format!(
                "solver.init must be layer or constant, got {}",
                s.init
            ));
        }
        if !s.init_value.is_finite() {
            return Err("solver.init_value must be finite".into());
        }

        let sd = &self.saddle;
        builtin(&sd.nonlinearity).map_err(|e| format!("saddle.nonlinearity: {e}"))?;
        if sd.m == 0 {
            return Err("saddle.m must be at least 1".into());
        }
        positive("saddle.radius", sd.radius)?;
        positive("saddle.height", sd.height)?;
        positive("saddle.h", sd.h)?;
        for &r in &sd.radii {
            if !(r > 1.0 && r <= sd.radius.min(sd.height)) {
                return Err(format!(
                    "saddle.radii entries must lie in (1, min(radius, height)], got {r}"
                ));
            }
        }

        let hh = &self.hhalf;
        if !matches!(hh.geometry.as_str(), "cube" | "cylinder-boundary") {
            return Err(format!(
                "hhalf.geometry must be cube or cylinder-boundary, got {}",
                hh.geometry
            ));
        }
        if !(1..=2).contains(&hh.n) {
            return Err(format!("hhalf.n must be 1 or 2, got {}", hh.n));
        }
        positive("hhalf.h", hh.h)?;
        positive("hhalf.radius", hh.radius)?;
        positive("hhalf.height", hh.height)?;
        if let Some(e) = hh.eps.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
            return Err(format!("hhalf.eps entries must lie in (0, 1/2), got {e}"));
        }
        if hh.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err("hhalf.eps must decrease strictly".into());
        }

        let ex = &self.extend;
        if !matches!(ex.method.as_str(), "poisson" | "mollifier") {
            return Err(format!(
                "extend.method must be poisson or mollifier, got {}",
                ex.method
            ));
        }
        if !matches!(ex.data.as_str(), "layer" | "random") {
            return Err(format!(
                "extend.data must be layer or random, got {}",
                ex.data
            ));
        }
        if ex.modes == 0 {
            return Err("extend.modes must be positive".into());
        }

        let sy = &self.symmetry;
        if !matches!(sy.profile.as_str(), "layer" | "bump") {
            return Err(format!(
                "symmetry.profile must be layer or bump, got {}",
                sy.profile
            ));
        }
        if sy.axis >= p.n {
            return Err(format!("symmetry.axis must be below problem.n = {}", p.n));
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, String> {
        builtin(&self.problem.nonlinearity).map_err(|e| format!("problem.nonlinearity: {e}"))
    }

    pub fn height(&self) -> f64 {
        self.problem.height.unwrap_or(self.problem.radius)
    }

    /// Unit layer direction.
    pub fn direction(&self) -> Vec<f64> {
        let n = self.problem.n;
        let d = self.problem.direction.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        });
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter().map(|x| x / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
        parse("").unwrap().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[problem]\nradiu = 3.0\n").is_err());
        assert!(parse("[problme]\nradius = 3.0\n").is_err());
    }

    #[test]
    fn out_of_scope_eps_fails_validation() {
        let c = parse("[hhalf]\neps = [0.6, 0.25]\n").unwrap();
        assert!(c.validate().unwrap_err().contains("hhalf.eps"));
    }

    #[test]
    fn direction_is_normalised() {
        let c = parse("[problem]\nn = 2\ndirection = [3.0, 4.0]\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.direction(), vec![0.6, 0.8]);
    }

    #[test]
    fn bad_values_are_reported_by_key() {
        for (text, key) in [
            ("[problem]\nh = -1.0\n", "problem.h"),
            (
                "[problem]\nnonlinearity = \"quartic\"\n",
                "problem.nonlinearity",
            ),
            ("[problem]\nradii = [8.0, 4.0]\n", "problem.radii"),
            ("[solver]\ninit = \"random\"\n", "solver.init"),
            ("[extend]\nmethod = \"fourier\"\n", "extend.method"),
        ] {
            let err = parse(text).unwrap().validate().unwrap_err();
            assert!(err.contains(key), "{err}");
        }
    }
}
