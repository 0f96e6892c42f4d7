//! Variational solution of the extension problem.
//!
//! All solves minimise an [`EnergyFunctional`] over the free points of a
//! masked grid with the remaining points pinned. The optimiser is a
//! Polak–Ribière nonlinear conjugate gradient method with an exact
//! quadratic-model initial step and Armijo backtracking. Box constraints
//! are handled by projection with an active set; the search direction is
//! reset whenever the active set changes.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{EnergyFunctional, EnergyParts, Residuals, SeparableWeight};
use crate::grid::{Axis, CylinderDomain, ScalarField, UniformGrid, WedgeDomain, MAX_DIM};
use crate::nonlinearity::{check_hypotheses, Nonlinearity};
use crate::reduce::{det_sum, dot, CHUNK};

/// Initial guess at the free points.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// `tanh(dir · (x - centre))` in the base variables, clipped to the bounds.
    Layer {
        direction: Vec<f64>,
    },
    Constant(f64),
    /// Values taken from a field on the same grid.
    Field(ScalarField),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub max_iterations: usize,
    /// Relative energy decrease below which an iteration counts as stalled.
    pub energy_tol: f64,
    /// Target for the scaled Euler–Lagrange residual (sup-norm).
    pub el_tol: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    /// Step shrink factor in backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Consecutive stalled iterations tolerated before giving up.
    pub stall_window: usize,
    pub lower: Option<ScalarField>,
    pub upper: Option<ScalarField>,
    pub init: InitPolicy,
    /// Number of coarse grids solved first to build the initial guess.
    pub cascade_levels: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iterations: 20_000,
            energy_tol: 1e-15,
            el_tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            stall_window: 25,
            lower: None,
            upper: None,
            init: InitPolicy::Constant(0.0),
            cascade_levels: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, grid: &UniformGrid) -> Result<()> {
        let positive = [
            ("energy_tol", self.energy_tol),
            ("el_tol", self.el_tol),
            ("armijo", self.armijo),
            ("backtrack", self.backtrack),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.backtrack >= 1.0 || self.armijo >= 1.0 {
            return Err(Error::InvalidArgument(
                "armijo and backtrack must lie in (0, 1)".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        for b in [&self.lower, &self.upper].into_iter().flatten() {
            if b.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        if let (Some(lo), Some(hi)) = (&self.lower, &self.upper) {
            let bad =
                (0..grid.len()).find(|&p| lo.mask()[p] && hi.mask()[p] && lo.get(p) > hi.get(p));
            if let Some(p) = bad {
                return Err(Error::InvalidArgument(format!(
                    "lower bound exceeds upper bound at point {p}"
                )));
            }
        }
        if let InitPolicy::Field(f) = &self.init {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
}

/// A converged (or last) iterate with its diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: ScalarField,
    /// `v(·, 0)` in base row-major order.
    pub trace: Vec<f64>,
    pub residuals: Residuals,
    /// Energy parts with zero potential offset.
    pub energy: EnergyParts,
    pub energy_history: Vec<f64>,
    pub log: Vec<IterationRecord>,
    pub iterations: usize,
}

impl Solution {
    /// Sidecar report, one `key=value` per line.
    pub fn report(&self) -> String {
        format!(
            "iterations={}\nenergy={}\ndirichlet={}\npotential={}\ninterior_residual={}\nneumann_residual={}\n",
            self.iterations,
            self.energy.total(),
            self.energy.dirichlet,
            self.energy.potential,
            self.residuals.interior,
            self.residuals.neumann
        )
    }

    /// Write `<stem>.field`, `<stem>.mask` and `<stem>.report` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::grid::write_field_dump(
            &self.field,
            &dir.join(format!("{stem}.field")),
            &dir.join(format!("{stem}.mask")),
        )?;
        let mut f = std::fs::File::create(dir.join(format!("{stem}.report")))?;
        f.write_all(self.report().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveFailure {
    LineSearch,
    IterationCap,
    NonFinite,
    Stagnated,
    /// The saddle minimiser collapsed to zero.
    Trivial,
}

#[derive(Debug)]
pub enum SolveError {
    Invalid(Error),
    Failed {
        kind: SolveFailure,
        last: Box<Solution>,
    },
}

impl SolveError {
    pub fn last(&self) -> Option<&Solution> {
        match self {
            SolveError::Failed { last, .. } => Some(last),
            SolveError::Invalid(_) => None,
        }
    }
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Invalid(e) => write!(f, "{e}"),
            SolveError::Failed { kind, last } => {
                let what = match kind {
                    SolveFailure::LineSearch => "line search failed",
                    SolveFailure::IterationCap => "iteration cap reached",
                    SolveFailure::NonFinite => "energy is not finite",
                    SolveFailure::Stagnated => "energy stagnated above the residual tolerance",
                    SolveFailure::Trivial => "minimiser is identically zero",
                };
                write!(
                    f,
                    "{what} after {} iterations (residual {:e})",
                    last.iterations,
                    last.residuals.max()
                )
            }
        }
    }
}

impl std::error::Error for SolveError {}

impl From<Error> for SolveError {
    fn from(e: Error) -> Self {
        SolveError::Invalid(e)
    }
}

// ---------------------------------------------------------------------------
// Core optimiser

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn from_config(cfg: &SolveConfig, len: usize, extra_lower: Option<f64>) -> Option<Bounds> {
        if cfg.lower.is_none() && cfg.upper.is_none() && extra_lower.is_none() {
            return None;
        }
        let pick = |f: &Option<ScalarField>, p: usize, dflt: f64| match f {
            Some(b) if b.mask()[p] => b.get(p),
            _ => dflt,
        };
        let mut lower: Vec<f64> = (0..len)
            .map(|p| pick(&cfg.lower, p, f64::NEG_INFINITY))
            .collect();
        if let Some(l) = extra_lower {
            for x in &mut lower {
                *x = x.max(l);
            }
        }
        let upper = (0..len)
            .map(|p| pick(&cfg.upper, p, f64::INFINITY))
            .collect();
        Some(Bounds { lower, upper })
    }

    #[inline]
    fn clamp(&self, p: usize, x: f64) -> f64 {
        x.max(self.lower[p]).min(self.upper[p])
    }

    fn restrict(&self, map: &[usize]) -> Bounds {
        Bounds {
            lower: map.iter().map(|&p| self.lower[p]).collect(),
            upper: map.iter().map(|&p| self.upper[p]).collect(),
        }
    }
}

struct Outcome {
    x: Vec<f64>,
    residuals: Residuals,
    parts: EnergyParts,
    history: Vec<f64>,
    log: Vec<IterationRecord>,
    iterations: usize,
    failure: Option<SolveFailure>,
}

/// Active (clamped) free points: at a bound with the gradient pushing out.
fn inactive_mask(x: &[f64], g: &[f64], free: &[bool], bounds: Option<&Bounds>) -> Vec<bool> {
    match bounds {
        None => free.to_vec(),
        Some(b) => (0..x.len())
            .map(|p| {
                free[p]
                    && !((x[p] <= b.lower[p] && g[p] > 0.0) || (x[p] >= b.upper[p] && g[p] < 0.0))
            })
            .collect(),
    }
}

fn masked(v: &[f64], mask: &[bool]) -> Vec<f64> {
    v.iter()
        .zip(mask)
        .map(|(&x, &m)| if m { x } else { 0.0 })
        .collect()
}

fn ncg(
    func: &EnergyFunctional,
    free: &[bool],
    bounds: Option<&Bounds>,
    mut x: Vec<f64>,
    cfg: &SolveConfig,
) -> Outcome {
    let n = x.len();
    if let Some(b) = bounds {
        for p in 0..n {
            if free[p] {
                x[p] = b.clamp(p, x[p]);
            }
        }
    }
    let mut energy = func.energy(&x);
    let mut g = func.gradient(&x, free);
    let mut inactive = inactive_mask(&x, &g, free, bounds);
    let mut pg = masked(&g, &inactive);
    let mut residuals = func.residuals(&pg, &inactive);
    let mut history = vec![energy];
    let mut log = Vec::new();
    let mut d: Vec<f64> = pg.iter().map(|&v| -v).collect();
    let mut trial = vec![0.0; n];
    let mut stalled = 0;
    let mut failure = None;
    let mut it = 0;
    if !energy.is_finite() {
        failure = Some(SolveFailure::NonFinite);
    }
    while failure.is_none() && residuals.max() > cfg.el_tol {
        if it >= cfg.max_iterations {
            failure = Some(SolveFailure::IterationCap);
            break;
        }
        it += 1;
        let mut gd = dot(&pg, &d);
        if !(gd < 0.0) {
            d = pg.iter().map(|&v| -v).collect();
            gd = -dot(&pg, &pg);
        }
        let curv = func.curvature(&x, &d, false);
        let mut alpha = if curv > 0.0 {
            -gd / curv
        } else {
            -gd / func.curvature(&x, &d, true).max(f64::MIN_POSITIVE)
        };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            trial
                .par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    for (k, t) in chunk.iter_mut().enumerate() {
                        let p = c * CHUNK + k;
                        *t = if free[p] {
                            let y = x[p] + alpha * d[p];
                            match bounds {
                                Some(b) => b.clamp(p, y),
                                None => y,
                            }
                        } else {
                            x[p]
                        };
                    }
                });
            let et = func.energy(&trial);
            let pred = det_sum(n, |p| g[p] * (trial[p] - x[p]));
            let negligible = pred.abs() <= 1e-13 * energy.abs().max(1e-300);
            if et.is_finite() && (et <= energy + cfg.armijo * pred || negligible) {
                accepted = Some(et);
                break;
            }
            alpha *= cfg.backtrack;
        }
        let et = match accepted {
            Some(e) => e,
            None => {
                failure = Some(if func.energy(&trial).is_finite() {
                    SolveFailure::LineSearch
                } else {
                    SolveFailure::NonFinite
                });
                break;
            }
        };
        std::mem::swap(&mut x, &mut trial);
        let decrease = energy - et;
        energy = et;
        history.push(energy);
        func.gradient_into(&x, free, &mut g);
        let new_inactive = inactive_mask(&x, &g, free, bounds);
        let new_pg = masked(&g, &new_inactive);
        residuals = func.residuals(&new_pg, &new_inactive);
        log.push(IterationRecord {
            iteration: it,
            energy,
            residual: residuals.max(),
            step: alpha,
        });
        let changed = new_inactive != inactive;
        let beta = if changed {
            0.0
        } else {
            let denom = dot(&pg, &pg);
            let num = det_sum(n, |p| new_pg[p] * (new_pg[p] - pg[p]));
            if denom > 0.0 {
                (num / denom).max(0.0)
            } else {
                0.0
            }
        };
        d.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            for (k, dp) in chunk.iter_mut().enumerate() {
                let p = c * CHUNK + k;
                *dp = if new_inactive[p] {
                    -new_pg[p] + beta * *dp
                } else {
                    0.0
                };
            }
        });
        pg = new_pg;
        inactive = new_inactive;
        if decrease <= cfg.energy_tol * energy.abs().max(1e-300) {
            stalled += 1;
            if stalled >= cfg.stall_window {
                failure = Some(SolveFailure::Stagnated);
            }
        } else {
            stalled = 0;
        }
    }
    let parts = func.parts(&x);
    Outcome {
        x,
        residuals,
        parts,
        history,
        log,
        iterations: it,
        failure,
    }
}

// ---------------------------------------------------------------------------
// Coarse-to-fine cascade

/// Every other point along each axis; `None` when an axis is too short.
fn coarsen(grid: &UniformGrid) -> Option<UniformGrid> {
    let axes: Option<Vec<Axis>> = grid
        .axes()
        .iter()
        .map(|a| {
            (a.count >= 5).then(|| Axis::new(a.origin, 2.0 * a.spacing, (a.count - 1) / 2 + 1))
        })
        .collect();
    UniformGrid::new(axes?).ok()
}

/// Fine index of every coarse point.
fn injection_map(fine: &UniformGrid, coarse: &UniformGrid) -> Vec<usize> {
    let d = fine.dim();
    (0..coarse.len())
        .map(|c| {
            let idx = coarse.unflatten(c);
            let mut f = [0usize; MAX_DIM];
            for a in 0..d {
                f[a] = 2 * idx[a];
            }
            fine.flat(&f[..d])
        })
        .collect()
}

/// Multilinear interpolation of a coarse vector onto the fine grid using
/// only coarse corners inside `coarse_region`. Points without such corners
/// keep `fallback`.
fn prolong(
    coarse: &[f64],
    cg: &UniformGrid,
    coarse_region: &[bool],
    fine: &UniformGrid,
    fallback: &mut [f64],
) {
    let d = fine.dim();
    fallback
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (k, out) in chunk.iter_mut().enumerate() {
                let p = c * CHUNK + k;
                let idx = fine.unflatten(p);
                let mut lo = [0usize; MAX_DIM];
                let mut odd = [false; MAX_DIM];
                for a in 0..d {
                    lo[a] = idx[a] / 2;
                    odd[a] = idx[a] % 2 == 1 && lo[a] + 1 < cg.count(a);
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for corner in 0..(1usize << d) {
                    let mut ci = [0usize; MAX_DIM];
                    let mut w = 1.0;
                    let mut valid = true;
                    for a in 0..d {
                        let up = corner >> a & 1 == 1;
                        if up && !odd[a] {
                            valid = false;
                            break;
                        }
                        ci[a] = lo[a] + usize::from(up);
                        if odd[a] {
                            w *= 0.5;
                        }
                    }
                    if !valid {
                        continue;
                    }
                    let q = cg.flat(&ci[..d]);
                    if coarse_region[q] {
                        num += w * coarse[q];
                        den += w;
                    }
                }
                if den > 0.0 {
                    *out = num / den;
                }
            }
        });
}

struct MaskedProblem<'a> {
    grid: &'a UniformGrid,
    region: &'a [bool],
    free: &'a [bool],
    weight: Option<SeparableWeight>,
    nl: &'a Nonlinearity,
}

fn restrict_weight(w: &SeparableWeight, fine: &UniformGrid) -> SeparableWeight {
    let d = fine.dim();
    let mut point = Vec::with_capacity(d);
    let mut mid = Vec::with_capacity(d);
    for a in 0..d {
        let pts: Vec<f64> = w.point[a].iter().step_by(2).copied().collect();
        // Midpoint of a coarse edge [2i, 2i+2] is the fine point 2i+1.
        let mids: Vec<f64> = (0..pts.len().saturating_sub(1))
            .map(|i| w.point[a][2 * i + 1])
            .collect();
        point.push(pts);
        mid.push(mids);
    }
    SeparableWeight { point, mid }
}

fn solve_cascade(
    prob: &MaskedProblem<'_>,
    x0: Vec<f64>,
    bounds: Option<&Bounds>,
    cfg: &SolveConfig,
    levels: usize,
) -> Result<Outcome> {
    let func = EnergyFunctional::new(
        prob.grid,
        prob.region,
        prob.weight.clone(),
        prob.nl.clone(),
        0.0,
    )?;
    let mut x = x0;
    if levels > 0 {
        if let Some(cg) = coarsen(prob.grid) {
            let map = injection_map(prob.grid, &cg);
            let cregion: Vec<bool> = map.iter().map(|&p| prob.region[p]).collect();
            let cfree: Vec<bool> = map.iter().map(|&p| prob.free[p]).collect();
            if cfree.iter().any(|&f| f) {
                let cx: Vec<f64> = map.iter().map(|&p| x[p]).collect();
                let cb = bounds.map(|b| b.restrict(&map));
                let cweight = prob.weight.as_ref().map(|w| restrict_weight(w, prob.grid));
                let cprob = MaskedProblem {
                    grid: &cg,
                    region: &cregion,
                    free: &cfree,
                    weight: cweight,
                    nl: prob.nl,
                };
                let coarse = solve_cascade(&cprob, cx, cb.as_ref(), cfg, levels - 1)?;
                if let Some(f) = coarse.failure {
                    log::warn!(
                        "cascade level {:?}: {:?} at residual {:e}",
                        cg.axes().iter().map(|a| a.count).collect::<Vec<_>>(),
                        f,
                        coarse.residuals.max()
                    );
                }
                let mut pro = x.clone();
                prolong(&coarse.x, &cg, &cregion, prob.grid, &mut pro);
                for p in 0..x.len() {
                    if prob.free[p] {
                        x[p] = match bounds {
                            Some(b) => b.clamp(p, pro[p]),
                            None => pro[p],
                        };
                    }
                }
            }
        }
    }
    Ok(ncg(&func, prob.free, bounds, x, cfg))
}

fn finish(
    out: Outcome,
    grid: &UniformGrid,
    region: &[bool],
) -> std::result::Result<Solution, SolveError> {
    let klen = grid.count(grid.dim() - 1);
    let trace = (0..grid.len() / klen).map(|b| out.x[b * klen]).collect();
    let values = masked(&out.x, region);
    let field =
        ScalarField::new(grid.clone(), values, region.to_vec()).map_err(SolveError::Invalid)?;
    let sol = Solution {
        field,
        trace,
        residuals: out.residuals,
        energy: out.parts,
        energy_history: out.history,
        log: out.log,
        iterations: out.iterations,
    };
    match out.failure {
        None => Ok(sol),
        Some(kind) => Err(SolveError::Failed {
            kind,
            last: Box::new(sol),
        }),
    }
}

fn initial_values(grid: &UniformGrid, center: &[f64], policy: &InitPolicy, p: usize) -> f64 {
    match policy {
        InitPolicy::Constant(c) => *c,
        InitPolicy::Field(f) => f.get(p),
        InitPolicy::Layer { direction } => {
            let x = grid.point(p);
            let s: f64 = direction
                .iter()
                .enumerate()
                .map(|(a, d)| d * (x[a] - center[a]))
                .sum();
            s.tanh()
        }
    }
}

// ---------------------------------------------------------------------------
// Public solves

/// Minimise the energy on a cylinder with `∂⁺` (and bottom-rim) values taken
/// from `plus_boundary`.
pub fn minimize_cylinder(
    domain: &CylinderDomain,
    nl: &Nonlinearity,
    plus_boundary: &ScalarField,
    cfg: &SolveConfig,
) -> std::result::Result<Solution, SolveError> {
    let grid = domain.grid();
    if plus_boundary.grid() != grid {
        return Err(Error::GridMismatch.into());
    }
    cfg.validate(grid)?;
    if let InitPolicy::Layer { direction } = &cfg.init {
        if direction.len() != domain.n {
            return Err(
                Error::InvalidArgument("layer direction must have n components".into()).into(),
            );
        }
    }
    let pinned = domain.pinned();
    if let Some(p) = (0..grid.len()).find(|&p| pinned[p] && !plus_boundary.mask()[p]) {
        return Err(
            Error::InvalidArgument(format!("boundary data missing at pinned point {p}")).into(),
        );
    }
    let free = domain.free();
    let bounds = Bounds::from_config(cfg, grid.len(), None);
    let x0: Vec<f64> = (0..grid.len())
        .map(|p| {
            if pinned[p] {
                plus_boundary.get(p)
            } else if free[p] {
                initial_values(grid, domain.center(), &cfg.init, p)
            } else {
                0.0
            }
        })
        .collect();
    let prob = MaskedProblem {
        grid,
        region: domain.inside(),
        free: &free,
        weight: None,
        nl,
    };
    let out = solve_cascade(&prob, x0, bounds.as_ref(), cfg, cfg.cascade_levels)?;
    finish(out, grid, domain.inside())
}

/// Separable weight `s^{m-1} t^{m-1}` of a wedge, with the `h/4`
/// substitution on the degenerate axes.
pub fn wedge_weight(w: &WedgeDomain) -> SeparableWeight {
    let grid = w.grid();
    let e = w.m as i32 - 1;
    let mut point = Vec::new();
    let mut mid = Vec::new();
    for a in 0..3 {
        let ax = grid.axis(a);
        if a == 2 || e == 0 {
            point.push(vec![1.0; ax.count]);
            mid.push(vec![1.0; ax.count - 1]);
        } else {
            point.push(
                (0..ax.count)
                    .map(|i| w.weight_coord(a, ax.coord(i)).powi(e))
                    .collect(),
            );
            mid.push(
                (0..ax.count - 1)
                    .map(|i| (ax.coord(i) + 0.5 * ax.spacing).powi(e))
                    .collect(),
            );
        }
    }
    SeparableWeight { point, mid }
}

/// Saddle-solve output: the wedge minimiser and its odd reflection.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub wedge: Solution,
    /// `v` on `[0, R]² x [0, L]` in `(s, t, λ)`, odd under `s ↔ t`.
    pub reflected: ScalarField,
    pub m: usize,
    pub radius: f64,
}

impl SaddleSolution {
    /// Trace on the square `[-a, a]²` of `R²` (`m = 1`), `a ≤ R/√2`, by even
    /// reflection in both coordinates.
    pub fn plane_trace(&self) -> Result<ScalarField> {
        if self.m != 1 {
            return Err(Error::Unsupported(
                "plane traces exist only for m = 1".into(),
            ));
        }
        let g = self.reflected.grid();
        let h = g.spacing(0);
        let steps = ((self.radius / std::f64::consts::SQRT_2) / h).floor() as usize;
        let ax = Axis::new(-(steps as f64) * h, h, 2 * steps + 1);
        let base = UniformGrid::new(vec![ax, ax])?;
        let kl = g.count(2);
        let ct = g.count(1);
        let values = (0..base.len())
            .map(|b| {
                let (i, j) = (b / ax.count, b % ax.count);
                let si = i.abs_diff(steps);
                let tj = j.abs_diff(steps);
                self.reflected.get((si * ct + tj) * kl)
            })
            .collect();
        ScalarField::new(base.clone(), values, vec![true; base.len()])
    }

    /// Full-space energy of the wedge solution restricted to `s² + t² ≤ r²`,
    /// `λ ≤ r`, as `(dirichlet, potential)` with zero offset.
    pub fn energy_in(&self, wedge: &WedgeDomain, nl: &Nonlinearity, r: f64) -> Result<EnergyParts> {
        let grid = wedge.grid();
        let tol = 1e-9 * grid.spacing(0);
        let region: Vec<bool> = (0..grid.len())
            .map(|p| {
                let x = grid.point(p);
                wedge.inside()[p]
                    && x[0] * x[0] + x[1] * x[1] <= r * r * (1.0 + 1e-12)
                    && x[2] <= r + tol
            })
            .collect();
        let weight = (wedge.m > 1).then(|| wedge_weight(wedge));
        let func = EnergyFunctional::new(grid, &region, weight, nl.clone(), 0.0)?;
        let parts = func.parts(self.wedge.field.values());
        let k = wedge.symmetry_factor();
        Ok(EnergyParts {
            dirichlet: k * parts.dirichlet,
            potential: k * parts.potential,
        })
    }
}

/// Weighted energy minimisation on the wedge with `v = 0` on the cone, the
/// arc and the top, and `v ≥ 0`.
pub fn saddle_minimize(
    wedge: &WedgeDomain,
    nl: &Nonlinearity,
    cfg: &SolveConfig,
) -> std::result::Result<SaddleSolution, SolveError> {
    let grid = wedge.grid();
    cfg.validate(grid)?;
    let hyp = check_hypotheses(nl);
    if !hyp.all() {
        log::warn!(
            "saddle_minimize: {} fails the structural hypotheses: {hyp:?}",
            nl.name()
        );
    }
    let free = wedge.free();
    let bounds = Bounds::from_config(cfg, grid.len(), Some(0.0)).expect("lower bound present");
    let x0: Vec<f64> = (0..grid.len())
        .map(|p| {
            if !free[p] {
                return 0.0;
            }
            match &cfg.init {
                InitPolicy::Field(f) => f.get(p),
                InitPolicy::Constant(c) => *c,
                InitPolicy::Layer { .. } => {
                    let x = grid.point(p);
                    ((x[0] - x[1]) / std::f64::consts::SQRT_2).tanh()
                }
            }
        })
        .collect();
    let weight = (wedge.m > 1).then(|| wedge_weight(wedge));
    let prob = MaskedProblem {
        grid,
        region: wedge.inside(),
        free: &free,
        weight,
        nl,
    };
    let out = solve_cascade(&prob, x0, Some(&bounds), cfg, cfg.cascade_levels)?;
    let trivial = out.failure.is_none() && out.x.iter().all(|&v| v.abs() <= 1e-9);
    let mut sol = finish(out, grid, wedge.inside());
    if trivial {
        if let Ok(s) = sol {
            sol = Err(SolveError::Failed {
                kind: SolveFailure::Trivial,
                last: Box::new(s),
            });
        }
    }
    let sol = sol?;
    let reflected = reflect(wedge, &sol.field)?;
    Ok(SaddleSolution {
        wedge: sol,
        reflected,
        m: wedge.m,
        radius: wedge.radius,
    })
}

fn reflect(wedge: &WedgeDomain, v: &ScalarField) -> Result<ScalarField> {
    let g = wedge.grid();
    let s_ax = *g.axis(0);
    let l_ax = *g.axis(2);
    let sq = UniformGrid::new(vec![s_ax, s_ax, l_ax])?;
    let r2 = wedge.radius * wedge.radius * (1.0 + 1e-12);
    let ct = g.count(1);
    let kl = l_ax.count;
    let mut values = vec![0.0; sq.len()];
    let mut mask = vec![false; sq.len()];
    for p in 0..sq.len() {
        let idx = sq.unflatten(p);
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let (s, t) = (s_ax.coord(i), s_ax.coord(j));
        if s * s + t * t > r2 {
            continue;
        }
        let (a, b, sign) = if j <= i { (i, j, 1.0) } else { (j, i, -1.0) };
        if b >= ct {
            continue;
        }
        let q = (a * ct + b) * kl + k;
        if !v.mask()[q] {
            continue;
        }
        mask[p] = true;
        values[p] = if a == b { 0.0 } else { sign * v.get(q) };
    }
    ScalarField::new(sq, values, mask)
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Fraction of adjacent in-mask pairs along `axis` with `v` decreasing by
/// more than `1e-9`.
pub fn monotone_violation(v: &ScalarField, axis: usize) -> f64 {
    let g = v.grid();
    let m = v.mask();
    let (mut pairs, mut bad) = (0usize, 0usize);
    for p in 0..g.len() {
        if let Some(q) = g.neighbor(p, axis, true) {
            if m[p] && m[q] {
                pairs += 1;
                if v.get(q) - v.get(p) < -1e-9 {
                    bad += 1;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        bad as f64 / pairs as f64
    }
}

fn require_monotone(v: &ScalarField, axis: usize) -> Result<()> {
    let frac = monotone_violation(v, axis);
    if frac > 0.01 {
        return Err(Error::NotMonotone {
            axis,
            violation_fraction: frac,
        });
    }
    Ok(())
}

/// Sliding profile `t ↦ E_{C_R}(v^t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideProfile {
    pub entries: Vec<(f64, EnergyParts)>,
    /// Set when some requested shifts left the computed field.
    pub truncated: bool,
}

/// Energies (zero potential offset) of the sub-cylinders of radius `r`
/// centred at `centre + t e_axis` for every shift `t`.
pub fn slide_energy_profile(
    domain: &CylinderDomain,
    v: &ScalarField,
    nl: &Nonlinearity,
    r: f64,
    axis: usize,
    shifts: &[f64],
) -> Result<SlideProfile> {
    if v.grid() != domain.grid() {
        return Err(Error::GridMismatch);
    }
    if axis >= domain.n {
        return Err(Error::InvalidArgument(
            "sliding axis must be a base axis".into(),
        ));
    }
    require_monotone(v, axis)?;
    let grid = domain.grid();
    let tol = 1e-9 * grid.spacing(0);
    let mut entries = Vec::new();
    let mut truncated = false;
    for &t in shifts {
        let mut c = domain.center().to_vec();
        c[axis] += t;
        let fits = r <= domain.height + tol
            && (0..domain.n).all(|a| {
                let ax = grid.axis(a);
                c[a] - r >= ax.origin - tol && c[a] + r <= ax.end() + tol
            });
        if !fits {
            log::warn!("slide_energy_profile: shift {t} leaves the computed field; list truncated");
            truncated = true;
            break;
        }
        let region = domain.sub_cylinder(r, &c);
        let func = EnergyFunctional::new(grid, &region, None, nl.clone(), 0.0)?;
        entries.push((t, func.parts(v.values())));
    }
    Ok(SlideProfile { entries, truncated })
}

/// Approximate limits of a solution at both ends of one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitProfiles {
    /// Counts of the remaining axes (the last one is `λ`).
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `inf` and `sup` of the lower trace.
    pub m: f64,
    pub m_tilde: f64,
    /// `inf` and `sup` of the upper trace.
    pub big_m_tilde: f64,
    pub big_m: f64,
}

/// Averages of `v` over the outer `edge_fraction` of `axis` at each end.
pub fn limit_profiles(v: &ScalarField, axis: usize, edge_fraction: f64) -> Result<LimitProfiles> {
    let g = v.grid();
    let d = g.dim();
    if axis + 1 >= d {
        return Err(Error::InvalidArgument(
            "limit axis must be a base axis".into(),
        ));
    }
    if !(edge_fraction > 0.0 && edge_fraction <= 0.5) {
        return Err(Error::InvalidArgument(
            "edge_fraction must lie in (0, 1/2]".into(),
        ));
    }
    require_monotone(v, axis)?;
    let na = g.count(axis);
    let width = ((edge_fraction * na as f64).round() as usize).max(1);
    let shape: Vec<usize> = (0..d).filter(|&a| a != axis).map(|a| g.count(a)).collect();
    let rest: usize = shape.iter().product();
    let klen = g.count(d - 1);
    let mut lower = vec![f64::NAN; rest];
    let mut upper = vec![f64::NAN; rest];
    let mut idx = [0usize; MAX_DIM];
    for r in 0..rest {
        let mut rem = r;
        for a in (0..d).rev().filter(|&a| a != axis) {
            idx[a] = rem % g.count(a);
            rem /= g.count(a);
        }
        let avg = |range: std::ops::Range<usize>, idx: &mut [usize; MAX_DIM]| {
            let (mut s, mut c) = (0.0, 0usize);
            for i in range {
                idx[axis] = i;
                let p = g.flat(&idx[..d]);
                if v.mask()[p] {
                    s += v.get(p);
                    c += 1;
                }
            }
            if c > 0 {
                s / c as f64
            } else {
                f64::NAN
            }
        };
        lower[r] = avg(0..width, &mut idx);
        upper[r] = avg(na - width..na, &mut idx);
    }
    let trace = |prof: &[f64]| -> (f64, f64) {
        prof.iter()
            .step_by(klen)
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    };
    let (m, m_tilde) = trace(&lower);
    let (big_m_tilde, big_m) = trace(&upper);
    Ok(LimitProfiles {
        shape,
        lower,
        upper,
        m,
        m_tilde,
        big_m_tilde,
        big_m,
    })
}

/// Largest relative error between `∇E · d` and central differences of `E`
/// along each direction.
pub fn gradient_check(
    func: &EnergyFunctional,
    v: &[f64],
    active: &[bool],
    directions: &[Vec<f64>],
    eps: f64,
) -> f64 {
    let g = func.gradient(v, active);
    directions
        .iter()
        .map(|dir| {
            let step = |t: f64| -> Vec<f64> {
                v.iter()
                    .zip(dir)
                    .zip(active)
                    .map(|((&x, &d), &a)| if a { x + t * d } else { x })
                    .collect()
            };
            let fd = (func.energy(&step(eps)) - func.energy(&step(-eps))) / (2.0 * eps);
            let an = det_sum(v.len(), |p| if active[p] { g[p] * dir[p] } else { 0.0 });
            (fd - an).abs() / an.abs().max(fd.abs()).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Energy changes `E(v + δ_k) - E(v)` for perturbations `δ_k`, applied only
/// at free points.
pub fn perturbation_changes(
    func: &EnergyFunctional,
    v: &[f64],
    free: &[bool],
    perturbations: &[Vec<f64>],
) -> Vec<f64> {
    let e0 = func.energy(v);
    perturbations
        .iter()
        .map(|delta| {
            let w: Vec<f64> = v
                .iter()
                .zip(delta)
                .zip(free)
                .map(|((&x, &d), &f)| if f { x + d } else { x })
                .collect();
            func.energy(&w) - e0
        })
        .collect()
}
