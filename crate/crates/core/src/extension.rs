//! Extensions of bottom data into the half-space: Poisson-kernel
//! convolution, mollifier extension, the discrete Dirichlet solve and the
//! cutoff comparison construction.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, CylinderDomain, ScalarField, UniformGrid};
use crate::reduce::{dot, CHUNK};

fn check_base(u: &ScalarField, levels: &Axis) -> Result<(usize, UniformGrid)> {
    let n = u.grid().dim();
    if !u.mask().iter().all(|&m| m) {
        return Err(Error::InvalidArgument(
            "bottom data must be defined on the whole base grid".into(),
        ));
    }
    if !(levels.origin >= 0.0) || !(levels.spacing > 0.0) || levels.count == 0 {
        return Err(Error::InvalidGrid(
            "levels must start at λ >= 0 with positive spacing".into(),
        ));
    }
    let mut axes = u.grid().axes().to_vec();
    axes.push(*levels);
    Ok((n, UniformGrid::new(axes)?))
}

/// Harmonic extension by convolution with the half-space Poisson kernel.
///
/// Outside the base box the data is continued by its edge values. In one
/// dimension the data is integrated as a piecewise linear function against
/// the exact kernel moments; in two dimensions as cell averages against the
/// exact rectangle masses. The level `λ = 0` reproduces `u`.
pub fn poisson_extend(u: &ScalarField, levels: Axis) -> Result<ScalarField> {
    let (n, grid) = check_base(u, &levels)?;
    let base_len = u.grid().len();
    let values: Vec<Vec<f64>> = (0..levels.count)
        .into_par_iter()
        .map(|k| {
            let lambda = levels.coord(k);
            if lambda == 0.0 {
                return Ok(u.values().to_vec());
            }
            match n {
                1 => Ok(poisson_level_1d(u, lambda)),
                2 => Ok(poisson_level_2d(u, lambda)),
                _ => Err(Error::Unsupported(format!(
                    "Poisson extension in base dimension {n}"
                ))),
            }
        })
        .collect::<Result<_>>()?;
    let klen = levels.count;
    let mut out = vec![0.0; grid.len()];
    for (k, level) in values.iter().enumerate() {
        for b in 0..base_len {
            out[b * klen + k] = level[b];
        }
    }
    ScalarField::new(grid.clone(), out, vec![true; grid.len()])
}

fn poisson_level_1d(u: &ScalarField, lambda: f64) -> Vec<f64> {
    let nx = u.grid().count(0);
    let h = u.grid().spacing(0);
    let uv = u.values();
    // Offsets d = j - i in -(nx-1)..=(nx-1), stored at d + nx - 1.
    let off = |d: isize| d as f64 * h;
    let a_tab: Vec<f64> = (-(nx as isize - 1)..nx as isize)
        .map(|d| (off(d) / lambda).atan() / PI)
        .collect();
    let b_tab: Vec<f64> = (-(nx as isize - 1)..nx as isize)
        .map(|d| 0.5 * lambda / PI * (off(d) * off(d) + lambda * lambda).ln())
        .collect();
    (0..nx)
        .map(|i| {
            let idx = |j: usize| j + nx - 1 - i;
            let mut s = (a_tab[idx(0)] + 0.5) * uv[0] + (0.5 - a_tab[idx(nx - 1)]) * uv[nx - 1];
            for j in 0..nx - 1 {
                let (p, q) = (idx(j), idx(j + 1));
                let (ta, tb) = (
                    off(j as isize - i as isize),
                    off(j as isize + 1 - i as isize),
                );
                let da = a_tab[q] - a_tab[p];
                let db = b_tab[q] - b_tab[p];
                s += (tb * da - db) / h * uv[j] + (db - ta * da) / h * uv[j + 1];
            }
            s
        })
        .collect()
}

/// `∫_{[0,x]x[0,y]} λ / (2π (|z|² + λ²)^{3/2}) dz`, with infinite corners.
fn rect_corner(x: f64, y: f64, lambda: f64) -> f64 {
    match (x.is_infinite(), y.is_infinite()) {
        (true, true) => 0.25 * x.signum() * y.signum(),
        (true, false) => x.signum() * (y / lambda).atan() / (2.0 * PI),
        (false, true) => y.signum() * (x / lambda).atan() / (2.0 * PI),
        (false, false) => {
            (x * y / (lambda * (x * x + y * y + lambda * lambda).sqrt())).atan() / (2.0 * PI)
        }
    }
}

fn poisson_level_2d(u: &ScalarField, lambda: f64) -> Vec<f64> {
    let g = u.grid();
    let (nx, ny) = (g.count(0), g.count(1));
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    // Edge tables: index 0 is -inf, 2N is +inf, index m + N is (m - 1/2) h.
    let edges = |nn: usize, h: f64| -> Vec<f64> {
        (0..=2 * nn)
            .map(|t| match t {
                0 => f64::NEG_INFINITY,
                t if t == 2 * nn => f64::INFINITY,
                t => (t as f64 - nn as f64 - 0.5) * h,
            })
            .collect()
    };
    let ex = edges(nx, hx);
    let ey = edges(ny, hy);
    let table: Vec<f64> = (0..ex.len())
        .flat_map(|a| ey.iter().map(move |&y| (a, y)))
        .map(|(a, y)| rect_corner(ex[a], y, lambda))
        .collect();
    let tw = ey.len();
    let uv = u.values();
    (0..nx * ny)
        .into_par_iter()
        .map(|p| {
            let (i, l) = (p / ny, p % ny);
            let edge = |k: usize, nn: usize, c: usize| -> usize {
                if k == 0 {
                    0
                } else if k == nn {
                    2 * nn
                } else {
                    k + nn - c
                }
            };
            let ye: Vec<usize> = (0..=ny).map(|k| edge(k, ny, l)).collect();
            let mut s = 0.0;
            for j in 0..nx {
                let (x0, x1) = (edge(j, nx, i) * tw, edge(j + 1, nx, i) * tw);
                let row = &uv[j * ny..(j + 1) * ny];
                for (m, &val) in row.iter().enumerate() {
                    let (y0, y1) = (ye[m], ye[m + 1]);
                    let mass = table[x1 + y1] - table[x0 + y1] - table[x1 + y0] + table[x0 + y0];
                    s += mass * val;
                }
            }
            s
        })
        .collect()
}

/// The bump `K(y) = c exp(-1/(1-|y|²))` on the unit ball of `R^n`, with `c`
/// making `∫K = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierKernel {
    pub n: usize,
    pub normalization: f64,
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

impl MollifierKernel {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Unsupported(format!("mollifier in dimension {n}")));
        }
        // Radial integral; the integrand vanishes to all orders at r = 1.
        let steps = 20_000;
        let dr = 1.0 / steps as f64;
        let radial: f64 = (1..steps)
            .map(|i| {
                let r = i as f64 * dr;
                r.powi(n as i32 - 1) * bump(r * r)
            })
            .sum::<f64>()
            * dr;
        let area = crate::grid::sphere_area(n);
        Ok(MollifierKernel {
            n,
            normalization: 1.0 / (area * radial),
        })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.normalization * bump(y.iter().map(|v| v * v).sum())
    }

    /// `∫K` by the tensor midpoint rule with `m` cells per unit length.
    pub fn quadrature_mass(&self, m: usize) -> f64 {
        let d = 2.0 / m as f64;
        let coord = |i: usize| -1.0 + (i as f64 + 0.5) * d;
        let total = m.pow(self.n as u32);
        let mut s = 0.0;
        let mut y = [0.0; 3];
        for t in 0..total {
            let mut r = t;
            for c in y.iter_mut().take(self.n) {
                *c = coord(r % m);
                r /= m;
            }
            s += self.eval(&y[..self.n]);
        }
        s * d.powi(self.n as i32)
    }
}

/// Result of [`mollifier_extend`].
#[derive(Debug, Clone)]
pub struct MollifiedField {
    pub field: ScalarField,
    /// `‖ζ̃(·,λ)‖_{L²} / ‖ζ‖_{L²}` per level.
    pub l2_ratios: Vec<f64>,
    pub l2_ok: bool,
}

struct StencilEntry {
    shift: [isize; 2],
    frac: [f64; 2],
    weight: f64,
}

fn mollifier_stencil(kernel: &MollifierKernel, h: &[f64], lambda: f64) -> Vec<StencilEntry> {
    let n = h.len();
    let hmax = h.iter().copied().fold(0.0, f64::max);
    let q = if lambda >= 2.0 * hmax {
        1
    } else {
        (4.0 * hmax / lambda).ceil() as isize
    };
    let reach: Vec<isize> = h
        .iter()
        .map(|&ha| (lambda / ha * q as f64).ceil() as isize)
        .collect();
    let mut out = Vec::new();
    let r1 = if n > 1 { reach[1] } else { 0 };
    for k0 in -reach[0]..=reach[0] {
        for k1 in -r1..=r1 {
            let ks = [k0, k1];
            let y: Vec<f64> = (0..n)
                .map(|a| ks[a] as f64 * h[a] / q as f64 / lambda)
                .collect();
            let w = kernel.eval(&y);
            if w <= 0.0 {
                continue;
            }
            let mut shift = [0isize; 2];
            let mut frac = [0.0; 2];
            for a in 0..n {
                shift[a] = ks[a].div_euclid(q);
                frac[a] = ks[a].rem_euclid(q) as f64 / q as f64;
            }
            out.push(StencilEntry {
                shift,
                frac,
                weight: w,
            });
        }
    }
    let total: f64 = out.iter().map(|e| e.weight).sum();
    for e in &mut out {
        e.weight /= total;
    }
    out
}

/// `ζ̃(x, λ) = ∫ λ^{-n} K((x - y)/λ) ζ(y) dy` with discrete weights normalised
/// to unit mass. Levels with `λ < 2h` use a refined stencil on which `ζ` is
/// interpolated linearly; the data is continued by its edge values.
pub fn mollifier_extend(
    zeta: &ScalarField,
    kernel: &MollifierKernel,
    levels: Axis,
) -> Result<MollifiedField> {
    let (n, grid) = check_base(zeta, &levels)?;
    if n > 2 || kernel.n != n {
        return Err(Error::Unsupported(format!(
            "mollifier extension needs a kernel of the base dimension (1 or 2), got base {n} and kernel {}",
            kernel.n
        )));
    }
    let g = zeta.grid();
    let counts: Vec<usize> = (0..n).map(|a| g.count(a)).collect();
    let h: Vec<f64> = (0..n).map(|a| g.spacing(a)).collect();
    let zv = zeta.values();
    let ny = if n == 2 { counts[1] } else { 1 };
    let clamp = |i: isize, c: usize| i.clamp(0, c as isize - 1) as usize;
    let sample = |i: usize, l: usize, e: &StencilEntry| -> f64 {
        let xs = [i as isize + e.shift[0], i as isize + e.shift[0] + 1];
        let wx = [1.0 - e.frac[0], e.frac[0]];
        let mut s = 0.0;
        if n == 1 {
            for t in 0..2 {
                if wx[t] != 0.0 {
                    s += wx[t] * zv[clamp(xs[t], counts[0])];
                }
            }
            return s;
        }
        let ys = [l as isize + e.shift[1], l as isize + e.shift[1] + 1];
        let wy = [1.0 - e.frac[1], e.frac[1]];
        for t in 0..2 {
            for r in 0..2 {
                let w = wx[t] * wy[r];
                if w != 0.0 {
                    s += w * zv[clamp(xs[t], counts[0]) * ny + clamp(ys[r], ny)];
                }
            }
        }
        s
    };
    let levels_out: Vec<Vec<f64>> = (0..levels.count)
        .map(|k| {
            let lambda = levels.coord(k);
            if lambda == 0.0 {
                return zv.to_vec();
            }
            let stencil = mollifier_stencil(kernel, &h, lambda);
            (0..zv.len())
                .into_par_iter()
                .map(|b| {
                    let (i, l) = (b / ny, b % ny);
                    stencil.iter().map(|e| e.weight * sample(i, l, e)).sum()
                })
                .collect()
        })
        .collect();
    let norm0 = dot(zv, zv).sqrt();
    let l2_ratios: Vec<f64> = levels_out
        .iter()
        .map(|lv| {
            if norm0 > 0.0 {
                dot(lv, lv).sqrt() / norm0
            } else {
                0.0
            }
        })
        .collect();
    let l2_ok = l2_ratios.iter().all(|&r| r <= 1.0 + 1e-12);
    if !l2_ok {
        warn!("mollifier extension exceeds the L² norm of its data (edge continuation)");
    }
    let klen = levels.count;
    let mut out = vec![0.0; grid.len()];
    for (k, lv) in levels_out.iter().enumerate() {
        for b in 0..zv.len() {
            out[b * klen + k] = lv[b];
        }
    }
    Ok(MollifiedField {
        field: ScalarField::new(grid.clone(), out, vec![true; grid.len()])?,
        l2_ratios,
        l2_ok,
    })
}

/// Result of [`dirichlet_solve`].
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub field: ScalarField,
    pub iterations: usize,
    /// Relative residual `‖r‖/‖b‖` after each iteration.
    pub history: Vec<f64>,
    pub max_principle_ok: bool,
}

pub const DIRICHLET_TOL: f64 = 1e-10;

/// Discrete harmonic field on the cylinder with prescribed values on the
/// bottom and on the lateral and top boundary, by conjugate gradients on the
/// standard `2d+1`-point system.
pub fn dirichlet_solve(
    domain: &CylinderDomain,
    boundary: &ScalarField,
) -> Result<DirichletSolution> {
    let grid = domain.grid();
    if boundary.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let inside = domain.inside();
    let interior = domain.interior();
    if let Some(p) = (0..grid.len()).find(|&p| inside[p] && !interior[p] && !boundary.mask()[p]) {
        return Err(Error::InvalidArgument(format!(
            "boundary data missing at point {p}"
        )));
    }
    let d = grid.dim();
    let inv_h2: Vec<f64> = (0..d).map(|a| 1.0 / grid.spacing(a).powi(2)).collect();
    let diag: f64 = 2.0 * inv_h2.iter().sum::<f64>();
    let strides: Vec<usize> = (0..d).map(|a| grid.stride(a)).collect();
    let len = grid.len();

    let mut x: Vec<f64> = (0..len)
        .map(|p| {
            if inside[p] && !interior[p] {
                boundary.get(p)
            } else {
                0.0
            }
        })
        .collect();
    let (bmin, bmax) = (0..len)
        .filter(|&p| inside[p] && !interior[p])
        .map(|p| x[p])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });

    // Right-hand side from boundary neighbours; A = -Δ_h on interior points.
    let apply = |src: &[f64], out: &mut [f64], with_boundary: bool| {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (o, slot) in chunk.iter_mut().enumerate() {
                    let p = c * CHUNK + o;
                    if !interior[p] {
                        *slot = 0.0;
                        continue;
                    }
                    let mut s = diag * src[p];
                    for a in 0..d {
                        for q in [p - strides[a], p + strides[a]] {
                            if interior[q] || with_boundary {
                                s -= inv_h2[a] * src[q];
                            }
                        }
                    }
                    *slot = s;
                }
            });
    };
    // b = Σ boundary neighbour contributions = -(A_full x_boundary) restricted.
    let mut b = vec![0.0; len];
    {
        let xb: Vec<f64> = (0..len)
            .map(|p| if interior[p] { 0.0 } else { x[p] })
            .collect();
        apply(&xb, &mut b, true);
        b.par_iter_mut().for_each(|v| *v = -*v);
    }
    let bnorm = dot(&b, &b).sqrt();
    let mut u = vec![0.0; len];
    let mut history = Vec::new();
    let mut iterations = 0;
    if bnorm > 0.0 {
        let mut r = b.clone();
        let mut pdir = r.clone();
        let mut ap = vec![0.0; len];
        let mut rr = dot(&r, &r);
        let cap = 50 * (0..d).map(|a| grid.count(a)).max().unwrap_or(1) + 1000;
        loop {
            let rel = rr.sqrt() / bnorm;
            if rel <= DIRICHLET_TOL {
                break;
            }
            if iterations >= cap || !rel.is_finite() {
                return Err(Error::LinearSolve {
                    iterations,
                    residual: rel,
                    history,
                });
            }
            apply(&pdir, &mut ap, false);
            let alpha = rr / dot(&pdir, &ap);
            u.par_iter_mut()
                .zip(&pdir)
                .for_each(|(ui, pi)| *ui += alpha * pi);
            r.par_iter_mut()
                .zip(&ap)
                .for_each(|(ri, ai)| *ri -= alpha * ai);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            pdir.par_iter_mut()
                .zip(&r)
                .for_each(|(pi, ri)| *pi = ri + beta * *pi);
            iterations += 1;
            history.push(rr.sqrt() / bnorm);
        }
    }
    for p in 0..len {
        if interior[p] {
            x[p] = u[p];
        }
    }
    let slack = 1e-8 * bmin.abs().max(bmax.abs()).max(1.0);
    let max_principle_ok = (0..len)
        .filter(|&p| interior[p])
        .all(|p| x[p] >= bmin - slack && x[p] <= bmax + slack);
    if !max_principle_ok {
        warn!("Dirichlet solution leaves the boundary range [{bmin}, {bmax}]");
    }
    Ok(DirichletSolution {
        field: ScalarField::new(grid.clone(), x, inside.to_vec())?,
        iterations,
        history,
        max_principle_ok,
    })
}

/// Quintic smoothstep `6t⁵ - 15t⁴ + 10t³`, clamped to `[0, 1]`.
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// The cutoff competitor: `g = s η_R + (1 - η_R) v(·, 0)` on the bottom and
/// `w̄` harmonic with bottom values `g` and the values of `v` elsewhere on the
/// boundary.
#[derive(Debug, Clone)]
pub struct ComparisonData {
    pub s: f64,
    /// `η_R` on the bottom.
    pub eta: ScalarField,
    /// `g` on the bottom.
    pub g: ScalarField,
    pub w_bar: ScalarField,
    /// Largest discrete gradient of `g` along the base.
    pub grad_g_sup: f64,
    pub solve: DirichletSolution,
}

/// Slack on the trace range admitted for `s`, relative to its length.
pub const S_RANGE_SLACK: f64 = 0.05;

pub fn build_comparison(
    domain: &CylinderDomain,
    v: &ScalarField,
    s: f64,
) -> Result<ComparisonData> {
    let grid = domain.grid();
    if v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let inside = domain.inside();
    if (0..grid.len()).any(|p| inside[p] && !v.mask()[p]) {
        return Err(Error::InvalidArgument(
            "field must be defined on the whole cylinder".into(),
        ));
    }
    let bottom = domain.bottom();
    let (lo, hi) = v
        .range_on(bottom)
        .ok_or_else(|| Error::InvalidArgument("empty bottom".into()))?;
    let slack = S_RANGE_SLACK * (hi - lo);
    if !s.is_finite() || s < lo - slack || s > hi + slack {
        return Err(Error::InvalidArgument(format!(
            "s = {s} lies outside the trace range [{lo}, {hi}]"
        )));
    }
    let r = domain.radius;
    let n = domain.n;
    let eta_at = |p: usize| {
        let x = grid.point(p);
        1.0 - smoothstep5(domain.base_radius_of(&x[..n]) - (r - 1.0))
    };
    let eta = ScalarField::from_fn_masked(grid.clone(), bottom.to_vec(), |x| {
        1.0 - smoothstep5(domain.base_radius_of(&x[..n]) - (r - 1.0))
    })?;
    let gvals: Vec<f64> = (0..grid.len())
        .map(|p| {
            if bottom[p] {
                let e = eta_at(p);
                s * e + (1.0 - e) * v.get(p)
            } else {
                0.0
            }
        })
        .collect();
    let g = ScalarField::new(grid.clone(), gvals.clone(), bottom.to_vec())?;
    let mut grad_g_sup: f64 = 0.0;
    for p in (0..grid.len()).filter(|&p| bottom[p]) {
        let mut sq = 0.0;
        for a in 0..n {
            let h = grid.spacing(a);
            let diff = match (grid.neighbor(p, a, true), grid.neighbor(p, a, false)) {
                (Some(q), _) if bottom[q] => (gvals[q] - gvals[p]) / h,
                (_, Some(q)) if bottom[q] => (gvals[p] - gvals[q]) / h,
                _ => 0.0,
            };
            sq += diff * diff;
        }
        grad_g_sup = grad_g_sup.max(sq.sqrt());
    }
    let bvals: Vec<f64> = (0..grid.len())
        .map(|p| if bottom[p] { gvals[p] } else { v.get(p) })
        .collect();
    let boundary = ScalarField::new(grid.clone(), bvals, inside.to_vec())?;
    let solve = dirichlet_solve(domain, &boundary)?;
    Ok(ComparisonData {
        s,
        eta,
        g,
        w_bar: solve.field.clone(),
        grad_g_sup,
        solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::dirichlet_energy;
    use crate::grid::{laplacian_residual, BaseShape};
    use crate::layer::{sine_layer, sine_layer_trace, tilted_sine_layer};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(lo: f64, hi: f64, h: f64) -> UniformGrid {
        UniformGrid::new(vec![Axis::spanning(lo, hi, h).unwrap()]).unwrap()
    }

    #[test]
    fn poisson_preserves_constants() {
        let u = ScalarField::constant(line(-3.0, 3.0, 0.1), 0.7);
        let v = poisson_extend(&u, Axis::new(0.0, 0.5, 6)).unwrap();
        assert!(v.values().iter().all(|x| (x - 0.7).abs() < 1e-12));
        let g2 = UniformGrid::new(vec![Axis::spanning(-1.0, 1.0, 0.1).unwrap(); 2]).unwrap();
        let u = ScalarField::constant(g2, -0.3);
        let v = poisson_extend(&u, Axis::new(0.0, 0.25, 4)).unwrap();
        assert!(v.values().iter().all(|x| (x + 0.3).abs() < 1e-12));
    }

    #[test]
    fn poisson_reproduces_the_layer() {
        let u = ScalarField::from_fn(line(-20.0, 20.0, 0.01), |x| sine_layer_trace(x[0]));
        let levels = Axis::new(0.0, 0.25, 9);
        let v = poisson_extend(&u, levels).unwrap();
        let mut err: f64 = 0.0;
        for p in 0..v.grid().len() {
            let x = v.grid().point(p);
            err = err.max((v.get(p) - sine_layer(x[0], x[1])).abs());
        }
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn poisson_damps_fourier_modes() {
        // cos(k·40) = 0: the edge padding matches the mean of the mode.
        let k = 51.0 * std::f64::consts::PI / 80.0;
        let u = ScalarField::from_fn(line(-40.0, 40.0, 0.02), |x| (k * x[0]).cos());
        let v = poisson_extend(&u, Axis::new(0.0, 0.1, 6)).unwrap();
        for p in 0..v.grid().len() {
            let x = v.grid().point(p);
            if x[0].abs() <= 10.0 {
                let exact = (-k * x[1]).exp() * (k * x[0]).cos();
                assert!(
                    (v.get(p) - exact).abs() <= 1e-3,
                    "({}, {}): {} vs {exact}",
                    x[0],
                    x[1],
                    v.get(p)
                );
            }
        }
    }

    #[test]
    fn poisson_2d_matches_tilted_layer() {
        let g = UniformGrid::new(vec![Axis::spanning(-6.0, 6.0, 0.1).unwrap(); 2]).unwrap();
        let dir = [0.6, 0.8];
        let u = ScalarField::from_fn(g, |x| tilted_sine_layer(&[x[0], x[1], 0.0], &dir, 0.0));
        let v = poisson_extend(&u, Axis::new(0.0, 0.5, 3)).unwrap();
        for p in 0..v.grid().len() {
            let x = v.grid().point(p);
            if x[0].abs() <= 2.0 && x[1].abs() <= 2.0 {
                let exact = tilted_sine_layer(&x[..3], &dir, 0.0);
                assert!((v.get(p) - exact).abs() < 1e-2, "{x:?}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn poisson_commutes_with_constants(c in -2.0f64..2.0, a in 0.5f64..3.0) {
            let g = line(-4.0, 4.0, 0.1);
            let u = ScalarField::from_fn(g.clone(), |x| (a * x[0]).tanh());
            let uc = u.map(|x| x + c);
            let levels = Axis::new(0.0, 0.3, 5);
            let v = poisson_extend(&u, levels).unwrap();
            let vc = poisson_extend(&uc, levels).unwrap();
            for p in 0..v.grid().len() {
                prop_assert!((vc.get(p) - v.get(p) - c).abs() < 1e-12);
            }
            // Monotone data stays monotone on every level.
            let klen = levels.count;
            for p in 0..v.grid().len() - klen {
                prop_assert!(v.get(p + klen) >= v.get(p) - 1e-14);
            }
        }
    }

    #[test]
    fn kernel_has_unit_mass() {
        for n in 1..=2 {
            let k = MollifierKernel::new(n).unwrap();
            assert!((k.quadrature_mass(2000usize.pow(1 / n as u32).max(400)) - 1.0).abs() < 1e-4);
            assert_eq!(k.eval(&vec![1.0; n]), 0.0);
            assert!(k.eval(&vec![0.0; n]) > 0.0);
        }
    }

    #[test]
    fn mollifier_preserves_constants() {
        let u = ScalarField::constant(line(-2.0, 2.0, 0.05), 0.4);
        let k = MollifierKernel::new(1).unwrap();
        let m = mollifier_extend(&u, &k, Axis::new(0.0, 0.02, 20)).unwrap();
        assert!(m.field.values().iter().all(|x| (x - 0.4).abs() < 1e-12));
        let g2 = UniformGrid::new(vec![Axis::spanning(-1.0, 1.0, 0.1).unwrap(); 2]).unwrap();
        let u = ScalarField::constant(g2, 1.5);
        let k = MollifierKernel::new(2).unwrap();
        let m = mollifier_extend(&u, &k, Axis::new(0.0, 0.05, 6)).unwrap();
        assert!(m.field.values().iter().all(|x| (x - 1.5).abs() < 1e-12));
    }

    fn random_bump_data(rng: &mut ChaCha8Rng, g: UniformGrid) -> ScalarField {
        let coeffs: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.5..4.0),
                    rng.gen_range(0.0..6.3),
                )
            })
            .collect();
        ScalarField::from_fn(g, move |x| {
            let env = (-(x[0] * x[0])).exp();
            env * coeffs
                .iter()
                .map(|(a, w, ph)| a * (w * x[0] + ph).cos())
                .sum::<f64>()
        })
    }

    #[test]
    fn mollifier_contracts_l2_for_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = MollifierKernel::new(1).unwrap();
        for _ in 0..10 {
            let u = random_bump_data(&mut rng, line(-8.0, 8.0, 0.05));
            let m = mollifier_extend(&u, &k, Axis::new(0.0, 0.05, 21)).unwrap();
            assert!(m.l2_ok, "{:?}", m.l2_ratios);
        }
    }

    #[test]
    fn harmonic_extension_has_least_dirichlet_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = MollifierKernel::new(1).unwrap();
        let d = CylinderDomain::from_extents(&[(-4.0, 4.0)], 4.0, 0.05).unwrap();
        for _ in 0..3 {
            let u = random_bump_data(&mut rng, line(-4.0, 4.0, 0.05));
            let m = mollifier_extend(&u, &k, *d.grid().axis(1)).unwrap().field;
            let w = dirichlet_solve(&d, &m).unwrap().field;
            let e_h = dirichlet_energy(&d, &w).unwrap();
            let e_m = dirichlet_energy(&d, &m).unwrap();
            assert!(e_h <= e_m * (1.0 + 1e-10), "{e_h} > {e_m}");
        }
    }

    #[test]
    fn dirichlet_reproduces_harmonic_polynomial() {
        let d = CylinderDomain::from_extents(&[(-1.0, 1.0)], 1.0, 0.05).unwrap();
        let b = d.sample(|x| x[0] * x[0] - x[1] * x[1]);
        let sol = dirichlet_solve(&d, &b).unwrap();
        for p in 0..b.grid().len() {
            assert!((sol.field.get(p) - b.get(p)).abs() < 1e-8);
        }
        assert!(sol.max_principle_ok);
        let one = d.sample(|_| 1.0);
        let sol = dirichlet_solve(&d, &one).unwrap();
        assert!(sol.field.values().iter().all(|x| (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn dirichlet_layer_error_is_second_order() {
        let err = |h: f64| {
            let d = CylinderDomain::with_height(1, 2.0, 2.0, h, BaseShape::Box).unwrap();
            let b = d.sample(|x| sine_layer(x[0], x[1]));
            let sol = dirichlet_solve(&d, &b).unwrap();
            assert!(laplacian_residual(&sol.field).sup_norm_on(d.interior()) < 1e-6);
            (0..b.grid().len())
                .map(|p| (sol.field.get(p) - b.get(p)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 > 3.0 && e1 / e2 < 5.0, "{e1} {e2}");
    }

    #[test]
    fn dirichlet_reports_cap() {
        let d = CylinderDomain::new(1, 1.0, 0.25, BaseShape::Box).unwrap();
        let partial = ScalarField::zeros(d.grid().clone())
            .with_mask(vec![false; d.grid().len()])
            .unwrap();
        assert!(matches!(
            dirichlet_solve(&d, &partial),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn comparison_fixed_point() {
        let d = CylinderDomain::new(1, 4.0, 0.1, BaseShape::Box).unwrap();
        let v = d.sample(|_| 0.3);
        let c = build_comparison(&d, &v, 0.3).unwrap();
        for p in 0..v.grid().len() {
            if d.inside()[p] {
                assert!((c.w_bar.get(p) - 0.3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn comparison_of_layer() {
        let d = CylinderDomain::new(1, 8.0, 0.1, BaseShape::Box).unwrap();
        let v = d.sample(|x| (x[0] / 2f64.sqrt()).tanh());
        let c = build_comparison(&d, &v, 1.0).unwrap();
        let g = d.grid();
        for p in 0..g.len() {
            let x = g.point(p);
            if d.bottom()[p] && x[0].abs() <= 7.0 {
                assert_eq!(c.g.get(p), 1.0);
            }
            if d.plus()[p] {
                assert_eq!(c.w_bar.get(p), v.get(p));
            }
            if d.bottom()[p] {
                assert_eq!(c.w_bar.get(p), c.g.get(p));
            }
        }
        assert!(c.grad_g_sup < 2.0 * 1.875 + 0.5);
        assert!(c.solve.max_principle_ok);
        assert!(build_comparison(&d, &v, 1.5).is_err());
    }

    #[test]
    fn smoothstep_is_monotone_with_flat_ends() {
        assert_eq!(smoothstep5(-1.0), 0.0);
        assert_eq!(smoothstep5(2.0), 1.0);
        assert_eq!(smoothstep5(0.5), 0.5);
        let mut prev = 0.0;
        for i in 0..=100 {
            let s = smoothstep5(i as f64 / 100.0);
            assert!(s >= prev);
            prev = s;
        }
    }
}
