//! The discrete energy
//!
//! ```text
//! E(v) = ½ Σ_edges c_e (v_q - v_p)² + Σ_{bottom} β_p (G(v_p) - c)
//! ```
//!
//! on a masked grid whose last axis is `λ`. An edge `p → q = p + e_a` with
//! both ends in the region carries `c_e = ω_e · Π_b h_b / h_a² · Π_{b≠a} τ_b`,
//! where `τ_b` is `½` for every side (`-e_b`, `+e_b`) on which both shifted
//! endpoints stay in the region. On boxes this is the tensor trapezoid rule
//! for `½∫|∇v|²` with midpoint differences. `β_p` is the trapezoid weight of
//! the bottom point in the base, times the weight `ω_p`.
//!
//! The gradient of `E` is the discrete Euler–Lagrange operator: divided by
//! the dual cell volume it is `-Δ_h v` at interior points, and divided by
//! `β_p` it is the ghost-point Neumann defect
//! `(v_0 - v_1)/h_λ - (h_λ/2) Δ_x v_0 - f(v_0)` on the bottom.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{UniformGrid, MAX_DIM};
use crate::nonlinearity::Nonlinearity;
use crate::reduce::{det_sum, CHUNK};

const TAU: [f64; 5] = [0.0, 1.0, 0.5, 0.25, 0.125];
const IN_REGION: u8 = 1;
const BOTTOM: u8 = 2;

/// A weight `ω(x) = Π_a w_a(x_a)` evaluated at grid points and at edge
/// midpoints.
#[derive(Debug, Clone)]
pub struct SeparableWeight {
    pub point: Vec<Vec<f64>>,
    pub mid: Vec<Vec<f64>>,
}

impl SeparableWeight {
    fn at(&self, idx: &[usize; MAX_DIM], d: usize) -> f64 {
        (0..d).map(|a| self.point[a][idx[a]]).product()
    }

    fn edge(&self, idx: &[usize; MAX_DIM], d: usize, a: usize, lower: usize) -> f64 {
        (0..d)
            .map(|b| {
                if b == a {
                    self.mid[a][lower]
                } else {
                    self.point[b][idx[b]]
                }
            })
            .product()
    }
}

/// Dirichlet and potential parts of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub dirichlet: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.dirichlet + self.potential
    }
}

/// Sup-norms of the Euler–Lagrange residual split by location.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `|Δ_h v|` over free points off the bottom.
    pub interior: f64,
    /// Neumann defect over free bottom points.
    pub neumann: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.interior.max(self.neumann)
    }
}

/// Precomputed edge structure of the discrete energy on one region.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    grid: UniformGrid,
    /// Per point and axis: forward edge code in the low nibble, backward in
    /// the high nibble; code `k > 0` means `τ = TAU[k]`.
    codes: Vec<[u8; MAX_DIM]>,
    flags: Vec<u8>,
    /// Bottom weights indexed by base point.
    beta: Vec<f64>,
    /// `Π_b h_b / h_a²` per axis.
    base: [f64; MAX_DIM],
    weight: Option<SeparableWeight>,
    nl: Nonlinearity,
    c_offset: f64,
    klen: usize,
}

impl EnergyFunctional {
    pub fn new(
        grid: &UniformGrid,
        region: &[bool],
        weight: Option<SeparableWeight>,
        nl: Nonlinearity,
        c_offset: f64,
    ) -> Result<Self> {
        if region.len() != grid.len() {
            return Err(Error::InvalidArgument(
                "region length does not match grid".into(),
            ));
        }
        let d = grid.dim();
        if let Some(w) = &weight {
            if w.point.len() != d
                || (0..d).any(|a| {
                    w.point[a].len() != grid.count(a) || w.mid[a].len() + 1 < grid.count(a)
                })
            {
                return Err(Error::InvalidArgument(
                    "weight tables do not match grid".into(),
                ));
            }
        }
        let n = d - 1;
        let klen = grid.count(n);
        let mut base = [0.0; MAX_DIM];
        let vol = grid.cell_volume();
        for (a, b) in base.iter_mut().enumerate().take(d) {
            *b = vol / (grid.spacing(a) * grid.spacing(a));
        }
        let inr = |p: Option<usize>| matches!(p, Some(q) if region[q]);
        let edge_code = |p: usize, a: usize| -> u8 {
            let q = match grid.neighbor(p, a, true) {
                Some(q) if region[p] && region[q] => q,
                _ => return 0,
            };
            let mut halves = 0u8;
            for b in (0..d).filter(|&b| b != a) {
                let lo = inr(grid.neighbor(p, b, false)) && inr(grid.neighbor(q, b, false));
                let hi = inr(grid.neighbor(p, b, true)) && inr(grid.neighbor(q, b, true));
                match (lo, hi) {
                    (true, true) => {}
                    (false, false) => return 0,
                    _ => halves += 1,
                }
            }
            1 + halves
        };
        let mut fwd = vec![[0u8; MAX_DIM]; grid.len()];
        fwd.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, o) in chunk.iter_mut().enumerate() {
                    let p = c * CHUNK + k;
                    for (a, slot) in o.iter_mut().enumerate().take(d) {
                        *slot = edge_code(p, a);
                    }
                }
            });
        let mut codes = fwd.clone();
        codes
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, o) in chunk.iter_mut().enumerate() {
                    let p = c * CHUNK + k;
                    for (a, slot) in o.iter_mut().enumerate().take(d) {
                        if let Some(q) = grid.neighbor(p, a, false) {
                            *slot |= fwd[q][a] << 4;
                        }
                    }
                }
            });
        let flags: Vec<u8> = (0..grid.len())
            .map(|p| {
                let mut f = 0;
                if region[p] {
                    f |= IN_REGION;
                    if p % klen == 0 {
                        f |= BOTTOM;
                    }
                }
                f
            })
            .collect();
        let blen = grid.len() / klen;
        let beta: Vec<f64> = (0..blen)
            .map(|b| {
                let p = b * klen;
                if !region[p] {
                    return 0.0;
                }
                let mut w: f64 = (0..n)
                    .map(|a| {
                        let h = grid.spacing(a);
                        let mut c = 0.0;
                        if inr(grid.neighbor(p, a, false)) {
                            c += 0.5 * h;
                        }
                        if inr(grid.neighbor(p, a, true)) {
                            c += 0.5 * h;
                        }
                        c
                    })
                    .product();
                if let Some(wt) = &weight {
                    w *= wt.at(&grid.unflatten(p), d);
                }
                w
            })
            .collect();
        Ok(EnergyFunctional {
            grid: grid.clone(),
            codes,
            flags,
            beta,
            base,
            weight,
            nl,
            c_offset,
            klen,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn c_offset(&self) -> f64 {
        self.c_offset
    }

    #[inline]
    fn in_region(&self, p: usize) -> bool {
        self.flags[p] & IN_REGION != 0
    }

    #[inline]
    fn is_bottom(&self, p: usize) -> bool {
        self.flags[p] & BOTTOM != 0
    }

    /// Bottom weight `β_p` (zero off the bottom).
    #[inline]
    pub fn bottom_weight(&self, p: usize) -> f64 {
        if self.is_bottom(p) {
            self.beta[p / self.klen]
        } else {
            0.0
        }
    }

    /// Coefficients `c_e` of the forward and backward edges of `p` along `a`.
    #[inline]
    fn edge_coeffs(&self, p: usize, a: usize, idx: Option<&[usize; MAX_DIM]>) -> (f64, f64) {
        let code = self.codes[p][a];
        let (f, b) = ((code & 15) as usize, (code >> 4) as usize);
        if f == 0 && b == 0 {
            return (0.0, 0.0);
        }
        let base = self.base[a];
        match (&self.weight, idx) {
            (Some(w), Some(idx)) => {
                let d = self.grid.dim();
                let cf = if f > 0 {
                    TAU[f] * base * w.edge(idx, d, a, idx[a])
                } else {
                    0.0
                };
                let cb = if b > 0 {
                    TAU[b] * base * w.edge(idx, d, a, idx[a] - 1)
                } else {
                    0.0
                };
                (cf, cb)
            }
            _ => (TAU[f] * base, TAU[b] * base),
        }
    }

    #[inline]
    fn idx_for(&self, p: usize) -> Option<[usize; MAX_DIM]> {
        self.weight.as_ref().map(|_| self.grid.unflatten(p))
    }

    /// Dirichlet and potential parts.
    pub fn parts(&self, v: &[f64]) -> EnergyParts {
        let d = self.grid.dim();
        let dirichlet = det_sum(v.len(), |p| {
            if !self.in_region(p) {
                return 0.0;
            }
            let idx = self.idx_for(p);
            let mut s = 0.0;
            for a in 0..d {
                if self.codes[p][a] & 15 == 0 {
                    continue;
                }
                let (cf, _) = self.edge_coeffs(p, a, idx.as_ref());
                let dv = v[p + self.grid.stride(a)] - v[p];
                s += 0.5 * cf * dv * dv;
            }
            s
        });
        let klen = self.klen;
        let potential = det_sum(self.beta.len(), |b| {
            let p = b * klen;
            if self.is_bottom(p) {
                self.beta[b] * (self.nl.potential(v[p]) - self.c_offset)
            } else {
                0.0
            }
        });
        EnergyParts {
            dirichlet,
            potential,
        }
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        self.parts(v).total()
    }

    /// Gradient of the energy at the points where `active` is set; zero
    /// elsewhere. Each entry is gathered from its own neighbourhood.
    pub fn gradient_into(&self, v: &[f64], active: &[bool], out: &mut [f64]) {
        let d = self.grid.dim();
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, o) in chunk.iter_mut().enumerate() {
                    let p = c * CHUNK + k;
                    if !active[p] || !self.in_region(p) {
                        *o = 0.0;
                        continue;
                    }
                    let idx = self.idx_for(p);
                    let vp = v[p];
                    let mut s = 0.0;
                    for a in 0..d {
                        let (cf, cb) = self.edge_coeffs(p, a, idx.as_ref());
                        let st = self.grid.stride(a);
                        if cf != 0.0 {
                            s += cf * (vp - v[p + st]);
                        }
                        if cb != 0.0 {
                            s += cb * (vp - v[p - st]);
                        }
                    }
                    if self.is_bottom(p) {
                        s -= self.beta[p / self.klen] * self.nl.f(vp);
                    }
                    *o = s;
                }
            });
    }

    pub fn gradient(&self, v: &[f64], active: &[bool]) -> Vec<f64> {
        let mut g = vec![0.0; v.len()];
        self.gradient_into(v, active, &mut g);
        g
    }

    /// `dᵀ ∇²E(v) d`; `dirichlet_only` drops the potential curvature.
    pub fn curvature(&self, v: &[f64], dir: &[f64], dirichlet_only: bool) -> f64 {
        let d = self.grid.dim();
        let quad = det_sum(v.len(), |p| {
            if !self.in_region(p) {
                return 0.0;
            }
            let idx = self.idx_for(p);
            let mut s = 0.0;
            for a in 0..d {
                if self.codes[p][a] & 15 == 0 {
                    continue;
                }
                let (cf, _) = self.edge_coeffs(p, a, idx.as_ref());
                let dd = dir[p + self.grid.stride(a)] - dir[p];
                s += cf * dd * dd;
            }
            s
        });
        if dirichlet_only {
            return quad;
        }
        let klen = self.klen;
        quad + det_sum(self.beta.len(), |b| {
            let p = b * klen;
            if self.is_bottom(p) && dir[p] != 0.0 {
                self.beta[b] * self.nl.potential_second(v[p]) * dir[p] * dir[p]
            } else {
                0.0
            }
        })
    }

    /// Dual cell volume of `p` in the region (trapezoid factors times `ω`).
    pub fn dual_volume(&self, p: usize) -> f64 {
        let d = self.grid.dim();
        let mut vol = 1.0;
        for a in 0..d {
            let h = self.grid.spacing(a);
            let mut c = 0.0;
            if self.neighbor_in_region(p, a, true) {
                c += 0.5 * h;
            }
            if self.neighbor_in_region(p, a, false) {
                c += 0.5 * h;
            }
            vol *= c;
        }
        if let Some(w) = &self.weight {
            vol *= w.at(&self.grid.unflatten(p), d);
        }
        vol
    }

    fn neighbor_in_region(&self, p: usize, a: usize, fwd: bool) -> bool {
        matches!(self.grid.neighbor(p, a, fwd), Some(q) if self.in_region(q))
    }

    /// Scaled Euler–Lagrange residuals of a gradient `g` over the points of
    /// `active`.
    pub fn residuals(&self, g: &[f64], active: &[bool]) -> Residuals {
        let per_chunk: Vec<(f64, f64)> = g
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut r = (0.0f64, 0.0f64);
                for (k, &gp) in chunk.iter().enumerate() {
                    let p = c * CHUNK + k;
                    if !active[p] || !self.in_region(p) {
                        continue;
                    }
                    if self.is_bottom(p) {
                        let b = self.beta[p / self.klen];
                        if b > 0.0 {
                            r.1 = r.1.max((gp / b).abs());
                        }
                    } else {
                        let vol = self.dual_volume(p);
                        if vol > 0.0 {
                            r.0 = r.0.max((gp / vol).abs());
                        }
                    }
                }
                r
            })
            .collect();
        let (interior, neumann) = per_chunk
            .iter()
            .fold((0.0f64, 0.0f64), |acc, r| (acc.0.max(r.0), acc.1.max(r.1)));
        Residuals { interior, neumann }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, BaseShape, CylinderDomain, WedgeDomain};
    use crate::layer::sine_layer;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box2(h: f64) -> (UniformGrid, Vec<bool>) {
        let g = UniformGrid::new(vec![
            Axis::spanning(-1.0, 1.0, h).unwrap(),
            Axis::spanning(0.0, 1.0, h).unwrap(),
        ])
        .unwrap();
        let r = vec![true; g.len()];
        (g, r)
    }

    #[test]
    fn linear_field_dirichlet_energy_is_exact() {
        let (g, r) = box2(0.1);
        let e = EnergyFunctional::new(&g, &r, None, Nonlinearity::allen_cahn(), 0.0).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|p| g.point(p)[0]).collect();
        let parts = e.parts(&v);
        assert!((parts.dirichlet - 1.0).abs() < 1e-12);
        // ∫_{-1}^{1} G(x) dx for G = (1 - x²)²/4 is 4/15; trapezoid error O(h²).
        assert!((parts.potential - 4.0 / 15.0).abs() < 1e-2);
    }

    #[test]
    fn constant_field_potential_is_base_length_times_g() {
        let d = CylinderDomain::new(1, 2.0, 0.25, BaseShape::Box).unwrap();
        let e = EnergyFunctional::new(d.grid(), d.inside(), None, Nonlinearity::allen_cahn(), 0.0)
            .unwrap();
        let v = vec![0.0; d.grid().len()];
        let parts = e.parts(&v);
        assert_eq!(parts.dirichlet, 0.0);
        assert!((parts.potential - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residual_is_negative_laplacian_and_neumann_defect() {
        let h = 0.05;
        let (g, r) = box2(h);
        let e = EnergyFunctional::new(&g, &r, None, Nonlinearity::sine(), 0.0).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|p| {
                let x = g.point(p);
                sine_layer(x[0], x[1])
            })
            .collect();
        let grad = e.gradient(&v, &r);
        let kl = g.count(1);
        for p in 0..g.len() {
            let (i, k) = (p / kl, p % kl);
            if i == 0 || i == g.count(0) - 1 || k == kl - 1 {
                continue;
            }
            if k == 0 {
                let lapx = (v[p + kl] - 2.0 * v[p] + v[p - kl]) / (h * h);
                let defect =
                    (v[p] - v[p + 1]) / h - 0.5 * h * lapx - (std::f64::consts::PI * v[p]).sin();
                assert!((grad[p] / e.bottom_weight(p) - defect).abs() < 1e-9);
            } else {
                let lap = (v[p + kl] + v[p - kl] + v[p + 1] + v[p - 1] - 4.0 * v[p]) / (h * h);
                assert!((grad[p] / e.dual_volume(p) + lap).abs() < 1e-8);
            }
        }
    }

    fn fd_check(e: &EnergyFunctional, v: &[f64], active: &[bool], rng: &mut ChaCha8Rng) -> f64 {
        let g = e.gradient(v, active);
        let dir: Vec<f64> = (0..v.len())
            .map(|p| {
                if active[p] {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let eps = 1e-5;
        let plus: Vec<f64> = v.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = v.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fd = (e.energy(&plus) - e.energy(&minus)) / (2.0 * eps);
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        (fd - an).abs() / an.abs().max(1e-12)
    }

    #[test]
    fn gradient_matches_finite_differences_on_ball_and_wedge() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = CylinderDomain::new(2, 1.0, 0.125, BaseShape::Ball).unwrap();
        let e = EnergyFunctional::new(d.grid(), d.inside(), None, Nonlinearity::allen_cahn(), 0.0)
            .unwrap();
        let v: Vec<f64> = (0..d.grid().len())
            .map(|p| {
                if d.inside()[p] {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let free = d.free();
        for _ in 0..5 {
            assert!(fd_check(&e, &v, &free, &mut rng) < 1e-6);
        }
        let w = WedgeDomain::new(2, 2.0, 1.0, 0.25).unwrap();
        let weight = crate::solver::wedge_weight(&w);
        let e = EnergyFunctional::new(
            w.grid(),
            w.inside(),
            Some(weight),
            Nonlinearity::allen_cahn(),
            0.0,
        )
        .unwrap();
        let v: Vec<f64> = (0..w.grid().len())
            .map(|p| {
                if w.inside()[p] {
                    rng.gen_range(0.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let free = w.free();
        for _ in 0..5 {
            assert!(fd_check(&e, &v, &free, &mut rng) < 1e-6);
        }
    }

    #[test]
    fn curvature_matches_second_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = CylinderDomain::new(1, 1.0, 0.125, BaseShape::Box).unwrap();
        let e =
            EnergyFunctional::new(d.grid(), d.inside(), None, Nonlinearity::sine(), 0.0).unwrap();
        let v: Vec<f64> = (0..d.grid().len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let dir: Vec<f64> = (0..d.grid().len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let eps = 1e-4;
        let at = |t: f64| -> f64 {
            let w: Vec<f64> = v.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            e.energy(&w)
        };
        let fd = (at(eps) - 2.0 * at(0.0) + at(-eps)) / (eps * eps);
        let an = e.curvature(&v, &dir, false);
        assert!((fd - an).abs() < 1e-4 * an.abs().max(1.0), "{fd} vs {an}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn energy_is_bit_reproducible(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = CylinderDomain::new(1, 4.0, 0.125, BaseShape::Box).unwrap();
            let e = EnergyFunctional::new(d.grid(), d.inside(), None, Nonlinearity::allen_cahn(), 0.0).unwrap();
            let v: Vec<f64> = (0..d.grid().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = e.energy(&v);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
            let b = pool.install(|| e.energy(&v));
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
