//! Closed-form layer solutions and layer-shaped initial guesses.
//!
//! For `f(u) = sin(πu)` the function `v(x, λ) = (2/π) arctan(πx / (1 + πλ))`
//! is harmonic in the half-plane and satisfies `-∂_λ v = sin(πv)` on
//! `λ = 0`; its trace is `u(x) = (2/π) arctan(πx)`.

use std::f64::consts::{FRAC_1_PI, PI};

/// Trace `u(x) = (2/π) arctan(πx)`.
#[inline]
pub fn sine_layer_trace(x: f64) -> f64 {
    2.0 * FRAC_1_PI * (PI * x).atan()
}

/// Extension `v(x, λ)`.
#[inline]
pub fn sine_layer(x: f64, lambda: f64) -> f64 {
    2.0 * FRAC_1_PI * (PI * x / (1.0 + PI * lambda)).atan()
}

/// `(∂_x v, ∂_λ v)`.
#[inline]
pub fn sine_layer_gradient(x: f64, lambda: f64) -> (f64, f64) {
    let a = PI * x;
    let b = 1.0 + PI * lambda;
    let r2 = a * a + b * b;
    (2.0 * b / r2, -2.0 * a / r2)
}

/// `|∇v| = (2/π) / dist((x, λ), (0, -1/π))`.
#[inline]
pub fn sine_layer_gradient_norm(x: f64, lambda: f64) -> f64 {
    2.0 * FRAC_1_PI / x.hypot(lambda + FRAC_1_PI)
}

/// The layer in direction `dir` (unit vector of base coordinates) through
/// `offset`: `v(x, λ) = sine_layer(dir·x - offset, λ)`. `point` holds the
/// base coordinates followed by `λ`.
pub fn tilted_sine_layer(point: &[f64], dir: &[f64], offset: f64) -> f64 {
    let n = dir.len();
    let s: f64 = dir.iter().zip(point).map(|(d, x)| d * x).sum();
    sine_layer(s - offset, point[n])
}

/// `tanh(dir·x)`, independent of `λ`.
pub fn tanh_profile(point: &[f64], dir: &[f64]) -> f64 {
    let s: f64 = dir.iter().zip(point).map(|(d, x)| d * x).sum();
    s.tanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_and_extension_agree() {
        for i in -20..=20 {
            let x = 0.37 * i as f64;
            assert_eq!(sine_layer(x, 0.0), sine_layer_trace(x));
        }
        assert!((sine_layer_trace(1e9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = 1e-6;
        for &(x, l) in &[(0.0, 0.0), (0.3, 0.1), (-2.0, 1.5), (5.0, 7.0)] {
            let (gx, gl) = sine_layer_gradient(x, l);
            let fx = (sine_layer(x + e, l) - sine_layer(x - e, l)) / (2.0 * e);
            let fl = (sine_layer(x, l + e) - sine_layer(x, l - e)) / (2.0 * e);
            assert!((gx - fx).abs() < 1e-7 && (gl - fl).abs() < 1e-7);
            assert!((gx.hypot(gl) - sine_layer_gradient_norm(x, l)).abs() < 1e-12);
        }
    }

    #[test]
    fn continuum_neumann_condition_holds() {
        for i in -40..=40 {
            let x = 0.25 * i as f64;
            let (_, gl) = sine_layer_gradient(x, 0.0);
            let u = sine_layer_trace(x);
            assert!((-gl - (PI * u).sin()).abs() < 1e-13, "x = {x}");
        }
    }
}
