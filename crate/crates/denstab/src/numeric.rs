//! Shared numerical primitives: normal special functions, unit-ball volumes,
//! and the quadrature routines the rest of the crate builds on.
//!
//! Quadrature contract: `adaptive_quad` refines by interval halving with an
//! embedded-rule error estimate until the absolute tolerance is met, and
//! reports the achieved error bound; `tensor_quad_2d` integrates on a tensor
//! grid and certifies itself by comparing against a doubled grid (Richardson
//! step), failing loudly instead of returning an uncertified number.

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.5066282746310002;

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal CDF through erfc; accurate in both tails.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation polished by one
/// Halley step against `normal_cdf`, giving ~1e-15 relative accuracy.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile needs p in (0,1), got {p}");
    // Reflect the upper tail: 1 - p is exact for p in [0.5, 1] (Sterbenz),
    // and the lower-tail erfc path avoids cancellation in the Halley step.
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley refinement; the residual is tiny so this converges fully.
    let e = normal_cdf(x) - p;
    let u = e * SQRT_2PI * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Volume of the d-dimensional Euclidean unit ball, via the two-step
/// recurrence v_d = (2π/d) v_{d-2}; exact enough for any practical d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Adaptive quadrature of `f` on [a, b] to absolute tolerance `tol`.
///
/// Simpson with interval halving; the embedded error estimate per interval is
/// |S_fine − S_coarse|/15, and the Richardson-extrapolated value is returned.
/// Errors out (with the achieved tolerance) instead of descending forever.
pub fn adaptive_quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    // Never accept an interval before this depth: integrands whose support is
    // much narrower than [a, b] can otherwise look identically zero at the
    // first few sample points.
    const MIN_DEPTH: u32 = 5;

    fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
        width / 6.0 * (fa + 4.0 * fm + fb)
    }

    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = (left + right - whole) / 15.0;
        if (depth >= MIN_DEPTH && err.abs() <= tol) || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH {
                *worst = worst.max(err.abs());
            }
            return left + right + err;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, worst)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, worst)
    }

    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::invalid("interval", format!("need finite a < b, got [{a}, {b}]")));
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let mut worst = 0.0_f64;
    let value = recurse(f, a, b, fa, fm, fb, whole, tol, 0, &mut worst);
    if worst > tol {
        return Err(Error::numerical(
            "adaptive_quad",
            format!("did not converge to {tol:.1e}; achieved {worst:.1e}"),
        ));
    }
    Ok(value)
}

/// Composite Simpson over uniformly spaced samples (`values.len()` odd).
pub fn simpson_from_samples(values: &[f64], step: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "need an odd number of samples >= 3");
    let mut sum = values[0] + values[values.len() - 1];
    for (i, v) in values.iter().enumerate().take(values.len() - 1).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    sum * step / 3.0
}

/// Tensor-grid integration over a 2-D box with a Richardson certificate:
/// Simpson on an n×n grid is accepted only if doubling the resolution moves
/// the value by less than `tol`.
pub fn tensor_quad_2d(
    f: &dyn Fn(f64, f64) -> f64,
    xa: f64,
    xb: f64,
    ya: f64,
    yb: f64,
    n_per_axis: usize,
    tol: f64,
) -> Result<f64> {
    fn pass(f: &dyn Fn(f64, f64) -> f64, xa: f64, xb: f64, ya: f64, yb: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n + 1 } else { n };
        let hx = (xb - xa) / (n - 1) as f64;
        let hy = (yb - ya) / (n - 1) as f64;
        let mut rows = Vec::with_capacity(n);
        let mut col = Vec::with_capacity(n);
        for i in 0..n {
            let x = xa + i as f64 * hx;
            col.clear();
            for j in 0..n {
                col.push(f(x, ya + j as f64 * hy));
            }
            rows.push(simpson_from_samples(&col, hy));
        }
        simpson_from_samples(&rows, hx)
    }

    let coarse = pass(f, xa, xb, ya, yb, n_per_axis);
    let fine = pass(f, xa, xb, ya, yb, 2 * n_per_axis);
    if (fine - coarse).abs() > tol {
        return Err(Error::numerical(
            "tensor_quad_2d",
            format!("Richardson check failed: |Δ| = {:.3e} > {tol:.1e}", (fine - coarse).abs()),
        ));
    }
    Ok(fine)
}
