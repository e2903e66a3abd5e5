//! Test-side reference computations, independent of the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Standard normal CDF. For `z < 0`,
/// `Φ(z) = φ(z) ∫_0^∞ exp(z s - s²/2) ds`, which keeps full relative accuracy
/// deep in the lower tail.
pub fn phi(z: f64) -> f64 {
    if z > 0.0 {
        return 1.0 - phi(-z);
    }
    let dens = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    if dens == 0.0 {
        return 0.0;
    }
    dens * simpson(|s| (z * s - 0.5 * s * s).exp(), 0.0, 40.0, 40_000)
}

/// Area of the intersection of two radius-`n` disks whose centres are `rho`
/// apart.
pub fn lens_area(n: f64, rho: f64) -> f64 {
    if rho >= 2.0 * n {
        return 0.0;
    }
    2.0 * n * n * (rho / (2.0 * n)).acos() - 0.5 * rho * (4.0 * n * n - rho * rho).sqrt()
}

/// `∫_0^{hi} w(ρ) dρ` for `w` with an integrable power singularity at 0,
/// through the substitution `ρ = e^{-t}` on `(lo_t, ∞)` and Simpson on the
/// remaining piece.
pub fn radial(w: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let g = |t: f64| {
        let r = (-t).exp();
        w(r) * r
    };
    let t0 = -hi.ln();
    simpson(g, t0, t0 + 80.0, 400_000)
}

/// `∫_{(rD)^2} |z1 - z2|^{-γ²}` by radial quadrature.
pub fn euclidean_u2(gamma: f64, r: f64) -> f64 {
    radial(|rho| 2.0 * PI * rho.powf(1.0 - gamma * gamma) * lens_area(r, rho), 2.0 * r)
}

/// `P` for two points at separation `rho` with `a = 0`: the single vertex
/// condition `ψ + 2γm + x <= Q m` with `ψ ~ N(0, m)`.
pub fn p_two_points(gamma: f64, rho: f64, x: f64) -> f64 {
    let q = gamma / 2.0 + 2.0 / gamma;
    let m = (-(rho.ln()) - 1e-9).ceil().max(0.0);
    if m == 0.0 {
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    phi(((q - 2.0 * gamma) * m - x) / m.sqrt())
}

/// `u^n_2(x)`: `∫_{(nD)^2, |z1 - z2| <= e} |z1 - z2|^{-γ²} P dz` by radial
/// quadrature, summing the scale pieces `(e^{-m}, e^{-(m-1)}]` separately.
pub fn u2(n: f64, gamma: f64, x: f64) -> f64 {
    let hi = (2.0 * n).min(std::f64::consts::E);
    let w = |rho: f64| 2.0 * PI * rho.powf(1.0 - gamma * gamma) * lens_area(n, rho);
    let mut total = 0.0;
    // pieces with m >= 1
    for m in 1..400 {
        let a = (-(m as f64)).exp();
        let b = (-(m as f64 - 1.0)).exp().min(hi);
        if a >= b {
            continue;
        }
        let p = p_two_points(gamma, 0.5 * (a + b), x);
        if p == 0.0 {
            continue;
        }
        // ρ = e^{-t}
        total += p * simpson(|t| { let r = (-t).exp(); w(r) * r }, -b.ln(), -a.ln(), 2000);
    }
    if hi > 1.0 && x <= 0.0 {
        total += simpson(w, 1.0, hi, 20_000);
    }
    total
}
