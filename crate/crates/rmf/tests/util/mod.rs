//! Shared helpers for the integration suites: the acceptance pass/fail
//! printer and an independent closed-form oracle for the Yukawa field
//! solver (image-summed Green's-function convolution of Gaussian sources).

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use rmf::lattice::LatticeSpec;

/// One pass/fail line per acceptance criterion, then the assertion.
pub fn criterion(n: usize, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance {n:02}] {verdict} — {name}: {detail}");
    assert!(ok, "acceptance criterion {n} ({name}) failed: {detail}");
}

/// Potential of a unit-mass normalized Gaussian of width `s` under
/// (-Delta + m^2), i.e. the Yukawa kernel convolved with the Gaussian:
/// phi(r) = e^{m^2 s^2 / 2} / (8 pi r)
///          [ e^{-mr} erfc(ms/sqrt2 - r/(sqrt2 s))
///          - e^{ mr} erfc(ms/sqrt2 + r/(sqrt2 s)) ].
pub fn yukawa_gaussian_potential(r: f64, m: f64, s: f64) -> f64 {
    let a = m * s / SQRT_2;
    let b = r / (SQRT_2 * s);
    if r < 1e-10 {
        return (a * a).exp() / (8.0 * PI)
            * (-2.0 * m * erfc(a) + 2.0 * SQRT_2 / (PI.sqrt() * s) * (-a * a).exp());
    }
    (a * a).exp() / (8.0 * PI * r)
        * ((-m * r).exp() * erfc(a - b) - (m * r).exp() * erfc(a + b))
}

/// A Gaussian bump in the source mixture.
#[derive(Clone, Copy)]
pub struct Bump {
    pub amplitude: f64,
    pub center: [f64; 3],
    pub width: f64,
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Periodic Gaussian-mixture source sampled on the lattice, with explicit
/// image summation (|n|_inf <= 3).
pub fn sampled_source(spec: &LatticeSpec, bumps: &[Bump]) -> Vec<f64> {
    let l = spec.box_length();
    let mut out = vec![0.0; spec.sites()];
    for site in 0..spec.sites() {
        let x = spec.position(site);
        let mut v = 0.0;
        for bump in bumps {
            let norm = (2.0 * PI * bump.width * bump.width).powf(-1.5);
            for nx in -3i64..=3 {
                for ny in -3i64..=3 {
                    for nz in -3i64..=3 {
                        let c = [
                            bump.center[0] + nx as f64 * l,
                            bump.center[1] + ny as f64 * l,
                            bump.center[2] + nz as f64 * l,
                        ];
                        let d = euclid(x, c);
                        v += bump.amplitude
                            * norm
                            * (-d * d / (2.0 * bump.width * bump.width)).exp();
                    }
                }
            }
        }
        out[site] = v;
    }
    out
}

/// The continuum periodic solution of (-Delta + m^2) phi = source on the
/// lattice points, by image-summing the closed form (|n|_inf <= 4).
pub fn oracle_potential(spec: &LatticeSpec, bumps: &[Bump], m: f64) -> Vec<f64> {
    let l = spec.box_length();
    let mut out = vec![0.0; spec.sites()];
    for site in 0..spec.sites() {
        let x = spec.position(site);
        let mut v = 0.0;
        for bump in bumps {
            for nx in -4i64..=4 {
                for ny in -4i64..=4 {
                    for nz in -4i64..=4 {
                        let c = [
                            bump.center[0] + nx as f64 * l,
                            bump.center[1] + ny as f64 * l,
                            bump.center[2] + nz as f64 * l,
                        ];
                        let r = euclid(x, c);
                        v += bump.amplitude * yukawa_gaussian_potential(r, m, bump.width);
                    }
                }
            }
        }
        out[site] = v;
    }
    out
}

/// Relative L2 error between two real grids.
pub fn rel_l2(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
