//! Seeded random inputs for tests and probe batteries.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::lattice::{LatticeSpec, SpinorField, Space};

pub fn random_field(spec: LatticeSpec, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..spec.spinor_dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SpinorField::from_values(spec, Space::Position, values)
}

/// Smooth normalized spinor with a Gaussian profile around a random center.
pub fn gaussian_field(spec: LatticeSpec, seed: u64, width: f64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = spec.box_length();
    let center = [
        rng.random_range(0.0..l),
        rng.random_range(0.0..l),
        rng.random_range(0.0..l),
    ];
    gaussian_field_with(spec, &mut rng, width, center)
}

/// Same profile, pinned center.
pub fn gaussian_field_at(
    spec: LatticeSpec,
    seed: u64,
    width: f64,
    center: [f64; 3],
) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_field_with(spec, &mut rng, width, center)
}

fn gaussian_field_with(
    spec: LatticeSpec,
    rng: &mut ChaCha8Rng,
    width: f64,
    center: [f64; 3],
) -> SpinorField {
    let spinor: Vec<Complex64> = (0..4)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut f = SpinorField::zero(spec);
    for s in 0..spec.sites() {
        let d = spec.torus_distance(spec.position(s), center);
        let amp = (-d * d / (2.0 * width * width)).exp();
        for c in 0..4 {
            f.values_mut()[s * 4 + c] = spinor[c] * amp;
        }
    }
    let nrm = f.norm_l2();
    f.scale(Complex64::new(1.0 / nrm, 0.0));
    f
}

pub fn rel_err(got: &[Complex64], want: &[Complex64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in got.iter().zip(want.iter()) {
        num += (a - b).norm_sqr();
        den += b.norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn rel_err_real(got: &[f64], want: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in got.iter().zip(want.iter()) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
