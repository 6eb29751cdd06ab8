//! Commutator descent: for a feasible but non-stationary density-matrix
//! pair, one step of gamma^eps = exp(-eps K) gamma exp(eps K) with
//! K = [H+, gamma] lowers the energy, and the predicted first-order change
//! matches the measured change to second order in eps.
//!
//! ```bash
//! cargo run --example descent_step
//! ```

use num_complex::Complex64;
use rmf::fields::ModelParams;
use rmf::hamiltonian::{MeanFieldOperator, Species};
use rmf::lattice::LatticeSpec;
use rmf::variational::{commutator_descent_step, energy, DensityMatrixPair};

fn main() {
    let spec = LatticeSpec::new(6.0, 4).unwrap();
    let mut params = ModelParams::free(1, 1);
    params.g_sigma = 1e-2;
    params.g_omega = 1e-2;

    // non-stationary pair: mix the k = 0 level with a higher free level
    let data = MeanFieldOperator::free(spec, Species::Proton, 1.0).eig().unwrap();
    let first_pos = data.eigenvalues.iter().position(|&e| e > 0.0).unwrap();
    let c = 0.8f64;
    let s = (1.0 - c * c).sqrt();
    let mut mix = data.state(first_pos).scaled(Complex64::new(c, 0.0));
    mix.axpy(Complex64::new(s, 0.0), &data.state(first_pos + 4));
    let pair = DensityMatrixPair::new(vec![mix], vec![data.state(first_pos + 1)]).unwrap();

    let e0 = energy(&pair.as_orbitals(spec).unwrap(), &params).unwrap().total;
    println!("starting energy: {e0:.12}");
    println!("\neps       predicted dE      measured dE      |error|");
    for eps in [4e-3, 2e-3, 1e-3, 5e-4] {
        let (stepped, pred) = commutator_descent_step(&pair, &params, eps).unwrap();
        let e1 = energy(&stepped.as_orbitals(spec).unwrap(), &params).unwrap().total;
        let measured = e1 - e0;
        println!(
            "{eps:.1e}   {:+.6e}    {measured:+.6e}    {:.3e}",
            pred.predicted_first_order,
            (measured - pred.predicted_first_order).abs()
        );
        assert!(pred.predicted_first_order <= 0.0);
        assert!(e1 <= e0);
    }
    println!("\nprediction error scales as eps^2 (quarters when eps halves)");
}
