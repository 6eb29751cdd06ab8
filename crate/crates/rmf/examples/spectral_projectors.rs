//! Negative spectral projectors two ways: via the dense eigendecomposition
//! of the mean-field Hamiltonian, and via the resolvent contour integral
//! (1/2pi) int (A - i eta)^{-1} (B - A) (B - i eta)^{-1} d eta for the
//! projector difference. The example checks the projector identities and
//! the agreement of the two routes.
//!
//! ```bash
//! cargo run --example spectral_projectors
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rmf::fields::{ModelParams, OrbitalSet};
use rmf::hamiltonian::{
    build_hamiltonian, coeffs_to_field, field_to_coeffs, projector_resolvent, MeanFieldOperator,
    Species,
};
use rmf::lattice::LatticeSpec;
use rmf::linalg::max_abs_diff;
use rmf::retraction::gram_normalize;
use rmf::testutil::random_field;

fn main() {
    let spec = LatticeSpec::new(6.0, 2).unwrap();
    let params = ModelParams {
        g_sigma: 0.3,
        g_omega: 0.25,
        g_rho: 0.15,
        e_charge: 0.1,
        m_sigma: 1.1,
        m_omega: 1.4,
        m_rho: 1.6,
        m_b: 1.0,
        z: 1,
        n: 1,
    };
    let id1 = DMatrix::identity(1, 1);
    let orbitals = OrbitalSet::new(
        spec,
        gram_normalize(&[random_field(spec, 21)], &id1).unwrap(),
        gram_normalize(&[random_field(spec, 22)], &id1).unwrap(),
    )
    .unwrap();

    let op_a = MeanFieldOperator::free(spec, Species::Proton, params.m_b);
    let op_b = build_hamiltonian(Species::Proton, &orbitals, &params).unwrap();

    // identities of the eigendecomposition projector
    let h = op_b.dense().unwrap();
    let p = op_b.eig().unwrap().negative_projector(1e-9).unwrap();
    let dim = p.nrows();
    let id = DMatrix::<Complex64>::identity(dim, dim);
    println!("|| P + (1-P) - 1 ||  : {:.3e}", max_abs_diff(&(&p + (&id - &p)), &id));
    println!("|| P^2 - P ||        : {:.3e}", max_abs_diff(&(&p * &p), &p));
    println!("|| P - P* ||         : {:.3e}", max_abs_diff(&p, &p.adjoint()));
    println!("|| [H, P] ||         : {:.3e}", max_abs_diff(&(&h * &p), &(&p * &h)));

    // resolvent-quadrature route for the projector difference
    let v = random_field(spec, 23);
    let via_quadrature = projector_resolvent(&op_a, &op_b, &v, 256).unwrap();
    let pa = op_a.eig().unwrap().negative_projector(1e-9).unwrap();
    let pb = op_b.eig().unwrap().negative_projector(1e-9).unwrap();
    let direct = coeffs_to_field(spec, &((&pb - &pa) * field_to_coeffs(&v)));
    let err = via_quadrature.sub(&direct).norm_l2() / v.norm_l2();
    println!("resolvent vs eigsolve: {err:.3e}");
    assert!(err < 1e-6);
    println!("both routes agree to 1e-6 with 256 quadrature nodes");
}
