//! Interacting ground state: the full self-consistent field loop at small
//! in-regime couplings. Prints the iteration history, the energy breakdown
//! per channel, and the stationarity diagnostics (Euler-Lagrange residuals
//! and the density-matrix commutator).
//!
//! ```bash
//! cargo run --example ground_state_scf
//! ```

use rmf::fields::ModelParams;
use rmf::hamiltonian::validate_regime;
use rmf::lattice::LatticeSpec;
use rmf::scf::{scf_solve, SCFConfig};
use rmf::variational::energy;

fn main() {
    let params = ModelParams {
        g_sigma: 0.5,
        g_omega: 0.3,
        g_rho: 0.15,
        e_charge: 0.1,
        m_sigma: 1.1,
        m_omega: 1.4,
        m_rho: 1.6,
        m_b: 1.0,
        z: 1,
        n: 1,
    };
    let spec = LatticeSpec::new(6.0, 4).unwrap();

    let regime = validate_regime(&params);
    println!("regime check: {}", regime.failure_summary());
    println!("d_p = {:.6}, d_n = {:.6}, threshold = {:.6}", regime.d_p, regime.d_n, regime.threshold);

    let report = scf_solve(&params, &spec, &SCFConfig::default()).unwrap();
    println!("\niter  total_energy          max|d eps|   density res  EL res");
    for rec in &report.history {
        println!(
            "{:4}  {:.15e}  {:.3e}   {:.3e}   {:.3e}",
            rec.iteration, rec.total_energy, rec.max_delta_eps, rec.density_residual, rec.el_residual
        );
    }

    let breakdown = energy(&report.orbitals, &params).unwrap();
    println!("\nenergy breakdown (m_b = 1 units):");
    println!("  kinetic : {:+.12}", breakdown.kinetic);
    println!("  sigma   : {:+.12}", breakdown.sigma_term);
    println!("  omega   : {:+.12}", breakdown.omega_term);
    println!("  rho     : {:+.12}", breakdown.rho_term);
    println!("  coulomb : {:+.12}", breakdown.coulomb_term);
    println!("  total   : {:+.12}", breakdown.total);

    let (cp, cn) = report.commutator_residual;
    println!("\nEL residual max          : {:.3e}", report.el_residual_max);
    println!("[H, gamma] residual (p,n): {:.3e}, {:.3e}", cp, cn);
    println!(
        "binding vs free limit    : {:+.6e}",
        report.total_energy - params.a() as f64 * params.m_b
    );
    assert!(report.converged);
}
