//! Subadditivity probe: compares the ground-state energy I of the full
//! problem with I(lambda) + I(1 - lambda) for split occupation weights.
//! Weak subadditivity (gap >= 0) always holds; a strictly positive gap is
//! the binding inequality behind compactness of minimizing sequences.
//!
//! Set RMF_THREADS=3 to run the three independent solves concurrently.
//!
//! ```bash
//! RMF_THREADS=3 cargo run --example subadditivity_probe
//! ```

use rmf::fields::ModelParams;
use rmf::lattice::LatticeSpec;
use rmf::scf::SCFConfig;
use rmf::variational::subadditivity_probe;

fn main() {
    // attractive-dominant couplings: sigma outweighs the vector channels
    let params = ModelParams {
        g_sigma: 0.5,
        g_omega: 0.2,
        g_rho: 0.1,
        e_charge: 0.05,
        m_sigma: 1.1,
        m_omega: 1.4,
        m_rho: 1.6,
        m_b: 1.0,
        z: 1,
        n: 1,
    };
    let spec = LatticeSpec::new(6.0, 4).unwrap();
    let cfg = SCFConfig::default();

    println!("lambda        I          I(l)       I(1-l)     gap         strict");
    for lambda in [[1.0, 0.0], [0.5, 0.5], [0.75, 0.25]] {
        let rep = subadditivity_probe(&params, &spec, &cfg, &lambda).unwrap();
        println!(
            "{:?}  {:.6}  {:.6}  {:.6}  {:+.3e}  {}",
            lambda, rep.i_full, rep.i_lambda, rep.i_complement, rep.gap, rep.strict
        );
        assert!(rep.gap >= -1e-7, "weak subadditivity violated");
    }
    println!("weak subadditivity holds for every split");
}
