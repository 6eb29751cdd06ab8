//! Self-consistent-field driver: densities -> fields -> Hamiltonians ->
//! occupied positive eigenstates, iterated with linear density mixing until
//! fixed point.

use serde::{Deserialize, Serialize};

use crate::error::RmfError;
use crate::fields::{compute_densities, solve_fields, DensitySet, ModelParams, OrbitalSet};
use crate::hamiltonian::{validate_regime, MeanFieldOperator, RegimeReport, Species, SpectralData};
use crate::lattice::{LatticeSpec, SpinorField};
use crate::variational::{el_residual, energy, DensityMatrixPair};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SCFConfig {
    pub max_iterations: usize,
    /// linear density mixing parameter, in (0, 1]
    pub theta: f64,
    /// convergence: max |delta epsilon_i|
    pub tol_eps: f64,
    /// convergence: L2 residual between candidate and current densities
    pub tol_density: f64,
    /// convergence: Euler-Lagrange residual
    pub tol_el: f64,
    /// refusal margin for eigenvalues at 0
    pub zero_tol: f64,
    pub dense_cap: usize,
    /// proceed with a warning when the regime validator fails
    pub allow_regime_violation: bool,
}

impl Default for SCFConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            theta: 0.3,
            tol_eps: 1e-9,
            tol_density: 1e-9,
            tol_el: 1e-8,
            zero_tol: 1e-9,
            dense_cap: 4096,
            allow_regime_violation: false,
        }
    }
}

impl SCFConfig {
    pub fn validate(&self) -> Result<(), RmfError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(RmfError::Config(format!(
                "scf.theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        for (name, t) in [
            ("tol_eps", self.tol_eps),
            ("tol_density", self.tol_density),
            ("tol_el", self.tol_el),
            ("zero_tol", self.zero_tol),
        ] {
            if !(t > 0.0) {
                return Err(RmfError::Config(format!("scf.{name} must be positive, got {t}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(RmfError::Config("scf.max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub total_energy: f64,
    pub max_delta_eps: f64,
    pub density_residual: f64,
    pub el_residual: f64,
    pub epsilons_p: Vec<f64>,
    pub epsilons_n: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SCFReport {
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub orbitals: OrbitalSet,
    pub epsilons_p: Vec<f64>,
    pub epsilons_n: Vec<f64>,
    pub total_energy: f64,
    pub el_residual_max: f64,
    pub commutator_residual: (f64, f64),
    pub regime: RegimeReport,
    pub degenerate_fermi_level: bool,
    /// lambda targets actually used (after dropping zeros)
    pub lambda_p: Vec<f64>,
    pub lambda_n: Vec<f64>,
}

/// Lowest `count` strictly positive eigenstates, scaled to squared norm
/// lambda_i. Refuses on a level inside the zero_tol window or when fewer
/// than `count` positive levels exist. Also reports the bare eigenvalues and
/// whether the last occupied level is degenerate with the first empty one.
fn occupy(
    data: &SpectralData,
    lambda: &[f64],
    zero_tol: f64,
) -> Result<(Vec<SpinorField>, Vec<f64>, bool), RmfError> {
    let count = lambda.len();
    let min_abs = data.min_abs_eigenvalue();
    if min_abs < zero_tol {
        return Err(RmfError::GapCollapse { value: min_abs, tol: zero_tol });
    }
    let positive: Vec<usize> = (0..data.dim()).filter(|&i| data.eigenvalues[i] > 0.0).collect();
    if positive.len() < count {
        return Err(RmfError::NotEnoughPositiveLevels { needed: count, found: positive.len() });
    }
    let mut orbitals = Vec::with_capacity(count);
    let mut eps = Vec::with_capacity(count);
    for (j, &i) in positive.iter().take(count).enumerate() {
        let state = data.state(i).scaled(Complex64::new(lambda[j].sqrt(), 0.0));
        orbitals.push(state);
        eps.push(data.eigenvalues[i]);
    }
    let degenerate = if count > 0 && positive.len() > count {
        (data.eigenvalues[positive[count]] - data.eigenvalues[positive[count - 1]]).abs() < 1e-12
    } else {
        false
    };
    Ok((orbitals, eps, degenerate))
}

fn max_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Unconstrained problem: unit-norm orbitals (all lambda = 1).
pub fn scf_solve(
    params: &ModelParams,
    lattice: &LatticeSpec,
    config: &SCFConfig,
) -> Result<SCFReport, RmfError> {
    let lambda = vec![1.0; params.a()];
    scf_solve_constrained(params, lattice, config, &lambda)
}

/// Fractional-norm problem I(lambda): Gram targets diag(lambda). Entries
/// with lambda_i = 0 are dropped from the working set. The first Z entries
/// of lambda are proton targets, the remaining N are neutron targets.
pub fn scf_solve_constrained(
    params: &ModelParams,
    lattice: &LatticeSpec,
    config: &SCFConfig,
    lambda: &[f64],
) -> Result<SCFReport, RmfError> {
    params.validate()?;
    config.validate()?;
    if lambda.len() != params.a() {
        return Err(RmfError::Config(format!(
            "lambda must have length A = {}, got {}",
            params.a(),
            lambda.len()
        )));
    }
    if lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
        return Err(RmfError::Config("lambda entries must lie in [0, 1]".into()));
    }
    let regime = validate_regime(params);
    if !regime.all_ok() && !config.allow_regime_violation {
        return Err(RmfError::RegimeViolation(format!(
            "smallness conditions failed: 2.4 ok={} 2.5 ok={} 2.6 ok={} d_p={:.6} d_n={:.6} (need < 4/5)",
            regime.cond_2_4, regime.cond_2_5, regime.cond_2_6, regime.d_p, regime.d_n
        )));
    }
    let lambda_p: Vec<f64> =
        lambda[..params.z].iter().copied().filter(|&l| l > 0.0).collect();
    let lambda_n: Vec<f64> =
        lambda[params.z..].iter().copied().filter(|&l| l > 0.0).collect();
    let spec = *lattice;

    // initial guess: free eigenstates, lowest momenta, via the same
    // eigensolver used in the loop so the free limit converges immediately
    let free_p = MeanFieldOperator::free(spec, Species::Proton, params.m_b)
        .eig_with_cap(config.dense_cap)?;
    let free_n = MeanFieldOperator::free(spec, Species::Neutron, params.m_b)
        .eig_with_cap(config.dense_cap)?;
    let (orb_p, mut eps_p, _) = occupy(&free_p, &lambda_p, config.zero_tol)?;
    let (orb_n, mut eps_n, _) = occupy(&free_n, &lambda_n, config.zero_tol)?;
    let mut orbitals = OrbitalSet::with_targets(
        spec,
        orb_p,
        orb_n,
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            lambda_p.len(),
            lambda_p.iter().map(|&l| Complex64::new(l, 0.0)),
        )),
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            lambda_n.len(),
            lambda_n.iter().map(|&l| Complex64::new(l, 0.0)),
        )),
    )?;
    let mut rho: DensitySet = compute_densities(&orbitals)?;

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut degenerate = false;

    for iteration in 1..=config.max_iterations {
        let fields = solve_fields(&rho, params);
        let hp = MeanFieldOperator::from_fields(Species::Proton, &fields, params);
        let hn = MeanFieldOperator::from_fields(Species::Neutron, &fields, params);
        let data_p = hp.eig_with_cap(config.dense_cap)?;
        let data_n = hn.eig_with_cap(config.dense_cap)?;
        let (new_p, new_eps_p, deg_p) = occupy(&data_p, &lambda_p, config.zero_tol)?;
        let (new_n, new_eps_n, deg_n) = occupy(&data_n, &lambda_n, config.zero_tol)?;
        degenerate = deg_p || deg_n;
        let new_orbitals = OrbitalSet::with_targets(
            spec,
            new_p,
            new_n,
            orbitals.gram_target_p.clone(),
            orbitals.gram_target_n.clone(),
        )?;
        let rho_candidate = compute_densities(&new_orbitals)?;
        let density_residual = rho_candidate.distance(&rho);
        let max_delta_eps = max_delta(&new_eps_p, &eps_p).max(max_delta(&new_eps_n, &eps_n));
        let el = el_residual(&new_orbitals, params)?;
        let el_max = el.max_residual();
        let total_energy = energy(&new_orbitals, params)?.total;
        history.push(IterationRecord {
            iteration,
            total_energy,
            max_delta_eps,
            density_residual,
            el_residual: el_max,
            epsilons_p: new_eps_p.clone(),
            epsilons_n: new_eps_n.clone(),
        });
        orbitals = new_orbitals;
        eps_p = new_eps_p;
        eps_n = new_eps_n;
        if max_delta_eps <= config.tol_eps
            && density_residual <= config.tol_density
            && el_max <= config.tol_el
        {
            converged = true;
            rho = rho_candidate;
            break;
        }
        rho = rho_candidate.mix(&rho, config.theta);
    }
    let _ = rho;

    let last = history.last().expect("at least one iteration");
    let commutator_residual = if converged {
        let unit_p: Vec<SpinorField> = orbitals
            .protons
            .iter()
            .zip(&lambda_p)
            .map(|(f, &l)| f.scaled(Complex64::new(1.0 / l.sqrt(), 0.0)))
            .collect();
        let unit_n: Vec<SpinorField> = orbitals
            .neutrons
            .iter()
            .zip(&lambda_n)
            .map(|(f, &l)| f.scaled(Complex64::new(1.0 / l.sqrt(), 0.0)))
            .collect();
        match DensityMatrixPair::new(unit_p, unit_n) {
            Ok(pair) => gamma_commutator(&pair, &orbitals, params)?,
            Err(_) => (f64::NAN, f64::NAN),
        }
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SCFReport {
        converged,
        iterations: history.len(),
        total_energy: last.total_energy,
        el_residual_max: last.el_residual,
        epsilons_p: eps_p,
        epsilons_n: eps_n,
        history,
        orbitals,
        commutator_residual,
        regime,
        degenerate_fermi_level: degenerate,
        lambda_p,
        lambda_n,
    })
}

/// Commutator residuals of the unit-column projectors against the
/// Hamiltonians built from the (lambda-scaled) SCF orbitals.
fn gamma_commutator(
    pair: &DensityMatrixPair,
    orbitals: &OrbitalSet,
    params: &ModelParams,
) -> Result<(f64, f64), RmfError> {
    let per = |species: Species| -> Result<f64, RmfError> {
        let op = crate::hamiltonian::build_hamiltonian(species, orbitals, params)?;
        let h = op.dense()?;
        let g = pair.dense(species);
        Ok((&h * &g - &g * &h).norm())
    };
    Ok((per(Species::Proton)?, per(Species::Neutron)?))
}
