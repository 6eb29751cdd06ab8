//! Appendix-A retraction: given orbitals with small negative-projector
//! components, produce orbitals exactly annihilated by their own negative
//! projector while preserving prescribed Gram matrices. Damped Newton on
//! F(g, Phi-) = 0 with the analytic base-point derivative as preconditioner.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RmfError;
use crate::fields::{ModelParams, OrbitalSet};
use crate::hamiltonian::{
    build_hamiltonian, field_to_coeffs, coeffs_to_field, Species, DEFAULT_ZERO_TOL,
};
use crate::lattice::SpinorField;
use crate::linalg::{self, herm_eig, herm_inv_sqrt, herm_sqrt, right_mul};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub tol: f64,
    /// backtracking factor applied when a full step does not decrease the
    /// residual
    pub damping: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iterations: 50, tol: 1e-10, damping: 0.5, max_backtracks: 8 }
    }
}

/// Input orbitals (with their Gram targets) plus solver knobs.
#[derive(Debug, Clone)]
pub struct RetractionProblem {
    pub orbitals: OrbitalSet,
    pub newton: NewtonConfig,
    /// smallness threshold on the input defect ||Lambda^- Psi~||
    pub delta_tilde: f64,
}

impl RetractionProblem {
    pub fn new(orbitals: OrbitalSet) -> Self {
        Self { orbitals, newton: NewtonConfig::default(), delta_tilde: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct RetractionReport {
    pub orbitals: OrbitalSet,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// input defect ||Lambda^-_{mu,Psi} Psi~_mu|| (L2, all orbitals)
    pub defect_in: f64,
    /// output defect measured by an independent eigendecomposition of
    /// H_{mu,Phi}
    pub defect_out: f64,
    /// ||Phi - Psi||_{L2} over all orbitals
    pub distance: f64,
}

/// Right-multiplies a set so its Gram matrix becomes exactly `target`:
/// out = fields . Gram(fields)^{-1/2} . target^{1/2}.
pub fn gram_normalize(
    fields: &[SpinorField],
    target: &DMatrix<Complex64>,
) -> Result<Vec<SpinorField>, RmfError> {
    if fields.is_empty() {
        return Ok(Vec::new());
    }
    let g = linalg::gram(fields)?;
    let b = herm_inv_sqrt(&g)? * herm_sqrt(target);
    Ok(right_mul(fields, &b))
}

fn apply_dense(m: &DMatrix<Complex64>, f: &SpinorField) -> SpinorField {
    let spec = *f.spec();
    coeffs_to_field(spec, &(m * field_to_coeffs(f)))
}

/// Orthonormal set inside the range of the given positive projector:
/// Phi~+ = P+ Psi~ . [Gram(P+ Psi~)]^{-1/2}.
pub fn positive_lift(
    tilde: &[SpinorField],
    p_plus: &DMatrix<Complex64>,
) -> Result<Vec<SpinorField>, RmfError> {
    if tilde.is_empty() {
        return Ok(Vec::new());
    }
    let projected: Vec<SpinorField> = tilde.iter().map(|f| apply_dense(p_plus, f)).collect();
    let g = linalg::gram(&projected)?;
    let cond = linalg::herm_cond(&g);
    if !cond.is_finite() || cond > 1e8 {
        return Err(RmfError::PositiveLiftIllConditioned { cond });
    }
    Ok(right_mul(&projected, &herm_inv_sqrt(&g)?))
}

/// Convenience wrapper building the projector for one species of an orbital
/// set from its own mean-field Hamiltonian.
pub fn positive_lift_species(
    orbitals: &OrbitalSet,
    params: &ModelParams,
    species: Species,
) -> Result<Vec<SpinorField>, RmfError> {
    let data = build_hamiltonian(species, orbitals, params)?.eig()?;
    let dim = data.dim();
    let p_plus =
        DMatrix::identity(dim, dim) - data.negative_projector(DEFAULT_ZERO_TOL)?;
    let set = match species {
        Species::Proton => &orbitals.protons,
        Species::Neutron => &orbitals.neutrons,
    };
    let tilde = gram_normalize(set, &DMatrix::identity(set.len(), set.len()))?;
    positive_lift(&tilde, &p_plus)
}

fn l2_norm_all(fields: &[SpinorField]) -> f64 {
    fields.iter().map(|f| f.norm_l2().powi(2)).sum::<f64>().sqrt()
}

struct SpeciesWork {
    target: DMatrix<Complex64>,
    sqrt_g: DMatrix<Complex64>,
    inv_sqrt_g: DMatrix<Complex64>,
    p_minus_psi: DMatrix<Complex64>,
    phi_plus: Vec<SpinorField>,
    phi_minus: Vec<SpinorField>,
}

impl SpeciesWork {
    /// Phi = (Phi~+ + Phi~-) . Gram^{-1/2} . G^{1/2}
    fn assemble(&self) -> Result<Vec<SpinorField>, RmfError> {
        if self.phi_plus.is_empty() {
            return Ok(Vec::new());
        }
        let sum: Vec<SpinorField> = self
            .phi_plus
            .iter()
            .zip(&self.phi_minus)
            .map(|(a, b)| a.add(b))
            .collect();
        let g = linalg::gram(&sum)?;
        Ok(right_mul(&sum, &(herm_inv_sqrt(&g)? * &self.sqrt_g)))
    }
}

/// Solves for Phi with Lambda^-_{mu,Phi} Phi_mu = 0 and Gram(Phi_mu) = G_mu.
pub fn retract(
    problem: &RetractionProblem,
    params: &ModelParams,
) -> Result<RetractionReport, RmfError> {
    let orbitals = &problem.orbitals;
    let spec = *orbitals.spec();
    let cfg = &problem.newton;

    let mut works: Vec<SpeciesWork> = Vec::new();
    let mut defect_in2 = 0.0;
    for species in [Species::Proton, Species::Neutron] {
        let (set, target) = match species {
            Species::Proton => (&orbitals.protons, orbitals.gram_target_p.clone()),
            Species::Neutron => (&orbitals.neutrons, orbitals.gram_target_n.clone()),
        };
        if !set.is_empty() {
            let (tv, _) = herm_eig(&target);
            if tv[0] <= 0.0 || *tv.last().unwrap() > 1.0 + 1e-12 {
                return Err(RmfError::GramConstraint(
                    "gram target eigenvalues must lie in (0, 1]".into(),
                ));
            }
        }
        let data = build_hamiltonian(species, orbitals, params)?.eig()?;
        let p_minus_psi = data.negative_projector(DEFAULT_ZERO_TOL)?;
        let dim = data.dim();
        let p_plus_psi = DMatrix::identity(dim, dim) - &p_minus_psi;
        let tilde = gram_normalize(set, &DMatrix::identity(set.len(), set.len()))?;
        let psi_minus: Vec<SpinorField> =
            tilde.iter().map(|f| apply_dense(&p_minus_psi, f)).collect();
        defect_in2 += l2_norm_all(&psi_minus).powi(2);
        let phi_plus = positive_lift(&tilde, &p_plus_psi)?;
        // initial guess Phi~- = Psi~- . B^{-1}, the paper's base point
        let phi_minus = if tilde.is_empty() {
            Vec::new()
        } else {
            let projected: Vec<SpinorField> =
                tilde.iter().map(|f| apply_dense(&p_plus_psi, f)).collect();
            let b_inv = herm_inv_sqrt(&linalg::gram(&projected)?)?;
            right_mul(&psi_minus, &b_inv)
        };
        works.push(SpeciesWork {
            sqrt_g: herm_sqrt(&target),
            inv_sqrt_g: herm_inv_sqrt(&target)?,
            target,
            p_minus_psi,
            phi_plus,
            phi_minus,
        });
    }
    let defect_in = defect_in2.sqrt();
    if defect_in > problem.delta_tilde {
        return Err(RmfError::ProbePrecondition(format!(
            "input defect {defect_in:.3e} exceeds delta_tilde = {}",
            problem.delta_tilde
        )));
    }

    // residual F of the current iterate, plus the current Phi
    let evaluate = |works: &[SpeciesWork]| -> Result<(f64, Vec<Vec<SpinorField>>, OrbitalSet), RmfError> {
        let phi_p = works[0].assemble()?;
        let phi_n = works[1].assemble()?;
        let phi_set = OrbitalSet::with_targets(
            spec,
            phi_p,
            phi_n,
            works[0].target.clone(),
            works[1].target.clone(),
        )?;
        let mut f_all = Vec::new();
        let mut res2 = 0.0;
        for (i, species) in [Species::Proton, Species::Neutron].into_iter().enumerate() {
            let set = match species {
                Species::Proton => &phi_set.protons,
                Species::Neutron => &phi_set.neutrons,
            };
            if set.is_empty() {
                f_all.push(Vec::new());
                continue;
            }
            let data = build_hamiltonian(species, &phi_set, params)?.eig()?;
            let p_minus_phi = data.negative_projector(DEFAULT_ZERO_TOL)?;
            let f_mu: Vec<SpinorField> = set
                .iter()
                .map(|phi| apply_dense(&works[i].p_minus_psi, &apply_dense(&p_minus_phi, phi)))
                .collect();
            res2 += l2_norm_all(&f_mu).powi(2);
            f_all.push(f_mu);
        }
        Ok((res2.sqrt(), f_all, phi_set))
    };

    let (mut residual, mut f_cur, mut phi_set) = evaluate(&works)?;
    let mut history = vec![residual];
    let mut iterations = 0;
    while residual > cfg.tol {
        if iterations >= cfg.max_iterations {
            return Err(RmfError::NewtonDivergence { iterations, residual });
        }
        iterations += 1;
        // preconditioned step: Phi~- <- Phi~- - step * P- F . G^{-1/2}
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            let mut trial: Vec<SpeciesWork> = Vec::with_capacity(2);
            for (w, f_mu) in works.iter().zip(&f_cur) {
                let mut phi_minus = w.phi_minus.clone();
                if !f_mu.is_empty() {
                    let update = right_mul(f_mu, &w.inv_sqrt_g);
                    for (pm, u) in phi_minus.iter_mut().zip(&update) {
                        let proj = apply_dense(&w.p_minus_psi, u);
                        pm.axpy(Complex64::new(-step, 0.0), &proj);
                    }
                }
                trial.push(SpeciesWork {
                    target: w.target.clone(),
                    sqrt_g: w.sqrt_g.clone(),
                    inv_sqrt_g: w.inv_sqrt_g.clone(),
                    p_minus_psi: w.p_minus_psi.clone(),
                    phi_plus: w.phi_plus.clone(),
                    phi_minus,
                });
            }
            let (r_new, f_new, phi_new) = evaluate(&trial)?;
            if r_new < residual {
                works = trial;
                residual = r_new;
                f_cur = f_new;
                phi_set = phi_new;
                accepted = true;
                break;
            }
            step *= cfg.damping;
        }
        if !accepted {
            return Err(RmfError::NewtonDivergence { iterations, residual });
        }
        history.push(residual);
    }

    // one-to-one check and independent constraint oracle
    let mut defect_out: f64 = 0.0;
    for (i, species) in [Species::Proton, Species::Neutron].into_iter().enumerate() {
        let set = match species {
            Species::Proton => &phi_set.protons,
            Species::Neutron => &phi_set.neutrons,
        };
        if set.is_empty() {
            continue;
        }
        let data = build_hamiltonian(species, &phi_set, params)?.eig()?;
        let p_minus_phi = data.negative_projector(DEFAULT_ZERO_TOL)?;
        let diff = &p_minus_phi - &works[i].p_minus_psi;
        let (dv, _) = herm_eig(&diff);
        let op_norm = dv.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        if op_norm >= 1.0 {
            return Err(RmfError::ProjectorDrift { norm: op_norm });
        }
        for phi in set {
            defect_out = defect_out.max(apply_dense(&p_minus_phi, phi).norm_l2());
        }
    }
    let mut dist2 = 0.0;
    for (a, b) in phi_set.all().zip(orbitals.all()) {
        dist2 += a.sub(b).norm_l2().powi(2);
    }
    Ok(RetractionReport {
        orbitals: phi_set,
        iterations,
        residual_history: history,
        defect_in,
        defect_out,
        distance: dist2.sqrt(),
    })
}
