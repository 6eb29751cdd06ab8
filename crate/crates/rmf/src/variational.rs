//! Energy functional (two algebraic routes), Euler-Lagrange residuals, the
//! density-matrix formulation with commutator stationarity and the
//! commutator-descent step, and the concentration / subadditivity probes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::RmfError;
use crate::fields::{compute_densities, solve_fields, ModelParams, OrbitalSet};
use crate::hamiltonian::{
    build_hamiltonian, coeffs_to_field, field_to_coeffs, MeanFieldOperator, Species,
    DEFAULT_ZERO_TOL,
};
use crate::lattice::{apply_h0, LatticeSpec, SpinorField};
use crate::linalg::{self, herm_eig};
use crate::scf::{scf_solve, scf_solve_constrained, SCFConfig};

/// The five pieces of the energy functional, route (i): fields times
/// densities after the closed-form field solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub sigma_term: f64,
    pub omega_term: f64,
    pub rho_term: f64,
    pub coulomb_term: f64,
    pub total: f64,
}

fn dot_dv(a: &[f64], b: &[f64], dv: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dv
}

/// Energy via the double-convolution route: each interaction term is
/// (1/2) g int field density.
pub fn energy(orbitals: &OrbitalSet, params: &ModelParams) -> Result<EnergyBreakdown, RmfError> {
    let dv = orbitals.spec().cell_volume();
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    let mut kinetic = 0.0;
    for psi in orbitals.all() {
        kinetic += psi.inner(&apply_h0(psi, params.m_b))?.re;
    }
    let sigma_term = 0.5 * params.g_sigma * dot_dv(&fields.sigma, &rho.rho_s, dv);
    let omega_term = 0.5 * params.g_omega * dot_dv(&fields.omega0, &rho.rho_0, dv);
    let rho_term = 0.5 * params.g_rho * dot_dv(&fields.r00, &rho.rho_00, dv);
    let coulomb_term = 0.5 * params.e_charge * dot_dv(&fields.a0, &rho.rho_c, dv);
    let total = kinetic + sigma_term + omega_term + rho_term + coulomb_term;
    Ok(EnergyBreakdown { kinetic, sigma_term, omega_term, rho_term, coulomb_term, total })
}

/// Energy via the operator split: sum (psi, H0 psi) + (1/2) sum (psi, V psi).
pub fn energy_split_route(orbitals: &OrbitalSet, params: &ModelParams) -> Result<f64, RmfError> {
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    let hp = MeanFieldOperator::from_fields(Species::Proton, &fields, params);
    let hn = MeanFieldOperator::from_fields(Species::Neutron, &fields, params);
    let mut total = 0.0;
    for psi in orbitals.all() {
        total += psi.inner(&apply_h0(psi, params.m_b))?.re;
    }
    for psi in &orbitals.protons {
        total += 0.5 * psi.inner(&hp.apply_potential(psi)?)?.re;
    }
    for psi in &orbitals.neutrons {
        total += 0.5 * psi.inner(&hn.apply_potential(psi)?)?.re;
    }
    Ok(total)
}

/// Lagrange multipliers and Euler-Lagrange residuals per orbital.
#[derive(Debug, Clone, Serialize)]
pub struct ElReport {
    pub epsilons_p: Vec<f64>,
    pub epsilons_n: Vec<f64>,
    pub residuals_p: Vec<f64>,
    pub residuals_n: Vec<f64>,
}

impl ElReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals_p
            .iter()
            .chain(self.residuals_n.iter())
            .fold(0.0f64, |m, &r| m.max(r))
    }
}

pub fn el_residual(orbitals: &OrbitalSet, params: &ModelParams) -> Result<ElReport, RmfError> {
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    let per = |op: &MeanFieldOperator, set: &[SpinorField]| -> Result<(Vec<f64>, Vec<f64>), RmfError> {
        let mut eps = Vec::new();
        let mut res = Vec::new();
        for (i, psi) in set.iter().enumerate() {
            let nrm2 = psi.norm_l2().powi(2);
            if nrm2 < 1e-24 {
                return Err(RmfError::ZeroNormOrbital(i));
            }
            let h_psi = op.apply(psi)?;
            let e = psi.inner(&h_psi)?.re / nrm2;
            let mut r = h_psi;
            r.axpy(Complex64::new(-e, 0.0), psi);
            eps.push(e);
            res.push(r.norm_l2());
        }
        Ok((eps, res))
    };
    let hp = MeanFieldOperator::from_fields(Species::Proton, &fields, params);
    let hn = MeanFieldOperator::from_fields(Species::Neutron, &fields, params);
    let (epsilons_p, residuals_p) = per(&hp, &orbitals.protons)?;
    let (epsilons_n, residuals_n) = per(&hn, &orbitals.neutrons)?;
    Ok(ElReport { epsilons_p, epsilons_n, residuals_p, residuals_n })
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub analytic: f64,
    pub steps: Vec<f64>,
    pub finite_differences: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub best_relative_error: f64,
    /// observed order from the two largest steps
    pub order: f64,
}

/// Central-difference check that the mean-field operators are the gradient
/// of the energy functional.
pub fn energy_gradient_check(
    orbitals: &OrbitalSet,
    params: &ModelParams,
    direction: &OrbitalSet,
    steps: &[f64],
) -> Result<GradientReport, RmfError> {
    if direction.z() != orbitals.z() || direction.n() != orbitals.n() {
        return Err(RmfError::ProbePrecondition(
            "direction must have the same orbital counts".into(),
        ));
    }
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    let hp = MeanFieldOperator::from_fields(Species::Proton, &fields, params);
    let hn = MeanFieldOperator::from_fields(Species::Neutron, &fields, params);
    let mut analytic = 0.0;
    for (psi, d) in orbitals.protons.iter().zip(&direction.protons) {
        analytic += 2.0 * hp.apply(psi)?.inner(d)?.re;
    }
    for (psi, d) in orbitals.neutrons.iter().zip(&direction.neutrons) {
        analytic += 2.0 * hn.apply(psi)?.inner(d)?.re;
    }
    let shifted = |t: f64| -> Result<f64, RmfError> {
        let mv = |set: &[SpinorField], dir: &[SpinorField]| -> Vec<SpinorField> {
            set.iter()
                .zip(dir)
                .map(|(psi, d)| {
                    let mut out = psi.clone();
                    out.axpy(Complex64::new(t, 0.0), d);
                    out
                })
                .collect()
        };
        let moved = OrbitalSet::new(
            *orbitals.spec(),
            mv(&orbitals.protons, &direction.protons),
            mv(&orbitals.neutrons, &direction.neutrons),
        )?;
        Ok(energy(&moved, params)?.total)
    };
    let mut finite_differences = Vec::new();
    let mut relative_errors = Vec::new();
    let scale = analytic.abs().max(1e-30);
    for &t in steps {
        let fd = (shifted(t)? - shifted(-t)?) / (2.0 * t);
        finite_differences.push(fd);
        relative_errors.push((fd - analytic).abs() / scale);
    }
    let best_relative_error = relative_errors.iter().copied().fold(f64::INFINITY, f64::min);
    let order = if steps.len() >= 2 && relative_errors[1] > 0.0 {
        (relative_errors[0] / relative_errors[1]).ln() / (steps[0] / steps[1]).ln()
    } else {
        f64::NAN
    };
    Ok(GradientReport {
        analytic,
        steps: steps.to_vec(),
        finite_differences,
        relative_errors,
        best_relative_error,
        order,
    })
}

/// Rank-Z and rank-N orthogonal projectors, stored by their orthonormal
/// column orbitals.
#[derive(Debug, Clone)]
pub struct DensityMatrixPair {
    pub columns_p: Vec<SpinorField>,
    pub columns_n: Vec<SpinorField>,
}

impl DensityMatrixPair {
    pub fn new(
        columns_p: Vec<SpinorField>,
        columns_n: Vec<SpinorField>,
    ) -> Result<Self, RmfError> {
        let pair = Self { columns_p, columns_n };
        pair.validate(1e-10)?;
        Ok(pair)
    }

    pub fn validate(&self, tol: f64) -> Result<(), RmfError> {
        for cols in [&self.columns_p, &self.columns_n] {
            if cols.is_empty() {
                continue;
            }
            let g = linalg::gram(cols)?;
            let id = DMatrix::identity(cols.len(), cols.len());
            let dev = linalg::max_abs_diff(&g, &id);
            if dev > tol {
                return Err(RmfError::GramConstraint(format!(
                    "density-matrix columns not orthonormal: deviation {dev:.3e}"
                )));
            }
        }
        Ok(())
    }

    pub fn as_orbitals(&self, spec: LatticeSpec) -> Result<OrbitalSet, RmfError> {
        OrbitalSet::new(spec, self.columns_p.clone(), self.columns_n.clone())
    }

    /// Dense projector matrix for one species (orthonormal delta basis).
    pub fn dense(&self, species: Species) -> DMatrix<Complex64> {
        let cols = match species {
            Species::Proton => &self.columns_p,
            Species::Neutron => &self.columns_n,
        };
        let spec = self
            .columns_p
            .first()
            .or(self.columns_n.first())
            .expect("empty density matrix")
            .spec();
        let dim = spec.spinor_dim();
        let sqrt_dv = Complex64::new(spec.cell_volume().sqrt(), 0.0);
        let mut m = DMatrix::zeros(dim, dim);
        for c in cols {
            let u = field_to_coeffs(c) * sqrt_dv;
            m += &u * u.adjoint();
        }
        m
    }
}

/// Frobenius norms of [H_p, gamma_p] and [H_n, gamma_n].
pub fn commutator_residual(
    gamma: &DensityMatrixPair,
    params: &ModelParams,
) -> Result<(f64, f64), RmfError> {
    let spec = *gamma
        .columns_p
        .first()
        .or(gamma.columns_n.first())
        .ok_or_else(|| RmfError::ProbePrecondition("empty density matrix".into()))?
        .spec();
    let orbitals = gamma.as_orbitals(spec)?;
    let per = |species: Species| -> Result<f64, RmfError> {
        let h = build_hamiltonian(species, &orbitals, params)?.dense()?;
        let g = gamma.dense(species);
        Ok((&h * &g - &g * &h).norm())
    };
    Ok((per(Species::Proton)?, per(Species::Neutron)?))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DescentPrediction {
    pub predicted_first_order: f64,
    pub epsilon: f64,
}

/// One step of the conjugated-projector descent
/// gamma^eps = exp(-eps K) gamma exp(eps K), K = [H+, gamma], evaluated
/// exactly on the K-invariant subspace spanned by gamma's columns and their
/// H+ images. Returns the stepped pair and the predicted first-order energy
/// change 2 eps sum_mu tr((H+ gamma)^2 - (H+)^2 gamma^2) <= 0.
pub fn commutator_descent_step(
    gamma: &DensityMatrixPair,
    params: &ModelParams,
    epsilon: f64,
) -> Result<(DensityMatrixPair, DescentPrediction), RmfError> {
    let spec = *gamma
        .columns_p
        .first()
        .or(gamma.columns_n.first())
        .ok_or_else(|| RmfError::ProbePrecondition("empty density matrix".into()))?
        .spec();
    let orbitals = gamma.as_orbitals(spec)?;
    let sqrt_dv = spec.cell_volume().sqrt();
    let mut predicted = 0.0;
    let mut stepped: Vec<Vec<SpinorField>> = Vec::new();
    for species in [Species::Proton, Species::Neutron] {
        let cols = match species {
            Species::Proton => &gamma.columns_p,
            Species::Neutron => &gamma.columns_n,
        };
        if cols.is_empty() {
            stepped.push(Vec::new());
            continue;
        }
        let op = build_hamiltonian(species, &orbitals, params)?;
        let data = op.eig()?;
        data.check_gap(DEFAULT_ZERO_TOL)?;
        let p_minus = data.negative_projector(DEFAULT_ZERO_TOL)?;
        let dim = data.dim();
        let id = DMatrix::<Complex64>::identity(dim, dim);
        let p_plus = &id - &p_minus;
        let h = op.dense()?;
        let h_plus = &p_plus * &h * &p_plus;
        let g = gamma.dense(species);
        let hg = &h_plus * &g;
        predicted += 2.0 * epsilon
            * ((&hg * &hg).trace().re - (&h_plus * &h_plus * &g * &g).trace().re);
        // orthonormal basis of the invariant subspace W = span(gamma, H+ gamma)
        let z = cols.len();
        let mut w = DMatrix::zeros(dim, 2 * z);
        for (j, c) in cols.iter().enumerate() {
            let u = field_to_coeffs(c) * Complex64::new(sqrt_dv, 0.0);
            let hu = &h_plus * &u;
            w.set_column(j, &u);
            w.set_column(z + j, &hu);
        }
        let qr = w.qr();
        let (q_full, r) = (qr.q(), qr.r());
        // keep numerically independent columns only
        let keep: Vec<usize> = (0..2 * z)
            .filter(|&j| r[(j, j)].norm() > 1e-10 * r[(0, 0)].norm().max(1e-300))
            .collect();
        let mut q = DMatrix::zeros(dim, keep.len());
        for (jj, &j) in keep.iter().enumerate() {
            q.set_column(jj, &q_full.column(j));
        }
        let k = &h_plus * &g - &g * &h_plus;
        let k_w = q.adjoint() * &k * &q;
        // K is anti-Hermitian, so iK is Hermitian; spectral exponential
        let a = &k_w * Complex64::new(0.0, 1.0);
        let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let (vals, vecs) = herm_eig(&a);
        let mut exp_d = DMatrix::zeros(vals.len(), vals.len());
        for (i, &l) in vals.iter().enumerate() {
            // exp(-eps K) = exp(i eps A)
            exp_d[(i, i)] = Complex64::new(0.0, epsilon * l).exp();
        }
        let exp_w = &vecs * exp_d * vecs.adjoint();
        let rot = &q * exp_w * q.adjoint();
        let mut new_cols = Vec::with_capacity(z);
        for c in cols {
            let u = field_to_coeffs(c) * Complex64::new(sqrt_dv, 0.0);
            // exp(-eps K) u = u + Q (exp_W - I) Q* u, folded into rot
            let v = &u + &rot * &u - &q * (q.adjoint() * &u);
            new_cols.push(coeffs_to_field(
                spec,
                &(v / Complex64::new(sqrt_dv, 0.0)),
            ));
        }
        stepped.push(new_cols);
    }
    let columns_n = stepped.pop().unwrap();
    let columns_p = stepped.pop().unwrap();
    let new_pair = DensityMatrixPair::new(columns_p, columns_n)?;
    Ok((new_pair, DescentPrediction { predicted_first_order: predicted, epsilon }))
}

#[derive(Debug, Clone, Serialize)]
pub struct SubadditivityReport {
    pub lambda: Vec<f64>,
    pub i_full: f64,
    pub i_lambda: f64,
    pub i_complement: f64,
    /// I(lambda) + I(1 - lambda) - I; weak subadditivity wants this >= -tol
    pub gap: f64,
    pub strict: bool,
}

/// Three SCF solves probing I <= I(lambda) + I(1 - lambda). The solves are
/// independent and run concurrently when more than one worker thread is
/// allowed via RMF_THREADS.
pub fn subadditivity_probe(
    params: &ModelParams,
    lattice: &LatticeSpec,
    config: &SCFConfig,
    lambda: &[f64],
) -> Result<SubadditivityReport, RmfError> {
    let a = params.a();
    if lambda.len() != a {
        return Err(RmfError::ProbePrecondition(format!(
            "lambda must have length A = {a}, got {}",
            lambda.len()
        )));
    }
    if lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
        return Err(RmfError::ProbePrecondition("lambda entries must lie in [0, 1]".into()));
    }
    let sum: f64 = lambda.iter().sum();
    if !(sum > 0.0 && sum < a as f64) {
        return Err(RmfError::ProbePrecondition(format!(
            "sum of lambda must lie strictly inside (0, A), got {sum}"
        )));
    }
    let complement: Vec<f64> = lambda.iter().map(|&l| 1.0 - l).collect();
    let threads: usize = std::env::var("RMF_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    let (full, lam, comp) = if threads > 1 {
        std::thread::scope(|s| {
            let h_full = s.spawn(|| scf_solve(params, lattice, config));
            let h_lam = s.spawn(|| scf_solve_constrained(params, lattice, config, lambda));
            let h_comp = s.spawn(|| scf_solve_constrained(params, lattice, config, &complement));
            (
                h_full.join().expect("scf thread"),
                h_lam.join().expect("scf thread"),
                h_comp.join().expect("scf thread"),
            )
        })
    } else {
        (
            scf_solve(params, lattice, config),
            scf_solve_constrained(params, lattice, config, lambda),
            scf_solve_constrained(params, lattice, config, &complement),
        )
    };
    let mut energies = Vec::new();
    for (name, r) in [("full", full), ("lambda", lam), ("complement", comp)] {
        let report = r?;
        if !report.converged {
            return Err(RmfError::ScfNonConvergence(format!(
                "subadditivity sub-solve '{name}' did not converge in {} iterations",
                report.iterations
            )));
        }
        energies.push(report.total_energy);
    }
    let (i_full, i_lambda, i_complement) = (energies[0], energies[1], energies[2]);
    let gap = i_lambda + i_complement - i_full;
    Ok(SubadditivityReport {
        lambda: lambda.to_vec(),
        i_full,
        i_lambda,
        i_complement,
        gap,
        strict: gap > 0.0,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConcentrationReport {
    pub radius: f64,
    pub max_fraction: f64,
    pub argmax_center: [f64; 3],
}

/// sup over lattice centers y of (1/A) sum_j int_{B(y,R)} |psi_j|^2.
pub fn concentration_profile(
    orbitals: &OrbitalSet,
    radius: f64,
) -> Result<ConcentrationReport, RmfError> {
    let spec = *orbitals.spec();
    if !(radius > 0.0) || radius > spec.box_length() / 2.0 {
        return Err(RmfError::ProbePrecondition(format!(
            "radius must lie in (0, L/2], got {radius}"
        )));
    }
    let rho = compute_densities(orbitals)?;
    let a = orbitals.a() as f64;
    let dv = spec.cell_volume();
    let weights: Vec<f64> = rho.rho_0.iter().map(|&r| r * dv / a).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_center = [0.0; 3];
    for c in 0..spec.sites() {
        let y = spec.position(c);
        let mut mass = 0.0;
        for (s, w) in weights.iter().enumerate() {
            if spec.torus_distance(spec.position(s), y) <= radius {
                mass += w;
            }
        }
        if mass > best {
            best = mass;
            best_center = y;
        }
    }
    Ok(ConcentrationReport { radius, max_fraction: best, argmax_center: best_center })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{translate, C_ONE, C_ZERO};
    use crate::testutil::{gaussian_field_at, random_field};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec4() -> LatticeSpec {
        LatticeSpec::new(6.0, 4).unwrap()
    }

    fn unit(f: SpinorField) -> SpinorField {
        let n = f.norm_l2();
        f.scaled(Complex64::new(1.0 / n, 0.0))
    }

    fn params_small() -> ModelParams {
        ModelParams {
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
        }
    }

    fn sample_orbitals(spec: LatticeSpec) -> OrbitalSet {
        OrbitalSet::new(
            spec,
            vec![unit(random_field(spec, 601))],
            vec![unit(random_field(spec, 602))],
        )
        .unwrap()
    }

    #[test]
    fn free_ground_energy_is_a_mb() {
        let spec = spec4();
        let p = unit(SpinorField::constant(spec, [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        let n1 = unit(SpinorField::constant(spec, [C_ZERO, C_ONE, C_ZERO, C_ZERO]));
        let set = OrbitalSet::new(spec, vec![p], vec![n1]).unwrap();
        let e = energy(&set, &ModelParams::free(1, 1)).unwrap();
        assert!((e.total - 2.0).abs() < 1e-12);
        assert_eq!(e.sigma_term, 0.0);
        assert_eq!(e.coulomb_term, 0.0);
    }

    #[test]
    fn sigma_only_single_proton_attractive() {
        let spec = spec4();
        let mut params = ModelParams::free(1, 0);
        params.g_sigma = 0.5;
        // upper-component state so rho_s > 0
        let p = unit(gaussian_field_at(spec, 1, 1.0, [0.0; 3]));
        let mut upper = p.to_position();
        for s in 0..spec.sites() {
            upper.values_mut()[s * 4 + 2] = C_ZERO;
            upper.values_mut()[s * 4 + 3] = C_ZERO;
        }
        let set = OrbitalSet::new(spec, vec![unit(upper)], vec![]).unwrap();
        let e = energy(&set, &params).unwrap();
        assert!(e.sigma_term < 0.0);
        assert_eq!(e.omega_term, 0.0);
        assert!((e.total - (e.kinetic + e.sigma_term)).abs() < 1e-14);
    }

    #[test]
    fn two_routes_agree_and_signs_hold() {
        let spec = spec4();
        let set = sample_orbitals(spec);
        let params = params_small();
        let e = energy(&set, &params).unwrap();
        let split = energy_split_route(&set, &params).unwrap();
        assert!((e.total - split).abs() <= 1e-10 * e.total.abs().max(1.0));
        assert!(e.sigma_term <= 0.0 || e.sigma_term.abs() < 1e-14);
        assert!(e.omega_term >= 0.0);
        assert!(e.coulomb_term >= 0.0);
        let parts = e.kinetic + e.sigma_term + e.omega_term + e.rho_term + e.coulomb_term;
        assert_eq!(parts, e.total);
    }

    #[test]
    fn energy_invariances() {
        let spec = spec4();
        let params = params_small();
        let protons = vec![unit(random_field(spec, 611)), unit(random_field(spec, 612))];
        let neutrons = vec![unit(random_field(spec, 613))];
        let set = OrbitalSet::new(spec, protons.clone(), neutrons.clone()).unwrap();
        let e0 = energy(&set, &params).unwrap().total;

        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let raw = DMatrix::from_fn(2, 2, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let u = raw.qr().q();
        let mixed = OrbitalSet::new(spec, linalg::right_mul(&protons, &u), neutrons.clone()).unwrap();
        assert!((energy(&mixed, &params).unwrap().total - e0).abs() <= 1e-9);

        let shift = [2, 1, 3];
        let shifted = OrbitalSet::new(
            spec,
            protons.iter().map(|f| translate(f, shift)).collect(),
            neutrons.iter().map(|f| translate(f, shift)).collect(),
        )
        .unwrap();
        assert!((energy(&shifted, &params).unwrap().total - e0).abs() <= 1e-10);
    }

    #[test]
    fn el_residual_free_eigenstates() {
        let spec = spec4();
        let params = ModelParams::free(1, 1);
        let p = unit(SpinorField::constant(spec, [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        let kx = spec.momentum_component(1);
        let n1 = unit(SpinorField::plane_wave(spec, [1, 0, 0], [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        // plane wave with upper spinor is not an H0 eigenstate; project onto
        // the positive branch to make one
        let n1 = unit(crate::lattice::apply_free_projector(
            crate::lattice::Sign::Plus,
            &n1,
            params.m_b,
        ));
        let set = OrbitalSet::new(spec, vec![p], vec![n1]).unwrap();
        let rep = el_residual(&set, &params).unwrap();
        assert!(rep.max_residual() <= 1e-10, "max {}", rep.max_residual());
        assert!((rep.epsilons_p[0] - 1.0).abs() < 1e-12);
        let expect = (1.0 + kx * kx).sqrt();
        assert!((rep.epsilons_n[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn el_residual_two_level_mix() {
        let spec = spec4();
        let params = ModelParams::free(1, 0);
        let e1 = 1.0;
        let kx = spec.momentum_component(1);
        let e2 = (1.0 + kx * kx).sqrt();
        let a = unit(SpinorField::constant(spec, [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        let b = unit(crate::lattice::apply_free_projector(
            crate::lattice::Sign::Plus,
            &unit(SpinorField::plane_wave(spec, [1, 0, 0], [C_ONE, C_ZERO, C_ZERO, C_ZERO])),
            params.m_b,
        ));
        let mut mix = a.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        mix.axpy(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), &b);
        let set = OrbitalSet::new(spec, vec![mix], vec![]).unwrap();
        let rep = el_residual(&set, &params).unwrap();
        let expect = (e2 - e1).abs() / 2.0;
        assert!((rep.residuals_p[0] - expect).abs() < 1e-12);
        assert!((rep.epsilons_p[0] - (e1 + e2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_check_zero_direction_and_free() {
        let spec = spec4();
        let set = sample_orbitals(spec);
        let zero_dir = OrbitalSet::new(
            spec,
            vec![SpinorField::zero(spec)],
            vec![SpinorField::zero(spec)],
        )
        .unwrap();
        let rep = energy_gradient_check(&set, &params_small(), &zero_dir, &[1e-3]).unwrap();
        assert_eq!(rep.analytic, 0.0);
        assert!(rep.finite_differences[0].abs() < 1e-12);

        // free functional is quadratic: central difference is exact
        let dir = OrbitalSet::new(
            spec,
            vec![unit(random_field(spec, 621))],
            vec![unit(random_field(spec, 622))],
        )
        .unwrap();
        let rep = energy_gradient_check(&set, &ModelParams::free(1, 1), &dir, &[1e-3]).unwrap();
        assert!(rep.best_relative_error <= 1e-10, "err {}", rep.best_relative_error);
    }

    #[test]
    fn gradient_check_interacting() {
        let spec = spec4();
        let set = sample_orbitals(spec);
        let dir = OrbitalSet::new(
            spec,
            vec![unit(random_field(spec, 631))],
            vec![unit(random_field(spec, 632))],
        )
        .unwrap();
        let rep =
            energy_gradient_check(&set, &params_small(), &dir, &[1e-3, 1e-4, 1e-5]).unwrap();
        assert!(rep.best_relative_error <= 1e-6, "err {}", rep.best_relative_error);
        assert!(rep.order > 1.5, "order {}", rep.order);
    }

    fn eig_pair(spec: LatticeSpec, params: &ModelParams, z: usize, n: usize) -> DensityMatrixPair {
        // gamma built from exact eigenvectors of the free operators
        let op = MeanFieldOperator::free(spec, Species::Proton, params.m_b);
        let data = op.eig().unwrap();
        let first_pos = data.eigenvalues.iter().position(|&e| e > 0.0).unwrap();
        let cols_p: Vec<SpinorField> = (0..z).map(|i| data.state(first_pos + i)).collect();
        let cols_n: Vec<SpinorField> = (0..n).map(|i| data.state(first_pos + z + i)).collect();
        DensityMatrixPair::new(cols_p, cols_n).unwrap()
    }

    #[test]
    fn commutator_zero_for_free_eigenvectors() {
        let spec = spec4();
        let params = ModelParams::free(1, 1);
        let pair = eig_pair(spec, &params, 1, 1);
        let (rp, rn) = commutator_residual(&pair, &params).unwrap();
        assert!(rp <= 1e-10 && rn <= 1e-10, "{rp} {rn}");
    }

    #[test]
    fn commutator_mixed_eigenvectors_closed_form() {
        let spec = spec4();
        let params = ModelParams::free(1, 0);
        let op = MeanFieldOperator::free(spec, Species::Proton, 1.0);
        let data = op.eig().unwrap();
        let first_pos = data.eigenvalues.iter().position(|&e| e > 0.0).unwrap();
        // pick two eigenvectors with distinct eigenvalues
        let mut j = first_pos + 1;
        while (data.eigenvalues[j] - data.eigenvalues[first_pos]).abs() < 1e-9 {
            j += 1;
        }
        let (e1, e2) = (data.eigenvalues[first_pos], data.eigenvalues[j]);
        let a = data.state(first_pos);
        let b = data.state(j);
        let mut mix = a.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        mix.axpy(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), &b);
        let pair = DensityMatrixPair::new(vec![mix], vec![]).unwrap();
        let (rp, _) = commutator_residual(&pair, &params).unwrap();
        // 2x2 block: gamma = (1/2)[[1,1],[1,1]], H = diag(e1,e2);
        // [H, gamma] has entries +/-(e2-e1)/2 off-diagonal
        let expect = (e2 - e1).abs() / 2.0 * 2f64.sqrt();
        assert!((rp - expect).abs() < 1e-9, "{rp} vs {expect}");
    }

    #[test]
    fn descent_fixed_point() {
        let spec = spec4();
        let params = ModelParams::free(1, 1);
        let pair = eig_pair(spec, &params, 1, 1);
        let (stepped, pred) = commutator_descent_step(&pair, &params, 1e-2).unwrap();
        assert!(pred.predicted_first_order.abs() < 1e-10);
        for (a, b) in pair.columns_p.iter().zip(&stepped.columns_p) {
            assert!(a.sub(b).norm_l2() < 1e-9);
        }
    }

    #[test]
    fn descent_prediction_nonpositive_and_projector_preserved() {
        let spec = spec4();
        let mut params = params_small();
        params.g_sigma = 1e-2;
        params.g_omega = 1e-2;
        params.g_rho = 0.0;
        params.e_charge = 0.0;
        // feasible non-stationary gamma: mix positive free eigenvectors
        let op = MeanFieldOperator::free(spec, Species::Proton, 1.0);
        let data = op.eig().unwrap();
        let first_pos = data.eigenvalues.iter().position(|&e| e > 0.0).unwrap();
        let a = data.state(first_pos);
        let b = data.state(first_pos + 4);
        let c = 0.9f64;
        let s = (1.0 - c * c).sqrt();
        let mut mix = a.scaled(Complex64::new(c, 0.0));
        mix.axpy(Complex64::new(s, 0.0), &b);
        let pair = DensityMatrixPair::new(vec![mix], vec![data.state(first_pos + 1)]).unwrap();
        let (stepped, pred) = commutator_descent_step(&pair, &params, 1e-3).unwrap();
        assert!(pred.predicted_first_order <= 1e-15, "pred {}", pred.predicted_first_order);
        stepped.validate(1e-9).unwrap();
        let spec_l = spec;
        let e0 = energy(&pair.as_orbitals(spec_l).unwrap(), &params).unwrap().total;
        let e1 = energy(&stepped.as_orbitals(spec_l).unwrap(), &params).unwrap().total;
        assert!(e1 <= e0 + 1e-12, "e1 {e1} e0 {e0}");
    }

    #[test]
    fn concentration_trivial_profiles() {
        let spec = LatticeSpec::new(8.0, 8).unwrap();
        // uniform density
        let p = unit(SpinorField::constant(spec, [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        let set = OrbitalSet::new(spec, vec![p], vec![]).unwrap();
        let r = 2.0;
        let rep = concentration_profile(&set, r).unwrap();
        // lattice ball volume fraction
        let inside = (0..spec.sites())
            .filter(|&s| spec.torus_distance(spec.position(s), [0.0; 3]) <= r)
            .count();
        let expect = inside as f64 / spec.sites() as f64;
        assert!((rep.max_fraction - expect).abs() < 1e-10);

        // two far-separated equal bumps
        let half = spec.box_length() / 2.0;
        let b1 = gaussian_field_at(spec, 2, 0.5, [0.0; 3]);
        let b2 = gaussian_field_at(spec, 3, 0.5, [half, half, half]);
        let mut two = b1.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        two.axpy(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), &b2);
        let set2 = OrbitalSet::new(spec, vec![two], vec![]).unwrap();
        let rep2 = concentration_profile(&set2, 1.5).unwrap();
        assert!((rep2.max_fraction - 0.5).abs() < 0.02, "{}", rep2.max_fraction);

        assert!(concentration_profile(&set, 100.0).is_err());
    }
}
