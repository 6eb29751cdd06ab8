//! Mean-field Dirac operators, their dense eigendecompositions, negative
//! spectral projectors (eigenbasis and resolvent-integral routes), and the
//! coupling-regime validators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RmfError;
use crate::fields::{compute_densities, solve_fields, MesonFieldSet, ModelParams, OrbitalSet};
use crate::lattice::{
    apply_abs_h0, apply_abs_h0_pow, apply_free_projector, apply_h0, LatticeSpec, Sign, Space,
    SpinorField, C_ZERO,
};
use crate::linalg::{gauss_legendre, herm_eig, max_abs_diff};

pub const DEFAULT_DENSE_CAP: usize = 4096;
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_QUAD_NODES: usize = 256;
pub const QUAD_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Proton,
    Neutron,
}

/// One of the two mean-field Hamiltonians H = H0 + V with V a pointwise
/// potential: scalar part multiplying beta plus a vector part on the
/// identity. V is diagonal in spinor components.
#[derive(Debug, Clone)]
pub struct MeanFieldOperator {
    spec: LatticeSpec,
    pub species: Species,
    pub m_b: f64,
    /// scalar (sigma) part s(x), multiplies beta
    pub scalar: Vec<f64>,
    /// vector part v(x), multiplies the identity
    pub vector: Vec<f64>,
}

impl MeanFieldOperator {
    pub fn free(spec: LatticeSpec, species: Species, m_b: f64) -> Self {
        let z = vec![0.0; spec.sites()];
        Self { spec, species, m_b, scalar: z.clone(), vector: z }
    }

    /// Assembles the potential from already-solved classical fields.
    pub fn from_fields(species: Species, fields: &MesonFieldSet, params: &ModelParams) -> Self {
        let spec = fields.spec;
        let scalar: Vec<f64> = fields.sigma.iter().map(|&s| params.g_sigma * s).collect();
        let vector: Vec<f64> = match species {
            Species::Proton => fields
                .omega0
                .iter()
                .zip(&fields.r00)
                .zip(&fields.a0)
                .map(|((&w, &r), &a)| {
                    params.g_omega * w + params.g_rho * r + params.e_charge * a
                })
                .collect(),
            Species::Neutron => fields
                .omega0
                .iter()
                .zip(&fields.r00)
                .map(|(&w, &r)| params.g_omega * w - params.g_rho * r)
                .collect(),
        };
        Self { spec, species, m_b: params.m_b, scalar, vector }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Diagonal entries of the potential matrix at a site.
    pub fn potential_diag(&self, site: usize) -> [f64; 4] {
        let s = self.scalar[site];
        let v = self.vector[site];
        [v + s, v + s, v - s, v - s]
    }

    /// V psi, returned in position representation.
    pub fn apply_potential(&self, field: &SpinorField) -> Result<SpinorField, RmfError> {
        self.spec.check_same(field.spec())?;
        let mut out = field.to_position();
        for site in 0..self.spec.sites() {
            let d = self.potential_diag(site);
            for c in 0..4 {
                out.values_mut()[site * 4 + c] *= Complex64::new(d[c], 0.0);
            }
        }
        Ok(out)
    }

    /// H psi = H0 psi + V psi, returned in position representation.
    pub fn apply(&self, field: &SpinorField) -> Result<SpinorField, RmfError> {
        let h0 = apply_h0(field, self.m_b).to_position();
        let v = self.apply_potential(field)?;
        Ok(h0.add(&v))
    }

    /// Dense matrix in the position delta basis, symmetrized after a
    /// Hermiticity check.
    pub fn dense(&self) -> Result<DMatrix<Complex64>, RmfError> {
        self.dense_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn dense_with_cap(&self, cap: usize) -> Result<DMatrix<Complex64>, RmfError> {
        let m = dense_of(&self.spec, cap, |f| self.apply(f))?;
        let drift = max_abs_diff(&m, &m.adjoint());
        if drift > 1e-12 {
            return Err(RmfError::Hermiticity { norm: drift });
        }
        Ok((&m + m.adjoint()) * Complex64::new(0.5, 0.0))
    }

    /// Dense diagonal of the potential alone.
    pub fn dense_potential(&self) -> DMatrix<Complex64> {
        let dim = self.spec.spinor_dim();
        let mut m = DMatrix::zeros(dim, dim);
        for site in 0..self.spec.sites() {
            let d = self.potential_diag(site);
            for c in 0..4 {
                m[(site * 4 + c, site * 4 + c)] = Complex64::new(d[c], 0.0);
            }
        }
        m
    }

    pub fn eig(&self) -> Result<SpectralData, RmfError> {
        self.eig_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn eig_with_cap(&self, cap: usize) -> Result<SpectralData, RmfError> {
        let m = self.dense_with_cap(cap)?;
        let (eigenvalues, vectors) = herm_eig(&m);
        Ok(SpectralData { spec: self.spec, eigenvalues, vectors })
    }
}

/// Dense matrix of any linear operator given by its apply, in the position
/// delta basis scaled so that L2-orthonormal fields map to Euclidean
/// orthonormal coefficient columns.
pub fn dense_of<F>(spec: &LatticeSpec, cap: usize, mut apply: F) -> Result<DMatrix<Complex64>, RmfError>
where
    F: FnMut(&SpinorField) -> Result<SpinorField, RmfError>,
{
    let dim = spec.spinor_dim();
    if dim > cap {
        return Err(RmfError::DenseSizeCap { dim, cap });
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut basis = SpinorField::zero(*spec);
    for j in 0..dim {
        basis.values_mut()[j] = Complex64::new(1.0, 0.0);
        let col = apply(&basis)?.to_position();
        for i in 0..dim {
            m[(i, j)] = col.values()[i];
        }
        basis.values_mut()[j] = C_ZERO;
    }
    Ok(m)
}

/// Sorted dense eigendecomposition of a mean-field operator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    spec: LatticeSpec,
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// orthonormal columns, phases fixed deterministically
    pub vectors: DMatrix<Complex64>,
}

impl SpectralData {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenstate i as a unit-L2 position-space field.
    pub fn state(&self, i: usize) -> SpinorField {
        let scale = 1.0 / self.spec.cell_volume().sqrt();
        let values: Vec<Complex64> = self
            .vectors
            .column(i)
            .iter()
            .map(|v| v * Complex64::new(scale, 0.0))
            .collect();
        SpinorField::from_values(self.spec, Space::Position, values)
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::INFINITY, |m, &e| m.min(e.abs()))
    }

    /// Refuses when an eigenvalue sits within zero_tol of 0.
    pub fn check_gap(&self, zero_tol: f64) -> Result<(), RmfError> {
        let gap = self.min_abs_eigenvalue();
        if gap < zero_tol {
            return Err(RmfError::SpectralGap { value: gap, tol: zero_tol });
        }
        Ok(())
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&e| e < 0.0).count()
    }

    /// Negative spectral projector as a dense matrix.
    pub fn negative_projector(&self, zero_tol: f64) -> Result<DMatrix<Complex64>, RmfError> {
        self.check_gap(zero_tol)?;
        let k = self.negative_count();
        let neg = self.vectors.columns(0, k);
        Ok(&neg * neg.adjoint())
    }
}

pub fn build_hamiltonian(
    species: Species,
    orbitals: &OrbitalSet,
    params: &ModelParams,
) -> Result<MeanFieldOperator, RmfError> {
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    Ok(MeanFieldOperator::from_fields(species, &fields, params))
}

pub fn projector_from_eig(op: &MeanFieldOperator) -> Result<DMatrix<Complex64>, RmfError> {
    op.eig()?.negative_projector(DEFAULT_ZERO_TOL)
}

/// Raw position values as a coefficient vector (Euclidean norm differs from
/// the L2 norm by a factor sqrt(cell volume)).
pub fn field_to_coeffs(field: &SpinorField) -> DVector<Complex64> {
    DVector::from_column_slice(field.to_position().values())
}

pub fn coeffs_to_field(spec: LatticeSpec, v: &DVector<Complex64>) -> SpinorField {
    SpinorField::from_values(spec, Space::Position, v.iter().copied().collect())
}

/// (Lambda_B^- - Lambda_A^-) vector via the resolvent integral
/// (1/2pi) int (A - i eta)^{-1} (B - A) (B - i eta)^{-1} d eta,
/// Gauss-Legendre after eta = tan(theta). Convergence is checked by node
/// doubling.
pub fn projector_resolvent(
    op_a: &MeanFieldOperator,
    op_b: &MeanFieldOperator,
    vector: &SpinorField,
    nodes: usize,
) -> Result<SpinorField, RmfError> {
    let spec = *op_a.spec();
    spec.check_same(op_b.spec())?;
    spec.check_same(vector.spec())?;
    let a = op_a.dense()?;
    let b = op_b.dense()?;
    for m in [&a, &b] {
        let (vals, _) = herm_eig(m);
        let gap = vals.iter().fold(f64::INFINITY, |acc, &e| acc.min(e.abs()));
        if gap < DEFAULT_ZERO_TOL {
            return Err(RmfError::SpectralGap { value: gap, tol: DEFAULT_ZERO_TOL });
        }
    }
    let dim = a.nrows();
    let diff = &b - &a;
    let v = field_to_coeffs(vector);
    let quad = |n: usize| -> DVector<Complex64> {
        let (xs, ws) = gauss_legendre(n);
        let mut acc: DVector<Complex64> = DVector::zeros(dim);
        for (x, w) in xs.iter().zip(&ws) {
            let theta = std::f64::consts::FRAC_PI_2 * x;
            let eta = theta.tan();
            let jac = std::f64::consts::FRAC_PI_2 * (1.0 + eta * eta);
            let shift = DMatrix::from_diagonal_element(dim, dim, Complex64::new(0.0, eta));
            let rb = (&b - &shift).lu().solve(&v).expect("resolvent solve");
            let mid = &diff * rb;
            let ra = (&a - &shift).lu().solve(&mid).expect("resolvent solve");
            acc += ra * Complex64::new(w * jac, 0.0);
        }
        acc / Complex64::new(2.0 * std::f64::consts::PI, 0.0)
    };
    let coarse = quad(nodes);
    let fine = quad(2 * nodes);
    let change = (&fine - &coarse).norm() * spec.cell_volume().sqrt();
    if change > QUAD_TOL {
        return Err(RmfError::QuadratureNonConvergence { change, tol: QUAD_TOL });
    }
    Ok(coeffs_to_field(spec, &fine))
}

/// Arithmetic of the smallness conditions (2.4)-(2.6) and the constants
/// d_p, d_n of (2.8)-(2.9).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeReport {
    pub threshold: f64,
    pub lhs_2_4: f64,
    pub lhs_2_5: f64,
    pub lhs_2_6: f64,
    pub cond_2_4: bool,
    pub cond_2_5: bool,
    pub cond_2_6: bool,
    pub margin_2_4: f64,
    pub margin_2_5: f64,
    pub margin_2_6: f64,
    pub d_p: f64,
    pub d_n: f64,
    pub d_p_lt_one: bool,
    pub d_n_lt_one: bool,
    pub d_lt_four_fifths: bool,
}

impl RegimeReport {
    pub fn all_ok(&self) -> bool {
        self.cond_2_4
            && self.cond_2_5
            && self.cond_2_6
            && self.d_p_lt_one
            && self.d_n_lt_one
            && self.d_lt_four_fifths
    }

    /// Names every failed smallness condition.
    pub fn failure_summary(&self) -> String {
        let mut failed = Vec::new();
        if !self.cond_2_4 {
            failed.push(format!("(2.4): {:.6} >= {:.6}", self.lhs_2_4, self.threshold));
        }
        if !self.cond_2_5 {
            failed.push(format!("(2.5): {:.6} >= {:.6}", self.lhs_2_5, self.threshold));
        }
        if !self.cond_2_6 {
            failed.push(format!("(2.6): {:.6} >= {:.6}", self.lhs_2_6, self.threshold));
        }
        if !self.d_p_lt_one {
            failed.push(format!("(2.8): d_p = {:.6} >= 1", self.d_p));
        }
        if !self.d_n_lt_one {
            failed.push(format!("(2.9): d_n = {:.6} >= 1", self.d_n));
        }
        if !self.d_lt_four_fifths {
            failed.push(format!(
                "d < 4/5: max(d_p, d_n) = {:.6} >= 0.8",
                self.d_p.max(self.d_n)
            ));
        }
        if failed.is_empty() {
            "all smallness conditions hold".into()
        } else {
            format!("regime conditions failed: {}", failed.join("; "))
        }
    }
}

pub fn validate_regime(params: &ModelParams) -> RegimeReport {
    use std::f64::consts::{FRAC_PI_2, PI};
    let threshold = 2.0 / (FRAC_PI_2 + 2.0 / PI);
    let a = params.a() as f64;
    let z = params.z as f64;
    let n = params.n as f64;
    let gs2 = params.g_sigma * params.g_sigma;
    let gw2 = params.g_omega * params.g_omega;
    let gr2 = params.g_rho * params.g_rho;
    let e2 = params.e_charge * params.e_charge;
    let lhs_2_4 = (gs2 * a + gr2 * z.max(n)) / (4.0 * PI);
    let lhs_2_5 = (gs2 * a + gw2 * a + gr2 * z + e2 * z) / (4.0 * PI);
    let lhs_2_6 = (gs2 * a + gw2 * a + gr2 * n) / (4.0 * PI);
    let d_p = ((gs2 + gw2 + gr2) * a + e2 * z) / (2.0 * PI);
    let d_n = ((gs2 + gw2 + gr2) * a) / (2.0 * PI);
    RegimeReport {
        threshold,
        lhs_2_4,
        lhs_2_5,
        lhs_2_6,
        cond_2_4: lhs_2_4 < threshold,
        cond_2_5: lhs_2_5 < threshold,
        cond_2_6: lhs_2_6 < threshold,
        margin_2_4: threshold - lhs_2_4,
        margin_2_5: threshold - lhs_2_5,
        margin_2_6: threshold - lhs_2_6,
        d_p,
        d_n,
        d_p_lt_one: d_p < 1.0,
        d_n_lt_one: d_n < 1.0,
        d_lt_four_fifths: d_p < 0.8 && d_n < 0.8,
    }
}

/// Band-limited periodic Coulomb potential 1/|x| centered at the origin:
/// inverse Fourier sum of 4 pi / |k|^2 over the lattice momenta, k = 0
/// dropped (mean-zero convention).
pub fn coulomb_potential(spec: &LatticeSpec) -> Vec<f64> {
    let vol = spec.box_length().powi(3);
    let mut w = vec![0.0; spec.sites()];
    let ks: Vec<([f64; 3], f64)> = (0..spec.sites())
        .map(|t| {
            let k = spec.momentum(t);
            (k, k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
        })
        .collect();
    for (s, out) in w.iter_mut().enumerate() {
        let x = spec.position(s);
        let mut acc = 0.0;
        for (k, k2) in &ks {
            if *k2 > 0.0 {
                let phase = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                acc += 4.0 * std::f64::consts::PI / k2 * phase.cos();
            }
        }
        *out = acc / vol;
    }
    w
}

/// Expectation of multiplication by a real potential in a spinor state.
pub fn potential_expectation(potential: &[f64], field: &SpinorField) -> f64 {
    let spec = field.spec();
    let pos = field.to_position();
    let dv = spec.cell_volume();
    (0..spec.sites())
        .map(|s| {
            let d: f64 = (0..4).map(|c| pos.values()[s * 4 + c].norm_sqr()).sum();
            potential[s] * d * dv
        })
        .sum()
}

/// Numerical checks of the operator inequalities (2.10)-(2.11), the
/// empirical h constant of (2.7), and the Hardy ratios of (2.1)-(2.2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundsReport {
    pub d_p: f64,
    pub d_n: f64,
    /// min eigenvalue of d^{1/2}|H0| - V, per species (2.10)
    pub bound_upper_p: f64,
    pub bound_upper_n: f64,
    /// min eigenvalue of |H| - (1 - d)^{1/2}|H0|, per species (2.11)
    pub bound_lower_p: f64,
    pub bound_lower_n: f64,
    /// empirical h of (2.7): min |eig| of W^{-1/2} H W^{-1/2}
    pub h_p: f64,
    pub h_n: f64,
    /// max Hardy ratio over the battery, all of H^{1/2}
    pub hardy_ratio_full: f64,
    pub hardy_bound_full: f64,
    /// same on free-projected inputs
    pub hardy_ratio_projected: f64,
    pub hardy_bound_projected: f64,
}

impl BoundsReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.bound_upper_p >= -tol
            && self.bound_upper_n >= -tol
            && self.bound_lower_p >= -tol
            && self.bound_lower_n >= -tol
            && self.h_p > 0.0
            && self.h_n > 0.0
            && self.hardy_ratio_full <= self.hardy_bound_full + tol
            && self.hardy_ratio_projected <= self.hardy_bound_projected + tol
    }
}

pub fn check_operator_bounds(
    orbitals: &OrbitalSet,
    params: &ModelParams,
) -> Result<BoundsReport, RmfError> {
    let spec = *orbitals.spec();
    for gram in [orbitals.gram_p()?, orbitals.gram_n()?] {
        if gram.is_empty() {
            continue;
        }
        let (vals, _) = herm_eig(&gram);
        if vals.last().copied().unwrap_or(0.0) > 1.0 + 1e-10 {
            return Err(RmfError::GramConstraint(format!(
                "Gram matrix exceeds 1: max eigenvalue {}",
                vals.last().unwrap()
            )));
        }
    }
    let regime = validate_regime(params);
    let rho = compute_densities(orbitals)?;
    let fields = solve_fields(&rho, params);
    let m_b = params.m_b;
    let cap = DEFAULT_DENSE_CAP;
    let abs_h0 = dense_of(&spec, cap, |f| Ok(apply_abs_h0(f, m_b)))?;
    // Sobolev weight (1 - Laplacian)^{-1/4}
    let w_inv_q = dense_of(&spec, cap, |f| Ok(apply_abs_h0_pow(f, 1.0, -0.5)))?;

    let per_species = |species: Species, d: f64| -> Result<(f64, f64, f64), RmfError> {
        let op = MeanFieldOperator::from_fields(species, &fields, params);
        let h = op.dense()?;
        let v = op.dense_potential();
        let (upper_vals, _) = herm_eig(&(&abs_h0 * Complex64::new(d.sqrt(), 0.0) - &v));
        let upper = upper_vals[0];
        let (hv, hw) = herm_eig(&h);
        let mut abs_h = DMatrix::zeros(h.nrows(), h.ncols());
        for (i, &e) in hv.iter().enumerate() {
            let col = hw.column(i);
            abs_h += &col * col.adjoint() * Complex64::new(e.abs(), 0.0);
        }
        let (lower_vals, _) =
            herm_eig(&(&abs_h - &abs_h0 * Complex64::new((1.0 - d).max(0.0).sqrt(), 0.0)));
        let lower = lower_vals[0];
        let m = &w_inv_q * &h * &w_inv_q;
        let (mv, _) = herm_eig(&m);
        let h_emp = mv.iter().fold(f64::INFINITY, |acc, &e| acc.min(e.abs()));
        Ok((upper, lower, h_emp))
    };
    let (up_p, lo_p, h_p) = per_species(Species::Proton, regime.d_p)?;
    let (up_n, lo_n, h_n) = per_species(Species::Neutron, regime.d_n)?;

    // Hardy battery: fixed origin-centered Gaussian spinors, documented seeds
    let battery: Vec<SpinorField> = [(101u64, 0.5f64), (102, 0.8), (103, 1.2), (104, 1.7)]
        .iter()
        .map(|&(seed, width)| crate::testutil::gaussian_field_at(spec, seed, width, [0.0; 3]))
        .collect();
    let coulomb = coulomb_potential(&spec);
    let ratio = |phi: &SpinorField| -> f64 {
        let num = potential_expectation(&coulomb, phi);
        let den = phi.inner(&apply_abs_h0(phi, m_b)).unwrap().re;
        num / den
    };
    let mut r_full = f64::NEG_INFINITY;
    let mut r_proj = f64::NEG_INFINITY;
    for phi in &battery {
        r_full = r_full.max(ratio(phi));
        for sign in [Sign::Plus, Sign::Minus] {
            let p = apply_free_projector(sign, phi, m_b);
            if p.norm_l2() > 1e-8 {
                r_proj = r_proj.max(ratio(&p));
            }
        }
    }
    use std::f64::consts::{FRAC_PI_2, PI};
    Ok(BoundsReport {
        d_p: regime.d_p,
        d_n: regime.d_n,
        bound_upper_p: up_p,
        bound_upper_n: up_n,
        bound_lower_p: lo_p,
        bound_lower_n: lo_n,
        h_p,
        h_n,
        hardy_ratio_full: r_full,
        hardy_bound_full: FRAC_PI_2,
        hardy_ratio_projected: r_proj,
        hardy_bound_projected: 0.5 * (FRAC_PI_2 + 2.0 / PI),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::C_ONE;
    use crate::linalg;
    use crate::testutil::random_field;
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
            vec![unit(random_field(spec, 301))],
            vec![unit(random_field(spec, 302))],
        )
        .unwrap()
    }

    #[test]
    fn free_operator_matches_h0() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let op = build_hamiltonian(Species::Proton, &orbitals, &ModelParams::free(1, 1)).unwrap();
        let f = random_field(spec, 7);
        let a = op.apply(&f).unwrap();
        let b = apply_h0(&f, 1.0).to_position();
        assert!(a.sub(&b).norm_l2() < 1e-12);
    }

    #[test]
    fn dense_matches_matrix_free_apply() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let op = build_hamiltonian(Species::Proton, &orbitals, &params_small()).unwrap();
        let m = op.dense().unwrap();
        assert!(max_abs_diff(&m, &m.adjoint()) < 1e-12);
        for seed in [11u64, 12, 13] {
            let f = random_field(spec, seed);
            let via_apply = field_to_coeffs(&op.apply(&f).unwrap());
            let via_dense = &m * field_to_coeffs(&f);
            assert!((via_apply - via_dense).norm() < 1e-11);
        }
    }

    #[test]
    fn proton_neutron_difference_is_rho_plus_coulomb() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let params = params_small();
        let rho = compute_densities(&orbitals).unwrap();
        let fields = solve_fields(&rho, &params);
        let hp = MeanFieldOperator::from_fields(Species::Proton, &fields, &params);
        let hn = MeanFieldOperator::from_fields(Species::Neutron, &fields, &params);
        for s in 0..spec.sites() {
            let expect = 2.0 * params.g_rho * fields.r00[s] + params.e_charge * fields.a0[s];
            let got = hp.potential_diag(s)[0] - hn.potential_diag(s)[0];
            assert!((got - expect).abs() < 1e-13);
            assert!((hp.scalar[s] - hn.scalar[s]).abs() == 0.0);
        }
    }

    #[test]
    fn hamiltonian_depends_only_on_densities() {
        let spec = spec4();
        let params = params_small();
        let protons = vec![unit(random_field(spec, 41)), unit(random_field(spec, 42))];
        let set = OrbitalSet::new(spec, protons.clone(), vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw = DMatrix::from_fn(2, 2, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let u = raw.qr().q();
        let set2 = OrbitalSet::new(spec, linalg::right_mul(&protons, &u), vec![]).unwrap();
        let h1 = build_hamiltonian(Species::Proton, &set, &params).unwrap();
        let h2 = build_hamiltonian(Species::Proton, &set2, &params).unwrap();
        for s in 0..spec.sites() {
            assert!((h1.scalar[s] - h2.scalar[s]).abs() < 1e-11);
            assert!((h1.vector[s] - h2.vector[s]).abs() < 1e-11);
        }
    }

    #[test]
    fn free_spectrum_closed_form_2cubed() {
        let spec = LatticeSpec::new(5.0, 2).unwrap();
        let op = MeanFieldOperator::free(spec, Species::Proton, 1.0);
        let data = op.eig().unwrap();
        let mut expect: Vec<f64> = Vec::new();
        for s in 0..spec.sites() {
            let k = spec.momentum(s);
            let e = (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            for _ in 0..2 {
                expect.push(-e);
                expect.push(e);
            }
        }
        expect.sort_by(f64::total_cmp);
        assert_eq!(data.eigenvalues.len(), expect.len());
        for (a, b) in data.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert_eq!(data.negative_count(), 2 * spec.sites());
    }

    #[test]
    fn eig_residuals_and_trace() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let op = build_hamiltonian(Species::Neutron, &orbitals, &params_small()).unwrap();
        let m = op.dense().unwrap();
        let data = op.eig().unwrap();
        for i in [0usize, 1, data.dim() / 2, data.dim() - 1] {
            let v: DVector<Complex64> = data.vectors.column(i).into();
            let r = &m * &v - &v * Complex64::new(data.eigenvalues[i], 0.0);
            assert!(r.norm() < 1e-10);
        }
        let sum: f64 = data.eigenvalues.iter().sum();
        let tr = m.trace().re;
        assert!((sum - tr).abs() <= 1e-8 * tr.abs().max(1.0));
    }

    #[test]
    fn first_order_perturbation_lowest_proton_level() {
        let spec = spec4();
        let g = 1e-3;
        let params = ModelParams {
            g_sigma: g,
            g_omega: g,
            g_rho: g,
            e_charge: g,
            m_sigma: 1.0,
            m_omega: 1.0,
            m_rho: 1.0,
            m_b: 1.0,
            z: 1,
            n: 0,
        };
        let psi0 = unit(SpinorField::constant(spec, [C_ONE, C_ZERO, C_ZERO, C_ZERO]));
        let orbitals = OrbitalSet::new(spec, vec![psi0.clone()], vec![]).unwrap();
        let op = build_hamiltonian(Species::Proton, &orbitals, &params).unwrap();
        let shift = psi0.inner(&op.apply_potential(&psi0).unwrap()).unwrap().re;
        let data = op.eig().unwrap();
        let lowest_pos = data
            .eigenvalues
            .iter()
            .copied()
            .find(|&e| e > 0.0)
            .unwrap();
        let predicted = params.m_b + shift;
        assert!(shift.abs() > 0.0);
        let rel = ((lowest_pos - predicted) / (lowest_pos - params.m_b)).abs();
        assert!(rel <= 0.05, "rel error {rel}");
    }

    #[test]
    fn negative_projector_invariants() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let op = build_hamiltonian(Species::Proton, &orbitals, &params_small()).unwrap();
        let m = op.dense().unwrap();
        let data = op.eig().unwrap();
        let p_minus = data.negative_projector(DEFAULT_ZERO_TOL).unwrap();
        let dim = data.dim();
        let id = DMatrix::identity(dim, dim);
        let p_plus = &id - &p_minus;
        assert!(max_abs_diff(&(&p_minus * &p_minus), &p_minus) < 1e-10);
        assert!(max_abs_diff(&p_minus, &p_minus.adjoint()) < 1e-10);
        assert!(max_abs_diff(&(&p_minus * &m), &(&m * &p_minus)) < 1e-10);
        assert!((&p_minus * &p_plus).norm() < 1e-10);
        let rank = p_minus.trace().re;
        assert!((rank - data.negative_count() as f64).abs() < 1e-8);
        // (v, Hv) < 0 on range
        for seed in [1u64, 2, 3] {
            let f = field_to_coeffs(&random_field(spec, seed));
            let v = &p_minus * f;
            let q = (v.adjoint() * &m * &v)[(0, 0)].re;
            assert!(q < 0.0);
        }
    }

    #[test]
    fn resolvent_identical_operators_zero() {
        let spec = LatticeSpec::new(5.0, 2).unwrap();
        let op = MeanFieldOperator::free(spec, Species::Proton, 1.0);
        let v = unit(random_field(spec, 3));
        let out = projector_resolvent(&op, &op, &v, 64).unwrap();
        assert!(out.norm_l2() < 1e-12);
    }

    #[test]
    fn resolvent_matches_eig_route() {
        let spec = LatticeSpec::new(5.0, 2).unwrap();
        let a = MeanFieldOperator::free(spec, Species::Proton, 1.0);
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in 0..spec.sites() {
            b.scalar[s] = 0.2 * rng.random_range(-1.0..1.0);
            b.vector[s] = 0.2 * rng.random_range(-1.0..1.0);
        }
        let v = unit(random_field(spec, 10));
        let via_quad = projector_resolvent(&a, &b, &v, DEFAULT_QUAD_NODES).unwrap();
        let pa = projector_from_eig(&a).unwrap();
        let pb = projector_from_eig(&b).unwrap();
        let via_eig = coeffs_to_field(spec, &((&pb - &pa) * field_to_coeffs(&v)));
        assert!(via_quad.sub(&via_eig).norm_l2() <= 1e-6);
        // antisymmetry
        let swapped = projector_resolvent(&b, &a, &v, DEFAULT_QUAD_NODES).unwrap();
        assert!(via_quad.add(&swapped).norm_l2() <= 1e-10);
    }

    #[test]
    fn regime_arithmetic() {
        let free = validate_regime(&ModelParams::free(1, 1));
        assert!(free.all_ok());
        assert_eq!(free.d_p, 0.0);
        assert_eq!(free.d_n, 0.0);

        let g = 0.1f64.sqrt();
        let params = ModelParams {
            g_sigma: g,
            g_omega: g,
            g_rho: g,
            e_charge: 0.05f64.sqrt(),
            m_sigma: 1.0,
            m_omega: 1.0,
            m_rho: 1.0,
            m_b: 1.0,
            z: 1,
            n: 1,
        };
        let r = validate_regime(&params);
        let expect = 0.65 / (2.0 * std::f64::consts::PI);
        assert!((r.d_p - expect).abs() < 1e-12);
        assert!((r.d_p - 0.103451).abs() < 1e-6);
        let exact = 2.0 / (std::f64::consts::FRAC_PI_2 + 2.0 / std::f64::consts::PI);
        assert_eq!(r.threshold, exact);
        assert!((r.threshold - 0.906042).abs() < 1e-5);
    }

    #[test]
    fn bounds_free_case() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let report = check_operator_bounds(&orbitals, &ModelParams::free(1, 1)).unwrap();
        assert!(report.bound_upper_p.abs() < 1e-10);
        assert!(report.bound_lower_p.abs() < 1e-10);
        assert!((report.h_p - 1.0).abs() < 1e-9);
        assert!((report.h_n - 1.0).abs() < 1e-9);
        assert!(report.ok(1e-8));
    }

    #[test]
    fn bounds_in_regime_random_state() {
        let spec = spec4();
        let orbitals = sample_orbitals(spec);
        let report = check_operator_bounds(&orbitals, &params_small()).unwrap();
        assert!(report.bound_upper_p >= -1e-8, "upper p {}", report.bound_upper_p);
        assert!(report.bound_upper_n >= -1e-8);
        assert!(report.bound_lower_p >= -1e-8, "lower p {}", report.bound_lower_p);
        assert!(report.bound_lower_n >= -1e-8);
        assert!(report.h_p > 0.0 && report.h_n > 0.0);
        assert!(report.hardy_ratio_full <= report.hardy_bound_full);
        assert!(report.hardy_ratio_projected <= report.hardy_bound_projected);
    }

    #[test]
    fn bounds_rejects_oversized_gram() {
        let spec = spec4();
        let big = random_field(spec, 55).scaled(Complex64::new(10.0, 0.0));
        let set = OrbitalSet::new(spec, vec![unit(big.clone()).scaled(Complex64::new(2.0, 0.0))], vec![])
            .unwrap();
        assert!(matches!(
            check_operator_bounds(&set, &params_small()),
            Err(RmfError::GramConstraint(_))
        ));
    }
}
