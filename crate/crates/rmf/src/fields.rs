//! Bilinear densities of an orbital set and the closed-form solution of the
//! four classical field equations (Yukawa and Coulomb convolutions as
//! momentum-space multipliers).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RmfError;
use crate::lattice::{fft3, LatticeSpec, SpinorField, C_ZERO};
use crate::linalg;

/// Couplings, masses and particle numbers of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub g_sigma: f64,
    pub g_omega: f64,
    pub g_rho: f64,
    pub e_charge: f64,
    pub m_sigma: f64,
    pub m_omega: f64,
    pub m_rho: f64,
    #[serde(default = "default_m_b")]
    pub m_b: f64,
    pub z: usize,
    pub n: usize,
}

fn default_m_b() -> f64 {
    1.0
}

impl ModelParams {
    /// Free model (all couplings zero) with unit masses.
    pub fn free(z: usize, n: usize) -> Self {
        Self {
            g_sigma: 0.0,
            g_omega: 0.0,
            g_rho: 0.0,
            e_charge: 0.0,
            m_sigma: 1.0,
            m_omega: 1.0,
            m_rho: 1.0,
            m_b: 1.0,
            z,
            n,
        }
    }

    pub fn a(&self) -> usize {
        self.z + self.n
    }

    pub fn validate(&self) -> Result<(), RmfError> {
        let masses = [
            ("m_sigma", self.m_sigma),
            ("m_omega", self.m_omega),
            ("m_rho", self.m_rho),
            ("m_b", self.m_b),
        ];
        for (name, m) in masses {
            if !(m > 0.0) || !m.is_finite() {
                return Err(RmfError::InvalidParams(format!(
                    "{name} must be positive, got {m}"
                )));
            }
        }
        let couplings = [
            ("g_sigma", self.g_sigma),
            ("g_omega", self.g_omega),
            ("g_rho", self.g_rho),
            ("e_charge", self.e_charge),
        ];
        for (name, g) in couplings {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(RmfError::InvalidParams(format!(
                    "{name} must be nonnegative, got {g}"
                )));
            }
        }
        if self.a() < 1 {
            return Err(RmfError::InvalidParams("A = Z + N must be >= 1".into()));
        }
        Ok(())
    }
}

/// The A occupied orbitals (protons then neutrons) with their Gram targets.
///
/// Targets are the identity for the unit-norm problem and diag(lambda) for
/// its fractional-norm extension.
#[derive(Debug, Clone)]
pub struct OrbitalSet {
    spec: LatticeSpec,
    pub protons: Vec<SpinorField>,
    pub neutrons: Vec<SpinorField>,
    pub gram_target_p: DMatrix<Complex64>,
    pub gram_target_n: DMatrix<Complex64>,
}

impl OrbitalSet {
    /// Orbital set with identity Gram targets.
    pub fn new(
        spec: LatticeSpec,
        protons: Vec<SpinorField>,
        neutrons: Vec<SpinorField>,
    ) -> Result<Self, RmfError> {
        let gram_target_p = DMatrix::identity(protons.len(), protons.len());
        let gram_target_n = DMatrix::identity(neutrons.len(), neutrons.len());
        Self::with_targets(spec, protons, neutrons, gram_target_p, gram_target_n)
    }

    pub fn with_targets(
        spec: LatticeSpec,
        protons: Vec<SpinorField>,
        neutrons: Vec<SpinorField>,
        gram_target_p: DMatrix<Complex64>,
        gram_target_n: DMatrix<Complex64>,
    ) -> Result<Self, RmfError> {
        for f in protons.iter().chain(neutrons.iter()) {
            spec.check_same(f.spec())?;
        }
        if gram_target_p.nrows() != protons.len() || gram_target_n.nrows() != neutrons.len() {
            return Err(RmfError::GramConstraint(
                "gram target dimensions do not match orbital counts".into(),
            ));
        }
        Ok(Self { spec, protons, neutrons, gram_target_p, gram_target_n })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn z(&self) -> usize {
        self.protons.len()
    }

    pub fn n(&self) -> usize {
        self.neutrons.len()
    }

    pub fn a(&self) -> usize {
        self.z() + self.n()
    }

    pub fn all(&self) -> impl Iterator<Item = &SpinorField> {
        self.protons.iter().chain(self.neutrons.iter())
    }

    pub fn gram_p(&self) -> Result<DMatrix<Complex64>, RmfError> {
        linalg::gram(&self.protons)
    }

    pub fn gram_n(&self) -> Result<DMatrix<Complex64>, RmfError> {
        linalg::gram(&self.neutrons)
    }

    /// Max entrywise deviation of the Gram matrices from their targets.
    pub fn feasibility_defect(&self) -> Result<f64, RmfError> {
        let dp = linalg::max_abs_diff(&self.gram_p()?, &self.gram_target_p);
        let dn = linalg::max_abs_diff(&self.gram_n()?, &self.gram_target_n);
        Ok(dp.max(dn))
    }
}

/// The four real densities on the lattice.
#[derive(Debug, Clone)]
pub struct DensitySet {
    pub spec: LatticeSpec,
    /// Scalar density sum psi-bar psi.
    pub rho_s: Vec<f64>,
    /// Baryon density sum psi* psi.
    pub rho_0: Vec<f64>,
    /// Isospin density: protons minus neutrons.
    pub rho_00: Vec<f64>,
    /// Charge (proton) density.
    pub rho_c: Vec<f64>,
}

impl DensitySet {
    pub fn zero(spec: LatticeSpec) -> Self {
        let z = vec![0.0; spec.sites()];
        Self { spec, rho_s: z.clone(), rho_0: z.clone(), rho_00: z.clone(), rho_c: z }
    }

    pub fn integral_rho_0(&self) -> f64 {
        self.rho_0.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn integral_rho_c(&self) -> f64 {
        self.rho_c.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Linear mix: theta * new + (1 - theta) * old, per density.
    pub fn mix(&self, old: &DensitySet, theta: f64) -> DensitySet {
        let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect()
        };
        DensitySet {
            spec: self.spec,
            rho_s: blend(&self.rho_s, &old.rho_s),
            rho_0: blend(&self.rho_0, &old.rho_0),
            rho_00: blend(&self.rho_00, &old.rho_00),
            rho_c: blend(&self.rho_c, &old.rho_c),
        }
    }

    /// L2 distance to another density set (all four channels).
    pub fn distance(&self, other: &DensitySet) -> f64 {
        let dv = self.spec.cell_volume();
        let d = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        ((d(&self.rho_s, &other.rho_s)
            + d(&self.rho_0, &other.rho_0)
            + d(&self.rho_00, &other.rho_00)
            + d(&self.rho_c, &other.rho_c))
            * dv)
            .sqrt()
    }
}

/// The four classical fields solved from the densities.
#[derive(Debug, Clone)]
pub struct MesonFieldSet {
    pub spec: LatticeSpec,
    pub sigma: Vec<f64>,
    pub omega0: Vec<f64>,
    pub r00: Vec<f64>,
    pub a0: Vec<f64>,
}

impl MesonFieldSet {
    pub fn zero(spec: LatticeSpec) -> Self {
        let z = vec![0.0; spec.sites()];
        Self { spec, sigma: z.clone(), omega0: z.clone(), r00: z.clone(), a0: z }
    }
}

/// Pointwise bilinear densities of the occupied orbitals.
///
/// rho_s uses the beta signature (+,+,-,-); the other three are plain
/// absolute squares, so all outputs are real by construction.
pub fn compute_densities(orbitals: &OrbitalSet) -> Result<DensitySet, RmfError> {
    let spec = *orbitals.spec();
    let mut out = DensitySet::zero(spec);
    let accumulate = |field: &SpinorField, proton: bool, out: &mut DensitySet| {
        let pos = field.to_position();
        let v = pos.values();
        for s in 0..spec.sites() {
            let up = v[s * 4].norm_sqr() + v[s * 4 + 1].norm_sqr();
            let down = v[s * 4 + 2].norm_sqr() + v[s * 4 + 3].norm_sqr();
            out.rho_s[s] += up - down;
            out.rho_0[s] += up + down;
            if proton {
                out.rho_00[s] += up + down;
                out.rho_c[s] += up + down;
            } else {
                out.rho_00[s] -= up + down;
            }
        }
    };
    for f in &orbitals.protons {
        spec.check_same(f.spec())?;
        accumulate(f, true, &mut out);
    }
    for f in &orbitals.neutrons {
        spec.check_same(f.spec())?;
        accumulate(f, false, &mut out);
    }
    Ok(out)
}

/// Solves (-Delta + mass^2) phi = strength * source spectrally; for
/// mass = 0 the zero mode is dropped (uniform neutralizing background).
pub fn helmholtz_solve(spec: &LatticeSpec, source: &[f64], mass: f64, strength: f64) -> Vec<f64> {
    let mut hat: Vec<Complex64> = source.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(spec, &mut hat, -1);
    for s in 0..spec.sites() {
        let k = spec.momentum(s);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if mass == 0.0 && k2 == 0.0 {
            // Coulomb zero mode: uniform neutralizing background
            hat[s] = C_ZERO;
        } else {
            hat[s] *= Complex64::new(strength / (k2 + mass * mass), 0.0);
        }
    }
    fft3(spec, &mut hat, 1);
    hat.iter().map(|v| v.re).collect()
}

/// Closed-form solution of the four linear field equations as momentum-space
/// multipliers. The Coulomb k = 0 mode is set to zero.
pub fn solve_fields(rho: &DensitySet, params: &ModelParams) -> MesonFieldSet {
    let spec = &rho.spec;
    MesonFieldSet {
        spec: *spec,
        sigma: helmholtz_solve(spec, &rho.rho_s, params.m_sigma, -params.g_sigma),
        omega0: helmholtz_solve(spec, &rho.rho_0, params.m_omega, params.g_omega),
        r00: helmholtz_solve(spec, &rho.rho_00, params.m_rho, params.g_rho),
        a0: helmholtz_solve(spec, &rho.rho_c, 0.0, params.e_charge),
    }
}

/// Relative L2 residuals of the four field equations, evaluated spectrally.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FieldResiduals {
    pub sigma: f64,
    pub omega0: f64,
    pub r00: f64,
    pub a0: f64,
}

impl FieldResiduals {
    pub fn max(&self) -> f64 {
        self.sigma.max(self.omega0).max(self.r00).max(self.a0)
    }
}

fn helmholtz_apply(spec: &LatticeSpec, field: &[f64], mass: f64) -> Vec<f64> {
    let mut hat: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(spec, &mut hat, -1);
    for s in 0..spec.sites() {
        let k = spec.momentum(s);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        hat[s] *= Complex64::new(k2 + mass * mass, 0.0);
    }
    fft3(spec, &mut hat, 1);
    hat.iter().map(|v| v.re).collect()
}

fn relative_residual(lhs: &[f64], rhs: &[f64]) -> f64 {
    let num: f64 = lhs.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = rhs.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Checks (-Laplacian + m^2) field = +/- g rho for the four channels.
/// The Coulomb residual is taken against the mean-zero part of rho_c.
pub fn verify_field_equation(
    fields: &MesonFieldSet,
    rho: &DensitySet,
    params: &ModelParams,
) -> FieldResiduals {
    let spec = &rho.spec;
    let check = |field: &[f64], mass: f64, strength: f64, source: &[f64]| -> f64 {
        let lhs = helmholtz_apply(spec, field, mass);
        let rhs: Vec<f64> = source.iter().map(|&v| strength * v).collect();
        relative_residual(&lhs, &rhs)
    };
    let mean_c = rho.rho_c.iter().sum::<f64>() / spec.sites() as f64;
    let rho_c0: Vec<f64> = rho.rho_c.iter().map(|&v| v - mean_c).collect();
    FieldResiduals {
        sigma: check(&fields.sigma, params.m_sigma, -params.g_sigma, &rho.rho_s),
        omega0: check(&fields.omega0, params.m_omega, params.g_omega, &rho.rho_0),
        r00: check(&fields.r00, params.m_rho, params.g_rho, &rho.rho_00),
        a0: check(&fields.a0, 0.0, params.e_charge, &rho_c0),
    }
}
