//! Periodic-box discretization of 4-spinor fields.
//!
//! All derivatives are spectral: fields are expanded in plane waves on a
//! cubic box of side `box_length` with `points_per_dim` nodes per axis, and
//! the free Dirac operator acts as the 4x4 block matrix `alpha.k + beta m`
//! on each momentum node. No finite-difference stencil is used anywhere, so
//! the free spectrum is the exact (truncated) continuum one and there are no
//! spurious zero modes.

use num_complex::Complex64;
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};

use crate::error::RmfError;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Cubic periodic lattice: side length in units of 1/m_b, even node count per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    box_length: f64,
    points_per_dim: usize,
}

impl LatticeSpec {
    pub fn new(box_length: f64, points_per_dim: usize) -> Result<Self, RmfError> {
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(RmfError::InvalidLattice(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        if points_per_dim < 2 || points_per_dim % 2 != 0 {
            return Err(RmfError::InvalidLattice(format!(
                "points_per_dim must be even and >= 2, got {points_per_dim}"
            )));
        }
        Ok(Self { box_length, points_per_dim })
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_dim as f64
    }

    /// Number of lattice sites n^3.
    pub fn sites(&self) -> usize {
        self.points_per_dim.pow(3)
    }

    /// Dimension of the discretized spinor space, 4 n^3.
    pub fn spinor_dim(&self) -> usize {
        4 * self.sites()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Signed momentum for frequency index `j` along one axis.
    ///
    /// Indices n/2..n map to negative momenta; the unmatched Nyquist plane
    /// j = n/2 keeps its signed value -pi*n/L.
    pub fn momentum_component(&self, j: usize) -> f64 {
        let n = self.points_per_dim as i64;
        let j = j as i64;
        let signed = if j < n / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI / self.box_length * signed as f64
    }

    pub fn site_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.points_per_dim;
        (ix * n + iy) * n + iz
    }

    pub fn site_coords(&self, site: usize) -> [usize; 3] {
        let n = self.points_per_dim;
        [site / (n * n), (site / n) % n, site % n]
    }

    /// Momentum vector of a site index interpreted as a frequency node.
    pub fn momentum(&self, site: usize) -> [f64; 3] {
        let [jx, jy, jz] = self.site_coords(site);
        [
            self.momentum_component(jx),
            self.momentum_component(jy),
            self.momentum_component(jz),
        ]
    }

    /// Position vector of a lattice site.
    pub fn position(&self, site: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.site_coords(site);
        let h = self.spacing();
        [ix as f64 * h, iy as f64 * h, iz as f64 * h]
    }

    /// Minimum-image distance between two positions on the torus.
    pub fn torus_distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let l = self.box_length;
        let mut d2 = 0.0;
        for i in 0..3 {
            let mut d = (a[i] - b[i]).abs() % l;
            if d > l / 2.0 {
                d = l - d;
            }
            d2 += d * d;
        }
        d2.sqrt()
    }

    pub fn check_same(&self, other: &LatticeSpec) -> Result<(), RmfError> {
        if self != other {
            return Err(RmfError::LatticeMismatch);
        }
        Ok(())
    }
}

/// Unitary 3D DFT of one scalar component laid out site-major.
///
/// `dir = -1` is the forward (position -> momentum) transform. Both
/// directions carry 1/sqrt(N) so the composition is the identity and
/// Parseval holds without volume factors.
pub fn fft3(spec: &LatticeSpec, data: &mut [Complex64], dir: i32) {
    let n = spec.points_per_dim();
    assert_eq!(data.len(), spec.sites());
    let mut planner = FftPlanner::<f64>::new();
    let fft = if dir < 0 {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    let mut line = vec![FftComplex::new(0.0, 0.0); n];
    // z lines are contiguous; x and y are strided
    for ix in 0..n {
        for iy in 0..n {
            let base = spec.site_index(ix, iy, 0);
            for iz in 0..n {
                line[iz] = data[base + iz];
            }
            fft.process(&mut line);
            for iz in 0..n {
                data[base + iz] = line[iz];
            }
        }
    }
    for ix in 0..n {
        for iz in 0..n {
            for iy in 0..n {
                line[iy] = data[spec.site_index(ix, iy, iz)];
            }
            fft.process(&mut line);
            for iy in 0..n {
                data[spec.site_index(ix, iy, iz)] = line[iy];
            }
        }
    }
    for iy in 0..n {
        for iz in 0..n {
            for ix in 0..n {
                line[ix] = data[spec.site_index(ix, iy, iz)];
            }
            fft.process(&mut line);
            for ix in 0..n {
                data[spec.site_index(ix, iy, iz)] = line[ix];
            }
        }
    }
    let scale = 1.0 / (spec.sites() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Position,
    Momentum,
}

/// A complex 4-spinor field on the lattice, in either representation.
///
/// Values are site-major: `values[site * 4 + component]`.
#[derive(Debug, Clone)]
pub struct SpinorField {
    spec: LatticeSpec,
    space: Space,
    values: Vec<Complex64>,
}

impl SpinorField {
    pub fn zero(spec: LatticeSpec) -> Self {
        Self {
            spec,
            space: Space::Position,
            values: vec![C_ZERO; spec.spinor_dim()],
        }
    }

    pub fn from_values(spec: LatticeSpec, space: Space, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), spec.spinor_dim());
        Self { spec, space, values }
    }

    /// Constant spinor with the given 4 components at every site, position space.
    pub fn constant(spec: LatticeSpec, spinor: [Complex64; 4]) -> Self {
        let mut f = Self::zero(spec);
        for s in 0..spec.sites() {
            f.values[s * 4..s * 4 + 4].copy_from_slice(&spinor);
        }
        f
    }

    /// Normalized plane wave e^{i k.x} u with momentum node `freq` and spinor u.
    pub fn plane_wave(spec: LatticeSpec, freq: [usize; 3], spinor: [Complex64; 4]) -> Self {
        let mut f = Self::zero(spec);
        let k = [
            spec.momentum_component(freq[0]),
            spec.momentum_component(freq[1]),
            spec.momentum_component(freq[2]),
        ];
        for s in 0..spec.sites() {
            let x = spec.position(s);
            let phase = (C_I * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2])).exp();
            for c in 0..4 {
                f.values[s * 4 + c] = phase * spinor[c];
            }
        }
        f
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    fn transform(&self, dir: i32, space: Space) -> SpinorField {
        let spec = self.spec;
        let mut out = vec![C_ZERO; spec.spinor_dim()];
        let mut comp = vec![C_ZERO; spec.sites()];
        for c in 0..4 {
            for s in 0..spec.sites() {
                comp[s] = self.values[s * 4 + c];
            }
            fft3(&spec, &mut comp, dir);
            for s in 0..spec.sites() {
                out[s * 4 + c] = comp[s];
            }
        }
        SpinorField { spec, space, values: out }
    }

    pub fn to_momentum(&self) -> SpinorField {
        match self.space {
            Space::Momentum => self.clone(),
            Space::Position => self.transform(-1, Space::Momentum),
        }
    }

    pub fn to_position(&self) -> SpinorField {
        match self.space {
            Space::Position => self.clone(),
            Space::Momentum => self.transform(1, Space::Position),
        }
    }

    /// L2 inner product (f, g) = sum conj(f) g * cell_volume.
    ///
    /// Representation independent by the unitarity of the transform; mixed
    /// representations are an error.
    pub fn inner(&self, other: &SpinorField) -> Result<Complex64, RmfError> {
        self.spec.check_same(&other.spec)?;
        if self.space != other.space {
            return Err(RmfError::LatticeMismatch);
        }
        let mut acc = C_ZERO;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += a.conj() * b;
        }
        Ok(acc * self.spec.cell_volume())
    }

    pub fn norm_l2(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.values {
            acc += v.norm_sqr();
        }
        (acc * self.spec.cell_volume()).sqrt()
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: Complex64) -> SpinorField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// self += a * other. Both fields must share lattice and representation.
    pub fn axpy(&mut self, a: Complex64, other: &SpinorField) {
        assert_eq!(self.spec, other.spec);
        assert_eq!(self.space, other.space);
        for (v, w) in self.values.iter_mut().zip(other.values.iter()) {
            *v += a * w;
        }
    }

    pub fn sub(&self, other: &SpinorField) -> SpinorField {
        let mut out = self.clone();
        out.axpy(-C_ONE, other);
        out
    }

    pub fn add(&self, other: &SpinorField) -> SpinorField {
        let mut out = self.clone();
        out.axpy(C_ONE, other);
        out
    }
}

/// The constant Dirac matrices in the standard representation.
pub mod dirac {
    use super::{Complex64, C_I, C_ONE, C_ZERO};

    pub type Mat4 = [[Complex64; 4]; 4];

    pub fn pauli(k: usize) -> [[Complex64; 2]; 2] {
        match k {
            1 => [[C_ZERO, C_ONE], [C_ONE, C_ZERO]],
            2 => [[C_ZERO, -C_I], [C_I, C_ZERO]],
            3 => [[C_ONE, C_ZERO], [C_ZERO, -C_ONE]],
            _ => panic!("pauli index must be 1..=3"),
        }
    }

    pub fn beta() -> Mat4 {
        let mut m = [[C_ZERO; 4]; 4];
        m[0][0] = C_ONE;
        m[1][1] = C_ONE;
        m[2][2] = -C_ONE;
        m[3][3] = -C_ONE;
        m
    }

    pub fn alpha(k: usize) -> Mat4 {
        let s = pauli(k);
        let mut m = [[C_ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j + 2] = s[i][j];
                m[i + 2][j] = s[i][j];
            }
        }
        m
    }

    /// gamma^0 = beta, gamma^k = beta alpha_k.
    pub fn gamma(mu: usize) -> Mat4 {
        if mu == 0 {
            return beta();
        }
        mat_mul(&beta(), &alpha(mu))
    }

    pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
        let mut m = [[C_ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    m[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        m
    }

    pub fn mat_add(a: &Mat4, b: &Mat4) -> Mat4 {
        let mut m = *a;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += b[i][j];
            }
        }
        m
    }

    pub fn mat_scale(a: &Mat4, s: Complex64) -> Mat4 {
        let mut m = *a;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn identity() -> Mat4 {
        let mut m = [[C_ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = C_ONE;
        }
        m
    }

    /// The momentum-space symbol alpha.k + beta m of the free Dirac operator.
    pub fn h0_symbol(k: [f64; 3], m_b: f64) -> Mat4 {
        let mut m = mat_scale(&beta(), Complex64::new(m_b, 0.0));
        for (axis, &kc) in k.iter().enumerate() {
            m = mat_add(&m, &mat_scale(&alpha(axis + 1), Complex64::new(kc, 0.0)));
        }
        m
    }

    pub fn apply_mat4(m: &Mat4, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [C_ZERO; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i] += m[i][j] * v[j];
            }
        }
        out
    }
}

fn apply_symbol<F>(field: &SpinorField, mut symbol: F) -> SpinorField
where
    F: FnMut([f64; 3]) -> dirac::Mat4,
{
    let input_space = field.space();
    let spec = *field.spec();
    let mut hat = field.to_momentum();
    for s in 0..spec.sites() {
        let k = spec.momentum(s);
        let m = symbol(k);
        let v = [
            hat.values[s * 4],
            hat.values[s * 4 + 1],
            hat.values[s * 4 + 2],
            hat.values[s * 4 + 3],
        ];
        let w = dirac::apply_mat4(&m, &v);
        hat.values[s * 4..s * 4 + 4].copy_from_slice(&w);
    }
    match input_space {
        Space::Momentum => hat,
        Space::Position => hat.to_position(),
    }
}

/// Free Dirac operator H0 = -i alpha.grad + beta m_b, applied spectrally.
pub fn apply_h0(field: &SpinorField, m_b: f64) -> SpinorField {
    assert!(m_b > 0.0);
    apply_symbol(field, |k| dirac::h0_symbol(k, m_b))
}

/// |H0| = sqrt(m_b^2 - Laplacian), the multiplier sqrt(m_b^2 + |k|^2).
pub fn apply_abs_h0(field: &SpinorField, m_b: f64) -> SpinorField {
    apply_symbol(field, |k| {
        let e = (m_b * m_b + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        dirac::mat_scale(&dirac::identity(), Complex64::new(e, 0.0))
    })
}

/// |H0|^p for real p; used for the H^{1/2} <-> H^{-1/2} sandwich in bound checks.
pub fn apply_abs_h0_pow(field: &SpinorField, m_b: f64, p: f64) -> SpinorField {
    apply_symbol(field, |k| {
        let e = (m_b * m_b + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        dirac::mat_scale(&dirac::identity(), Complex64::new(e.powf(p), 0.0))
    })
}

/// Spectral (-Laplacian + m^2), acting per spinor component.
pub fn apply_helmholtz(field: &SpinorField, m: f64) -> SpinorField {
    apply_symbol(field, |k| {
        let e = m * m + k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        dirac::mat_scale(&dirac::identity(), Complex64::new(e, 0.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Free spectral projector on the +/- sqrt(m_b^2 + |k|^2) branch:
/// per node (1 +/- H0(k)/E(k)) / 2.
pub fn apply_free_projector(sign: Sign, field: &SpinorField, m_b: f64) -> SpinorField {
    assert!(m_b > 0.0);
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    apply_symbol(field, |k| {
        let e = (m_b * m_b + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let h = dirac::h0_symbol(k, m_b);
        let half = Complex64::new(0.5, 0.0);
        dirac::mat_add(
            &dirac::mat_scale(&dirac::identity(), half),
            &dirac::mat_scale(&h, Complex64::new(s / (2.0 * e), 0.0)),
        )
    })
}

/// (f, |H0| g) computed spectrally with multiplier sqrt(m_b^2 + |k|^2);
/// the squared H^{1/2} norm for f = g.
pub fn h_half_inner(f: &SpinorField, g: &SpinorField, m_b: f64) -> Result<Complex64, RmfError> {
    f.spec().check_same(g.spec())?;
    let fh = f.to_momentum();
    let gh = apply_abs_h0(&g.to_momentum(), m_b);
    fh.inner(&gh)
}

/// Exact cyclic shift by whole lattice steps (periodic wrap).
pub fn translate(field: &SpinorField, shift: [i64; 3]) -> SpinorField {
    let pos = field.to_position();
    let spec = *pos.spec();
    let n = spec.points_per_dim() as i64;
    let wrap = |v: i64| -> usize { (((v % n) + n) % n) as usize };
    let mut out = SpinorField::zero(spec);
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let src = spec.site_index(ix as usize, iy as usize, iz as usize);
                let dst = spec.site_index(wrap(ix + shift[0]), wrap(iy + shift[1]), wrap(iz + shift[2]));
                for c in 0..4 {
                    out.values[dst * 4 + c] = pos.values[src * 4 + c];
                }
            }
        }
    }
    out
}

/// Cyclic shift of a real scalar field.
pub fn translate_scalar(spec: &LatticeSpec, data: &[f64], shift: [i64; 3]) -> Vec<f64> {
    let n = spec.points_per_dim() as i64;
    let wrap = |v: i64| -> usize { (((v % n) + n) % n) as usize };
    let mut out = vec![0.0; spec.sites()];
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let src = spec.site_index(ix as usize, iy as usize, iz as usize);
                let dst = spec.site_index(wrap(ix + shift[0]), wrap(iy + shift[1]), wrap(iz + shift[2]));
                out[dst] = data[src];
            }
        }
    }
    out
}
