//! Small dense helpers shared across modules: deterministic Hermitian
//! eigendecompositions, principal matrix square roots, Gram matrices and the
//! right action of a matrix on an orbital list.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::RmfError;
use crate::lattice::{SpinorField, C_ZERO};

/// Hermitian eigendecomposition with ascending eigenvalues and a
/// deterministic phase convention: in each eigenvector the largest-magnitude
/// component (lowest index on ties) is made real positive.
pub fn herm_eig(mat: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = mat.nrows();
    let se = mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(n, n, C_ZERO);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: DVector<Complex64> = se.eigenvectors.column(src).into();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

pub fn fix_phase(col: &mut DVector<Complex64>) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, v) in col.iter().enumerate() {
        let mag = v.norm();
        if mag > best_mag + 1e-14 {
            best_mag = mag;
            best = i;
        }
    }
    let pivot = col[best];
    if pivot.norm() > 0.0 {
        let phase = pivot / pivot.norm();
        for v in col.iter_mut() {
            *v /= phase;
        }
    }
}

/// Largest |eigenvalue| of a Hermitian matrix (operator norm).
pub fn herm_op_norm(mat: &DMatrix<Complex64>) -> f64 {
    let (vals, _) = herm_eig(mat);
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn herm_sqrt(mat: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    herm_pow(mat, 0.5)
}

/// Inverse principal square root; errors on a (numerically) singular input,
/// naming the offending null combination.
pub fn herm_inv_sqrt(mat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, RmfError> {
    let (vals, vecs) = herm_eig(mat);
    let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if let Some(col) = vals.iter().position(|&v| v <= 1e-14 * max) {
        return Err(RmfError::SingularGram { column: col });
    }
    let mut out = DMatrix::from_element(mat.nrows(), mat.nrows(), C_ZERO);
    for (i, &v) in vals.iter().enumerate() {
        let s = Complex64::new(v.powf(-0.5), 0.0);
        let col = vecs.column(i);
        for r in 0..mat.nrows() {
            for c in 0..mat.nrows() {
                out[(r, c)] += col[r] * s * col[c].conj();
            }
        }
    }
    Ok(out)
}

pub fn herm_pow(mat: &DMatrix<Complex64>, p: f64) -> DMatrix<Complex64> {
    let (vals, vecs) = herm_eig(mat);
    let mut out = DMatrix::from_element(mat.nrows(), mat.nrows(), C_ZERO);
    for (i, &v) in vals.iter().enumerate() {
        let s = Complex64::new(v.max(0.0).powf(p), 0.0);
        let col = vecs.column(i);
        for r in 0..mat.nrows() {
            for c in 0..mat.nrows() {
                out[(r, c)] += col[r] * s * col[c].conj();
            }
        }
    }
    out
}

/// Condition number of a Hermitian positive definite matrix.
pub fn herm_cond(mat: &DMatrix<Complex64>) -> f64 {
    let (vals, _) = herm_eig(mat);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// L2 Gram matrix of an orbital list.
pub fn gram(fields: &[SpinorField]) -> Result<DMatrix<Complex64>, RmfError> {
    let m = fields.len();
    let mut g = DMatrix::from_element(m, m, C_ZERO);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = fields[i].inner(&fields[j])?;
        }
    }
    Ok(g)
}

/// Right action Phi . B: output column j = sum_i b_ij phi_i.
pub fn right_mul(fields: &[SpinorField], b: &DMatrix<Complex64>) -> Vec<SpinorField> {
    assert_eq!(fields.len(), b.nrows());
    let mut out = Vec::with_capacity(b.ncols());
    for j in 0..b.ncols() {
        let mut col = fields[0].scaled(b[(0, j)]);
        for i in 1..fields.len() {
            col.axpy(b[(i, j)], &fields[i]);
        }
        out.push(col);
    }
    out
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

/// Gauss-Legendre nodes and weights on (-1, 1), by Newton iteration on the
/// Legendre polynomial with the usual cosine initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // recurrence for P_n(x) and P_{n-1}(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn herm_eig_sorted_and_orthonormal() {
        let m = dmatrix![
            c(2.0, 0.0), c(0.0, 1.0);
            c(0.0, -1.0), c(3.0, 0.0);
        ];
        let (vals, vecs) = herm_eig(&m);
        assert!(vals[0] <= vals[1]);
        // residual per pair
        for i in 0..2 {
            let v: DVector<C> = vecs.column(i).into();
            let r = &m * &v - &v * c(vals[i], 0.0);
            assert!(r.norm() < 1e-12);
        }
        let gram = vecs.adjoint() * &vecs;
        assert!(max_abs_diff(&gram, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn sqrt_of_sqrt_recovers() {
        let m = dmatrix![
            c(2.0, 0.0), c(0.5, 0.5);
            c(0.5, -0.5), c(1.5, 0.0);
        ];
        let s = herm_sqrt(&m);
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
        let inv_s = herm_inv_sqrt(&m).unwrap();
        assert!(max_abs_diff(&(&s * &inv_s), &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2usize, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let quad: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            let exact = 2.0 / (deg as f64 + 1.0);
            assert!((quad - exact).abs() < 1e-12, "n={n} got {quad} want {exact}");
        }
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let m = dmatrix![
            c(1.0, 0.0), c(1.0, 0.0);
            c(1.0, 0.0), c(1.0, 0.0);
        ];
        assert!(matches!(herm_inv_sqrt(&m), Err(RmfError::SingularGram { .. })));
    }
}
