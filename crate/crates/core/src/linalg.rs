//! Thin wrappers over nalgebra's dense decompositions.

use nalgebra::DMatrix;

use crate::error::{bail, Result};
use crate::tensor::{Tensor, C64};

/// Full thin SVD in row-major layout, singular values descending.
pub(crate) struct DenseSvd {
    /// `m x p`, with `p = min(m, n)`.
    pub u: Vec<C64>,
    pub s: Vec<f64>,
    /// `p x n`.
    pub vt: Vec<C64>,
}

pub(crate) fn svd_row_major(data: &[C64], m: usize, n: usize) -> Result<DenseSvd> {
    if m == 0 || n == 0 {
        return Ok(DenseSvd { u: Vec::new(), s: Vec::new(), vt: Vec::new() });
    }
    let mat = DMatrix::from_row_slice(m, n, data);
    let frob = mat.norm();
    // nalgebra's complex bidiagonal iteration sometimes settles on a wrong
    // factorization of ordinary well-conditioned matrices. Every attempt is
    // checked by reconstruction; the adjoint, looser convergence thresholds
    // and a unitary pre-rotation are tried in turn.
    let dft = std::cell::OnceCell::new();
    let dft = || {
        dft.get_or_init(|| {
            DMatrix::from_fn(m, m, |i, j| {
                C64::from_polar(1.0 / (m as f64).sqrt(), std::f64::consts::TAU * (i * j) as f64 / m as f64)
            })
        })
    };
    for variant in 0..3 {
        for eps in [5.0 * f64::EPSILON, 1e-13, 1e-12] {
            let input = match variant {
                0 => mat.clone(),
                1 => mat.adjoint(),
                _ => dft() * &mat,
            };
            let Some(dec) = input.try_svd(true, true, eps, 0) else { continue };
            let (Some(u), Some(vt)) = (dec.u, dec.v_t) else {
                bail!(Internal, "SVD factors missing");
            };
            let s = dec.singular_values;
            if s.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let (u, vt) = match variant {
                0 => (u, vt),
                1 => (vt.adjoint(), u.adjoint()),
                _ => (dft().adjoint() * u, vt),
            };
            let recon = &u * DMatrix::from_diagonal(&s.map(|x| C64::new(x, 0.0))) * &vt;
            if (recon - &mat).norm() <= 1e-11 * frob {
                return Ok(ordered(&u, s.as_slice(), &vt, m, n));
            }
        }
    }
    bail!(Numeric, "SVD of a {m}x{n} matrix lost accuracy")
}

/// Sorts singular triplets by descending value into row-major buffers.
fn ordered(u: &DMatrix<C64>, s: &[f64], vt: &DMatrix<C64>, m: usize, n: usize) -> DenseSvd {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut uo = Vec::with_capacity(m * s.len());
    for i in 0..m {
        uo.extend(order.iter().map(|&k| u[(i, k)]));
    }
    let mut vo = Vec::with_capacity(s.len() * n);
    for &k in &order {
        vo.extend((0..n).map(|j| vt[(k, j)]));
    }
    DenseSvd { u: uo, s: order.iter().map(|&k| s[k].max(0.0)).collect(), vt: vo }
}

/// Eigen-decomposition of a Hermitian matrix given as a square tensor.
///
/// Returns ascending eigenvalues and a matrix whose column `j` is the
/// eigenvector for eigenvalue `j`.
pub fn eigh(matrix: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let sh = matrix.shape();
    if sh.len() != 2 || sh[0] != sh[1] {
        bail!(Dimension, "eigh needs a square matrix, got {:?}", sh);
    }
    let n = sh[0];
    check_hermitian(matrix, 1e-10)?;
    let (vals, vecs) = eigh_dense(DMatrix::from_row_slice(n, n, matrix.data()))?;
    let out = Tensor::from_fn(&[n, n], |i| vecs[(i[0], i[1])]);
    Ok((vals, out))
}

pub(crate) fn eigh_dense(mat: DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = mat.nrows();
    let Some(eig) = mat.try_symmetric_eigen(f64::EPSILON, 0) else {
        bail!(Numeric, "Hermitian eigensolver did not converge on {n}x{n}");
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// Checks `‖M − M†‖_max ≤ tol·max(1, ‖M‖_max)`.
pub fn check_hermitian(matrix: &Tensor, tol: f64) -> Result<()> {
    let sh = matrix.shape();
    if sh.len() != 2 || sh[0] != sh[1] {
        bail!(Dimension, "expected a square matrix, got {:?}", sh);
    }
    let n = sh[0];
    let scale = matrix.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..=i {
            if (matrix.get(&[i, j]) - matrix.get(&[j, i]).conj()).norm() > tol * scale {
                bail!(Argument, "matrix is not Hermitian at ({i}, {j})");
            }
        }
    }
    Ok(())
}

/// `exp(-t M)` for Hermitian `M`, via its eigen-decomposition.
pub fn expm_hermitian(matrix: &Tensor, t: f64) -> Result<Tensor> {
    let (vals, vecs) = eigh(matrix)?;
    let n = vals.len();
    Ok(Tensor::from_fn(&[n, n], |ix| {
        (0..n)
            .map(|k| vecs.get(&[ix[0], k]) * (-t * vals[k]).exp() * vecs.get(&[ix[1], k]).conj())
            .sum()
    }))
}
