//! Small dense linear-algebra helpers: Gaussian elimination, least squares
//! via normal equations, power iteration, and a cyclic Jacobi eigensolver.
//!
//! Everything here targets desk-scale problems (n up to a couple thousand
//! for the eigensolver, single digits for the direct solves).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Solve `M x = b` for square `M` by Gaussian elimination with partial pivoting.
///
/// Returns `DegenerateSimplex` when a pivot falls below `tol` relative to the
/// largest entry of the matrix (the callers all solve simplex-geometry systems,
/// where a vanishing pivot means affine degeneracy).
pub fn solve(m: ArrayView2<f64>, b: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
    let n = m.nrows();
    if m.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve: matrix {}x{}, rhs {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let mut a = m.to_owned();
    let mut x = b.to_owned();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[[row, col]].abs() > a[[piv, col]].abs() {
                piv = row;
            }
        }
        if a[[piv, col]].abs() <= tol * scale {
            return Err(Error::DegenerateSimplex);
        }
        if piv != col {
            for j in 0..n {
                a.swap([col, j], [piv, j]);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[[row, j]] -= f * a[[col, j]];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[[col, col]];
        for row in 0..col {
            x[row] -= a[[row, col]] * x[col];
        }
    }
    Ok(x)
}

/// Least-squares solution of the (possibly overdetermined) system `M x = b`
/// via the normal equations. Fine at the tiny sizes used here.
pub fn lstsq(m: ArrayView2<f64>, b: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
    let mt = m.t();
    let gram = mt.dot(&m);
    let rhs = mt.dot(&b);
    solve(gram.view(), rhs.view(), tol)
}

/// Largest singular value of `a` by power iteration on `aᵀa`.
pub fn sigma_max(a: ArrayView2<f64>, iterations: usize, tol: f64) -> f64 {
    let m = a.ncols();
    if m == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // fixed deterministic start vector
    let mut v = Array1::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut prev = 0.0f64;
    for _ in 0..iterations {
        let w = a.t().dot(&a.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let lam = v.dot(&a.t().dot(&a.dot(&v)));
        if (lam - prev).abs() <= tol * lam.abs().max(1.0) {
            prev = lam;
            break;
        }
        prev = lam;
    }
    prev.max(0.0).sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `off_tol`
/// (absolute, relative to the matrix Frobenius norm) or `max_sweeps` is hit.
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvector columns.
pub fn jacobi_eigen(
    m: ArrayView2<f64>,
    sym_tol: f64,
    off_tol: f64,
    max_sweeps: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "jacobi_eigen: matrix {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            max_asym = max_asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if max_asym > sym_tol {
        return Err(Error::NotSymmetric(max_asym));
    }

    // Flat row-major buffers; A stays symmetric throughout, so each rotation
    // only recomputes rows p and q (contiguous) and mirrors them into the
    // columns. V is kept transposed (rows are eigenvectors) so its updates
    // are contiguous too.
    let mut a: Vec<f64> = m.iter().copied().collect();
    let mut vt = vec![0.0f64; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let threshold = off_tol * frob;
    let skip_below = threshold / (n as f64) * 1e-3;

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut row_p = vec![0.0f64; n];
    let mut row_q = vec![0.0f64; n];
    let mut converged = off_norm(&a) <= threshold;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= skip_below {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // p < q, so splitting at row q gives disjoint row slices
                {
                    let (lo, hi) = a.split_at_mut(q * n);
                    let rp = &mut lo[p * n..p * n + n];
                    let rq = &mut hi[..n];
                    for (dp, dq) in rp.iter_mut().zip(rq.iter_mut()) {
                        let (xp, xq) = (*dp, *dq);
                        *dp = c * xp - s * xq;
                        *dq = s * xp + c * xq;
                    }
                    row_p.copy_from_slice(rp);
                    row_q.copy_from_slice(rq);
                }
                // closed-form 2x2 block keeps a[p][q] exactly zero
                a[p * n + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a[q * n + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                row_p[p] = a[p * n + p];
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                row_q[q] = a[q * n + q];
                for (k, (&vp, &vq)) in row_p.iter().zip(row_q.iter()).enumerate() {
                    let base = k * n;
                    a[base + p] = vp;
                    a[base + q] = vq;
                }

                {
                    let (lo, hi) = vt.split_at_mut(q * n);
                    let rp = &mut lo[p * n..p * n + n];
                    let rq = &mut hi[..n];
                    for (dp, dq) in rp.iter_mut().zip(rq.iter_mut()) {
                        let (xp, xq) = (*dp, *dq);
                        *dp = c * xp - s * xq;
                        *dq = s * xp + c * xq;
                    }
                }
            }
        }
        converged = off_norm(&a) <= threshold;
    }
    if !converged {
        return Err(Error::NoConvergence(max_sweeps));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[i * n + i]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[[k, dst]] = vt[src * n + k];
        }
    }
    Ok((eigenvalues, eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solve_identity() {
        let m = Array2::eye(3);
        let b = array![1.0, 2.0, 3.0];
        let x = solve(m.view(), b.view(), 1e-12).unwrap();
        assert_abs_diff_eq!(x.as_slice().unwrap(), b.as_slice().unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn solve_singular_errors() {
        let m = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![1.0, 2.0];
        assert!(matches!(
            solve(m.view(), b.view(), 1e-12),
            Err(Error::DegenerateSimplex)
        ));
    }

    #[test]
    fn sigma_max_diag() {
        let m = array![[3.0, 0.0], [0.0, 2.0]];
        assert_abs_diff_eq!(sigma_max(m.view(), 200, 1e-14), 3.0, epsilon = 1e-8);
    }

    #[test]
    fn jacobi_identity() {
        let (vals, _) = jacobi_eigen(Array2::eye(4).view(), 1e-10, 1e-10, 100).unwrap();
        for v in vals {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_diag_sorted() {
        let m = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, _) = jacobi_eigen(m.view(), 1e-10, 1e-10, 100).unwrap();
        assert_abs_diff_eq!(vals.as_slice().unwrap(), [1.0, 2.0, 3.0].as_slice(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                m[[i, j]] = x;
                m[[j, i]] = x;
            }
        }
        let (vals, vecs) = jacobi_eigen(m.view(), 1e-10, 1e-10, 100).unwrap();
        // orthogonality
        let vtv = vecs.t().dot(&vecs);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(vtv[[i, j]], expect, epsilon = 1e-10);
            }
        }
        // reconstruction
        let lam = Array2::from_diag(&vals);
        let rec = vecs.dot(&lam).dot(&vecs.t());
        let err = (&rec - &m).iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * norm, "reconstruction error {err}");
    }

    #[test]
    fn jacobi_rejects_asymmetric() {
        let m = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(matches!(
            jacobi_eigen(m.view(), 1e-10, 1e-10, 100),
            Err(Error::NotSymmetric(_))
        ));
    }
}
