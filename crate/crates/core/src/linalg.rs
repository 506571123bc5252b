//! Small dense solvers used by calibration.

use nalgebra::SymmetricEigen;

use crate::{Error, Matrix, Real, Result, Vector};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.
pub fn symmetric_eigen_desc<T: Real>(m: &Matrix<T>) -> (Vector<T>, Matrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = Vector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue<T: Real>(m: &Matrix<T>) -> T {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().copied().fold(T::infinity(), |a, b| if b < a { b } else { a })
}

pub fn symmetrize<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Solves `A X + X A = C` for symmetric positive definite `A` and symmetric `C`.
///
/// Bartels–Stewart with the Schur form of a symmetric matrix, which is its
/// eigendecomposition `A = U Λ Uᵀ`: the transformed system is diagonal,
/// `Y_ij = (UᵀCU)_ij / (λ_i + λ_j)`.
pub fn solve_symmetric_lyapunov<T: Real>(a: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.nrows(),
        });
    }
    let eig = SymmetricEigen::new(a.clone());
    let u = &eig.eigenvectors;
    let ct = u.transpose() * c * u;
    let lam = &eig.eigenvalues;
    let y = Matrix::from_fn(n, n, |i, j| ct[(i, j)] / (lam[i] + lam[j]));
    Ok(symmetrize(&(u * y * u.transpose())))
}

/// Same equation through the dense `n² × n²` system `(I ⊗ A + Aᵀ ⊗ I) vec X = vec C`.
pub fn solve_lyapunov_kronecker<T: Real>(a: &Matrix<T>, c: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.nrows(),
        });
    }
    let eye = Matrix::<T>::identity(n, n);
    let big = eye.kronecker(a) + a.transpose().kronecker(&eye);
    let rhs = Vector::from_column_slice(c.as_slice());
    let x = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Kronecker system".into()))?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, x.as_slice())))
}

/// Least-squares solution of `B x ≈ a` by Householder QR with column pivoting on
/// remaining column norms. Returns the solution and the numerical rank.
///
/// Columns beyond the detected rank get a zero coefficient.
pub fn lstsq_pivoted_qr<T: Real>(b: &Matrix<T>, a: &Vector<T>, rel_tol: T) -> Result<(Vector<T>, usize)> {
    let (m, n) = b.shape();
    if a.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: a.len() });
    }
    let mut r = b.clone();
    let mut rhs = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut rank = 0;
    let mut first_norm = T::zero();

    for k in 0..steps {
        // pivot: largest remaining column norm below row k
        let (mut best, mut best_norm) = (k, T::zero());
        for j in k..n {
            let nrm = (k..m).fold(T::zero(), |acc, i| acc + r[(i, j)] * r[(i, j)]).sqrt();
            if nrm > best_norm {
                best = j;
                best_norm = nrm;
            }
        }
        if k == 0 {
            first_norm = best_norm;
        }
        if best_norm <= rel_tol * first_norm || best_norm == T::zero() {
            break;
        }
        r.swap_columns(k, best);
        perm.swap(k, best);

        let mut v: Vector<T> = Vector::from_fn(m - k, |i, _| r[(k + i, k)]);
        let alpha = if v[0] >= T::zero() { -best_norm } else { best_norm };
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in k..n {
                let dot = (0..m - k).fold(T::zero(), |acc, i| acc + v[i] * r[(k + i, j)]);
                let proj = dot * two / vnorm2;
                for i in 0..m - k {
                    r[(k + i, j)] -= proj * v[i];
                }
            }
            let dot = (0..m - k).fold(T::zero(), |acc, i| acc + v[i] * rhs[k + i]);
            let proj = dot * two / vnorm2;
            for i in 0..m - k {
                rhs[k + i] -= proj * v[i];
            }
        }
        rank += 1;
    }

    let mut y = Vector::zeros(n);
    for i in (0..rank).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..rank {
            acc -= r[(i, j)] * y[j];
        }
        y[i] = acc / r[(i, i)];
    }
    let mut x = Vector::zeros(n);
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    Ok((x, rank))
}
