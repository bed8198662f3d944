//! Small dense helpers: symmetric 3×3 eigen-decomposition and least squares.

use crate::scalar::Scalar;

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix.
///
/// Returns eigenvalues and the matrix whose *columns* are the eigenvectors.
pub fn sym3_eigen<T: Scalar>(a: [[T; 3]; 3]) -> ([T; 3], [[T; 3]; 3]) {
    let mut a = a;
    let mut v = [[T::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() <= T::min_positive_value() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Minimum-norm solution of `m x = b` for symmetric positive semidefinite `m`.
///
/// Also returns the rank used (eigenvalues below `rel_tol · λ_max` are dropped).
pub fn sym3_pinv_solve<T: Scalar>(m: [[T; 3]; 3], b: [T; 3], rel_tol: T) -> ([T; 3], usize) {
    let (vals, vecs) = sym3_eigen(m);
    let lmax = vals.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let mut x = [T::zero(); 3];
    let mut rank = 0;
    for k in 0..3 {
        if vals[k].abs() <= rel_tol * lmax || lmax == T::zero() {
            continue;
        }
        rank += 1;
        let proj = (0..3).map(|i| vecs[i][k] * b[i]).sum::<T>() / vals[k];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = *xi + proj * vecs[i][k];
        }
    }
    (x, rank)
}
