//! Dense linear-algebra helpers shared by the discrete and metric solvers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    sort_eigenpairs(eig.eigenvalues, eig.eigenvectors)
}

pub fn sort_eigenpairs(values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = DVector::from_iterator(order.len(), order.iter().map(|&i| values[i]));
    let mut sorted_vectors = DMatrix::zeros(vectors.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    (sorted_values, sorted_vectors)
}

/// Solves `K z = lambda M z` for symmetric `K` and symmetric positive definite `M`.
///
/// Returns ascending eigenvalues and `M`-orthonormal eigenvectors, or `None`
/// when `M` is not positive definite.
pub fn generalized_sym_eigen(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let m_sym = (m + m.transpose()) * 0.5;
    let chol = Cholesky::new(m_sym)?;
    let l = chol.l();
    // C = L^{-1} K L^{-T}
    let k_sym = (k + k.transpose()) * 0.5;
    let left = l.solve_lower_triangular(&k_sym)?;
    let c = l.solve_lower_triangular(&left.transpose())?;
    let (values, y) = sym_eigen_sorted(&c);
    let z = l.transpose().solve_upper_triangular(&y)?;
    Some((values, z))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn cmax_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Orthonormal basis of the column space of `a`, computed by SVD.
pub fn column_space(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let rows = a.nrows();
    if a.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut basis = CMatrix::zeros(rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    basis
}

pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `basis` in `C^n`.
pub fn orthogonal_complement(basis: &CMatrix, n: usize) -> CMatrix {
    let k = basis.ncols();
    if k == 0 {
        return CMatrix::identity(n, n);
    }
    if k >= n {
        return CMatrix::zeros(n, 0);
    }
    let projector = CMatrix::identity(n, n) - basis * basis.adjoint();
    let herm = (&projector + projector.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = CMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &eig.eigenvectors.column(src));
    }
    out
}

/// Orthonormal basis of the null space of `a` (n columns).
pub fn null_space(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = a.ncols();
    let row_space = column_space(&a.adjoint(), rel_tol);
    orthogonal_complement(&row_space, n)
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn largest_principal_angle_sin(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() || a.nrows() != b.nrows() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.adjoint() * b);
    residual
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .min(1.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .into_iter()
        .zip(weights)
        .map(move |(x, w)| (mid + half * x, half * w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 8, 64] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n} weight sum {total}");
            let degree = 2 * n - 1;
            let exact = if degree % 2 == 0 { 2.0 / (degree as f64 + 1.0) } else { 0.0 };
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(degree as i32)).sum();
            assert!((approx - exact).abs() < 1e-12, "n={n}");
        }
        let s: f64 = gauss_on(0.0, std::f64::consts::PI, 16).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn generalized_eigen_is_m_orthonormal() {
        let k = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0]);
        let (vals, z) = generalized_sym_eigen(&k, &m).unwrap();
        let gram = z.transpose() * &m * &z;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        for j in 0..3 {
            let r = &k * z.column(j) - vals[j] * (&m * z.column(j));
            assert!(r.amax() < 1e-12);
        }
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
    }

    #[test]
    fn complement_and_angles() {
        let a = to_complex(&DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]));
        let c = orthogonal_complement(&a, 3);
        assert_eq!(c.ncols(), 2);
        assert!((a.adjoint() * &c).iter().all(|v| v.norm() < 1e-14));
        let b = to_complex(&DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]));
        assert!((largest_principal_angle_sin(&a, &b) - 1.0).abs() < 1e-14);
        assert!(largest_principal_angle_sin(&a, &(a.clone() * Complex64::new(0.0, 1.0))) < 1e-15);
    }
}
