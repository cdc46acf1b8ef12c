use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is read.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

/// Whether every eigenvalue of the Hermitian `m` is at least `-shift`, decided
/// by attempting a Cholesky factorization of `m + shift I`.
pub fn is_psd_shifted(m: &CMatrix, shift: f64) -> bool {
    // nalgebra's complex Cholesky never fails, so factor by hand
    let n = m.nrows();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = m[(j, j)].re + shift;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    true
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().sum()
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
