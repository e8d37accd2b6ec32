//! Thin dense linear-algebra wrappers over LAPACK (via the system BLAS).
//!
//! Everything here is `f64`/`Complex64` and dense; matrices are `ndarray` in standard
//! (row-major) layout at the API surface, transposed in and out of LAPACK's
//! column-major world where it matters.

use ndarray::{Array1, Array2, ShapeBuilder};
use num_complex::Complex64;

use crate::{Error, Result};

fn as_col_major_f64(a: &Array2<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len());
    for col in a.t().rows() {
        v.extend(col.iter().copied());
    }
    v
}

fn as_col_major_c64(a: &Array2<Complex64>) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(a.len());
    for col in a.t().rows() {
        v.extend(col.iter().copied());
    }
    v
}

/// Eigendecomposition of a real symmetric matrix (divide and conquer).
///
/// Returns ascending eigenvalues and the matrix whose column k is the k-th
/// orthonormal eigenvector.
pub fn sym_eig(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Domain("sym_eig needs a square matrix".into()));
    }
    let ni = n as i32;
    // symmetric input: row-major slice is also a valid column-major image
    let mut data: Vec<f64> = a.iter().copied().collect();
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;

    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    unsafe {
        lapack::dsyevd(
            b'V', b'L', ni, &mut data, ni, &mut w, &mut work_query, -1, &mut iwork_query, -1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("dsyevd workspace query failed: info={info}")));
    }
    let lwork = work_query[0] as usize;
    let liwork = iwork_query[0] as usize;
    let mut work = vec![0.0f64; lwork.max(1)];
    let mut iwork = vec![0i32; liwork.max(1)];
    unsafe {
        lapack::dsyevd(
            b'V', b'L', ni, &mut data, ni, &mut w,
            &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("dsyevd failed: info={info}")));
    }
    let vecs = Array2::from_shape_vec((n, n).f(), data)
        .map_err(|e| Error::Backend(e.to_string()))?;
    Ok((Array1::from(w), vecs))
}

/// Singular values (descending) of a real matrix.
pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut data = as_col_major_f64(a);
    let mut s = vec![0.0f64; k.max(1)];
    let mut u = [0.0f64];
    let mut vt = [0.0f64];
    let mut iwork = vec![0i32; 8 * k.max(1)];
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    unsafe {
        lapack::dgesdd(
            b'N', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, 1, &mut vt, 1,
            &mut work_query, -1, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("dgesdd query failed: info={info}")));
    }
    let lwork = work_query[0] as usize;
    let mut work = vec![0.0f64; lwork.max(1)];
    unsafe {
        lapack::dgesdd(
            b'N', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, 1, &mut vt, 1,
            &mut work, lwork as i32, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("dgesdd failed: info={info}")));
    }
    Ok(Array1::from(s))
}

/// Singular values (descending) of a complex matrix.
pub fn singular_values_c(a: &Array2<Complex64>) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut data = as_col_major_c64(a);
    let mut s = vec![0.0f64; k.max(1)];
    let mut u = [Complex64::new(0.0, 0.0)];
    let mut vt = [Complex64::new(0.0, 0.0)];
    let mn = m.max(n).max(1);
    let mut rwork = vec![0.0f64; (7 * k * k + 5 * k).max(5 * k * mn).max(1)];
    let mut iwork = vec![0i32; 8 * k.max(1)];
    let mut info = 0i32;
    let mut work_query = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack::zgesdd(
            b'N', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, 1, &mut vt, 1,
            &mut work_query, -1, &mut rwork, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("zgesdd query failed: info={info}")));
    }
    let lwork = work_query[0].re as usize;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1)];
    unsafe {
        lapack::zgesdd(
            b'N', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, 1, &mut vt, 1,
            &mut work, lwork as i32, &mut rwork, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("zgesdd failed: info={info}")));
    }
    Ok(Array1::from(s))
}

/// Full SVD of a complex matrix: A = U diag(s) Vᴴ.
pub fn svd_c(a: &Array2<Complex64>) -> Result<(Array2<Complex64>, Array1<f64>, Array2<Complex64>)> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut data = as_col_major_c64(a);
    let mut s = vec![0.0f64; k.max(1)];
    let mut u = vec![Complex64::new(0.0, 0.0); (m * m).max(1)];
    let mut vt = vec![Complex64::new(0.0, 0.0); (n * n).max(1)];
    let mx = m.max(n).max(1);
    let mut rwork =
        vec![0.0f64; (5 * k * k + 5 * k).max(2 * mx * k + 2 * k * k + k).max(1)];
    let mut iwork = vec![0i32; 8 * k.max(1)];
    let mut info = 0i32;
    let mut work_query = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack::zgesdd(
            b'A', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, m as i32, &mut vt,
            n as i32, &mut work_query, -1, &mut rwork, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("zgesdd(A) query failed: info={info}")));
    }
    let lwork = work_query[0].re as usize;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1)];
    unsafe {
        lapack::zgesdd(
            b'A', m as i32, n as i32, &mut data, m as i32, &mut s, &mut u, m as i32, &mut vt,
            n as i32, &mut work, lwork as i32, &mut rwork, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("zgesdd(A) failed: info={info}")));
    }
    let u = Array2::from_shape_vec((m, m).f(), u).map_err(|e| Error::Backend(e.to_string()))?;
    let vt = Array2::from_shape_vec((n, n).f(), vt).map_err(|e| Error::Backend(e.to_string()))?;
    Ok((
        u.as_standard_layout().to_owned(),
        Array1::from(s),
        vt.as_standard_layout().to_owned(),
    ))
}

/// Solve A X = B for complex dense A (LU with partial pivoting).
pub fn solve_c(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() || b.nrows() != n {
        return Err(Error::Domain("solve_c dimension mismatch".into()));
    }
    let nrhs = b.ncols();
    let mut a_cm = as_col_major_c64(a);
    let mut b_cm = as_col_major_c64(b);
    let mut ipiv = vec![0i32; n.max(1)];
    let mut info = 0i32;
    unsafe {
        lapack::zgesv(
            n as i32, nrhs as i32, &mut a_cm, n as i32, &mut ipiv, &mut b_cm, n as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("zgesv failed: info={info} (singular system?)")));
    }
    let x = Array2::from_shape_vec((n, nrhs).f(), b_cm)
        .map_err(|e| Error::Backend(e.to_string()))?;
    Ok(x.as_standard_layout().to_owned())
}

/// Dense complex inverse.
pub fn inv_c(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    let eye = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    solve_c(a, &eye)
}

/// Solve A X = B for real dense A.
pub fn solve_r(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() || b.nrows() != n {
        return Err(Error::Domain("solve_r dimension mismatch".into()));
    }
    let nrhs = b.ncols();
    let mut a_cm = as_col_major_f64(a);
    let mut b_cm = as_col_major_f64(b);
    let mut ipiv = vec![0i32; n.max(1)];
    let mut info = 0i32;
    unsafe {
        lapack::dgesv(
            n as i32, nrhs as i32, &mut a_cm, n as i32, &mut ipiv, &mut b_cm, n as i32, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Backend(format!("dgesv failed: info={info} (singular system?)")));
    }
    let x = Array2::from_shape_vec((n, nrhs).f(), b_cm)
        .map_err(|e| Error::Backend(e.to_string()))?;
    Ok(x.as_standard_layout().to_owned())
}

/// Spectral (operator 2-) norm.
pub fn opnorm_c(a: &Array2<Complex64>) -> Result<f64> {
    Ok(singular_values_c(a)?.get(0).copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eig_of_diag() {
        let a = array![[2.0, 0.0], [0.0, -1.0]];
        let (w, v) = sym_eig(&a).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14);
        // first column is the eigenvector of −1
        assert!(v[(1, 0)].abs() > 0.99);
    }

    #[test]
    fn eig_rotated() {
        // eigenvalues of [[0,1],[1,0]] are ±1
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let (w, v) = sym_eig(&a).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        let av = a.dot(&v.column(1).to_owned());
        for i in 0..2 {
            assert!((av[i] - v[(i, 1)]).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_solve_roundtrip() {
        let a = array![
            [Complex64::new(1.0, 1.0), Complex64::new(2.0, 0.0)],
            [Complex64::new(0.0, -1.0), Complex64::new(3.0, 0.5)]
        ];
        let b = array![[Complex64::new(1.0, 0.0)], [Complex64::new(0.0, 1.0)]];
        let x = solve_c(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn svd_values() {
        let a = array![[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]];
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }
}
