//! Projection-based inversion utilities.
//!
//! Two classical devices for inverting an operator whose direct inverse is delicate:
//!
//! * a Feshbach/Schur 2×2 block inverse through the complement
//!   d = (a₁₁ − a₁₂a₂₂⁻¹a₂₁)⁻¹, and
//! * the symmetrized resolvent trick: for a projection S with A + S invertible, set
//!   a = S − S(A+S)⁻¹S on SH; then A is invertible iff a is invertible on SH and
//!   A⁻¹ = (A+S)⁻¹ + (A+S)⁻¹ S a⁻¹ S (A+S)⁻¹.
//!
//! Both are verified against direct dense inversion in the tests.

use ndarray::Array2;
use num_complex::Complex64;

use crate::linalg;
use crate::{Error, Result};

type CMat = Array2<Complex64>;

fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis (columns) of the range of an orthogonal projection matrix.
pub fn projection_range_basis(s: &CMat, tol: f64) -> Result<CMat> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::Domain("projection must be square".into()));
    }
    let idem = frob(&(s.dot(s) - s));
    let herm = frob(&(s - &adjoint(s)));
    if idem > tol * (n as f64).sqrt() || herm > tol * (n as f64).sqrt() {
        return Err(Error::Domain(format!(
            "matrix is not an orthogonal projection (‖S²−S‖={idem:.2e}, ‖S−S*‖={herm:.2e})"
        )));
    }
    let (u, sv, _) = linalg::svd_c(s)?;
    let k = sv.iter().filter(|&&x| x > 0.5).count();
    Ok(u.slice(ndarray::s![.., ..k]).to_owned())
}

/// Outcome of [`jn_invert`].
pub struct JnInverse {
    pub inverse: CMat,
    /// a = S − S(A+S)⁻¹S compressed to an orthonormal basis of range(S).
    pub a_compressed: CMat,
    /// Smallest/largest singular values of the compressed a (invertibility witness).
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Invert A through the projection S.
///
/// Fails with an inconsistency error if A+S is numerically singular, or if the
/// compressed a has σ_min ≤ tol·σ_max (A not invertible "through S").
pub fn jn_invert(a: &CMat, s: &CMat, tol: f64) -> Result<JnInverse> {
    let n = a.nrows();
    if n != a.ncols() || s.dim() != a.dim() {
        return Err(Error::Domain("jn_invert needs square A and S of equal size".into()));
    }
    let basis = projection_range_basis(s, 1e-10)?;
    let apluss = a + s;
    let inv_apluss = linalg::inv_c(&apluss)
        .map_err(|e| Error::Inconsistency(format!("A+S not invertible: {e}")))?;
    let small = s - &s.dot(&inv_apluss).dot(s);
    let compressed = adjoint(&basis).dot(&small).dot(&basis);
    let sv = linalg::singular_values_c(&compressed)?;
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    if smin <= tol * smax {
        return Err(Error::Inconsistency(format!(
            "a = S − S(A+S)⁻¹S is not invertible on range(S): σ_min/σ_max = {:.3e}",
            smin / smax
        )));
    }
    let inv_compressed = linalg::inv_c(&compressed)?;
    let a_inv_on_s = basis.dot(&inv_compressed).dot(&adjoint(&basis));
    let correction = inv_apluss.dot(s).dot(&a_inv_on_s).dot(s).dot(&inv_apluss);
    Ok(JnInverse {
        inverse: inv_apluss + correction,
        a_compressed: compressed,
        sigma_min: smin,
        sigma_max: smax,
    })
}

/// Outcome of [`block_invert`]: the four blocks of the inverse and the Schur
/// complement inverse d.
pub struct BlockInverse {
    pub d: CMat,
    pub b11: CMat,
    pub b12: CMat,
    pub b21: CMat,
    pub b22: CMat,
}

/// Invert the 2×2 block matrix [[a11, a12], [a21, a22]] through the complement of
/// the (invertible) a22 corner: d = (a11 − a12 a22⁻¹ a21)⁻¹ and
///
/// inverse = [[d, −d a12 a22⁻¹], [−a22⁻¹ a21 d, a22⁻¹ + a22⁻¹ a21 d a12 a22⁻¹]].
pub fn block_invert(a11: &CMat, a12: &CMat, a21: &CMat, a22: &CMat) -> Result<BlockInverse> {
    let (p, q) = (a11.nrows(), a22.nrows());
    if a11.ncols() != p || a22.ncols() != q || a12.dim() != (p, q) || a21.dim() != (q, p) {
        return Err(Error::Domain("block_invert dimension mismatch".into()));
    }
    let a22_inv = linalg::inv_c(a22)
        .map_err(|e| Error::Inconsistency(format!("a22 not invertible: {e}")))?;
    let schur = a11 - &a12.dot(&a22_inv).dot(a21);
    let d = linalg::inv_c(&schur)
        .map_err(|e| Error::Inconsistency(format!("Schur complement not invertible: {e}")))?;
    let b12 = -d.dot(a12).dot(&a22_inv);
    let b21 = -a22_inv.dot(a21).dot(&d);
    let b22 = &a22_inv + &a22_inv.dot(a21).dot(&d).dot(a12).dot(&a22_inv);
    Ok(BlockInverse { b11: d.clone(), b12, b21, b22, d })
}
