//! Minimal double-word ("double-double") arithmetic.
//!
//! The alternating power series for the cylinder functions lose up to half their digits
//! to cancellation once the argument reaches the series/asymptotic crossover. Accumulating
//! in an unevaluated hi+lo pair (error-free transforms: `two_sum`, `two_prod` via FMA)
//! keeps the series usable to well beyond the crossover at native precision cost ×4.

use crate::scalar::Real;

#[derive(Copy, Clone, Debug)]
pub struct Dd<R> {
    pub hi: R,
    pub lo: R,
}

#[inline]
fn two_sum<R: Real>(a: R, b: R) -> (R, R) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod<R: Real>(a: R, b: R) -> (R, R) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl<R: Real> Dd<R> {
    pub fn from(x: R) -> Self {
        Dd { hi: x, lo: R::zero() }
    }

    pub fn value(self) -> R {
        self.hi + self.lo
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, lo);
        Dd { hi, lo }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn neg(self) -> Self {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul(self, other: Self) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let lo = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = two_sum(p, lo);
        Dd { hi, lo }
    }

    pub fn scale(self, x: R) -> Self {
        self.mul(Dd::from(x))
    }

    /// Division accurate to roughly double-word precision (one Newton step).
    pub fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.scale(q1));
        let q2 = r.value() / other.hi;
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }
}
