//! Free-resolvent kernel of Δ² in two dimensions and its low-energy expansion.
//!
//! The outgoing/incoming resolvents of H₀ = Δ² split through the second-order ones,
//!
//! R₀±(λ⁴)(r) = (1/(2λ²)) [ ±(i/4)H₀±(λr) − (i/4)H₀⁺(iλr) ],
//!
//! and expand for λr ≪ 1 as
//!
//! R₀±(λ⁴)(r) = b±/λ² + g₀±(λ)r² + a₀r²ln r + c±λ²r⁴ + g̃₂±(λ)λ⁴r⁶ + a₂λ⁴r⁶ln r + …
//!
//! with g₀±(λ) = a₀ln λ + α± and g̃₂±(λ) = a₂ln λ + β±. Combining the ascending series
//! of J₀, Y₀ and K₀ gives every coefficient in closed form: with u = (λr/2)² and
//! L = ln(λr) − ln 2 + γ the bracket above equals
//!
//! Σ_m u^m [ ±(i/4)(−1)^m/(m!)² + (m odd) (L − H_m)/(π (m!)²) ],
//!
//! which yields b± = ±i/8, c± = ±i/512, a₀ = 1/(8π), a₂ = 1/(4608π),
//! α± = ∓i/32 − (ln2 − γ + 1)/(8π), β± = (γ − ln2)/(4608π) − 11/(27648π) ∓ i/18432.
//! The same series summed from its tail gives the expansion remainder without any
//! cancellation, which is what makes high-order remainder-rate checks possible in
//! double precision.

use num_complex::Complex;

use crate::scalar::Real;
use crate::specfun::{Ray, Sign, SpecFunConfig, EULER_GAMMA};
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    GMinus1,
    G0,
    G1,
    G2,
    G3,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LogCoeffKind {
    /// g₀±(λ) = a₀ ln λ + α±
    G0,
    /// g̃₂±(λ) = a₂ ln λ + β±
    G2Tilde,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    FPlus,
    FMinus,
    FBar,
    FTilde,
}

#[derive(Copy, Clone, Debug)]
pub struct ExpansionCoefficients<R> {
    pub a0: R,
    pub a2: R,
    pub b_plus: Complex<R>,
    pub b_minus: Complex<R>,
    pub c_plus: Complex<R>,
    pub c_minus: Complex<R>,
    pub alpha_plus: Complex<R>,
    pub alpha_minus: Complex<R>,
    pub beta_plus: Complex<R>,
    pub beta_minus: Complex<R>,
}

impl<R: Real> ExpansionCoefficients<R> {
    pub fn standard() -> Self {
        let pi = R::PI();
        let a0 = (R::of(8.0) * pi).recip();
        let a2 = (R::of(4608.0) * pi).recip();
        let gamma = R::of(EULER_GAMMA);
        let ln2 = R::LN_2();
        let alpha_re = -(ln2 - gamma + R::one()) / (R::of(8.0) * pi);
        let alpha_im = (R::of(32.0)).recip();
        let beta_re = (gamma - ln2) / (R::of(4608.0) * pi) - R::of(11.0) / (R::of(27648.0) * pi);
        let beta_im = (R::of(18432.0)).recip();
        ExpansionCoefficients {
            a0,
            a2,
            b_plus: Complex::new(R::zero(), R::of(0.125)),
            b_minus: Complex::new(R::zero(), -R::of(0.125)),
            c_plus: Complex::new(R::zero(), (R::of(512.0)).recip()),
            c_minus: Complex::new(R::zero(), -(R::of(512.0)).recip()),
            alpha_plus: Complex::new(alpha_re, -alpha_im),
            alpha_minus: Complex::new(alpha_re, alpha_im),
            beta_plus: Complex::new(beta_re, -beta_im),
            beta_minus: Complex::new(beta_re, beta_im),
        }
    }

    pub fn b(&self, sign: Sign) -> Complex<R> {
        match sign {
            Sign::Plus => self.b_plus,
            Sign::Minus => self.b_minus,
        }
    }
    pub fn c(&self, sign: Sign) -> Complex<R> {
        match sign {
            Sign::Plus => self.c_plus,
            Sign::Minus => self.c_minus,
        }
    }
    pub fn alpha(&self, sign: Sign) -> Complex<R> {
        match sign {
            Sign::Plus => self.alpha_plus,
            Sign::Minus => self.alpha_minus,
        }
    }
    pub fn beta(&self, sign: Sign) -> Complex<R> {
        match sign {
            Sign::Plus => self.beta_plus,
            Sign::Minus => self.beta_minus,
        }
    }
}

fn dist<R: Real>(x: [R; 2], y: [R; 2]) -> R {
    let dx = x[0] - y[0];
    let dy = x[1] - y[1];
    (dx * dx + dy * dy).sqrt()
}

/// The closed-form expansion kernels: G₋₁ = r², G₀ = a₀r²ln r, G₁ = r⁴, G₂ = r⁶,
/// G₃ = a₂r⁶ln r, with r = |x−y|. All vanish at r = 0 (limit values).
pub fn g_kernel<R: Real>(family: KernelFamily, x: [R; 2], y: [R; 2]) -> R {
    let r = dist(x, y);
    if r == R::zero() {
        return R::zero();
    }
    let coeff = ExpansionCoefficients::<R>::standard();
    let r2 = r * r;
    match family {
        KernelFamily::GMinus1 => r2,
        KernelFamily::G0 => coeff.a0 * r2 * r.ln(),
        KernelFamily::G1 => r2 * r2,
        KernelFamily::G2 => r2 * r2 * r2,
        KernelFamily::G3 => coeff.a2 * r2 * r2 * r2 * r.ln(),
    }
}

/// g₀±(λ) or g̃₂±(λ).
pub fn log_coefficient<R: Real>(kind: LogCoeffKind, sign: Sign, lambda: R) -> Result<Complex<R>> {
    if !(lambda > R::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("log_coefficient needs λ > 0, got {lambda:?}")));
    }
    let coeff = ExpansionCoefficients::<R>::standard();
    let l = lambda.ln();
    Ok(match kind {
        LogCoeffKind::G0 => Complex::new(coeff.a0 * l, R::zero()) + coeff.alpha(sign),
        LogCoeffKind::G2Tilde => Complex::new(coeff.a2 * l, R::zero()) + coeff.beta(sign),
    })
}

/// R₀±(λ⁴)(x,y) as a function of r = |x−y|. The diagonal r = 0 takes the limit b±/λ².
pub fn free_resolvent_kernel<R: Real>(
    cfg: &SpecFunConfig<R>,
    sign: Sign,
    lambda: R,
    r: R,
) -> Result<Complex<R>> {
    if !(lambda > R::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("free_resolvent_kernel needs λ > 0, got {lambda:?}")));
    }
    if !(r >= R::zero()) || !r.is_finite() {
        return Err(Error::Domain(format!("free_resolvent_kernel needs r ≥ 0, got {r:?}")));
    }
    let coeff = ExpansionCoefficients::<R>::standard();
    let inv2l2 = (R::of(2.0) * lambda * lambda).recip();
    if r == R::zero() {
        return Ok(coeff.b(sign) * (lambda * lambda).recip());
    }
    let z = lambda * r;
    let h = cfg.hankel0(sign, Ray::Real, z)?;
    let quarter_i = Complex::new(R::zero(), R::of(0.25));
    let first = match sign {
        Sign::Plus => quarter_i * h,
        Sign::Minus => -quarter_i * h,
    };
    // (i/4)H₀⁺(iz) = (1/(2π)) K₀(z), purely real
    let second = Complex::new(cfg.bessel_k0(z)? / (R::of(2.0) * R::PI()), R::zero());
    Ok((first - second) * inv2l2)
}

fn check_order(order: u8) -> Result<()> {
    if order > 3 {
        return Err(Error::Domain(format!("expansion order must be 0..=3, got {order}")));
    }
    Ok(())
}

/// Partial sums of the low-energy expansion: order 0 = b±/λ²; order 1 adds
/// g₀±(λ)r² + a₀r²ln r; order 2 adds c±λ²r⁴; order 3 adds g̃₂±(λ)λ⁴r⁶ + a₂λ⁴r⁶ln r.
pub fn free_resolvent_expansion<R: Real>(
    sign: Sign,
    lambda: R,
    r: R,
    order: u8,
) -> Result<Complex<R>> {
    if !(lambda > R::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("free_resolvent_expansion needs λ > 0, got {lambda:?}")));
    }
    check_order(order)?;
    let coeff = ExpansionCoefficients::<R>::standard();
    let mut acc = coeff.b(sign) / (lambda * lambda);
    if order >= 1 && r > R::zero() {
        let g0 = log_coefficient(LogCoeffKind::G0, sign, lambda)?;
        let r2 = r * r;
        acc = acc + (g0 + Complex::new(coeff.a0 * r.ln(), R::zero())) * r2;
        if order >= 2 {
            let l2 = lambda * lambda;
            acc = acc + coeff.c(sign) * (l2 * r2 * r2);
            if order >= 3 {
                let g2 = log_coefficient(LogCoeffKind::G2Tilde, sign, lambda)?;
                let r6 = r2 * r2 * r2;
                acc = acc + (g2 + Complex::new(coeff.a2 * r.ln(), R::zero())) * (l2 * l2 * r6);
            }
        }
    }
    Ok(acc)
}

/// Exact remainder R₀± − (order-k partial sum), summed from the tail of the defining
/// series (no cancellation). Requires λr below the series radius of usefulness; terms
/// are added until they fall below 10⁻³⁰ of the first tail term.
pub fn expansion_remainder<R: Real>(
    sign: Sign,
    lambda: R,
    r: R,
    order: u8,
) -> Result<Complex<R>> {
    if !(lambda > R::zero()) || !lambda.is_finite() || !(r >= R::zero()) {
        return Err(Error::Domain("expansion_remainder needs λ > 0, r ≥ 0".into()));
    }
    check_order(order)?;
    if r == R::zero() {
        return Ok(Complex::new(R::zero(), R::zero()));
    }
    let z = lambda * r;
    let u = z * z * R::of(0.25);
    let l = z.ln() - R::LN_2() + R::of(EULER_GAMMA);
    let pm: R = sign.unit();
    let quarter = R::of(0.25);
    // walk m = 1.., keeping factorial-squared and harmonic numbers incrementally
    let mut upow = R::one(); // u^m
    let mut fact2 = R::one(); // (m!)²
    let mut harm = R::zero(); // H_m
    let mut acc = Complex::new(R::zero(), R::zero());
    let mut first_mag = R::zero();
    let m_start = order as usize + 1;
    for m in 1..=60usize {
        let mr = R::of_i(m as i64);
        upow = upow * u;
        fact2 = fact2 * mr * mr;
        harm = harm + mr.recip();
        if m < m_start {
            continue;
        }
        let neg = if m % 2 == 0 { R::one() } else { -R::one() };
        let mut term = Complex::new(R::zero(), pm * quarter * neg);
        if m % 2 == 1 {
            term = term + Complex::new((l - harm) / R::PI(), R::zero());
        }
        let term = term * (upow / fact2);
        acc = acc + term;
        let mag = term.norm_sqr().sqrt();
        if m == m_start {
            first_mag = mag;
        } else if mag < first_mag * R::of(1e-30) {
            break;
        }
    }
    Ok(acc / (R::of(2.0) * lambda * lambda))
}

/// Scaled radial profiles: F±(p) = λ²R₀±(λ⁴)(r) at p = λr (λ-independent),
/// F̄ = F⁺ − F⁻ = (i/4)J₀(p), F̃(p) = F̄(p) + (i/16)p² (the quadratic term of F̄
/// removed, so F̃⁽ᵏ⁾(0) = 0 for k = 1,2,3).
pub fn profile<R: Real>(cfg: &SpecFunConfig<R>, kind: ProfileKind, p: R) -> Result<Complex<R>> {
    if !(p >= R::zero()) || !p.is_finite() {
        return Err(Error::Domain(format!("profile needs p ≥ 0, got {p:?}")));
    }
    let coeff = ExpansionCoefficients::<R>::standard();
    match kind {
        ProfileKind::FPlus | ProfileKind::FMinus => {
            let sign = if kind == ProfileKind::FPlus { Sign::Plus } else { Sign::Minus };
            if p == R::zero() {
                return Ok(coeff.b(sign));
            }
            free_resolvent_kernel(cfg, sign, R::one(), p)
        }
        ProfileKind::FBar => {
            let j = cfg.bessel_j0(p)?;
            Ok(Complex::new(R::zero(), R::of(0.25) * j))
        }
        ProfileKind::FTilde => {
            let j = cfg.bessel_j0(p)?;
            Ok(Complex::new(R::zero(), R::of(0.25) * j + p * p / R::of(16.0)))
        }
    }
}
