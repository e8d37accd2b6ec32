//! Grids, potential sampling, and assembly of the weighted operator matrices
//! U + vKv that all spectral analysis runs on.
//!
//! Discretization model: L²(ℝ²) is truncated to the box [−L,L]² with a
//! cell-centered n×n product rule (uniform weight dx² per cell). A function f
//! becomes the vector f(x_i)√w, so that Euclidean inner products are quadrature
//! approximations of L² inner products and integral kernels become matrices
//! √(w_i) K(x_i,x_j) √(w_j).
//!
//! Everything off the support of v decouples: there the Birman–Schwinger
//! operators reduce to the diagonal ±1, so analysis may be restricted to the
//! cells where v is non-negligible (see [`SampledPotential::support_cells`]).

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::kernels::{
    g_kernel, log_coefficient, ExpansionCoefficients, KernelFamily, LogCoeffKind,
};
use crate::specfun::{Sign, SpecFunConfig};
use crate::{kernels, Error, Result};

/// Cell-centered tensor grid on [−L, L]².
#[derive(Clone, Debug)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
    nodes: Vec<[f64; 2]>,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Grid> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Domain(format!("grid half-width must be positive, got {half_width}")));
        }
        if n < 2 {
            return Err(Error::Domain(format!("grid needs n ≥ 2 nodes per axis, got {n}")));
        }
        let dx = 2.0 * half_width / n as f64;
        let axis: Vec<f64> = (0..n).map(|i| -half_width + dx * (i as f64 + 0.5)).collect();
        let mut nodes = Vec::with_capacity(n * n);
        for &x1 in &axis {
            for &x2 in &axis {
                nodes.push([x1, x2]);
            }
        }
        Ok(Grid { half_width, n, nodes })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Uniform quadrature weight per cell; Σ weights = (2L)².
    pub fn cell_weight(&self) -> f64 {
        let dx = self.dx();
        dx * dx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }
}

/// Potential catalog. Amplitudes are signed (a well is a negative amplitude).
#[derive(Clone, Debug)]
pub enum PotentialFamily {
    /// V(x) = amplitude · exp(−|x|²/width²)
    GaussianWell { amplitude: f64, width: f64 },
    /// V(x) = amplitude · exp(−1/(1 − (|x|/radius)²)) inside |x| < radius, 0 outside
    BumpCompact { amplitude: f64, radius: f64 },
    /// V = −(Δ²φ)/φ where Δ²φ = g for a fixed compactly supported radial g with
    /// zero mean, and φ = G₀∗g + tilt·x₁ + offset has the tail
    /// c·ln|x| + tilt·x₁ + offset outside the unit disk.
    LogResonant { offset: f64, tilt: f64 },
    /// Externally supplied samples; length must match the grid.
    GridSamples { values: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    /// Claimed decay rate β in |V(x)| ≲ (1+|x|)^{−β}.
    pub decay_beta: f64,
}

impl PotentialSpec {
    pub fn gaussian_well(amplitude: f64, width: f64) -> PotentialSpec {
        PotentialSpec { family: PotentialFamily::GaussianWell { amplitude, width }, decay_beta: 50.0 }
    }

    pub fn bump_compact(amplitude: f64, radius: f64) -> PotentialSpec {
        PotentialSpec { family: PotentialFamily::BumpCompact { amplitude, radius }, decay_beta: 50.0 }
    }

    pub fn log_resonant(offset: f64, tilt: f64) -> PotentialSpec {
        PotentialSpec { family: PotentialFamily::LogResonant { offset, tilt }, decay_beta: 50.0 }
    }

    /// Box size on which the family's support/decay makes truncation negligible.
    pub fn suggested_half_width(&self) -> f64 {
        match &self.family {
            PotentialFamily::GaussianWell { width, .. } => (width * 10.0).max(20.0),
            PotentialFamily::BumpCompact { radius, .. } => radius * 1.5,
            // g is supported in the unit disk; the box only needs to cover it
            PotentialFamily::LogResonant { .. } => 1.2,
            PotentialFamily::GridSamples { .. } => 20.0,
        }
    }
}

/// C∞ bump in the squared radius: exp(−1/(1−s)) for s < 1, 0 for s ≥ 1.
fn bump_sq(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

/// The fixed radial source of the log-resonant family, before mean correction:
/// g_raw(r) = (1 − 3r²)·bump(r²), g₂(r) = bump(1.5 r²).
fn log_source_parts(r2: f64) -> (f64, f64) {
    ((1.0 - 3.0 * r2) * bump_sq(r2), bump_sq(1.5 * r2))
}

/// A potential sampled on a grid, split as V = U v² with U = ±1.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    pub v_values: Vec<f64>,
    /// v(x_i) = |V(x_i)|^{1/2}
    pub v: Vec<f64>,
    /// v(x_i)·√w — the weighted vector that enters every matrix product
    pub vw: Vec<f64>,
    /// sign of V; +1 on the zero set
    pub u: Vec<f64>,
    /// ‖V‖₁ by quadrature
    pub l1_norm: f64,
    /// For the log-resonant family: the constructing φ on the grid.
    pub phi: Option<Vec<f64>>,
}

impl SampledPotential {
    /// Indices of cells with v above rel_tol · max v. Off these cells every
    /// U + vKv operator is the diagonal ±1, so restriction is exact for kernel
    /// and inverse computations.
    pub fn support_cells(&self, rel_tol: f64) -> Vec<usize> {
        let vmax = self.v.iter().cloned().fold(0.0f64, f64::max);
        (0..self.v.len()).filter(|&i| self.v[i] > rel_tol * vmax).collect()
    }
}

/// Sample a potential on the grid and split it as V = Uv².
pub fn sample_potential(spec: &PotentialSpec, grid: &Grid) -> Result<SampledPotential> {
    let w = grid.cell_weight();
    let mut phi_out = None;
    let values: Vec<f64> = match &spec.family {
        PotentialFamily::GaussianWell { amplitude, width } => {
            if !(width > &0.0) {
                return Err(Error::Domain("gaussian_well needs width > 0".into()));
            }
            grid.nodes()
                .iter()
                .map(|p| amplitude * (-(p[0] * p[0] + p[1] * p[1]) / (width * width)).exp())
                .collect()
        }
        PotentialFamily::BumpCompact { amplitude, radius } => {
            if !(radius > &0.0) {
                return Err(Error::Domain("bump_compact needs radius > 0".into()));
            }
            grid.nodes()
                .iter()
                .map(|p| {
                    amplitude * bump_sq((p[0] * p[0] + p[1] * p[1]) / (radius * radius))
                })
                .collect()
        }
        PotentialFamily::LogResonant { offset, tilt } => {
            let (phi, g) = log_resonant_grid_profile(grid, *offset, *tilt)?;
            let v: Vec<f64> = g
                .iter()
                .zip(&phi)
                .map(|(&gi, &pi)| if gi != 0.0 { -gi / pi } else { 0.0 })
                .collect();
            phi_out = Some(phi);
            v
        }
        PotentialFamily::GridSamples { values } => {
            if values.len() != grid.len() {
                return Err(Error::Data(format!(
                    "grid_samples length {} does not match grid size {}",
                    values.len(),
                    grid.len()
                )));
            }
            values.clone()
        }
    };
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("potential samples must be finite".into()));
    }
    let v: Vec<f64> = values.iter().map(|x| x.abs().sqrt()).collect();
    let vw: Vec<f64> = v.iter().map(|x| x * w.sqrt()).collect();
    let u: Vec<f64> = values.iter().map(|x| if *x < 0.0 { -1.0 } else { 1.0 }).collect();
    let l1_norm = values.iter().map(|x| x.abs()).sum::<f64>() * w;
    Ok(SampledPotential { v_values: values, v, vw, u, l1_norm, phi: phi_out })
}

/// The grid-level log-resonant profile: the source g is mean-corrected with the
/// grid's own quadrature so that Σ g w = 0 exactly, and φ is built with the
/// same discrete Green matrix that later assembles vG₀v. The construction
/// identity then holds exactly at the operator level, which is what makes the
/// threshold structure visible above discretization noise.
pub fn log_resonant_grid_profile(
    grid: &Grid,
    offset: f64,
    tilt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.half_width < 1.0 {
        return Err(Error::Domain("log-resonant source needs the grid to cover the unit disk".into()));
    }
    let w = grid.cell_weight();
    let (mut g, g2): (Vec<f64>, Vec<f64>) = grid
        .nodes()
        .iter()
        .map(|p| log_source_parts(p[0] * p[0] + p[1] * p[1]))
        .unzip();
    let alpha = g.iter().sum::<f64>() / g2.iter().sum::<f64>();
    for (gi, g2i) in g.iter_mut().zip(&g2) {
        *gi -= alpha * g2i;
    }
    let green = green_matrix(KernelFamily::G0, grid);
    let n = grid.len();
    let mut phi = vec![0.0f64; n];
    for i in 0..n {
        let row = green.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * g[j];
        }
        phi[i] = acc * w + tilt * grid.nodes()[i][0] + offset;
    }
    if phi.iter().any(|&p| p <= 0.0) {
        return Err(Error::Data(
            "log-resonant profile not positive on the grid; increase the offset".into(),
        ));
    }
    Ok((phi, g))
}

/// Continuum companion of the log-resonant family on a radial table with step
/// `h`: tabulates φ, u = Δφ and g = Δ²φ so that φ = G₀∗g + offset, by RK4
/// integration of the radial system m′ = rg, u′ = m/r, q′ = ru, φ′ = q/r with
/// u(1) = 0 (zero mean of g makes u compactly supported, giving φ the pure
/// c·ln r + d tail past the support).
#[derive(Clone, Debug)]
pub struct LogResonantProfile {
    pub offset: f64,
    pub h: f64,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub g: Vec<f64>,
    /// c in the tail φ = c ln r + d for r ≥ 1
    pub log_coeff: f64,
    /// d in the tail (matches the grid construction's offset + G₀∗g tail)
    pub tail_constant: f64,
}

pub fn log_resonant_radial_profile(offset: f64, h: f64, n: usize) -> LogResonantProfile {
    // continuum mean correction: ∫₀^1 s g(s) ds = 0
    let i1 = radial_integral(|s| log_source_parts(s * s).0 * s, 0.0, 1.0);
    let i2 = radial_integral(|s| log_source_parts(s * s).1 * s, 0.0, 1.0);
    let alpha = i1 / i2;
    let g = move |s: f64| {
        let (a, b) = log_source_parts(s * s);
        a - alpha * b
    };
    // match the grid normalization φ(0) = (G₀∗g)(0) + offset
    let a0 = ExpansionCoefficients::<f64>::standard().a0;
    let phi0 = offset
        + 2.0 * std::f64::consts::PI * a0 * radial_integral(|s| s * s * s * s.ln() * g(s), 0.0, 1.0);

    // first pass over [0,1]: m and I = ∫ m/ρ dρ fix u(0) = −I so that u(1) = 0
    let sub = 8usize;
    let hs = h / sub as f64;
    let steps_to_one = ((1.0 / hs).round() as usize).max(1);
    let rk4 = |state: &mut [f64], r: f64, dt: f64, deriv: &dyn Fn(f64, &[f64]) -> Vec<f64>| {
        let k1 = deriv(r, state);
        let s2: Vec<f64> = state.iter().zip(&k1).map(|(s, k)| s + 0.5 * dt * k).collect();
        let k2 = deriv(r + 0.5 * dt, &s2);
        let s3: Vec<f64> = state.iter().zip(&k2).map(|(s, k)| s + 0.5 * dt * k).collect();
        let k3 = deriv(r + 0.5 * dt, &s3);
        let s4: Vec<f64> = state.iter().zip(&k3).map(|(s, k)| s + dt * k).collect();
        let k4 = deriv(r + dt, &s4);
        for i in 0..state.len() {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    };
    let pass1 = |r: f64, s: &[f64]| -> Vec<f64> {
        let m_over_r = if r > 0.0 { s[0] / r } else { 0.0 };
        vec![r * g(r), m_over_r]
    };
    let mut st = [0.0f64; 2];
    for k in 0..steps_to_one {
        rk4(&mut st, k as f64 * hs, hs, &pass1);
    }
    let u0 = -st[1];

    // second pass records the tables; state = (m, u, q, φ)
    let full = |r: f64, s: &[f64]| -> Vec<f64> {
        let inv_r = if r > 0.0 { 1.0 / r } else { 0.0 };
        vec![r * g(r), s[0] * inv_r, r * s[1], s[2] * inv_r]
    };
    let mut state = [0.0, u0, 0.0, phi0];
    let mut phi_t = Vec::with_capacity(n);
    let mut u_t = Vec::with_capacity(n);
    let mut g_t = Vec::with_capacity(n);
    let mut log_coeff = 0.0;
    let mut tail_constant = 0.0;
    let mut crossed = false;
    for k in 0..n {
        let r = k as f64 * h;
        if r <= 1.0 || !crossed {
            phi_t.push(state[3]);
            u_t.push(state[1]);
            g_t.push(g(r));
        } else {
            phi_t.push(tail_constant + log_coeff * r.ln());
            u_t.push(0.0);
            g_t.push(0.0);
        }
        for s in 0..sub {
            let rr = r + s as f64 * hs;
            if rr >= 1.0 && !crossed {
                // past the support: q is frozen at c, φ continues as c ln r + d
                crossed = true;
                log_coeff = state[2];
                tail_constant = state[3] - log_coeff * rr.ln();
            }
            if crossed {
                state[1] = 0.0;
                state[3] = tail_constant + log_coeff * (rr + hs).ln();
                state[2] = log_coeff;
            } else {
                rk4(&mut state, rr, hs, &full);
            }
        }
    }
    if !crossed {
        log_coeff = state[2];
        tail_constant = state[3] - log_coeff * (n as f64 * h).max(1e-300).ln();
    }
    LogResonantProfile { offset, h, phi: phi_t, u: u_t, g: g_t, log_coeff, tail_constant }
}

// composite 10-point Gauss–Legendre, enough panels for the bump's derivatives
fn radial_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 10] = [
        -0.9739065285171717, -0.8650633666889845, -0.6794095682990244, -0.4333953941292472,
        -0.14887433898163122, 0.14887433898163122, 0.4333953941292472, 0.6794095682990244,
        0.8650633666889845, 0.9739065285171717,
    ];
    const W: [f64; 10] = [
        0.06667134430868814, 0.14945134915058059, 0.21908636251598204, 0.2692667193099963,
        0.29552422471475287, 0.29552422471475287, 0.2692667193099963, 0.21908636251598204,
        0.14945134915058059, 0.06667134430868814,
    ];
    if b <= a {
        return 0.0;
    }
    let panels = 24;
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + h * k as f64, a + h * (k + 1) as f64);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for i in 0..10 {
            acc += f(mid + half * X[i]) * W[i];
        }
    }
    acc * 0.5 * h
}

/// Dense matrix or operator on the grid; `weighted` records whether the
/// symmetric √w conjugation (and v factors) have been applied.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<T> {
    pub entries: Array2<T>,
    pub weighted: bool,
}

pub type RealOp = OperatorMatrix<f64>;
pub type ComplexOp = OperatorMatrix<Complex64>;

/// Raw kernel matrix K_ij = G_k(x_i, x_j). The G₀ diagonal is the analytic
/// average of a₀r²ln r over the disk of area equal to one quadrature cell
/// (a₀·(ρ²/2)(ln ρ − 1/4), ρ = √(w/π)); the remaining families vanish at least
/// like r⁴ log r at the diagonal and keep the limit value 0.
pub fn green_matrix(family: KernelFamily, grid: &Grid) -> Array2<f64> {
    let n = grid.len();
    let nodes = grid.nodes();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let val = g_kernel(family, nodes[i], nodes[j]);
            k[(i, j)] = val;
            k[(j, i)] = val;
        }
    }
    if family == KernelFamily::G0 {
        let a0 = ExpansionCoefficients::<f64>::standard().a0;
        let rho = (grid.cell_weight() / std::f64::consts::PI).sqrt();
        let diag = a0 * (rho * rho / 2.0) * (rho.ln() - 0.25);
        for i in 0..n {
            k[(i, i)] = diag;
        }
    }
    k
}

/// Weighted operator vG_kv: entries √(w_i) v_i G_k(x_i,x_j) v_j √(w_j).
pub fn assemble_kernel_op(
    family: KernelFamily,
    pot: &SampledPotential,
    grid: &Grid,
) -> RealOp {
    let mut k = green_matrix(family, grid);
    scale_sym(&mut k, &pot.vw);
    RealOp { entries: k, weighted: true }
}

fn scale_sym<T: Copy + std::ops::MulAssign<f64>>(k: &mut Array2<T>, s: &[f64]) {
    for ((i, j), e) in k.indexed_iter_mut() {
        *e *= s[i] * s[j];
    }
}

/// T₀ = U + vG₀v.
pub fn t0_matrix(pot: &SampledPotential, grid: &Grid) -> RealOp {
    let mut m = assemble_kernel_op(KernelFamily::G0, pot, grid).entries;
    for i in 0..m.nrows() {
        m[(i, i)] += pot.u[i];
    }
    RealOp { entries: m, weighted: true }
}

/// Rank-one projection P = ‖V‖₁⁻¹ v⟨v,·⟩ in the weighted coordinates.
pub fn p_projection(pot: &SampledPotential) -> Result<Array2<f64>> {
    let norm2: f64 = pot.vw.iter().map(|x| x * x).sum();
    if norm2 == 0.0 {
        return Err(Error::Domain("P is undefined for ‖V‖₁ = 0".into()));
    }
    let n = pot.vw.len();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = pot.vw[i] * pot.vw[j] / norm2;
        }
    }
    Ok(p)
}

/// Q = I − P.
pub fn q_projection(pot: &SampledPotential) -> Result<Array2<f64>> {
    let mut q = p_projection(pot)?;
    q.mapv_inplace(|x| -x);
    for i in 0..q.nrows() {
        q[(i, i)] += 1.0;
    }
    Ok(q)
}

/// Largest λ the grid can resolve: the free kernel oscillates like e^{iλr}, and
/// we require at least ~8 cells per wavelength.
pub fn lambda_max(grid: &Grid) -> f64 {
    std::f64::consts::FRAC_PI_4 / grid.dx()
}

/// M±(λ) = U + vR₀±(λ⁴)v on the listed cells (pass all indices for the full
/// grid). The diagonal takes the cell-averaged short-distance expansion
/// b±/λ² + g₀±(λ)ρ²/2 + a₀(ρ²/2)(ln ρ − 1/4).
pub fn assemble_m(
    cfg: &SpecFunConfig<f64>,
    sign: Sign,
    lambda: f64,
    pot: &SampledPotential,
    grid: &Grid,
    cells: &[usize],
) -> Result<ComplexOp> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("assemble_m needs λ > 0, got {lambda}")));
    }
    if lambda > lambda_max(grid) {
        return Err(Error::Resolution(format!(
            "λ = {lambda} exceeds the grid resolution bound {:.3e} (dx = {:.3e})",
            lambda_max(grid),
            grid.dx()
        )));
    }
    let nodes = grid.nodes();
    let m = cells.len();
    let mut out = Array2::<Complex64>::zeros((m, m));
    for (a, &i) in cells.iter().enumerate() {
        for (b, &j) in cells.iter().enumerate().skip(a + 1) {
            let dxv = [nodes[i][0] - nodes[j][0], nodes[i][1] - nodes[j][1]];
            let r = (dxv[0] * dxv[0] + dxv[1] * dxv[1]).sqrt();
            let val = kernels::free_resolvent_kernel(cfg, sign, lambda, r)?
                * (pot.vw[i] * pot.vw[j]);
            out[(a, b)] = val;
            out[(b, a)] = val;
        }
    }
    let coeff = ExpansionCoefficients::<f64>::standard();
    let rho = (grid.cell_weight() / std::f64::consts::PI).sqrt();
    let g0 = log_coefficient(LogCoeffKind::G0, sign, lambda)?;
    let diag_kernel = coeff.b(sign) / (lambda * lambda)
        + (g0 + Complex64::from(coeff.a0 * (rho.ln() - 0.25))) * (rho * rho / 2.0);
    for (a, &i) in cells.iter().enumerate() {
        out[(a, a)] = Complex64::from(pot.u[i]) + diag_kernel * (pot.vw[i] * pot.vw[i]);
    }
    Ok(ComplexOp { entries: out, weighted: true })
}

/// Restrict a weighted vector (f(x_i)√w style) to the listed cells.
pub fn restrict_vec(full: &[f64], cells: &[usize]) -> Array1<f64> {
    Array1::from_iter(cells.iter().map(|&i| full[i]))
}
