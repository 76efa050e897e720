//! Operational time-of-arrival moments.
//!
//! Three routes are provided: the regularized phase-space integral of
//! `(q/p)ⁿ Pr(q, p, t)`, its leading asymptotic closed form, and the
//! truncated operator series obtained from the antinormally ordered inverse
//! momentum. Approximate eigenfunctions of the truncated first moment are
//! also exposed, together with a residual check.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::momentum::{fd8_derivative, MomentumGrid};
use crate::propensity::{propensity_closed, PhaseCovariance};
use crate::quadrature::{integrate_1d, integrate_2d, OuterDomain, QuadratureConfig, Range1d};
use crate::states::{FilterGaussian, ParticleGaussian};

/// Default truncation order of the inverse-momentum series.
pub const DEFAULT_SERIES_ORDER: usize = 16;

/// Mass of `|φ(p)|²` allowed at `|p − k₀| ≥ |k₀|` before a state is treated
/// as outside the convergence domain.
pub const DEFAULT_DOMAIN_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedMoment {
    pub n: u32,
    pub epsilon: f64,
    pub value: f64,
    pub quadrature_error: f64,
}

/// Default momentum gap `|k₀|/10`.
pub fn default_epsilon(p: &ParticleGaussian) -> f64 {
    p.k0.abs() / 10.0
}

/// `∬_{|p|>ε} (q/p)ⁿ Pr(q, p, t) dq dp`.
pub fn time_moment_regularized(
    n: u32,
    eps: f64,
    p: &ParticleGaussian,
    f: &FilterGaussian,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<RegularizedMoment> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidParameter(format!("moment order must be 1 or 2, got {n}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("momentum gap must be positive, got {eps}")));
    }
    let c = PhaseCovariance::of(p, f, t);
    let outer = OuterDomain::new(Range1d::real_line(c.p_mean, c.std_p(), cfg).with_initial_panels(16)).excluding_band(eps);
    let exponent = n as i32;
    let r = integrate_2d(
        |mom, q| (q / mom).powi(exponent) * propensity_closed(p, f, q, mom, t),
        outer,
        |mom| {
            let (m, s) = c.q_given_p(mom);
            Range1d::real_line(m, s, cfg).with_initial_panels(2)
        },
        cfg,
    )
    .map_err(|e| match e {
        Error::NotConverged { value, error_estimate, subdivisions } => Error::QuadratureFailure(format!(
            "regularized moment n={n}, eps={eps}: value {value:e}, error {error_estimate:e} after {subdivisions} subdivisions"
        )),
        other => other,
    })?;
    Ok(RegularizedMoment {
        n,
        epsilon: eps,
        value: r.value,
        quadrature_error: r.error_estimate,
    })
}

/// The moment at `ε₀`, `ε₀/2` and `ε₀/4`.
pub fn regularization_sweep(
    n: u32,
    eps0: f64,
    p: &ParticleGaussian,
    f: &FilterGaussian,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<RegularizedMoment>> {
    [1.0, 0.5, 0.25]
        .iter()
        .map(|s| time_moment_regularized(n, eps0 * s, p, f, t, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoments {
    pub t1: f64,
    pub t2: f64,
}

/// Leading behaviour `T1 = (q₀ − x₀)/k₀ − t`, `T2 = T1² + (δ² + σ²)/(4k₀²)`.
pub fn time_moments_asymptotic(p: &ParticleGaussian, f: &FilterGaussian, t: f64) -> AsymptoticMoments {
    let t1 = (f.q0 - p.x0) / p.k0 - t;
    let spread = (p.delta * p.delta + f.sigma * f.sigma) / (4.0 * p.k0 * p.k0);
    AsymptoticMoments { t1, t2: t1 * t1 + spread }
}

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn hermite_complex(n: usize, z: Complex64) -> Complex64 {
    let (mut prev, mut cur) = (Complex64::new(1.0, 0.0), 2.0 * z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `Hₙ(iy)/iⁿ`, a polynomial in `y` with non-negative coefficients
/// satisfying `h̃ₙ₊₁ = 2y h̃ₙ + 2n h̃ₙ₋₁`.
pub fn hermite_scaled_imaginary(n: usize, y: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * y);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * y * cur + 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `Hₙ(iy)` with the real and imaginary parts separated exactly: one of
/// them is identically zero depending on `n mod 2`.
pub fn hermite_imaginary(n: usize, y: f64) -> Complex64 {
    let h = hermite_scaled_imaginary(n, y);
    match n % 4 {
        0 => Complex64::new(h, 0.0),
        1 => Complex64::new(0.0, h),
        2 => Complex64::new(-h, 0.0),
        _ => Complex64::new(0.0, -h),
    }
}

/// Coefficients of `h̃ₙ(y)` in powers of `y`, for `n = 0..=order`.
fn scaled_hermite_table(order: usize) -> Vec<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = vec![vec![1.0]];
    if order >= 1 {
        table.push(vec![0.0, 2.0]);
    }
    for n in 1..order {
        let mut next = vec![0.0; n + 2];
        for (j, c) in table[n].iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, c) in table[n - 1].iter().enumerate() {
            next[j] += 2.0 * n as f64 * c;
        }
        table.push(next);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    InverseP,
    InversePSquared,
}

impl SeriesKind {
    pub fn power(self) -> i32 {
        match self {
            SeriesKind::InverseP => 1,
            SeriesKind::InversePSquared => 2,
        }
    }
}

/// Truncated Hermite series of the antinormally ordered `1/p̂` or `1/p̂²`,
/// reduced to a real polynomial in `w = p − k₀`.
///
/// Using `Hₙ(iw) = iⁿ h̃ₙ(w)`, the n-th term `(−1/(2ik₀))ⁿ Hₙ(i w)` becomes
/// `(−1)ⁿ h̃ₙ(w)/(2k₀)ⁿ`; the squared kind carries an extra `(n + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub kind: SeriesKind,
    pub k0: f64,
    pub order: usize,
    /// `coefficients[j]` multiplies `(p − k₀)^j`.
    pub coefficients: Vec<f64>,
}

pub fn antinormal_inverse_p(kind: SeriesKind, k0: f64, order: usize) -> Result<SeriesTruncation> {
    if k0 == 0.0 || !k0.is_finite() {
        return Err(Error::InvalidParameter("series centre k0 must be finite and non-zero".into()));
    }
    let table = scaled_hermite_table(order);
    let mut coefficients = vec![0.0; order + 1];
    for (n, poly) in table.iter().enumerate() {
        let weight = term_weight(kind, k0, n);
        for (j, c) in poly.iter().enumerate() {
            coefficients[j] += weight * c;
        }
    }
    Ok(SeriesTruncation { kind, k0, order, coefficients })
}

fn term_weight(kind: SeriesKind, k0: f64, n: usize) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let base = sign / (2.0 * k0).powi(n as i32);
    match kind {
        SeriesKind::InverseP => base / k0,
        SeriesKind::InversePSquared => base * (n + 1) as f64 / (k0 * k0),
    }
}

impl SeriesTruncation {
    pub fn evaluate(&self, p: f64) -> f64 {
        let w = p - self.k0;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * w + c)
    }

    /// Partial sums over the Hermite index, `S_0, …, S_order`.
    pub fn partial_sums(&self, p: f64) -> Vec<f64> {
        let w = p - self.k0;
        let mut sums = Vec::with_capacity(self.order + 1);
        let mut acc = 0.0;
        for n in 0..=self.order {
            acc += term_weight(self.kind, self.k0, n) * hermite_scaled_imaginary(n, w);
            sums.push(acc);
        }
        sums
    }
}

/// Antinormal symbol of `p^{−power}`: `E[(p + Z)^{−power}]` with
/// `Z ~ N(0, ½)`, which is what the series resums. The pole must lie beyond
/// the truncated Gaussian support.
pub fn antinormal_symbol(kind: SeriesKind, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let reach = cfg.truncation_radius * sd;
    if p.abs() <= reach * 1.05 {
        return Err(Error::DomainViolation(format!(
            "symbol pole at p = {p} lies inside the smoothing support"
        )));
    }
    let power = kind.power();
    let r = integrate_1d(
        |z| (-z * z).exp() / PI.sqrt() / (p + z).powi(power),
        Range1d::real_line(0.0, sd, cfg).with_initial_panels(4),
        cfg,
    )?;
    Ok(r.value)
}

/// Mass of `|φ(p)|²` at `|(p − k₀)/k₀| ≥ 1`.
pub fn mass_outside_domain(p: &ParticleGaussian) -> f64 {
    if p.k0 == 0.0 {
        return 1.0;
    }
    libm::erfc(p.k0.abs() * p.delta / std::f64::consts::SQRT_2)
}

pub fn check_domain(p: &ParticleGaussian, tolerance: f64) -> Result<()> {
    p.require_moving()?;
    let m = mass_outside_domain(p);
    if m > tolerance {
        return Err(Error::DomainViolation(format!(
            "{m:e} of the momentum density lies at |p - k0| >= |k0| (tolerance {tolerance:e})"
        )));
    }
    Ok(())
}

/// Applies one truncation `T̂⁽ⁿ⁾₍ₖ₎` to momentum-space samples.
pub fn apply_truncation(grid: &MomentumGrid, k: usize, n: u32, k0: f64, phi: &[Complex64]) -> Result<Vec<Complex64>> {
    let rel = |mom: f64| (mom - k0) / k0;
    let q = |v: &[Complex64]| grid.apply_q(v);
    let pm = |v: &[Complex64]| grid.multiply(v, rel);
    let p2 = |v: &[Complex64]| grid.multiply(v, |mom| rel(mom).powi(2));
    let combine = |a: Vec<Complex64>, b: Vec<Complex64>, s: f64| -> Vec<Complex64> {
        a.into_iter().zip(b).map(|(x, y)| (x + y) * s).collect()
    };
    let out = match (n, k) {
        (1, 0) => q(phi).into_iter().map(|v| v / k0).collect(),
        (1, 1) => combine(q(&pm(phi)), pm(&q(phi)), -0.5 / k0),
        (1, 2) => combine(q(&p2(phi)), p2(&q(phi)), 0.5 / k0),
        (2, 0) => {
            let qq = q(&q(phi));
            qq.into_iter().zip(phi).map(|(a, b)| a / (k0 * k0) + b / (2.0 * k0 * k0)).collect()
        }
        (2, 1) => {
            let qpq = q(&pm(&q(phi)));
            let first = combine(pm(phi), qpq, -1.0 / (k0 * k0));
            let second = combine(q(&q(&pm(phi))), pm(&q(&q(phi))), -0.5 / (k0 * k0));
            first.into_iter().zip(second).map(|(a, b)| a + b).collect()
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "no truncation T({n})[{k}]; available (1,0), (1,1), (1,2), (2,0), (2,1)"
            )))
        }
    };
    Ok(out)
}

/// `⟨ψ(t)| T̂⁽ⁿ⁾₍ₖ₎ |ψ(t)⟩` in the momentum representation. The operators act
/// on the particle position alone.
pub fn truncated_time_expectation(k: usize, n: u32, p: &ParticleGaussian, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    truncated_time_expectation_with(k, n, p, t, cfg, DEFAULT_DOMAIN_TOLERANCE)
}

pub fn truncated_time_expectation_with(
    k: usize,
    n: u32,
    p: &ParticleGaussian,
    t: f64,
    cfg: &QuadratureConfig,
    domain_tolerance: f64,
) -> Result<f64> {
    check_domain(p, domain_tolerance)?;
    let grid = MomentumGrid::for_particle(p, t, cfg)?;
    let phi = grid.sample(|mom| p.momentum_wavefunction(mom, t));
    let applied = apply_truncation(&grid, k, n, p.k0, &phi)?;
    Ok(grid.inner(&phi, &applied).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub order: u8,
    pub tau: f64,
    pub k0: f64,
}

impl Eigenfunction {
    /// Order 0: `exp(−iτk₀(p − k₀))`, exact for `q̂/k₀`.
    ///
    /// Order 1: `exp(iτk₀² log(1 − P)) / √(1 − P)` with `P = (p − k₀)/k₀`,
    /// the exact solution of `(T̂₍₀₎ + T̂₍₁₎)χ = τχ`. Expanding the logarithm
    /// gives the phase `−ik₀²T(1 + P/2 + P²/3 + …)` with `T = τP`.
    pub fn eval(&self, p: f64) -> Result<Complex64> {
        let rel = (p - self.k0) / self.k0;
        match self.order {
            0 => Ok(Complex64::from_polar(1.0, -self.tau * self.k0 * (p - self.k0))),
            1 => {
                if rel >= 1.0 {
                    return Err(Error::DomainViolation(format!(
                        "order-1 eigenfunction needs (p - k0)/k0 < 1, got {rel}"
                    )));
                }
                let phase = self.tau * self.k0 * self.k0 * (-rel).ln_1p();
                Ok(Complex64::from_polar(1.0, phase) / (1.0 - rel).sqrt())
            }
            o => Err(Error::InvalidParameter(format!("eigenfunctions exist for orders 0 and 1, got {o}"))),
        }
    }

    /// Largest local phase frequency `|d(phase)/dp|` on `[lo, hi]`.
    fn max_frequency(&self, lo: f64, hi: f64) -> f64 {
        match self.order {
            0 => (self.tau * self.k0).abs(),
            _ => {
                let f = |p: f64| (self.tau * self.k0 / (1.0 - (p - self.k0) / self.k0)).abs();
                f(lo).max(f(hi))
            }
        }
    }
}

/// `‖(T̂ − τ)χ‖/‖χ‖` on the interior nodes of `grid`, for the truncation
/// `T̂⁽¹⁾₍₀₎ + … + T̂⁽¹⁾₍ₖ₎` with `k = truncation ≤ 1`.
pub fn eigen_residual_under(e: &Eigenfunction, truncation: usize, grid: &Axis) -> Result<f64> {
    if truncation > 1 {
        return Err(Error::InvalidParameter("residuals are defined for truncations 0 and 1".into()));
    }
    grid.validate()?;
    let h = grid.step();
    let (lo, hi) = (grid.min, grid.max);
    let omega = e.max_frequency(lo, hi);
    if grid.points < 9 || (omega > 0.0 && 2.0 * PI / (omega * h) < 20.0) {
        return Err(Error::QuadratureFailure(format!(
            "grid spacing {h} under-resolves phase frequency {omega} (need 20 points per period)"
        )));
    }
    let nodes = grid.values();
    let chi: Vec<Complex64> = nodes.iter().map(|&p| e.eval(p)).collect::<Result<_>>()?;
    let k0 = e.k0;
    let rel = |p: f64| (p - k0) / k0;
    let d_chi = fd8_derivative(&chi, h);
    let p_chi: Vec<Complex64> = nodes.iter().zip(&chi).map(|(&p, c)| c * rel(p)).collect();
    let d_p_chi = fd8_derivative(&p_chi, h);
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, j) in (4..nodes.len() - 4).enumerate() {
        let q_chi = Complex64::i() * d_chi[m];
        let mut t_chi = q_chi / k0;
        if truncation == 1 {
            let q_p_chi = Complex64::i() * d_p_chi[m];
            t_chi -= (q_p_chi + rel(nodes[j]) * q_chi) * (0.5 / k0);
        }
        num += (t_chi - e.tau * chi[j]).norm_sqr();
        den += chi[j].norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Residual of `χ⁽ᵒʳᵈᵉʳ⁾` under the truncation of the same order.
pub fn eigen_residual(order: u8, tau: f64, k0: f64, grid: &Axis) -> Result<f64> {
    eigen_residual_under(&Eigenfunction { order, tau, k0 }, order as usize, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig2() -> (ParticleGaussian, FilterGaussian) {
        (
            ParticleGaussian::new(1.0, 40.0, 0.1).unwrap(),
            FilterGaussian::new(3.5, 0.1).unwrap(),
        )
    }

    #[test]
    fn asymptotic_examples() {
        let (p, f) = fig2();
        let a = time_moments_asymptotic(&p, &f, 0.01);
        assert!((a.t1 - 0.0525).abs() < 1e-15);
        let at = ParticleGaussian { x0: 3.5, ..p };
        assert_eq!(time_moments_asymptotic(&at, &f, 0.0).t1, 0.0);
        let a = time_moments_asymptotic(&p, &f, 0.0);
        assert!((a.t2 - a.t1 * a.t1 - 0.01 / (2.0 * 1600.0)).abs() < 1e-18);
    }

    /// When the packet centre sits on the detector the first moment is
    /// carried entirely by the momentum-dependent drift of the conditional
    /// mean, `E[q | p] = −(t/(δ²s))(p − k₀)`. Checked against the 1D integral
    /// over the Gaussian momentum marginal.
    #[test]
    fn regularized_moment_when_packet_reaches_detector() {
        let (p, f) = fig2();
        let cfg = QuadratureConfig::default();
        let t = 0.0625;
        let eps = 4.0;
        let r = time_moment_regularized(1, eps, &p, &f, t, &cfg).unwrap();
        let c = PhaseCovariance::of(&p, &f, t);
        let slope = c.cov_qp / c.var_p;
        let density = |k: f64| (-(k - c.p_mean).powi(2) / (2.0 * c.var_p)).exp() / (2.0 * PI * c.var_p).sqrt();
        let mut oracle = 0.0;
        for range in [Range1d::new(c.p_mean - 12.0 * c.std_p(), -eps), Range1d::new(eps, c.p_mean + 12.0 * c.std_p())] {
            oracle += integrate_1d(|k| slope * (k - c.p_mean) / k * density(k), range.with_initial_panels(8), &cfg).unwrap().value;
        }
        assert!((r.value - oracle).abs() < 1e-8 * oracle.abs(), "{} vs {oracle}", r.value);
        assert!(r.value.abs() < 0.1 * time_moments_asymptotic(&p, &f, 0.0).t1);
    }

    #[test]
    fn regularized_moments_fast_regime() {
        // Deep in the regime the moments approach their leading forms.
        let p = ParticleGaussian::new(1.0, 40.0, 1.0).unwrap();
        let f = FilterGaussian::new(3.5, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let a = time_moments_asymptotic(&p, &f, 0.0);
        let m1 = time_moment_regularized(1, 4.0, &p, &f, 0.0, &cfg).unwrap();
        assert!((m1.value - a.t1).abs() / a.t1 < 5.0 / 1600.0);
        let m2 = time_moment_regularized(2, 4.0, &p, &f, 0.0, &cfg).unwrap();
        assert!(m2.value - m1.value * m1.value > 0.0);
        assert!(m1.quadrature_error < 1e-9 * m1.value.abs() + 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let (p, f) = fig2();
        let cfg = QuadratureConfig::default();
        assert!(time_moment_regularized(3, 1.0, &p, &f, 0.0, &cfg).is_err());
        assert!(time_moment_regularized(1, 0.0, &p, &f, 0.0, &cfg).is_err());
        assert!(antinormal_inverse_p(SeriesKind::InverseP, 0.0, 4).is_err());
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 0.3), 1.0);
        assert_eq!(hermite(1, 0.3), 0.6);
        assert_eq!(hermite_imaginary(2, 1.0), Complex64::new(-6.0, 0.0));
        let x: f64 = 0.7;
        let direct = 32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x;
        assert!((hermite(5, x) - direct).abs() < 1e-12);
        let z = Complex64::new(0.0, 1.3);
        for n in 0..12 {
            assert!((hermite_complex(n, z) - hermite_imaginary(n, 1.3)).norm() < 1e-9 * hermite_scaled_imaginary(n, 1.3));
        }
    }

    #[test]
    fn recurrence_identity() {
        for &z in &[-5.0, -2.2, 0.0, 0.4, 3.3, 5.0] {
            for n in 1..30 {
                let lhs = hermite(n + 1, z);
                let rhs = 2.0 * z * hermite(n, z) - 2.0 * n as f64 * hermite(n - 1, z);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn reduced_coefficients_are_real_and_consistent() {
        let s = antinormal_inverse_p(SeriesKind::InverseP, 40.0, 12).unwrap();
        assert!(s.coefficients.iter().all(|c| c.is_finite()));
        for &p in &[33.0, 40.0, 44.0, 47.5] {
            let sums = s.partial_sums(p);
            assert!((sums[12] - s.evaluate(p)).abs() < 1e-15 * s.evaluate(p).abs().max(1.0) * 10.0);
            // Same terms through the complex Hermite route.
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..=12 {
                let c = -Complex64::new(0.0, 2.0 * 40.0).inv();
                acc += c.powi(n as i32) * hermite_complex(n, Complex64::new(0.0, p - 40.0)) / 40.0;
            }
            assert!((acc.re - sums[12]).abs() < 1e-13 * sums[12].abs());
            assert!(acc.im.abs() < 1e-13 * sums[12].abs());
        }
    }

    /// At the centre only the even terms survive, so the truncation differs
    /// from 1/k₀ by the filter smoothing, about 1/(2k₀³).
    #[test]
    fn centre_value_carries_smoothing_correction() {
        let s = antinormal_inverse_p(SeriesKind::InverseP, 40.0, 12).unwrap();
        let v = s.evaluate(40.0);
        assert!((v * 40.0 - 1.0 - 1.0 / 3200.0).abs() < 2e-6);
    }

    #[test]
    fn series_matches_smoothed_symbol() {
        let cfg = QuadratureConfig::default();
        for kind in [SeriesKind::InverseP, SeriesKind::InversePSquared] {
            let s = antinormal_inverse_p(kind, 40.0, DEFAULT_SERIES_ORDER).unwrap();
            for &p in &[32.0, 36.0, 40.0, 44.0, 48.0] {
                let oracle = antinormal_symbol(kind, p, &cfg).unwrap();
                assert!((s.evaluate(p) - oracle).abs() / oracle < 1e-10, "{kind:?} p={p}");
            }
        }
    }

    #[test]
    fn partial_sums_converge_geometrically() {
        for kind in [SeriesKind::InverseP, SeriesKind::InversePSquared] {
            let s = antinormal_inverse_p(kind, 40.0, 16).unwrap();
            for &p in &[32.0, 36.0, 44.0, 48.0] {
                let sums = s.partial_sums(p);
                for n in 1..16 {
                    let d0 = (sums[n] - sums[n - 1]).abs();
                    let d1 = (sums[n + 1] - sums[n]).abs();
                    assert!(d1 <= 0.35 * d0, "{kind:?} p={p} n={n}");
                }
            }
        }
    }

    #[test]
    fn truncated_expectations() {
        let cfg = QuadratureConfig::default();
        let p = ParticleGaussian::new(1.0, 40.0, 1.0).unwrap();
        let t10 = truncated_time_expectation(0, 1, &p, 0.0, &cfg).unwrap();
        assert!((t10 - 0.025).abs() < 1e-12);
        let t20 = truncated_time_expectation(0, 2, &p, 0.0, &cfg).unwrap();
        let q2 = 1.0 + 0.25;
        assert!((t20 - (q2 / 1600.0 + 1.0 / 3200.0)).abs() < 1e-13);
        let centred = ParticleGaussian { x0: 0.0, ..p };
        assert!(truncated_time_expectation(1, 1, &centred, 0.0, &cfg).unwrap().abs() < 1e-14);
        // fig2 particle: its mass outside the domain is 6.3e-5.
        let (fig, _) = fig2();
        let t = truncated_time_expectation(0, 1, &fig, 0.0, &cfg).unwrap();
        assert!((t - 0.025).abs() < 1e-12);
        assert!(matches!(
            truncated_time_expectation_with(0, 1, &fig, 0.0, &cfg, 1e-6),
            Err(Error::DomainViolation(_))
        ));
        assert!(truncated_time_expectation(3, 1, &p, 0.0, &cfg).is_err());
    }

    #[test]
    fn truncated_expectations_at_later_time() {
        let cfg = QuadratureConfig::default();
        let p = ParticleGaussian::new(-0.5, 30.0, 0.8).unwrap();
        let t = 0.03;
        let x = p.mean_position(t);
        let var_x = p.position_variance(t);
        let v = truncated_time_expectation(0, 2, &p, t, &cfg).unwrap();
        assert!((v - ((x * x + var_x) / 900.0 + 1.0 / 1800.0)).abs() < 1e-12);
        // ⟨{x̂, p̂ − k₀}⟩/2 = Cov(x, p) = t/δ² for the free Gaussian.
        let t11 = truncated_time_expectation(1, 1, &p, t, &cfg).unwrap();
        let expected = -(t / (0.64)) / (30.0 * 30.0);
        assert!((t11 - expected).abs() < 1e-12);
    }

    /// With σ = √2 and the detector at the origin the propensity is the Q
    /// function and the readout is `−x`, so the operator series converges to
    /// minus the regularized moment.
    #[test]
    fn series_partial_sums_approach_regularized_moment() {
        let cfg = QuadratureConfig::default();
        let p = ParticleGaussian::new(-2.5, 40.0, 1.0).unwrap();
        let f = FilterGaussian::new(0.0, std::f64::consts::SQRT_2).unwrap();
        for t in [0.0, 0.02] {
            let target = -time_moment_regularized(1, 4.0, &p, &f, t, &cfg).unwrap().value;
            let mut sum = 0.0;
            let mut errs = Vec::new();
            for k in 0..=2 {
                sum += truncated_time_expectation(k, 1, &p, t, &cfg).unwrap();
                errs.push((sum - target).abs());
            }
            assert!(errs[1] <= errs[0] * 1.001, "{errs:?}");
            assert!(errs[2] < errs[0] / 2.0, "{errs:?}");
            assert!(errs[2] < 1e-3 * target.abs());
        }
    }

    #[test]
    fn eigenfunction_values() {
        let e0 = Eigenfunction { order: 0, tau: 0.3, k0: 40.0 };
        assert_eq!(e0.eval(40.0).unwrap(), Complex64::new(1.0, 0.0));
        let e = Eigenfunction { order: 0, tau: 0.1, k0: 40.0 };
        let v = e.eval(41.0).unwrap();
        assert!((v - Complex64::from_polar(1.0, -4.0)).norm() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let e1 = Eigenfunction { order: 1, tau: 0.1, k0: 40.0 };
        assert!(matches!(e1.eval(80.0), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn order_one_matches_expansion() {
        let (k0, tau) = (40.0, 0.05);
        let e1 = Eigenfunction { order: 1, tau, k0 };
        let mut errs = Vec::new();
        for &rel in &[1e-3, 2e-3] {
            let p = k0 * (1.0 + rel);
            let t = tau * rel;
            let approx = (1.0 + rel / 2.0 + 3.0 * rel * rel / 8.0)
                * Complex64::from_polar(1.0, -k0 * k0 * t * (1.0 + rel / 2.0 + rel * rel / 3.0));
            errs.push((e1.eval(p).unwrap() - approx).norm());
        }
        assert!(errs[0] < 1e-8);
        // Third-order remainder: doubling the offset multiplies it by ~8.
        assert!(errs[1] / errs[0] > 6.0 && errs[1] / errs[0] < 10.0, "{errs:?}");
    }

    #[test]
    fn residuals() {
        let grid = Axis::new(32.0, 48.0, 2001).unwrap();
        assert!(eigen_residual(0, 0.05, 40.0, &grid).unwrap() <= 1e-6);
        assert!(eigen_residual(0, 0.0, 40.0, &grid).unwrap() <= 1e-10);
        let chi0 = Eigenfunction { order: 0, tau: 0.05, k0: 40.0 };
        let chi1 = Eigenfunction { order: 1, tau: 0.05, k0: 40.0 };
        let r0 = eigen_residual_under(&chi0, 1, &grid).unwrap();
        let r1 = eigen_residual_under(&chi1, 1, &grid).unwrap();
        assert!(r1 * 4.0 <= r0, "{r1} vs {r0}");
        let coarse = Axis::new(32.0, 48.0, 40).unwrap();
        assert!(matches!(eigen_residual(0, 0.5, 40.0, &coarse), Err(Error::QuadratureFailure(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scaled_imaginary_hermite_is_positive_for_positive_argument(n in 0usize..25, y in 0.0f64..5.0) {
            prop_assert!(hermite_scaled_imaginary(n, y) >= 0.0);
        }

        #[test]
        fn hermite_parity(n in 0usize..20, z in -4.0f64..4.0) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let a = hermite(n, -z);
            let b = sign * hermite(n, z);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
