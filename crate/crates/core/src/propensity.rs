//! The operational phase-space distribution `Pr(q, p, t)`.
//!
//! With the filter centred on `q₀` the propensity of the Gaussian pair is a
//! bivariate normal in the readouts. Its closed form is evaluated directly;
//! the defining overlap integral over sampled wavefunctions acts as an
//! independent oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, PhaseGrid};
use crate::quadrature::{integrate_1d, integrate_2d, OuterDomain, QuadratureConfig, Range1d};
use crate::states::{FilterGaussian, ParticleGaussian};

/// Floor applied to denominators of relative comparisons.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityPoint {
    pub q: f64,
    pub p: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMoments {
    pub q_mean: f64,
    pub q_sq_mean: f64,
    pub p_mean: f64,
    pub p_sq_mean: f64,
}

/// Mean and covariance of the readouts `(q, p)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCovariance {
    pub q_mean: f64,
    pub p_mean: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl PhaseCovariance {
    pub fn of(p: &ParticleGaussian, f: &FilterGaussian, t: f64) -> Self {
        let d2 = p.delta * p.delta;
        let s2 = f.sigma * f.sigma;
        Self {
            q_mean: f.q0 - p.x0 - p.k0 * t,
            p_mean: p.k0,
            var_q: (d2 + s2) / 4.0 + t * t / d2,
            var_p: 1.0 / d2 + 1.0 / s2,
            cov_qp: -t / d2,
        }
    }

    /// Mean and standard deviation of `q` conditioned on the momentum readout.
    pub fn q_given_p(&self, p: f64) -> (f64, f64) {
        let mean = self.q_mean + self.cov_qp / self.var_p * (p - self.p_mean);
        let var = self.var_q - self.cov_qp * self.cov_qp / self.var_p;
        (mean, var.sqrt())
    }

    pub fn std_q(&self) -> f64 {
        self.var_q.sqrt()
    }

    pub fn std_p(&self) -> f64 {
        self.var_p.sqrt()
    }
}

/// Closed-form propensity
///
/// `Pr = δσ/(π√D) · exp(−½δ²σ²S(p−k₀)²/D)
///       · exp(−2[δ²(q−q₀+x₀+k₀t)² + σ²(q−q₀+x₀+pt)²]/D)`
///
/// with `S = δ² + σ²` and `D = 4t² + S²`.
pub fn propensity_closed(p: &ParticleGaussian, f: &FilterGaussian, q: f64, mom: f64, t: f64) -> f64 {
    let d2 = p.delta * p.delta;
    let s2 = f.sigma * f.sigma;
    let sum = d2 + s2;
    let den = 4.0 * t * t + sum * sum;
    let w = mom - p.k0;
    let u = q - f.q0 + p.x0;
    let a = u + p.k0 * t;
    let b = u + mom * t;
    let exponent = -(0.5 * d2 * s2 * sum * w * w + 2.0 * (d2 * a * a + s2 * b * b)) / den;
    p.delta * f.sigma / (PI * den.sqrt()) * exponent.exp()
}

pub fn propensity_point(p: &ParticleGaussian, f: &FilterGaussian, q: f64, mom: f64, t: f64) -> PropensityPoint {
    PropensityPoint {
        q,
        p: mom,
        t,
        value: propensity_closed(p, f, q, mom, t),
    }
}

pub fn phase_moments_closed(p: &ParticleGaussian, f: &FilterGaussian, t: f64) -> PhaseMoments {
    let c = PhaseCovariance::of(p, f, t);
    PhaseMoments {
        q_mean: c.q_mean,
        q_sq_mean: c.q_mean * c.q_mean + c.var_q,
        p_mean: c.p_mean,
        p_sq_mean: c.p_mean * c.p_mean + c.var_p,
    }
}

/// Closed-form field on a `(q, p)` grid.
pub fn propensity_grid(p: &ParticleGaussian, f: &FilterGaussian, grid: &PhaseGrid, t: f64) -> Result<Field> {
    Field::evaluate(grid, |q, mom| propensity_closed(p, f, q, mom, t))
}

/// A wavefunction sampled on a uniform grid `x_j = x_min + j·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWavefunction {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<Complex64>,
}

impl SampledWavefunction {
    pub fn from_fn(x_min: f64, x_max: f64, dx: f64, mut f: impl FnMut(f64) -> Complex64) -> Result<Self> {
        if !(dx > 0.0) || !(x_max > x_min) {
            return Err(Error::InvalidParameter("sampling grid must have positive spacing and extent".into()));
        }
        let n = ((x_max - x_min) / dx).ceil() as usize + 1;
        let values = (0..n).map(|j| f(x_min + dx * j as f64)).collect();
        Ok(Self { x_min, dx, values })
    }

    /// `ψ(x, t)` over its centre ± `radius` standard deviations.
    pub fn particle(p: &ParticleGaussian, t: f64, dx: f64, radius: f64) -> Result<Self> {
        let c = p.mean_position(t);
        let r = radius * p.position_variance(t).sqrt();
        Self::from_fn(c - r, c + r, dx, |x| p.wavefunction(x, t))
    }

    /// `𝓕(x)` over `q₀ ± radius·σ/2`.
    pub fn filter(f: &FilterGaussian, dx: f64, radius: f64) -> Result<Self> {
        let r = radius * f.sigma / 2.0;
        Self::from_fn(f.q0 - r, f.q0 + r, dx, |x| Complex64::new(f.wavefunction(x), 0.0))
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + self.dx * j as f64
    }

    /// `1 − Σ|ψ_j|² dx`: the norm that the grid fails to capture.
    pub fn missing_mass(&self) -> f64 {
        1.0 - self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    /// Band-limited (Whittaker–Shannon) reconstruction between samples.
    /// Outside the grid the function is taken to vanish smoothly.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let u = (x - self.x_min) / self.dx;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in self.values.iter().enumerate() {
            acc += v * sinc(u - j as f64);
        }
        acc
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Grid spacing that resolves the overlap integrand for momentum readouts up
/// to `max_offset` away from `k₀`.
pub fn oracle_spacing(p: &ParticleGaussian, f: &FilterGaussian, max_offset: f64) -> f64 {
    PI / (max_offset.abs() + 15.0 / p.delta + 15.0 / f.sigma)
}

/// Brute-force propensity `|∫ e^{−ipx} ψ(x) 𝓕*(q + x) dx|² / 2π`.
///
/// The integral is a trapezoid sum over the nodes of `psi`, which is
/// spectrally accurate for smooth, well-sampled integrands; `filt` is
/// reconstructed at the shifted points by sinc interpolation. Both samplings
/// must hold all but `tol` of their norm.
pub fn propensity_oracle(psi: &SampledWavefunction, filt: &SampledWavefunction, q: f64, mom: f64, tol: f64) -> Result<f64> {
    for s in [psi, filt] {
        let missing = s.missing_mass();
        if missing.abs() > tol {
            return Err(Error::InsufficientSupport {
                missing_mass: missing,
                tolerance: tol,
            });
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in psi.values.iter().enumerate() {
        let x = psi.x(j);
        acc += Complex64::from_polar(1.0, -mom * x) * v * filt.interpolate(q + x).conj();
    }
    acc *= psi.dx;
    Ok(acc.norm_sqr() / (2.0 * PI))
}

fn phase_integral(
    p: &ParticleGaussian,
    f: &FilterGaussian,
    t: f64,
    cfg: &QuadratureConfig,
    weight: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let c = PhaseCovariance::of(p, f, t);
    let outer = OuterDomain::new(Range1d::real_line(c.p_mean, c.std_p(), cfg).with_initial_panels(4));
    let r = integrate_2d(
        |mom, q| weight(q, mom) * propensity_closed(p, f, q, mom, t),
        outer,
        |mom| {
            let (m, s) = c.q_given_p(mom);
            Range1d::real_line(m, s, cfg).with_initial_panels(2)
        },
        cfg,
    )?;
    Ok(r.value)
}

/// `∬ Pr dq dp` by 2D quadrature.
pub fn normalization_numeric(p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    phase_integral(p, f, t, cfg, |_, _| 1.0)
}

/// First and second phase-space moments by 2D quadrature of the closed form.
pub fn phase_moments_numeric(p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<PhaseMoments> {
    Ok(PhaseMoments {
        q_mean: phase_integral(p, f, t, cfg, |q, _| q)?,
        q_sq_mean: phase_integral(p, f, t, cfg, |q, _| q * q)?,
        p_mean: phase_integral(p, f, t, cfg, |_, mom| mom)?,
        p_sq_mean: phase_integral(p, f, t, cfg, |_, mom| mom * mom)?,
    })
}

/// `∫ Pr(q, p, t) dq` by quadrature over `q`.
pub fn momentum_marginal_numeric(p: &ParticleGaussian, f: &FilterGaussian, mom: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let c = PhaseCovariance::of(p, f, t);
    let (m, s) = c.q_given_p(mom);
    Ok(integrate_1d(|q| propensity_closed(p, f, q, mom, t), Range1d::real_line(m, s, cfg), cfg)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2() -> (ParticleGaussian, FilterGaussian) {
        (
            ParticleGaussian::new(1.0, 40.0, 0.1).unwrap(),
            FilterGaussian::new(3.5, 0.1).unwrap(),
        )
    }

    fn oracle(p: &ParticleGaussian, f: &FilterGaussian, q: f64, mom: f64, t: f64, max_offset: f64) -> f64 {
        let dx = oracle_spacing(p, f, max_offset);
        let psi = SampledWavefunction::particle(p, t, dx, 13.0).unwrap();
        let filt = SampledWavefunction::filter(f, dx, 13.0).unwrap();
        propensity_oracle(&psi, &filt, q, mom, 1e-12).unwrap()
    }

    #[test]
    fn peak_value_equal_widths() {
        let p = ParticleGaussian::new(1.0, 40.0, 0.1).unwrap();
        let f = FilterGaussian::new(3.5, 0.1).unwrap();
        let v = propensity_closed(&p, &f, 2.5, 40.0, 0.0);
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-14);
        let o = oracle(&p, &f, 2.5, 40.0, 0.0, 1.0);
        assert!((o - v).abs() / v < 1e-8);
    }

    /// At zero momentum readout the fig2 density is small but far from
    /// negligible: the momentum marginal there is Φ-tail ~ e^{-4}.
    #[test]
    fn zero_momentum_section_of_fig2() {
        let (p, f) = fig2();
        let t = 0.01;
        let c = PhaseCovariance::of(&p, &f, t);
        let (m, _) = c.q_given_p(0.0);
        let peak = propensity_closed(&p, &f, m, 0.0, t);
        assert!(peak > 1e-3 && peak < 3e-3, "{peak}");
        let o = oracle(&p, &f, m, 0.0, t, 45.0);
        assert!((o - peak).abs() / peak < 1e-8);
    }

    #[test]
    fn oracle_matches_closed_form_at_random_points() {
        let (p, f) = fig2();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = 0.01;
        let c = PhaseCovariance::of(&p, &f, t);
        let dx = oracle_spacing(&p, &f, 3.0 * c.std_p());
        let psi = SampledWavefunction::particle(&p, t, dx, 13.0).unwrap();
        let filt = SampledWavefunction::filter(&f, dx, 13.0).unwrap();
        for _ in 0..12 {
            let mom = c.p_mean + c.std_p() * rng.gen_range(-2.5..2.5);
            let (m, s) = c.q_given_p(mom);
            let q = m + s * rng.gen_range(-2.5..2.5);
            let closed = propensity_closed(&p, &f, q, mom, t);
            let o = propensity_oracle(&psi, &filt, q, mom, 1e-12).unwrap();
            assert!((o - closed).abs() / closed.max(DENSITY_FLOOR) < 1e-8, "q={q} p={mom}");
        }
    }

    #[test]
    fn perfect_overlap() {
        let p = ParticleGaussian::new(0.0, 0.0, 0.3).unwrap();
        let f = FilterGaussian::new(0.0, 0.3).unwrap();
        let o = oracle(&p, &f, 0.0, 0.0, 0.0, 1.0);
        assert!((o - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn joint_translation_invariance() {
        let (p, f) = fig2();
        let a = 0.37;
        let p2 = ParticleGaussian { x0: p.x0 + a, ..p };
        let f2 = FilterGaussian { q0: f.q0 + a, ..f };
        for &(q, mom) in &[(2.5, 40.0), (2.45, 45.0), (2.6, 31.0)] {
            let v1 = oracle(&p, &f, q, mom, 0.0, 12.0);
            let v2 = oracle(&p2, &f2, q, mom, 0.0, 12.0);
            assert!((v1 - v2).abs() <= 1e-9 * v1.max(1e-12));
        }
    }

    #[test]
    fn truncated_sampling_is_rejected() {
        let (p, f) = fig2();
        let dx = oracle_spacing(&p, &f, 1.0);
        let psi = SampledWavefunction::particle(&p, 0.0, dx, 2.0).unwrap();
        let filt = SampledWavefunction::filter(&f, dx, 13.0).unwrap();
        match propensity_oracle(&psi, &filt, 2.5, 40.0, 1e-8) {
            Err(Error::InsufficientSupport { missing_mass, .. }) => assert!(missing_mass > 1e-3),
            other => panic!("expected InsufficientSupport, got {other:?}"),
        }
    }

    #[test]
    fn normalization_and_moments() {
        let cfg = QuadratureConfig::default();
        let sets = [
            (ParticleGaussian::new(1.0, 40.0, 0.1).unwrap(), FilterGaussian::new(3.5, 0.1).unwrap(), 0.01),
            (ParticleGaussian::new(-1.0, 3.0, 0.8).unwrap(), FilterGaussian::new(0.5, 0.3).unwrap(), -0.4),
            (ParticleGaussian::new(0.0, -7.0, 0.2).unwrap(), FilterGaussian::new(1.0, 1.1).unwrap(), 0.7),
        ];
        for (p, f, t) in sets {
            let n = normalization_numeric(&p, &f, t, &cfg).unwrap();
            assert!((n - 1.0).abs() < 1e-8, "{n}");
            let num = phase_moments_numeric(&p, &f, t, &cfg).unwrap();
            let closed = phase_moments_closed(&p, &f, t);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            assert!((num.q_mean - closed.q_mean).abs() < 1e-6 * closed.q_sq_mean.sqrt());
            assert!(rel(num.q_sq_mean, closed.q_sq_mean) < 1e-6);
            assert!(rel(num.p_mean, closed.p_mean) < 1e-6);
            assert!(rel(num.p_sq_mean, closed.p_sq_mean) < 1e-6);
        }
    }

    #[test]
    fn moment_examples() {
        let (p, f) = fig2();
        let m = phase_moments_closed(&p, &f, 0.01);
        assert!((m.q_mean - 2.1).abs() < 1e-12);
        assert!((m.p_sq_mean - 1800.0).abs() < 1e-9);
        let at_detector = ParticleGaussian { x0: 3.5, ..p };
        assert_eq!(phase_moments_closed(&at_detector, &f, 0.0).q_mean, 0.0);
    }

    #[test]
    fn momentum_marginal_is_stationary() {
        let (p, f) = fig2();
        let cfg = QuadratureConfig::default();
        for mom in [25.0, 40.0, 52.0] {
            let base = momentum_marginal_numeric(&p, &f, mom, 0.0, &cfg).unwrap();
            for t in [-0.1, 0.1] {
                let v = momentum_marginal_numeric(&p, &f, mom, t, &cfg).unwrap();
                assert!((v - base).abs() <= 1e-8 * base);
            }
        }
    }

    #[test]
    fn fig2_grid_peak() {
        let (p, f) = fig2();
        let grid = PhaseGrid::new(Axis::new(1.0, 4.0, 200).unwrap(), Axis::new(20.0, 60.0, 200).unwrap()).unwrap();
        let field = propensity_grid(&p, &f, &grid, 0.01).unwrap();
        let (i, j, _) = field.argmax();
        assert!((field.x[i] - 2.1).abs() <= grid.x.step());
        assert!((field.y[j] - 40.0).abs() <= grid.y.step());
        assert!(field.min() >= 0.0);
    }

    #[test]
    fn single_node_grid() {
        let (p, f) = fig2();
        let grid = PhaseGrid::new(Axis::single(2.2), Axis::single(41.0)).unwrap();
        let field = propensity_grid(&p, &f, &grid, 0.0).unwrap();
        assert_eq!(field.values, vec![propensity_closed(&p, &f, 2.2, 41.0, 0.0)]);
    }

    #[test]
    fn fig1_sections_mirror_in_time() {
        let (p, f) = fig2();
        let c = f.q0 - p.x0;
        for &t in &[0.05, 0.02] {
            for k in 0..20 {
                let u = -1.0 + 0.1 * k as f64;
                let a = propensity_closed(&p, &f, c + u, 40.0, t);
                let b = propensity_closed(&p, &f, c - u, 40.0, -t);
                assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn oracle_equivalence_outside_fast_regime(
            k0d in 0.5f64..10.0,
            k0s in 0.5f64..10.0,
            k0 in prop_oneof![-20.0f64..-2.0, 2.0f64..20.0],
            t in -0.3f64..0.3,
            zq in -2.0f64..2.0,
            zp in -2.0f64..2.0,
        ) {
            let p = ParticleGaussian::new(0.4, k0, k0d / k0.abs()).unwrap();
            let f = FilterGaussian::new(1.3, k0s / k0.abs()).unwrap();
            let c = PhaseCovariance::of(&p, &f, t);
            let mom = c.p_mean + zp * c.std_p();
            let (m, s) = c.q_given_p(mom);
            let q = m + zq * s;
            let closed = propensity_closed(&p, &f, q, mom, t);
            let o = oracle(&p, &f, q, mom, t, 2.5 * c.std_p());
            prop_assert!((o - closed).abs() / closed.max(DENSITY_FLOOR) < 1e-6);
        }

        #[test]
        fn nonnegative(q in -10.0f64..10.0, mom in -100.0f64..100.0, t in -1.0f64..1.0) {
            let (p, f) = fig2();
            prop_assert!(propensity_closed(&p, &f, q, mom, t) >= 0.0);
        }
    }
}
