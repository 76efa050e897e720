//! Operational energy moments, spreads and the time–energy product.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arrival_time::{apply_truncation, check_domain, time_moment_regularized, time_moments_asymptotic, DEFAULT_DOMAIN_TOLERANCE};
use crate::error::{Error, Result};
use crate::momentum::MomentumGrid;
use crate::propensity::momentum_marginal_numeric;
use crate::quadrature::{integrate_1d, QuadratureConfig, Range1d};
use crate::states::{validate_regime, FilterGaussian, ParticleGaussian, RegimeReport, DEFAULT_REGIME_THRESHOLD};

/// `s = 1/δ² + 1/σ²`, the momentum variance of the readout.
fn readout_momentum_variance(p: &ParticleGaussian, f: &FilterGaussian) -> f64 {
    1.0 / (p.delta * p.delta) + 1.0 / (f.sigma * f.sigma)
}

/// `⟨Ê⁽ⁿ⁾⟩` for `n ∈ {1, 2}`:
/// `(k₀² + s)/2` and `¼[k₀⁴ + 6k₀²s + 3s²]`.
pub fn energy_moment(n: u32, p: &ParticleGaussian, f: &FilterGaussian) -> Result<f64> {
    let s = readout_momentum_variance(p, f);
    let k2 = p.k0 * p.k0;
    match n {
        1 => Ok(0.5 * (k2 + s)),
        2 => Ok(0.25 * (k2 * k2 + 6.0 * k2 * s + 3.0 * s * s)),
        _ => Err(Error::InvalidParameter(format!("energy moments of order {n} are not provided"))),
    }
}

/// `∫ (p²/2)ⁿ Pr(q, p, t) dq dp` with the `q` integral done numerically.
pub fn energy_moment_numeric(n: u32, p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let sd = readout_momentum_variance(p, f).sqrt();
    let mut inner_err = None;
    let r = integrate_1d(
        |mom| match momentum_marginal_numeric(p, f, mom, t, cfg) {
            Ok(v) => (0.5 * mom * mom).powi(n as i32) * v,
            Err(e) => {
                inner_err.get_or_insert(e);
                0.0
            }
        },
        Range1d::real_line(p.k0, sd, cfg).with_initial_panels(8),
        cfg,
    )?;
    match inner_err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// `δE = ⟨Ê⁽²⁾⟩ − ⟨Ê⁽¹⁾⟩² = k₀²s + s²/2`.
pub fn energy_spread(p: &ParticleGaussian, f: &FilterGaussian) -> f64 {
    let s = readout_momentum_variance(p, f);
    p.k0 * p.k0 * s + 0.5 * s * s
}

/// `(δ² + σ²)/(2δσ)`, never below 1.
pub fn uncertainty_bound(p: &ParticleGaussian, f: &FilterGaussian) -> f64 {
    (p.delta * p.delta + f.sigma * f.sigma) / (2.0 * p.delta * f.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TimeSpreadMethod {
    Asymptotic,
    Regularized { epsilon: f64 },
}

/// Spreads are variances, and `product = delta_e · delta_t` is the quantity
/// compared with `bound`. The square-root fields give the same information
/// in standard-deviation form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub delta_t: f64,
    pub delta_e: f64,
    pub product: f64,
    pub bound: f64,
    pub std_t: f64,
    pub std_e: f64,
    pub std_product: f64,
    pub time_spread: TimeSpreadMethod,
    pub regime: RegimeReport,
}

pub fn uncertainty_report(
    p: &ParticleGaussian,
    f: &FilterGaussian,
    t: f64,
    cfg: &QuadratureConfig,
    method: TimeSpreadMethod,
) -> Result<UncertaintyReport> {
    p.require_moving()?;
    let delta_t = match method {
        TimeSpreadMethod::Asymptotic => {
            let a = time_moments_asymptotic(p, f, t);
            a.t2 - a.t1 * a.t1
        }
        TimeSpreadMethod::Regularized { epsilon } => {
            let m1 = time_moment_regularized(1, epsilon, p, f, t, cfg)?.value;
            let m2 = time_moment_regularized(2, epsilon, p, f, t, cfg)?.value;
            m2 - m1 * m1
        }
    };
    let delta_e = energy_spread(p, f);
    Ok(UncertaintyReport {
        delta_t,
        delta_e,
        product: delta_t * delta_e,
        bound: uncertainty_bound(p, f),
        std_t: delta_t.max(0.0).sqrt(),
        std_e: delta_e.sqrt(),
        std_product: (delta_t.max(0.0) * delta_e).sqrt(),
        time_spread: method,
        regime: validate_regime(p, f, DEFAULT_REGIME_THRESHOLD),
    })
}

/// Default number of first-moment truncations kept in the commutator.
pub const DEFAULT_COMMUTATOR_TRUNCATION: usize = 1;

/// `⟨ψ(t)| [T̂⁽¹⁾, Ê⁽¹⁾] |ψ(t)⟩` with `T̂⁽¹⁾ ≈ T̂₍₀₎ + T̂₍₁₎` and `Ê⁽¹⁾ = p̂²/2`
/// (the filter adds a constant to `Ê⁽¹⁾`, which commutes).
pub fn commutator_leading(p: &ParticleGaussian, t: f64, cfg: &QuadratureConfig) -> Result<Complex64> {
    commutator_truncated(p, t, cfg, DEFAULT_COMMUTATOR_TRUNCATION, DEFAULT_DOMAIN_TOLERANCE)
}

pub fn commutator_truncated(
    p: &ParticleGaussian,
    t: f64,
    cfg: &QuadratureConfig,
    truncation: usize,
    domain_tolerance: f64,
) -> Result<Complex64> {
    check_domain(p, domain_tolerance)?;
    let grid = MomentumGrid::for_particle(p, t, cfg)?;
    let phi = grid.sample(|mom| p.momentum_wavefunction(mom, t));
    let energy = |v: &[Complex64]| grid.multiply(v, |mom| 0.5 * mom * mom);
    let time = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); v.len()];
        for k in 0..=truncation {
            for (a, b) in acc.iter_mut().zip(apply_truncation(&grid, k, 1, p.k0, v)?) {
                *a += b;
            }
        }
        Ok(acc)
    };
    let te = time(&energy(&phi))?;
    let et = energy(&time(&phi)?);
    let diff: Vec<Complex64> = te.into_iter().zip(et).map(|(a, b)| a - b).collect();
    Ok(grid.inner(&phi, &diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(delta: f64, sigma: f64) -> (ParticleGaussian, FilterGaussian) {
        (
            ParticleGaussian::new(1.0, 40.0, delta).unwrap(),
            FilterGaussian::new(3.5, sigma).unwrap(),
        )
    }

    #[test]
    fn energy_examples() {
        let (p, f) = pair(0.1, 0.1);
        assert!((energy_moment(1, &p, &f).unwrap() - 900.0).abs() < 1e-9);
        // ¼[2 560 000 + 1 920 000 + 120 000]
        assert!((energy_moment(2, &p, &f).unwrap() - 1_150_000.0).abs() < 1e-6);
        let (wide_p, wide_f) = pair(1e4, 1e4);
        assert!((energy_moment(1, &wide_p, &wide_f).unwrap() - 800.0).abs() < 1e-6);
        assert!(energy_moment(3, &p, &f).is_err());
    }

    #[test]
    fn energy_moments_against_quadrature() {
        let cfg = QuadratureConfig::default();
        let (p, f) = pair(0.1, 0.1);
        for n in [1, 2] {
            let closed = energy_moment(n, &p, &f).unwrap();
            let num = energy_moment_numeric(n, &p, &f, 0.01, &cfg).unwrap();
            assert!((num - closed).abs() / closed < 1e-8);
        }
    }

    #[test]
    fn spread_identity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = ParticleGaussian::new(0.0, rng.gen_range(-60.0..60.0), rng.gen_range(0.05..2.0)).unwrap();
            let f = FilterGaussian::new(1.0, rng.gen_range(0.05..2.0)).unwrap();
            let e1 = energy_moment(1, &p, &f).unwrap();
            let e2 = energy_moment(2, &p, &f).unwrap();
            let de = energy_spread(&p, &f);
            assert!(((e2 - e1 * e1) - de).abs() <= 1e-10 * de);
        }
    }

    #[test]
    fn bound_examples() {
        let (p, f) = pair(0.1, 0.1);
        assert_eq!(uncertainty_bound(&p, &f), 1.0);
        let (p, f) = pair(0.1, 0.2);
        assert!((uncertainty_bound(&p, &f) - 1.25).abs() < 1e-14);
        let cfg = QuadratureConfig::default();
        let r = uncertainty_report(&p, &f, 0.0, &cfg, TimeSpreadMethod::Asymptotic).unwrap();
        assert!(r.product >= r.bound);
    }

    /// On the diagonal the asymptotic product is `1 + 1/(k₀δ)²`.
    #[test]
    fn diagonal_asymptotic_product() {
        let cfg = QuadratureConfig::default();
        for d in [0.1, 0.2, 0.5] {
            let (p, f) = pair(d, d);
            let r = uncertainty_report(&p, &f, 0.0, &cfg, TimeSpreadMethod::Asymptotic).unwrap();
            let expected = 1.0 + 1.0 / (40.0 * d).powi(2);
            assert!((r.product - expected).abs() < 1e-12, "{}", r.product);
            assert!((r.std_product - expected.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_product_is_time_independent() {
        let cfg = QuadratureConfig::default();
        let (p, f) = pair(0.12, 0.2);
        let a = uncertainty_report(&p, &f, -0.05, &cfg, TimeSpreadMethod::Asymptotic).unwrap();
        let b = uncertainty_report(&p, &f, 0.07, &cfg, TimeSpreadMethod::Asymptotic).unwrap();
        assert!((a.product - b.product).abs() <= 1e-12 * a.product);
    }

    #[test]
    fn regularized_spread_exceeds_leading_form() {
        let cfg = QuadratureConfig::default();
        let (p, f) = pair(1.0, 1.0);
        let r = uncertainty_report(&p, &f, 0.0, &cfg, TimeSpreadMethod::Regularized { epsilon: 4.0 }).unwrap();
        assert!(r.delta_t > 0.0);
        assert!(r.product >= r.bound);
        assert!(r.regime.passes);
    }

    #[test]
    fn commutator_approaches_i() {
        let cfg = QuadratureConfig::default();
        let c8 = commutator_leading(&ParticleGaussian::new(0.3, 40.0, 0.2).unwrap(), 0.0, &cfg).unwrap();
        assert!((c8 - Complex64::new(0.0, 1.0 - 1.0 / 64.0)).norm() < 1e-10);
        let c16 = commutator_leading(&ParticleGaussian::new(0.3, 80.0, 0.2).unwrap(), 0.0, &cfg).unwrap();
        let i = Complex64::i();
        assert!((c8 - i).norm() / (c16 - i).norm() > 3.9);
        let c0 = commutator_truncated(&ParticleGaussian::new(0.3, 40.0, 0.2).unwrap(), 0.0, &cfg, 0, 1e-4).unwrap();
        assert!((c0 - i).norm() < 1e-10);
        let later = commutator_leading(&ParticleGaussian::new(0.3, 40.0, 0.2).unwrap(), 0.02, &cfg).unwrap();
        assert!((later - c8).norm() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bound_at_least_one(d in 0.01f64..3.0, s in 0.01f64..3.0) {
            let (p, f) = pair(d, s);
            prop_assert!(uncertainty_bound(&p, &f) >= 1.0 - 1e-15);
        }

        #[test]
        fn asymptotic_product_respects_bound(d in 0.05f64..0.3, s in 0.05f64..0.3, k0 in 5.0f64..100.0) {
            let p = ParticleGaussian::new(0.0, k0, d).unwrap();
            let f = FilterGaussian::new(2.0, s).unwrap();
            let r = uncertainty_report(&p, &f, 0.0, &QuadratureConfig::default(), TimeSpreadMethod::Asymptotic).unwrap();
            prop_assert!(r.product >= r.bound * (1.0 - 1e-12));
        }
    }
}
