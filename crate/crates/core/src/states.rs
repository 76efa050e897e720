//! Gaussian particle and filter states (units ħ = m = 1).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default for the fast-particle check `|k₀|δ, |k₀|σ ≥ threshold`.
pub const DEFAULT_REGIME_THRESHOLD: f64 = 3.0;

/// Free Gaussian wavepacket: mean position `x0`, mean momentum `k0`, and
/// width `delta` (the position variance at `t = 0` is `delta² / 4`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleGaussian {
    pub x0: f64,
    pub k0: f64,
    pub delta: f64,
}

/// Stationary Gaussian filter centred on the detection point `q0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterGaussian {
    pub q0: f64,
    pub sigma: f64,
}

impl ParticleGaussian {
    pub fn new(x0: f64, k0: f64, delta: f64) -> Result<Self> {
        let p = Self { x0, k0, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "particle width must be positive, got {}",
                self.delta
            )));
        }
        if !self.x0.is_finite() || !self.k0.is_finite() {
            return Err(Error::InvalidParameter("particle parameters must be finite".into()));
        }
        Ok(())
    }

    /// Arrival-time quantities divide by `k0`.
    pub fn require_moving(&self) -> Result<()> {
        if self.k0 == 0.0 {
            return Err(Error::InvalidParameter(
                "mean momentum k0 must be non-zero for arrival-time quantities".into(),
            ));
        }
        Ok(())
    }

    /// Centre of `|ψ(x, t)|²`.
    pub fn mean_position(&self, t: f64) -> f64 {
        self.x0 + self.k0 * t
    }

    /// Variance of `|ψ(x, t)|²`: `δ²/4 + t²/δ²`.
    pub fn position_variance(&self, t: f64) -> f64 {
        self.delta * self.delta / 4.0 + t * t / (self.delta * self.delta)
    }

    /// Variance of the momentum density, `1/δ²`.
    pub fn momentum_variance(&self) -> f64 {
        1.0 / (self.delta * self.delta)
    }

    /// Position-space amplitude `ψ(x, t)`.
    ///
    /// Exact free evolution of
    /// `ψ(x, 0) = (2/(πδ²))^{1/4} exp(−(x−x₀)²/δ² + i k₀ (x−x₀))`:
    ///
    /// `ψ(x, t) = (2/(πδ²))^{1/4} (1 + 2it/δ²)^{-1/2}
    ///            exp(−(x − x₀ − k₀t)²/(δ² + 2it) + i k₀ (x − x₀) − i k₀² t / 2)`.
    ///
    /// Multiplying the exponent by `δ² + 2it` shows this equals the
    /// completed-square form `(k₀δ²/2 + i(x−x₀))²/(δ²+2it) − k₀²δ²/4`, with
    /// `(δ²/8π)^{1/4} · 2/√(δ²+2it)` as the prefactor.
    pub fn wavefunction(&self, x: f64, t: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let norm = (2.0 / (PI * d2)).powf(0.25);
        let spread = Complex64::new(1.0, 2.0 * t / d2);
        let u = x - self.x0 - self.k0 * t;
        let exponent = -Complex64::new(u * u, 0.0) / Complex64::new(d2, 2.0 * t)
            + Complex64::i() * (self.k0 * (x - self.x0) - 0.5 * self.k0 * self.k0 * t);
        norm * exponent.exp() / spread.sqrt()
    }

    /// Momentum-space amplitude
    /// `φ(p, t) = (δ²/2π)^{1/4} exp(−δ²(p−k₀)²/4 − i p x₀ − i p² t/2)`,
    /// the Fourier transform of [`Self::wavefunction`].
    pub fn momentum_wavefunction(&self, p: f64, t: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let norm = (d2 / (2.0 * PI)).powf(0.25);
        let w = p - self.k0;
        let envelope = (-d2 * w * w / 4.0).exp();
        norm * envelope * Complex64::from_polar(1.0, -p * self.x0 - 0.5 * p * p * t)
    }
}

impl FilterGaussian {
    pub fn new(q0: f64, sigma: f64) -> Result<Self> {
        let f = Self { q0, sigma };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() || !self.q0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "filter width must be positive and finite, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `𝓕(x) = (2/(πσ²))^{1/4} exp(−(x − q₀)²/σ²)`.
    pub fn wavefunction(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (2.0 / (PI * s2)).powf(0.25) * (-(x - self.q0) * (x - self.q0) / s2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub k0_delta: f64,
    pub k0_sigma: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Checks that both `|k₀|δ` and `|k₀|σ` reach `threshold`; the arrival-time
/// moments lose their meaning for slow or poorly localised packets.
pub fn validate_regime(p: &ParticleGaussian, f: &FilterGaussian, threshold: f64) -> RegimeReport {
    let k0_delta = p.k0.abs() * p.delta;
    let k0_sigma = p.k0.abs() * f.sigma;
    RegimeReport {
        k0_delta,
        k0_sigma,
        threshold,
        passes: k0_delta.min(k0_sigma) >= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_1d, QuadratureConfig, Range1d};

    fn fig2() -> (ParticleGaussian, FilterGaussian) {
        (
            ParticleGaussian::new(1.0, 40.0, 0.1).unwrap(),
            FilterGaussian::new(3.5, 0.1).unwrap(),
        )
    }

    fn density_norm(p: &ParticleGaussian, t: f64) -> f64 {
        let cfg = QuadratureConfig::default();
        let s = p.position_variance(t).sqrt();
        integrate_1d(
            |x| p.wavefunction(x, t).norm_sqr(),
            Range1d::real_line(p.mean_position(t), s, &cfg).with_initial_panels(8),
            &cfg,
        )
        .unwrap()
        .value
    }

    #[test]
    fn rejects_invalid_widths() {
        assert!(ParticleGaussian::new(0.0, 1.0, 0.0).is_err());
        assert!(ParticleGaussian::new(0.0, 1.0, -1.0).is_err());
        assert!(FilterGaussian::new(0.0, 0.0).is_err());
        assert!(ParticleGaussian::new(0.0, 0.0, 1.0).unwrap().require_moving().is_err());
    }

    #[test]
    fn peak_density_at_t0() {
        let (p, _) = fig2();
        let peak = p.wavefunction(1.0, 0.0).norm_sqr();
        let expected = (2.0 / (PI * 0.01)).sqrt();
        assert!((peak - expected).abs() < 1e-12);
        assert!((peak - 7.978_845_608_028_654).abs() < 1e-12);
    }

    #[test]
    fn normalized_for_all_times() {
        for (x0, k0, d) in [(1.0, 40.0, 0.1), (-2.0, 3.0, 0.7), (0.0, -10.0, 1.5)] {
            let p = ParticleGaussian::new(x0, k0, d).unwrap();
            for t in [-0.3, 0.0, 0.01, 0.5, 2.0] {
                assert!((density_norm(&p, t) - 1.0).abs() < 1e-10, "{p:?} t={t}");
            }
        }
    }

    #[test]
    fn density_peak_follows_classical_path() {
        let (p, _) = fig2();
        let t = 0.01;
        let n = 20001;
        let grid: Vec<f64> = (0..n).map(|i| 0.9 + 1.0 * i as f64 / (n - 1) as f64).collect();
        let argmax = grid
            .iter()
            .copied()
            .max_by(|a, b| p.wavefunction(*a, t).norm_sqr().total_cmp(&p.wavefunction(*b, t).norm_sqr()))
            .unwrap();
        assert!((argmax - 1.4).abs() < 1e-4);
    }

    #[test]
    fn completed_square_form_agrees() {
        let (p, _) = fig2();
        let d2 = p.delta * p.delta;
        for &(x, t) in &[(1.0, 0.0), (1.3, 0.01), (0.7, -0.02), (2.0, 0.05)] {
            let den = Complex64::new(d2, 2.0 * t);
            let num = Complex64::new(0.5 * p.k0 * d2, x - p.x0);
            let pref = (d2 / (8.0 * PI)).powf(0.25) * 2.0 * (-0.25 * p.k0 * p.k0 * d2).exp() / den.sqrt();
            let alt = pref * (num * num / den).exp();
            let ours = p.wavefunction(x, t);
            assert!((alt - ours).norm() < 1e-12 * ours.norm().max(1.0), "x={x} t={t}");
        }
    }

    #[test]
    fn translation_covariance() {
        let p = ParticleGaussian::new(0.3, 5.0, 0.4).unwrap();
        let a = 0.75;
        let shifted = ParticleGaussian { x0: p.x0 + a, ..p };
        let t = 0.2;
        for i in 0..50 {
            let x = -1.0 + 0.07 * i as f64;
            let d0 = p.wavefunction(x, t).norm_sqr();
            let d1 = shifted.wavefunction(x + a, t).norm_sqr();
            assert!((d0 - d1).abs() < 1e-12 * d0.max(1e-300));
        }
    }

    /// Direct quadrature Fourier transform of ψ(x, 0) against the analytic
    /// momentum amplitude: peak at k₀, variance 1/δ².
    #[test]
    fn momentum_content() {
        let cfg = QuadratureConfig::default();
        for (x0, k0, d) in [(1.0, 40.0, 0.1), (-0.5, 2.0, 1.0), (0.0, -6.0, 0.3)] {
            let p = ParticleGaussian::new(x0, k0, d).unwrap();
            let range = Range1d::real_line(x0, d / 2.0, &cfg).with_initial_panels(16);
            let ft = |k: f64| {
                let re = integrate_1d(|x| (p.wavefunction(x, 0.0) * Complex64::from_polar(1.0, -k * x)).re, range, &cfg).unwrap().value;
                let im = integrate_1d(|x| (p.wavefunction(x, 0.0) * Complex64::from_polar(1.0, -k * x)).im, range, &cfg).unwrap().value;
                Complex64::new(re, im) / (2.0 * PI).sqrt()
            };
            for j in -3..=3 {
                let k = k0 + 0.7 * j as f64 / d;
                let numeric = ft(k);
                let analytic = p.momentum_wavefunction(k, 0.0);
                assert!((numeric - analytic).norm() < 1e-9, "k={k}");
            }
            let peak = ft(k0).norm_sqr();
            let one_sd = ft(k0 + 1.0 / d).norm_sqr();
            assert!((one_sd / peak - (-0.5f64).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn filter_values() {
        let f = FilterGaussian::new(3.5, 0.1).unwrap();
        let peak = (2.0 / (PI * 0.01)).powf(0.25);
        assert!((f.wavefunction(3.5) - peak).abs() < 1e-14);
        assert!((peak - 2.824_685_045_811_064).abs() < 1e-12);
        assert!((f.wavefunction(3.6) - peak * (-1.0f64).exp()).abs() < 1e-12);
        let cfg = QuadratureConfig::default();
        let n = integrate_1d(|x| f.wavefunction(x).powi(2), Range1d::real_line(3.5, 0.05, &cfg), &cfg).unwrap();
        assert!((n.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regime_examples() {
        let (p, f) = fig2();
        let r = validate_regime(&p, &f, DEFAULT_REGIME_THRESHOLD);
        assert!(r.passes);
        assert!((r.k0_delta - 4.0).abs() < 1e-12);
        let slow = ParticleGaussian { k0: 0.5, ..p };
        assert!(!validate_regime(&slow, &f, 3.0).passes);
        let fig3 = ParticleGaussian { k0: 10.0, ..p };
        let r = validate_regime(&fig3, &f, 3.0);
        assert!(!r.passes);
        assert!((r.k0_delta - 1.0).abs() < 1e-12);
    }
}
