//! Momentum-representation grids on which `q̂ = i d/dp` acts.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::states::ParticleGaussian;

/// Uniform periodic grid `p_j = p_min + j·dp`, `j < n`, with FFT plans for
/// spectral differentiation.
#[derive(Clone)]
pub struct MomentumGrid {
    pub p_min: f64,
    pub dp: f64,
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MomentumGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MomentumGrid")
            .field("p_min", &self.p_min)
            .field("dp", &self.dp)
            .field("n", &self.n)
            .finish()
    }
}

impl MomentumGrid {
    pub fn new(p_min: f64, dp: f64, n: usize) -> Result<Self> {
        if !(dp > 0.0) || n < 16 {
            return Err(Error::InvalidParameter("momentum grid needs dp > 0 and at least 16 nodes".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            p_min,
            dp,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    /// Grid covering `k₀ ± radius/δ` that resolves the position content of
    /// `φ(p, t)` (its conjugate frequencies are the positions `x₀ + pt`).
    pub fn for_particle(p: &ParticleGaussian, t: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let half = cfg.truncation_radius / p.delta;
        let lo = p.k0 - half;
        let hi = p.k0 + half;
        let x_reach = (p.x0 + lo * t).abs().max((p.x0 + hi * t).abs()) + (cfg.truncation_radius + 2.0) * p.delta;
        let dp_max = std::f64::consts::PI / (1.5 * x_reach);
        let n = (((hi - lo) / dp_max).ceil() as usize).max(256).next_power_of_two();
        Self::new(lo, (hi - lo) / n as f64, n)
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + self.dp * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.p(j)).collect()
    }

    pub fn sample(&self, mut f: impl FnMut(f64) -> Complex64) -> Vec<Complex64> {
        (0..self.n).map(|j| f(self.p(j))).collect()
    }

    /// Spectral derivative `d/dp`; the Nyquist mode is dropped.
    pub fn derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 2.0 * std::f64::consts::PI / (n as f64 * self.dp);
        for (k, c) in buf.iter_mut().enumerate() {
            let m = if k < n / 2 {
                k as f64
            } else if k == n / 2 {
                0.0
            } else {
                k as f64 - n as f64
            };
            *c *= Complex64::new(0.0, m * scale / n as f64);
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// `q̂ φ = i dφ/dp`.
    pub fn apply_q(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.derivative(values).into_iter().map(|d| Complex64::i() * d).collect()
    }

    pub fn multiply(&self, values: &[Complex64], f: impl Fn(f64) -> f64) -> Vec<Complex64> {
        values.iter().enumerate().map(|(j, v)| v * f(self.p(j))).collect()
    }

    /// `⟨a|b⟩ = Σ a_j* b_j dp`.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.dp
    }
}

/// Eighth-order central first derivative at interior nodes `4..n-4`.
pub fn fd8_derivative(values: &[Complex64], h: f64) -> Vec<Complex64> {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let n = values.len();
    if n < 9 {
        return Vec::new();
    }
    (4..n - 4)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in C.iter().enumerate() {
                acc += (values[j + k + 1] - values[j - k - 1]) * *c;
            }
            acc / h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_gaussian_packet() {
        let g = MomentumGrid::new(-10.0, 20.0 / 256.0, 256).unwrap();
        let f = |p: f64| Complex64::from_polar((-p * p).exp(), 1.5 * p);
        let df = |p: f64| f(p) * Complex64::new(-2.0 * p, 1.5);
        let d = g.derivative(&g.sample(f));
        for j in 0..g.n {
            assert!((d[j] - df(g.p(j))).norm() < 1e-12);
        }
    }

    #[test]
    fn position_expectation_of_particle() {
        let p = ParticleGaussian::new(0.8, 25.0, 0.4).unwrap();
        let cfg = QuadratureConfig::default();
        for t in [0.0, 0.03] {
            let g = MomentumGrid::for_particle(&p, t, &cfg).unwrap();
            let phi = g.sample(|k| p.momentum_wavefunction(k, t));
            assert!((g.inner(&phi, &phi).re - 1.0).abs() < 1e-13);
            let x = g.inner(&phi, &g.apply_q(&phi));
            assert!((x.re - p.mean_position(t)).abs() < 1e-11);
            assert!(x.im.abs() < 1e-12);
        }
    }

    #[test]
    fn fd8_accuracy() {
        let h = 0.01;
        let v: Vec<Complex64> = (0..400).map(|j| Complex64::from_polar(1.0, 2.0 * j as f64 * h)).collect();
        let d = fd8_derivative(&v, h);
        for (k, dv) in d.iter().enumerate() {
            let exact = Complex64::i() * 2.0 * v[k + 4];
            assert!((dv - exact).norm() < 1e-11);
        }
    }
}
