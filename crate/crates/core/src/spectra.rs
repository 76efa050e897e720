//! Arrival-time, energy and joint time–energy distributions.
//!
//! Along the ray `q = θp` the propensity is `Pr(θp, p, t) = K₀
//! exp(−(αp² − 2βp + γ)/D)`, so every distribution here reduces to
//! half-line Gaussian integrals in `p`. With `c = q₀ − x₀`,
//! `S = δ² + σ²`, `D = 4t² + S²`:
//!
//! * `α = 2Δ(θ, t)`, `Δ = σ²(θ + t)² + δ²θ² + Δ₀₀`, `Δ₀₀ = ¼δ²σ²S`
//! * `β = 2[k₀Δ₀₀ + δ²θ(c − k₀t) + σ²(θ + t)c]`
//! * `γ = 2[k₀²Δ₀₀ + δ²(c − k₀t)² + σ²c²]`
//! * `ξ = β/√(αD)`, `κ = γ/D − ξ²`
//!
//! and with `K = δσ√D/(4πΔ)` the two flux branches are
//! `Pr± = K e^{−κ} H(±ξ)`, `H(x) = e^{−x²} + √π x (1 + erf x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, PhaseGrid};
use crate::propensity::{momentum_marginal_numeric, propensity_closed, PhaseCovariance, DENSITY_FLOOR};
use crate::quadrature::{erf, integrate_1d, ln_exp_cosh, one_minus_sqrt_pi_x_erfcx, QuadratureConfig, Range1d};
use crate::states::{FilterGaussian, ParticleGaussian};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub theta: f64,
    pub t: f64,
    pub plus: f64,
    pub minus: f64,
    pub total: f64,
}

impl FluxPoint {
    fn new(theta: f64, t: f64, plus: f64, minus: f64) -> Self {
        Self { theta, t, plus, minus, total: plus + minus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxQuantities {
    pub t_cl_t: f64,
    pub t_cl_0: f64,
    pub delta: f64,
    pub delta00: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    /// `4t² + (δ² + σ²)²`.
    pub d: f64,
}

pub fn aux_quantities(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, t: f64) -> AuxQuantities {
    let d2 = p.delta * p.delta;
    let s2 = f.sigma * f.sigma;
    let sum = d2 + s2;
    let d = 4.0 * t * t + sum * sum;
    let c = f.q0 - p.x0;
    let ct = c - p.k0 * t;
    let delta00 = 0.25 * d2 * s2 * sum;
    let delta = s2 * (theta + t).powi(2) + d2 * theta * theta + delta00;
    let alpha = 2.0 * delta;
    let beta = 2.0 * (p.k0 * delta00 + d2 * theta * ct + s2 * (theta + t) * c);
    let gamma = 2.0 * (p.k0 * p.k0 * delta00 + d2 * ct * ct + s2 * c * c);
    let xi = beta / (alpha * d).sqrt();
    // γ/D − ξ², written without cancellation.
    let kappa = d2 * s2 * (p.k0 * theta - ct).powi(2) / (2.0 * delta);
    let (t_cl_t, t_cl_0) = if p.k0 != 0.0 { (ct / p.k0, c / p.k0) } else { (f64::NAN, f64::NAN) };
    AuxQuantities {
        t_cl_t,
        t_cl_0,
        delta,
        delta00,
        xi,
        alpha,
        beta,
        gamma,
        kappa,
        d,
    }
}

/// `H(x) = ∫₀^∞ 2y e^{−(y−x)²} dy`, evaluated without cancellation.
fn half_line_moment(x: f64) -> f64 {
    if x >= 0.0 {
        (-x * x).exp() + PI.sqrt() * x * (1.0 + erf(x))
    } else {
        (-x * x).exp() * one_minus_sqrt_pi_x_erfcx(-x)
    }
}

/// Closed-form right and left operational fluxes.
pub fn flux_closed(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, t: f64) -> FluxPoint {
    let a = aux_quantities(p, f, theta, t);
    let k = p.delta * f.sigma * a.d.sqrt() / (4.0 * PI * a.delta);
    let scale = k * (-a.kappa).exp();
    FluxPoint::new(theta, t, scale * half_line_moment(a.xi), scale * half_line_moment(-a.xi))
}

/// `Pr± = ∫₀^∞ p Pr(±θp, ±p, t) dp` by adaptive quadrature of the closed
/// propensity.
///
/// Far out in θ the ray meets the Gaussian where the momentum is atypical,
/// so the half line is covered by consecutive segments until one adds
/// nothing at the requested tolerance.
pub fn flux_oracle(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, t: f64, cfg: &QuadratureConfig) -> Result<FluxPoint> {
    let c = PhaseCovariance::of(p, f, t);
    let width = p.k0.abs() + cfg.truncation_radius * c.std_p();
    let branch = |sign: f64| -> Result<f64> {
        let g = |k: f64| k * propensity_closed(p, f, sign * theta * k, sign * k, t);
        let mut total = 0.0;
        for seg in 0..64 {
            let (lo, hi) = (seg as f64 * width, (seg + 1) as f64 * width);
            let part = integrate_1d(g, Range1d::new(lo, hi).with_initial_panels(256), cfg)
                .map_err(quadrature_failure)?
                .value;
            total += part;
            // The integrand is unimodal along the ray, so a small segment
            // on the decreasing side ends the search.
            if seg > 0 && g(hi) <= g(lo) && part.abs() <= 1e-3 * cfg.rel_tol * total.abs() {
                return Ok(total);
            }
        }
        Err(Error::QuadratureFailure(format!("flux integrand at theta = {theta} does not decay")))
    };
    Ok(FluxPoint::new(theta, t, branch(1.0)?, branch(-1.0)?))
}

fn quadrature_failure(e: Error) -> Error {
    match e {
        Error::NotConverged { value, error_estimate, subdivisions } => Error::QuadratureFailure(format!(
            "value {value:e}, error {error_estimate:e} after {subdivisions} subdivisions"
        )),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackflowRatio {
    pub xi: f64,
    /// `Pr₋/Pr₊` from the closed forms.
    pub exact: f64,
    /// `(3/(2√π)) e^{−ξ²}/ξ`.
    pub simple_asymptotic: f64,
    /// Leading term of the exact ratio, `e^{−ξ²}/(4√π ξ³)`.
    pub leading_asymptotic: f64,
}

/// The ratio depends on the parameters only through `ξ`.
pub fn backflow_ratio_at_xi(xi: f64) -> Result<BackflowRatio> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("backflow asymptotics need xi > 0, got {xi}")));
    }
    let plus = half_line_moment(xi);
    let minus = half_line_moment(-xi);
    if plus < DENSITY_FLOOR {
        return Err(Error::DivisionDegenerate(plus));
    }
    let g = (-xi * xi).exp();
    Ok(BackflowRatio {
        xi,
        exact: minus / plus,
        simple_asymptotic: 1.5 / PI.sqrt() * g / xi,
        leading_asymptotic: g / (4.0 * PI.sqrt() * xi.powi(3)),
    })
}

pub fn backflow_ratio(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, t: f64) -> Result<BackflowRatio> {
    let point = flux_closed(p, f, theta, t);
    if point.plus < DENSITY_FLOOR {
        return Err(Error::DivisionDegenerate(point.plus));
    }
    let r = backflow_ratio_at_xi(aux_quantities(p, f, theta, t).xi)?;
    Ok(BackflowRatio { exact: point.minus / point.plus, ..r })
}

fn require_positive_energy(e: f64) -> Result<()> {
    if !(e > 0.0) {
        return Err(Error::DomainViolation(format!("energy must be positive, got {e}")));
    }
    Ok(())
}

/// `Pr(E) = √(v/(πE)) exp(−v(k₀² + 2E)/2) cosh(v k₀ √(2E))` with
/// `v = δ²σ²/(δ² + σ²)`. Independent of the evolution time.
pub fn energy_distribution(p: &ParticleGaussian, f: &FilterGaussian, e: f64) -> Result<f64> {
    require_positive_energy(e)?;
    let d2 = p.delta * p.delta;
    let s2 = f.sigma * f.sigma;
    let v = d2 * s2 / (d2 + s2);
    let mom = (2.0 * e).sqrt();
    let ln = ln_exp_cosh(-0.5 * v * (p.k0 * p.k0 + 2.0 * e), v * p.k0 * mom);
    Ok((v / (PI * e)).sqrt() * ln.exp())
}

/// `[ρ(√2E) + ρ(−√2E)]/√(2E)` with the momentum marginal `ρ` obtained by
/// quadrature over `q`.
pub fn energy_distribution_oracle(p: &ParticleGaussian, f: &FilterGaussian, e: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    require_positive_energy(e)?;
    let mom = (2.0 * e).sqrt();
    Ok((momentum_marginal_numeric(p, f, mom, t, cfg)? + momentum_marginal_numeric(p, f, -mom, t, cfg)?) / mom)
}

/// `Pr(θ, E) = (2δσ/(π√D)) exp(−(αP² + γ)/D) cosh(2βP/D)`, `P = √(2E)`.
pub fn joint_time_energy(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, e: f64, t: f64) -> Result<f64> {
    require_positive_energy(e)?;
    let a = aux_quantities(p, f, theta, t);
    let mom = (2.0 * e).sqrt();
    let pref = 2.0 * p.delta * f.sigma / (PI * a.d.sqrt());
    let ln = ln_exp_cosh(-(a.alpha * mom * mom + a.gamma) / a.d, 2.0 * a.beta * mom / a.d);
    Ok(pref * ln.exp())
}

/// Delta reduction of the defining integral: `Pr(θP, P) + Pr(−θP, −P)`.
pub fn joint_time_energy_oracle(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, e: f64, t: f64) -> Result<f64> {
    require_positive_energy(e)?;
    let mom = (2.0 * e).sqrt();
    Ok(propensity_closed(p, f, theta * mom, mom, t) + propensity_closed(p, f, -theta * mom, -mom, t))
}

/// Upper end of the energy axis holding the momentum support.
fn energy_reach(p: &ParticleGaussian, f: &FilterGaussian, cfg: &QuadratureConfig) -> f64 {
    let c = PhaseCovariance::of(p, f, 0.0);
    0.5 * (p.k0.abs() + cfg.truncation_radius * c.std_p()).powi(2)
}

/// `∫₀^∞ Eⁿ Pr(E) dE`; the `1/√E` endpoint is removed by substitution.
pub fn energy_distribution_moment(n: u32, p: &ParticleGaussian, f: &FilterGaussian, cfg: &QuadratureConfig) -> Result<f64> {
    let top = energy_reach(p, f, cfg);
    let r = integrate_1d(
        |e| if e > 0.0 { e.powi(n as i32) * energy_distribution(p, f, e).unwrap_or(0.0) } else { 0.0 },
        Range1d::new(0.0, top).singular_at_a().with_initial_panels(64),
        cfg,
    )?;
    Ok(r.value)
}

/// `∫ Pr(θ, E) dE`, integrated as `∫ Pr(θ, P²/2) P dP`.
pub fn joint_energy_marginal(p: &ParticleGaussian, f: &FilterGaussian, theta: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let reach = (2.0 * energy_reach(p, f, cfg)).sqrt();
    let r = integrate_1d(
        |mom| if mom > 0.0 { mom * joint_time_energy(p, f, theta, 0.5 * mom * mom, t).unwrap_or(0.0) } else { 0.0 },
        Range1d::new(0.0, reach).with_initial_panels(256),
        cfg,
    )?;
    Ok(r.value)
}

/// `∫ Pr(θ, E) dθ`, integrating each momentum branch over the θ range that
/// maps onto the `q` support.
pub fn joint_time_marginal(p: &ParticleGaussian, f: &FilterGaussian, e: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    require_positive_energy(e)?;
    let mom = (2.0 * e).sqrt();
    let cov = PhaseCovariance::of(p, f, t);
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let (m, s) = cov.q_given_p(sign * mom);
        let r = cfg.truncation_radius * s;
        let (lo, hi) = ((m - r) / (sign * mom), (m + r) / (sign * mom));
        let range = Range1d::new(lo.min(hi), lo.max(hi)).with_initial_panels(8);
        total += integrate_1d(|th| propensity_closed(p, f, sign * th * mom, sign * mom, t), range, cfg)?.value;
    }
    Ok(total)
}

/// `∫ Pr(θ, t) dθ` over the real line via `θ = tan φ`; the flux tails
/// decay only as `1/θ²`, which the map turns into a bounded integrand.
pub fn flux_normalization(p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let h = 0.5 * PI;
    let r = integrate_1d(
        |phi| {
            let th = phi.tan();
            flux_closed(p, f, th, t).total / phi.cos().powi(2)
        },
        Range1d::new(-h, h).with_initial_panels(512),
        cfg,
    )?;
    Ok(r.value)
}

/// Lobe masses `(∫Pr₊ dθ, ∫Pr₋ dθ)` over the real line.
pub fn flux_lobe_masses(p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let h = 0.5 * PI;
    let lobe = |which: fn(&FluxPoint) -> f64| {
        integrate_1d(
            |phi| which(&flux_closed(p, f, phi.tan(), t)) / phi.cos().powi(2),
            Range1d::new(-h, h).with_initial_panels(512),
            cfg,
        )
        .map(|r| r.value)
    };
    Ok((lobe(|x| x.plus)?, lobe(|x| x.minus)?))
}

/// Symmetric principal value `lim_{Θ→∞} ∫_{−Θ}^{Θ} θ Pr(θ, t) dθ`.
///
/// Both tails behave as `C/θ²` with the same `C`, so `θ Pr` is not
/// absolutely integrable; pairing `θ` with `−θ` cancels the divergence.
pub fn flux_mean_principal_value(p: &ParticleGaussian, f: &FilterGaussian, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let h = 0.5 * PI;
    let r = integrate_1d(
        |phi| {
            let th = phi.tan();
            th * (flux_closed(p, f, th, t).total - flux_closed(p, f, -th, t).total) / phi.cos().powi(2)
        },
        Range1d::new(0.0, h).with_initial_panels(512),
        cfg,
    )?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxComponent {
    Plus,
    Minus,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Spectrum {
    /// Grid over `(θ, t)`.
    Flux(FluxComponent),
    /// Grid over `(θ, E)` at a fixed evolution time.
    Joint { t: f64 },
}

pub fn spectra_grid(p: &ParticleGaussian, f: &FilterGaussian, grid: &PhaseGrid, which: Spectrum) -> Result<Field> {
    match which {
        Spectrum::Flux(component) => Field::evaluate(grid, |th, t| {
            let point = flux_closed(p, f, th, t);
            match component {
                FluxComponent::Plus => point.plus,
                FluxComponent::Minus => point.minus,
                FluxComponent::Total => point.total,
            }
        }),
        Spectrum::Joint { t } => {
            if grid.y.min <= 0.0 {
                return Err(Error::DomainViolation("joint distribution needs E > 0 on the whole grid".into()));
            }
            Field::evaluate(grid, |th, e| joint_time_energy(p, f, th, e, t).unwrap_or(0.0))
        }
    }
}

/// Mean and second central moment of a sampled slice, by the trapezoid rule.
pub fn slice_moments(x: &[f64], values: &[f64]) -> (f64, f64) {
    let trap = |g: &dyn Fn(usize) -> f64| {
        (1..x.len()).map(|i| 0.5 * (g(i) + g(i - 1)) * (x[i] - x[i - 1])).sum::<f64>()
    };
    let mass = trap(&|i| values[i]);
    let mean = trap(&|i| x[i] * values[i]) / mass;
    let var = trap(&|i| (x[i] - mean).powi(2) * values[i]) / mass;
    (mean, var)
}
