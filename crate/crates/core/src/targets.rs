//! Target densities on bounded intervals with analytic potentials and
//! gradients, plus the stochastic-gradient oracle used by the samplers.
//!
//! Potentials are unnormalized (additive constants dropped); the exact
//! normalized density is carried separately for diagnostics only.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::special::{ln_gamma, normal_cdf, normal_pdf};
use crate::transforms::Transform;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, scale: f64 },
    TruncatedNormal { lower: f64, upper: f64 },
    TranslatedBeta { alpha: f64, beta: f64 },
}

/// A one-dimensional target distribution on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDensity {
    kind: TargetKind,
    domain: Interval,
    exact_mean: Option<f64>,
    boundary_density_finite: bool,
    /// ln of the normalization constant of the closed-form density
    log_norm: f64,
}

impl TargetDensity {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        require_positive("alpha", alpha)?;
        require_positive("beta", beta)?;
        let log_norm = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
        Ok(Self {
            kind: TargetKind::Beta { alpha, beta },
            domain: Interval::unit(),
            exact_mean: Some(alpha / (alpha + beta)),
            boundary_density_finite: alpha.min(beta) >= 1.0,
            log_norm,
        })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        require_positive("shape", shape)?;
        require_positive("scale", scale)?;
        Ok(Self {
            kind: TargetKind::Gamma { shape, scale },
            domain: Interval::positive_half_line(),
            exact_mean: Some(shape * scale),
            boundary_density_finite: shape >= 1.0,
            log_norm: ln_gamma(shape) + shape * scale.ln(),
        })
    }

    /// Standard normal truncated to `(lower, upper)`; both bounds may be
    /// infinite, and the doubly infinite case is the plain standard normal.
    pub fn truncated_normal(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::Config(format!(
                "truncated normal requires lower < upper, got ({lower}, {upper})"
            )));
        }
        let mass = normal_cdf(upper) - normal_cdf(lower);
        let pdf_l = if lower.is_finite() { normal_pdf(lower) } else { 0.0 };
        let pdf_u = if upper.is_finite() { normal_pdf(upper) } else { 0.0 };
        Ok(Self {
            kind: TargetKind::TruncatedNormal { lower, upper },
            domain: Interval::new(lower, upper)?,
            exact_mean: Some((pdf_l - pdf_u) / mass),
            boundary_density_finite: true,
            log_norm: mass.ln(),
        })
    }

    /// Beta(alpha, beta) linearly translated onto (-1, 1).
    pub fn translated_beta(alpha: f64, beta: f64) -> Result<Self> {
        require_positive("alpha", alpha)?;
        require_positive("beta", beta)?;
        let log_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
        Ok(Self {
            kind: TargetKind::TranslatedBeta { alpha, beta },
            domain: Interval::new(-1.0, 1.0)?,
            exact_mean: Some((alpha - beta) / (alpha + beta)),
            boundary_density_finite: alpha.min(beta) >= 1.0,
            // density ((w+1)/2)^{a-1} ((1-w)/2)^{b-1} / (2 B(a,b))
            log_norm: log_b + (alpha + beta - 1.0) * std::f64::consts::LN_2,
        })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TargetKind::Beta { .. } => "beta",
            TargetKind::Gamma { .. } => "gamma",
            TargetKind::TruncatedNormal { .. } => "truncated_normal",
            TargetKind::TranslatedBeta { .. } => "translated_beta",
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn exact_mean(&self) -> Option<f64> {
        self.exact_mean
    }

    /// Closed-form second moment, used by moment test functions.
    pub fn exact_second_moment(&self) -> Option<f64> {
        match self.kind {
            TargetKind::Beta { alpha, beta } => {
                Some(alpha * (alpha + 1.0) / ((alpha + beta) * (alpha + beta + 1.0)))
            }
            TargetKind::Gamma { shape, scale } => Some(shape * (shape + 1.0) * scale * scale),
            TargetKind::TruncatedNormal { lower, upper } => {
                let z = self.log_norm.exp();
                let lo_term = if lower.is_finite() { lower * normal_pdf(lower) } else { 0.0 };
                let hi_term = if upper.is_finite() { upper * normal_pdf(upper) } else { 0.0 };
                Some(1.0 + (lo_term - hi_term) / z)
            }
            TargetKind::TranslatedBeta { alpha, beta } => {
                let ab = alpha + beta;
                let second = alpha * (alpha + 1.0) / (ab * (ab + 1.0));
                let mean = alpha / ab;
                Some(4.0 * second - 4.0 * mean + 1.0)
            }
        }
    }

    pub fn boundary_density_finite(&self) -> bool {
        self.boundary_density_finite
    }

    /// Unnormalized potential U(theta) = -log density + const.
    pub fn potential(&self, theta: f64) -> f64 {
        match self.kind {
            TargetKind::Beta { alpha, beta } => {
                -(alpha - 1.0) * theta.ln() - (beta - 1.0) * (1.0 - theta).ln()
            }
            TargetKind::Gamma { shape, scale } => -(shape - 1.0) * theta.ln() + theta / scale,
            TargetKind::TruncatedNormal { .. } => 0.5 * theta * theta,
            TargetKind::TranslatedBeta { alpha, beta } => {
                -(alpha - 1.0) * (theta + 1.0).ln() - (beta - 1.0) * (1.0 - theta).ln()
            }
        }
    }

    /// U'(theta). Evaluations arbitrarily close to a boundary return the
    /// plain IEEE value of the closed form (no clamping), so reflecting
    /// samplers are observed doing what they actually do.
    pub fn grad_potential(&self, theta: f64) -> f64 {
        match self.kind {
            TargetKind::Beta { alpha, beta } => {
                -(alpha - 1.0) / theta + (beta - 1.0) / (1.0 - theta)
            }
            TargetKind::Gamma { shape, scale } => -(shape - 1.0) / theta + 1.0 / scale,
            TargetKind::TruncatedNormal { .. } => theta,
            TargetKind::TranslatedBeta { alpha, beta } => {
                -(alpha - 1.0) / (theta + 1.0) + (beta - 1.0) / (1.0 - theta)
            }
        }
    }

    /// Exact normalized density, for diagnostics. Present for the whole
    /// catalog; None is reserved for future targets without closed forms.
    pub fn pdf_normalized(&self, theta: f64) -> Option<f64> {
        if !self.domain.contains_open(theta) {
            return Some(0.0);
        }
        let log_pdf = match self.kind {
            TargetKind::Beta { alpha, beta } => {
                (alpha - 1.0) * theta.ln() + (beta - 1.0) * (1.0 - theta).ln() - self.log_norm
            }
            TargetKind::Gamma { shape, scale } => {
                (shape - 1.0) * theta.ln() - theta / scale - self.log_norm
            }
            TargetKind::TruncatedNormal { .. } => {
                return Some(normal_pdf(theta) / self.log_norm.exp());
            }
            TargetKind::TranslatedBeta { alpha, beta } => {
                (alpha - 1.0) * (theta + 1.0).ln() + (beta - 1.0) * (1.0 - theta).ln()
                    - self.log_norm
            }
        };
        Some(log_pdf.exp())
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("parameter {name} must be positive and finite, got {v}")))
    }
}

/// Build a catalog target from its config name and parameter map.
pub fn make_target(name: &str, params: &BTreeMap<String, f64>) -> Result<TargetDensity> {
    let get = |key: &str| -> Result<f64> {
        params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("target {name:?} missing parameter {key:?}")))
    };
    match name {
        "beta" => TargetDensity::beta(get("alpha")?, get("beta")?),
        "gamma" => TargetDensity::gamma(get("shape")?, get("scale")?),
        "truncated_normal" => TargetDensity::truncated_normal(get("lower")?, get("upper")?),
        "translated_beta" => TargetDensity::translated_beta(get("alpha")?, get("beta")?),
        other => Err(Error::Config(format!("unknown target name: {other:?}"))),
    }
}

/// How the gradient oracle corrupts the exact gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    Exact,
    /// U' + delta with delta ~ Normal(0, std^2); emulates a stochastic
    /// gradient with additive white noise.
    AdditiveNoise { std: f64 },
}

/// Anything that can serve a (possibly noisy) target-space gradient.
/// The caller supplies the chain's random stream so draw order is pinned.
pub trait GradientSource {
    fn sample_gradient(&self, theta: f64, rng: &mut ChaCha8Rng) -> f64;
}

/// The catalog oracle: exact gradient plus optional Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct GradientOracle {
    pub target: TargetDensity,
    pub mode: NoiseMode,
}

impl GradientOracle {
    pub fn exact(target: TargetDensity) -> Self {
        Self { target, mode: NoiseMode::Exact }
    }

    pub fn with_noise(target: TargetDensity, std: f64) -> Self {
        Self { target, mode: NoiseMode::AdditiveNoise { std } }
    }
}

impl GradientSource for GradientOracle {
    fn sample_gradient(&self, theta: f64, rng: &mut ChaCha8Rng) -> f64 {
        let grad = self.target.grad_potential(theta);
        match self.mode {
            NoiseMode::Exact => grad,
            NoiseMode::AdditiveNoise { std } => {
                let delta: f64 = StandardNormal.sample(rng);
                grad + std * delta
            }
        }
    }
}

/// Proxy potential U(phi) = U_theta(f(phi)) - log f'(phi).
pub fn proxy_potential(target: &TargetDensity, t: &Transform, phi: f64) -> f64 {
    target.potential(t.eval(phi)) - t.deriv1(phi).ln()
}

/// Proxy gradient U'(phi) = f'(phi) U'_theta(f(phi)) - f''(phi)/f'(phi),
/// with the second term taken from the closed-form ratio.
pub fn proxy_potential_gradient(target: &TargetDensity, t: &Transform, phi: f64) -> Result<f64> {
    let fp = t.deriv1(phi);
    let ratio = t.log_deriv_ratio(phi);
    let grad_theta = target.grad_potential(t.eval(phi));
    let out = fp * grad_theta - ratio;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Numerics(format!(
            "proxy gradient not finite at phi={phi}: f'={fp}, ratio={ratio}, U'_theta={grad_theta}"
        )))
    }
}

/// Noisy proxy gradient f'(phi)(U'_theta + delta) - f''/f', so the proxy
/// noise is exactly f'(phi) * delta.
pub fn sample_proxy_gradient<G: GradientSource>(
    oracle: &G,
    t: &Transform,
    phi: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let fp = t.deriv1(phi);
    let ratio = t.log_deriv_ratio(phi);
    let ghat = oracle.sample_gradient(t.eval(phi), rng);
    fp * ghat - ratio
}
