//! Scalar transforms mapping the unbounded proxy line onto a bounded
//! codomain, together with the derivatives the samplers need.
//!
//! Each transform carries `f`, `f'`, `f''`, the ratio `f''/f'` in closed
//! form, and the inverse `g = f^{-1}`. The ratio gets its own closed form
//! because `f'` underflows in the tails long before the ratio does (for
//! the sigmoid the ratio is `-tanh(phi/2)`, exact at every `phi`), and the
//! change-of-variable drift needs it exactly where `f'` is tiny.
//!
//! Arguments are saturated to [-700, 700] before exponentiation; this is a
//! documented saturation of the tails, not an error.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::fastmath;
use crate::special::{exponential_integral_ei, EULER_GAMMA};

/// Saturation bound applied before exponentials.
pub const PHI_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Sigmoid,
    Arctan,
    Softsign,
    Exp,
    Softplus,
    Icll,
    Identity,
}

impl TransformKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sigmoid" => Ok(Self::Sigmoid),
            "arctan" => Ok(Self::Arctan),
            "softsign" => Ok(Self::Softsign),
            "exp" => Ok(Self::Exp),
            "softplus" => Ok(Self::Softplus),
            "icll" => Ok(Self::Icll),
            "identity" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown transform name: {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::Arctan => "arctan",
            Self::Softsign => "softsign",
            Self::Exp => "exp",
            Self::Softplus => "softplus",
            Self::Icll => "icll",
            Self::Identity => "identity",
        }
    }

    fn base_codomain(self) -> Interval {
        match self {
            Self::Sigmoid | Self::Arctan | Self::Softsign => Interval::unit(),
            Self::Exp | Self::Softplus | Self::Icll => Interval::positive_half_line(),
            Self::Identity => Interval::real_line(),
        }
    }

    fn base_lipschitz(self) -> f64 {
        match self {
            Self::Sigmoid => 0.25,
            Self::Arctan => std::f64::consts::FRAC_1_PI,
            Self::Softsign => 0.5,
            Self::Exp => f64::INFINITY,
            Self::Softplus | Self::Icll | Self::Identity => 1.0,
        }
    }
}

/// A monotonically increasing scalar transform, optionally rescaled by an
/// affine map so the (0,1) family can cover an arbitrary bounded interval.
/// Immutable value object; freely shareable across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    scale: f64,
    offset: f64,
}

impl Transform {
    pub fn new(kind: TransformKind) -> Self {
        Self { kind, scale: 1.0, offset: 0.0 }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::new(TransformKind::parse(name)?))
    }

    /// Affine rescaling of a unit-codomain transform onto `(lo, hi)`.
    pub fn rescaled_to(self, lo: f64, hi: f64) -> Result<Self> {
        if self.kind.base_codomain() != Interval::unit() || self.scale != 1.0 || self.offset != 0.0 {
            return Err(Error::Config(format!(
                "only unit-codomain transforms can be rescaled; {} cannot",
                self.kind.name()
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "rescale target must be a bounded interval, got ({lo}, {hi})"
            )));
        }
        Ok(Self { kind: self.kind, scale: hi - lo, offset: lo })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn codomain(&self) -> Interval {
        let base = self.kind.base_codomain();
        Interval {
            lower: self.offset + self.scale * base.lower,
            upper: if base.upper.is_finite() {
                self.offset + self.scale * base.upper
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.scale * self.kind.base_lipschitz()
    }

    pub fn satisfies_assumption2(&self) -> bool {
        self.kind != TransformKind::Exp
    }

    /// theta = f(phi)
    pub fn eval(&self, phi: f64) -> f64 {
        self.offset + self.scale * base_eval(self.kind, phi)
    }

    /// f'(phi) > 0
    pub fn deriv1(&self, phi: f64) -> f64 {
        self.scale * base_deriv1(self.kind, phi)
    }

    /// f''(phi)
    pub fn deriv2(&self, phi: f64) -> f64 {
        self.scale * base_deriv2(self.kind, phi)
    }

    /// f''(phi) / f'(phi) in closed form (invariant under rescaling).
    pub fn log_deriv_ratio(&self, phi: f64) -> f64 {
        base_ratio(self.kind, phi)
    }

    /// phi = f^{-1}(theta)
    pub fn inverse(&self, theta: f64) -> f64 {
        base_inverse(self.kind, (theta - self.offset) / self.scale)
    }

    /// Value, first derivative, and ratio in one evaluation, sharing the
    /// exponential between them. Bitwise-identical to the separate
    /// methods; exists because elementwise samplers evaluate all three per
    /// parameter per step.
    pub fn fused_eval(&self, phi: f64) -> FusedEval {
        let base = base_fused(self.kind, phi);
        FusedEval {
            value: self.offset + self.scale * base.value,
            deriv1: self.scale * base.deriv1,
            log_deriv_ratio: base.log_deriv_ratio,
        }
    }
}

/// Output of [`Transform::fused_eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedEval {
    pub value: f64,
    pub deriv1: f64,
    pub log_deriv_ratio: f64,
}

impl Transform {
    /// Value-only block evaluation, bitwise-identical to [`Transform::eval`]
    /// per element.
    pub fn eval_block(&self, phi: &[f64], value: &mut [f64]) {
        assert_eq!(phi.len(), value.len());
        if self.kind == TransformKind::Exp && self.scale == 1.0 && self.offset == 0.0 {
            for i in 0..phi.len() {
                value[i] = crate::fastmath::exp_bounded(clamp(phi[i]));
            }
        } else {
            for i in 0..phi.len() {
                value[i] = self.eval(phi[i]);
            }
        }
    }

    /// [`Transform::fused_eval`] over a parameter block, bitwise-identical
    /// to the scalar calls. The softplus and exp paths are written
    /// branch-light so the compiler can vectorize them; elementwise
    /// samplers call this once per factor matrix per step.
    pub fn fused_eval_block(
        &self,
        phi: &[f64],
        value: &mut [f64],
        deriv1: &mut [f64],
        ratio: &mut [f64],
    ) {
        assert!(phi.len() == value.len() && phi.len() == deriv1.len() && phi.len() == ratio.len());
        let plain = self.scale == 1.0 && self.offset == 0.0;
        match self.kind {
            TransformKind::Softplus if plain => {
                for i in 0..phi.len() {
                    let p = clamp(phi[i]);
                    let t = crate::fastmath::exp_bounded(-p.abs());
                    let denom = 1.0 + t;
                    let l = crate::fastmath::ln_1p(t);
                    let nonneg = p >= 0.0;
                    value[i] = if nonneg { p + l } else { l };
                    deriv1[i] = if nonneg { 1.0 / denom } else { t / denom };
                    ratio[i] = if nonneg { t / denom } else { 1.0 / denom };
                }
            }
            TransformKind::Exp if plain => {
                for i in 0..phi.len() {
                    let z = crate::fastmath::exp_bounded(clamp(phi[i]));
                    value[i] = z;
                    deriv1[i] = z;
                    ratio[i] = 1.0;
                }
            }
            _ => {
                for i in 0..phi.len() {
                    let fused = self.fused_eval(phi[i]);
                    value[i] = fused.value;
                    deriv1[i] = fused.deriv1;
                    ratio[i] = fused.log_deriv_ratio;
                }
            }
        }
    }
}

fn base_fused(kind: TransformKind, phi: f64) -> FusedEval {
    match kind {
        TransformKind::Softplus => {
            let p = clamp(phi);
            if p >= 0.0 {
                let t = fastmath::exp_bounded(-p); // e^{-|phi|}
                let denom = 1.0 + t;
                FusedEval {
                    value: p + fastmath::ln_1p(t),
                    deriv1: 1.0 / denom,
                    log_deriv_ratio: t / denom,
                }
            } else {
                let u = fastmath::exp_bounded(p);
                let denom = 1.0 + u;
                FusedEval {
                    value: fastmath::ln_1p(u),
                    deriv1: u / denom,
                    log_deriv_ratio: 1.0 / denom,
                }
            }
        }
        TransformKind::Exp => {
            let z = fastmath::exp_bounded(clamp(phi));
            FusedEval { value: z, deriv1: z, log_deriv_ratio: 1.0 }
        }
        TransformKind::Icll => {
            let p = clamp(phi);
            let z = p.exp();
            let ratio = if z > 700.0 { (p - z).exp() } else { z / z.exp_m1() };
            FusedEval {
                value: icll_eval(phi),
                deriv1: -(-z).exp_m1(),
                log_deriv_ratio: ratio,
            }
        }
        // the remaining kinds have no shared exponential worth fusing
        other => FusedEval {
            value: base_eval(other, phi),
            deriv1: base_deriv1(other, phi),
            log_deriv_ratio: base_ratio(other, phi),
        },
    }
}

fn clamp(phi: f64) -> f64 {
    phi.clamp(-PHI_CLAMP, PHI_CLAMP)
}

/// Numerically stable logistic function, strictly inside (0,1) for
/// |phi| <= 700.
fn sigmoid(phi: f64) -> f64 {
    let phi = clamp(phi);
    if phi >= 0.0 {
        1.0 / (1.0 + fastmath::exp_bounded(-phi))
    } else {
        let e = fastmath::exp_bounded(phi);
        e / (1.0 + e)
    }
}

/// sigma(phi) * (1 - sigma(phi)) without the catastrophic rounding of the
/// literal product when sigma saturates.
fn sigmoid_deriv(phi: f64) -> f64 {
    let e = fastmath::exp_bounded(-clamp(phi).abs());
    let denom = 1.0 + e;
    e / (denom * denom)
}

fn sign(phi: f64) -> f64 {
    if phi > 0.0 {
        1.0
    } else if phi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn base_eval(kind: TransformKind, phi: f64) -> f64 {
    match kind {
        TransformKind::Sigmoid => sigmoid(phi),
        TransformKind::Arctan => phi.atan() / std::f64::consts::PI + 0.5,
        TransformKind::Softsign => 0.5 + phi / (2.0 * (1.0 + phi.abs())),
        TransformKind::Exp => fastmath::exp_bounded(clamp(phi)),
        TransformKind::Softplus => {
            let phi = clamp(phi);
            if phi >= 0.0 {
                phi + fastmath::ln_1p(fastmath::exp_bounded(-phi))
            } else {
                fastmath::ln_1p(fastmath::exp_bounded(phi))
            }
        }
        TransformKind::Icll => icll_eval(phi),
        TransformKind::Identity => phi,
    }
}

fn base_deriv1(kind: TransformKind, phi: f64) -> f64 {
    match kind {
        TransformKind::Sigmoid => sigmoid_deriv(phi),
        TransformKind::Arctan => 1.0 / (std::f64::consts::PI * (1.0 + phi * phi)),
        TransformKind::Softsign => {
            let a = 1.0 + phi.abs();
            0.5 / (a * a)
        }
        TransformKind::Exp => fastmath::exp_bounded(clamp(phi)),
        TransformKind::Softplus => sigmoid(phi),
        TransformKind::Icll => -(-clamp(phi).exp()).exp_m1(),
        TransformKind::Identity => 1.0,
    }
}

fn base_deriv2(kind: TransformKind, phi: f64) -> f64 {
    match kind {
        TransformKind::Sigmoid => sigmoid_deriv(phi) * (1.0 - 2.0 * sigmoid(phi)),
        TransformKind::Arctan => {
            let q = 1.0 + phi * phi;
            -2.0 * phi / (std::f64::consts::PI * q * q)
        }
        TransformKind::Softsign => {
            let a = 1.0 + phi.abs();
            -sign(phi) / (a * a * a)
        }
        TransformKind::Exp => fastmath::exp_bounded(clamp(phi)),
        TransformKind::Softplus => sigmoid_deriv(phi),
        TransformKind::Icll => {
            let z = clamp(phi).exp();
            z * (-z).exp()
        }
        TransformKind::Identity => 0.0,
    }
}

fn base_ratio(kind: TransformKind, phi: f64) -> f64 {
    match kind {
        // (1 - e^phi)/(1 + e^phi), exact at every phi
        TransformKind::Sigmoid => -(0.5 * clamp(phi)).tanh(),
        TransformKind::Arctan => -2.0 * phi / (1.0 + phi * phi),
        TransformKind::Softsign => -2.0 * sign(phi) / (1.0 + phi.abs()),
        TransformKind::Exp => 1.0,
        // 1 - sigma(phi) = sigma(-phi)
        TransformKind::Softplus => sigmoid(-phi),
        TransformKind::Icll => {
            let phi = clamp(phi);
            let z = phi.exp();
            if z > 700.0 {
                // z/(e^z - 1) ~ z e^{-z} = e^{phi - z}
                (phi - z).exp()
            } else {
                z / z.exp_m1()
            }
        }
        TransformKind::Identity => 0.0,
    }
}

fn base_inverse(kind: TransformKind, theta: f64) -> f64 {
    match kind {
        TransformKind::Sigmoid => theta.ln() - (-theta).ln_1p(),
        TransformKind::Arctan => (std::f64::consts::PI * (theta - 0.5)).tan(),
        TransformKind::Softsign => {
            let y = 2.0 * theta - 1.0;
            y / (1.0 - y.abs())
        }
        TransformKind::Exp => theta.ln(),
        TransformKind::Softplus => {
            if theta > 1.0 {
                theta + (-(-theta).exp()).ln_1p()
            } else {
                theta.exp_m1().ln()
            }
        }
        TransformKind::Icll => icll_inverse(theta),
        TransformKind::Identity => theta,
    }
}

/// f(phi) = phi - Ei(-e^phi) + gamma.
///
/// With z = e^phi the logarithms cancel exactly and
/// f = -sum_{k>=1} (-z)^k/(k*k!) = z - z^2/4 + z^3/18 - ...,
/// which is used verbatim for z <= 1; the Ei form takes over beyond.
fn icll_eval(phi: f64) -> f64 {
    let phi = clamp(phi);
    let z = phi.exp();
    if z <= 1.0 {
        let mut num = z; // (-1)^{k+1} z^k / k!
        let mut sum = z;
        for k in 2..60 {
            num *= -z / k as f64;
            let contrib = num / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum {
                break;
            }
        }
        sum
    } else if z > 700.0 {
        // |Ei(-z)| < e^{-700}: below resolution of phi + gamma
        phi + EULER_GAMMA
    } else {
        phi - exponential_integral_ei(-z).expect("z > 0 here") + EULER_GAMMA
    }
}

/// Safeguarded Newton inversion of the ICLL transform. The map is strictly
/// convex and increasing, so Newton converges globally from any start; the
/// asymptotes f ~ e^phi (left) and f ~ phi + gamma (right) give the seeds.
fn icll_inverse(theta: f64) -> f64 {
    if theta <= 0.0 {
        return -PHI_CLAMP;
    }
    let mut phi = if theta < 0.5 {
        theta.ln().max(-PHI_CLAMP)
    } else {
        theta - EULER_GAMMA
    };
    for _ in 0..100 {
        let err = icll_eval(phi) - theta;
        if err.abs() <= 1e-15 * (theta.abs() + 1e-300) {
            break;
        }
        let d = base_deriv1(TransformKind::Icll, phi).max(1e-300);
        phi = (phi - err / d).clamp(-PHI_CLAMP, PHI_CLAMP.max(theta + 1.0));
    }
    phi
}

/// Factual report of the bounded-derivative assumption over a grid.
#[derive(Debug, Clone)]
pub struct Assumption2Report {
    pub transform: &'static str,
    pub max_deriv: f64,
    pub max_deriv_at: f64,
    pub min_deriv: f64,
    /// true iff the Lipschitz constant is finite and the grid never exceeds it
    pub bound_holds: bool,
    pub lower_end_deriv: f64,
    pub upper_end_deriv: f64,
    /// None where that tail maps to an infinite boundary (nothing to check)
    pub lower_end_vanishes: Option<bool>,
    pub upper_end_vanishes: Option<bool>,
}

/// Evaluate `0 <= f' <= L` and the boundary-limit behavior of `f'` on a
/// sorted grid. Report-only; thresholds for the vanish flags are
/// `f'(end) < 1e-3` and at least two decades below the grid maximum.
pub fn check_assumption2(t: &Transform, grid: &[f64]) -> Assumption2Report {
    assert!(grid.len() >= 2, "grid needs at least two points");
    let lip = t.lipschitz_bound();
    let mut max_deriv = f64::NEG_INFINITY;
    let mut max_at = f64::NAN;
    let mut min_deriv = f64::INFINITY;
    for &phi in grid {
        let d = t.deriv1(phi);
        if d > max_deriv {
            max_deriv = d;
            max_at = phi;
        }
        min_deriv = min_deriv.min(d);
    }
    let bound_holds =
        lip.is_finite() && min_deriv >= 0.0 && max_deriv <= lip * (1.0 + 1e-12);
    let lower_end_deriv = t.deriv1(grid[0]);
    let upper_end_deriv = t.deriv1(*grid.last().unwrap());
    let vanish = |end: f64| end < 1e-3 && end < 1e-2 * max_deriv;
    let codomain = t.codomain();
    // identity skips boundary-limit checks: nothing saturates
    let skip = t.kind() == TransformKind::Identity;
    Assumption2Report {
        transform: t.name(),
        max_deriv,
        max_deriv_at: max_at,
        min_deriv,
        bound_holds,
        lower_end_deriv,
        upper_end_deriv,
        lower_end_vanishes: (!skip && codomain.lower_finite()).then(|| vanish(lower_end_deriv)),
        upper_end_vanishes: (!skip && codomain.upper_finite()).then(|| vanish(upper_end_deriv)),
    }
}

/// All catalog transform kinds.
pub const ALL_KINDS: [TransformKind; 7] = [
    TransformKind::Sigmoid,
    TransformKind::Arctan,
    TransformKind::Softsign,
    TransformKind::Exp,
    TransformKind::Softplus,
    TransformKind::Icll,
    TransformKind::Identity,
];

/// The six bounded-codomain catalog entries (identity excluded).
pub const CATALOG_KINDS: [TransformKind; 6] = [
    TransformKind::Sigmoid,
    TransformKind::Arctan,
    TransformKind::Softsign,
    TransformKind::Exp,
    TransformKind::Softplus,
    TransformKind::Icll,
];
