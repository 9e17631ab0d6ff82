//! Quadrature-backed reference distribution: a tabulated CDF built from the
//! exact normalized density, giving ground-truth quantiles and inverse-CDF
//! sampling that are independent of every Langevin code path.

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::targets::TargetDensity;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tabulated CDF over an effective support `[lo, hi]` covering all but a
/// negligible tail.
#[derive(Debug, Clone)]
pub struct ReferenceCdf {
    target: TargetDensity,
    edges: Vec<f64>,
    /// cdf[i] = mass of (lo, edges[i]]; cdf[0] = 0, cdf[n] = 1 after
    /// normalization
    cdf: Vec<f64>,
}

impl ReferenceCdf {
    pub fn build(target: &TargetDensity, n_cells: usize) -> Result<Self> {
        if n_cells < 16 {
            return Err(Error::Config("reference table needs at least 16 cells".into()));
        }
        let (lo, hi) = effective_support(target)?;
        let n = n_cells;
        let edges = clustered_edges(target, lo, hi, n);
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in edges.windows(2) {
            acc += integrate(|x| target.pdf_normalized(x).unwrap_or(0.0), w[0], w[1], 1e-12);
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numerics(format!("reference table mass {total} is unusable")));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(Self { target: *target, edges, cdf })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    /// CDF by table lookup with in-cell linear interpolation.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let idx = match self.edges.binary_search_by(|e| e.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.cdf[i],
            Err(i) => i - 1,
        };
        let frac = (x - self.edges[idx]) / (self.edges[idx + 1] - self.edges[idx]);
        self.cdf[idx] + frac * (self.cdf[idx + 1] - self.cdf[idx])
    }

    /// Quantile: locate the cell by binary search, then polish within the
    /// cell by guarded Newton against the exact density. Falls back to
    /// linear interpolation where the density is singular or vanishing.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let idx = match self.cdf.binary_search_by(|c| c.partial_cmp(&p).unwrap()) {
            Ok(i) => return self.edges[i.min(self.edges.len() - 1)],
            Err(i) => i.saturating_sub(1).min(self.cdf.len() - 2),
        };
        let (e0, e1) = (self.edges[idx], self.edges[idx + 1]);
        let (c0, c1) = (self.cdf[idx], self.cdf[idx + 1]);
        let cell_mass = c1 - c0;
        if cell_mass <= 0.0 {
            return e0;
        }
        let mut x = e0 + (e1 - e0) * ((p - c0) / cell_mass);
        for _ in 0..8 {
            if !(x > e0 && x <= e1) {
                break;
            }
            let d = self.target.pdf_normalized(x).unwrap_or(0.0);
            if !(d.is_finite() && d > 1e-300) {
                break; // singular or flat evaluation point: keep the iterate
            }
            // mass of (e0, x] via fixed-order quadrature (cells are smooth
            // away from the clustered edges); the table renormalization
            // factor is 1 + O(1e-9) and can be ignored here
            let m = gauss15(|y| self.target.pdf_normalized(y).unwrap_or(0.0), e0, x);
            let err = c0 + m - p;
            // guarded Newton: a step that would cross the cell edge (which
            // happens in cells with an integrable singularity) bisects
            // toward the edge instead, so the iterate stays interior
            let raw = x - err / d;
            let next = if raw <= e0 {
                0.5 * (x + e0)
            } else if raw >= e1 {
                0.5 * (x + e1)
            } else {
                raw
            };
            if (next - x).abs() <= 1e-12 * (1.0 + x.abs()) {
                x = next;
                break;
            }
            x = next;
        }
        // p in (0,1) must map strictly inside the support
        let interior_floor = e0 + f64::MIN_POSITIVE.max(1e-300 * (e1 - e0));
        if p > 0.0 && x <= e0 {
            x = interior_floor;
        }
        x
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen::<f64>().clamp(1e-16, 1.0 - 1e-16);
        self.quantile(u)
    }

    pub fn sample_many(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// 15-point Gauss-Legendre on [a, b]; exact to machine precision for the
/// smooth in-cell integrands the quantile refinement sees.
fn gauss15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 8] = [
        0.0,
        0.201_194_093_997_434_52,
        0.394_151_347_077_563_37,
        0.570_972_172_608_538_85,
        0.724_417_731_360_170_05,
        0.848_206_583_410_427_22,
        0.937_273_392_400_705_9,
        0.987_992_518_020_485_43,
    ];
    const W: [f64; 8] = [
        0.202_578_241_925_561_27,
        0.198_431_485_327_111_58,
        0.186_161_000_015_562_21,
        0.166_269_205_816_993_93,
        0.139_570_677_926_154_31,
        0.107_159_220_467_171_93,
        0.070_366_047_488_108_12,
        0.030_753_241_996_117_27,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = W[0] * f(c);
    for i in 1..8 {
        acc += W[i] * (f(c + h * X[i]) + f(c - h * X[i]));
    }
    acc * h
}

/// Cell edges clustered quadratically toward finite domain boundaries, so
/// integrable density singularities at the edges land in cells carrying
/// little mass and in-cell inversion stays accurate.
fn clustered_edges(target: &TargetDensity, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let d = target.domain();
    let width = hi - lo;
    let map: Box<dyn Fn(f64) -> f64> = match (d.lower_finite(), d.upper_finite()) {
        // cosine spacing: quadratic clustering at both ends
        (true, true) => {
            Box::new(move |u: f64| lo + width * 0.5 * (1.0 - (std::f64::consts::PI * u).cos()))
        }
        (true, false) => Box::new(move |u: f64| lo + width * u * u),
        (false, true) => Box::new(move |u: f64| hi - width * (1.0 - u) * (1.0 - u)),
        (false, false) => Box::new(move |u: f64| lo + width * u),
    };
    let mut edges: Vec<f64> = (0..=n).map(|i| map(i as f64 / n as f64)).collect();
    // the map is monotone but guard the float endpoints exactly
    edges[0] = lo;
    edges[n] = hi;
    edges
}

/// Effective support: the domain itself when bounded, otherwise expanded
/// until the enclosed mass is within 1e-12 of one.
pub fn effective_support(target: &TargetDensity) -> Result<(f64, f64)> {
    let d = target.domain();
    let pdf = |x: f64| target.pdf_normalized(x).unwrap_or(0.0);
    let tol = 1e-12;
    let lo;
    let hi;
    match (d.lower_finite(), d.upper_finite()) {
        (true, true) => return Ok((d.lower, d.upper)),
        (true, false) => {
            lo = d.lower;
            let mut h = d.lower + 1.0;
            let mut mass = integrate(pdf, lo, h, 1e-11);
            let mut span = 1.0;
            while mass < 1.0 - tol && span < 1e9 {
                let next = h + span;
                mass += integrate(pdf, h, next, 1e-11);
                h = next;
                span *= 2.0;
            }
            hi = h;
        }
        (false, true) => {
            hi = d.upper;
            let mut l = d.upper - 1.0;
            let mut mass = integrate(pdf, l, hi, 1e-11);
            let mut span = 1.0;
            while mass < 1.0 - tol && span < 1e9 {
                let next = l - span;
                mass += integrate(pdf, next, l, 1e-11);
                l = next;
                span *= 2.0;
            }
            lo = l;
        }
        (false, false) => {
            let mut a = -1.0;
            let mut b = 1.0;
            let mut mass = integrate(pdf, a, b, 1e-11);
            let mut span = 1.0;
            while mass < 1.0 - tol && span < 1e9 {
                mass += integrate(pdf, a - span, a, 1e-11);
                mass += integrate(pdf, b, b + span, 1e-11);
                a -= span;
                b += span;
                span *= 2.0;
            }
            lo = a;
            hi = b;
        }
    }
    Ok((lo, hi))
}
