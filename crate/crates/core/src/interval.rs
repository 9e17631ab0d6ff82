use crate::error::{Error, Result};
use std::fmt;

/// An open interval on the extended real line. Either side may be infinite;
/// both infinite means the whole real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::Config("interval bound is NaN".into()));
        }
        if !(lower < upper) {
            return Err(Error::Config(format!(
                "interval requires lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn real_line() -> Self {
        Self { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn positive_half_line() -> Self {
        Self { lower: 0.0, upper: f64::INFINITY }
    }

    pub fn unit() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }

    pub fn lower_finite(&self) -> bool {
        self.lower.is_finite()
    }

    pub fn upper_finite(&self) -> bool {
        self.upper.is_finite()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower_finite() && self.upper_finite()
    }

    pub fn has_finite_bound(&self) -> bool {
        self.lower_finite() || self.upper_finite()
    }

    pub fn is_unbounded(&self) -> bool {
        !self.has_finite_bound()
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Canonical chain start for target-space samplers: the midpoint of a
    /// bounded interval, one unit inside a single finite boundary, zero on
    /// the real line.
    pub fn default_start(&self) -> f64 {
        match (self.lower_finite(), self.upper_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + 1.0,
            (false, true) => self.upper - 1.0,
            (false, false) => 0.0,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_bounds() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn classification() {
        let unit = Interval::unit();
        assert!(unit.is_bounded());
        assert!(unit.contains_open(0.5));
        assert!(!unit.contains_open(0.0));
        assert!(unit.contains_closed(0.0));

        let pos = Interval::positive_half_line();
        assert!(pos.has_finite_bound());
        assert!(!pos.is_bounded());
        assert_eq!(pos.default_start(), 1.0);

        let line = Interval::real_line();
        assert!(line.is_unbounded());
        assert_eq!(line.default_start(), 0.0);
    }
}
