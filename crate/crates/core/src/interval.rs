//! Closed real intervals and their natural arithmetic extensions.
//!
//! Operations use round-to-nearest floating point; degenerate intervals
//! therefore evaluate bit-for-bit like the corresponding scalar code, which
//! the margin computations rely on when a reach set collapses to a point.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Interval {
    /// Panics in debug builds when `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn zero() -> Self {
        Self::point(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Largest absolute value attained.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        let a = self.lo * k;
        let b = self.hi * k;
        Interval::new(a.min(b), a.max(b))
    }

    /// Exact range of `x^2`, tighter than `self * self` when 0 is inside.
    pub fn sqr(&self) -> Interval {
        let a = self.lo * self.lo;
        let b = self.hi * self.hi;
        if self.lo >= 0.0 || self.hi <= 0.0 {
            Interval::new(a.min(b), a.max(b))
        } else {
            Interval::new(0.0, a.max(b))
        }
    }

    /// `x^q` for a non-negative interval and `q >= 0`.
    pub fn powf_nonneg(&self, q: f64) -> Interval {
        debug_assert!(self.lo >= 0.0);
        Interval::new(self.lo.powf(q), self.hi.powf(q))
    }

    /// Image of a non-decreasing function.
    pub fn map_monotone(&self, f: impl Fn(f64) -> f64) -> Interval {
        Interval::new(f(self.lo), f(self.hi))
    }

    pub fn cos(&self) -> Interval {
        if self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let mut lo = self.lo.cos().min(self.hi.cos());
        let mut hi = self.lo.cos().max(self.hi.cos());
        // Maxima of cos sit at 2k*pi, minima at (2k+1)*pi.
        if contains_lattice_point(self, 0.0) {
            hi = 1.0;
        }
        if contains_lattice_point(self, PI) {
            lo = -1.0;
        }
        Interval::new(lo, hi)
    }

    pub fn sin(&self) -> Interval {
        if self.width() >= TAU {
            return Interval::new(-1.0, 1.0);
        }
        let mut lo = self.lo.sin().min(self.hi.sin());
        let mut hi = self.lo.sin().max(self.hi.sin());
        if contains_lattice_point(self, FRAC_PI_2) {
            hi = 1.0;
        }
        if contains_lattice_point(self, -FRAC_PI_2) {
            lo = -1.0;
        }
        Interval::new(lo, hi)
    }
}

/// Whether `[lo, hi]` contains some `offset + 2k*pi`.
fn contains_lattice_point(x: &Interval, offset: f64) -> bool {
    let k = ((x.lo - offset) / TAU).ceil();
    offset + k * TAU <= x.hi
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if self.lo == self.hi {
            return rhs.scale(self.lo);
        }
        if rhs.lo == rhs.hi {
            return self.scale(rhs.lo);
        }
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        Interval::new(self.lo + rhs, self.hi + rhs)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, rhs: f64) -> Interval {
        Interval::new(self.lo - rhs, self.hi - rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self.scale(rhs)
    }
}

/// Interval dot product `sum_i a_i * b_i`.
pub fn dot(a: &[Interval], b: &[Interval]) -> Interval {
    a.iter()
        .zip(b)
        .fold(Interval::zero(), |acc, (x, y)| acc + *x * *y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cos_crossing_extrema() {
        let c = Interval::new(-0.5, 0.5).cos();
        assert_eq!(c.hi, 1.0);
        assert!((c.lo - 0.5f64.cos()).abs() < 1e-15);

        let c = Interval::new(3.0, 3.5).cos();
        assert_eq!(c.lo, -1.0);

        let c = Interval::new(-7.0, -6.0).cos();
        // contains -2*pi
        assert_eq!(c.hi, 1.0);
    }

    #[test]
    fn sin_of_point_is_exact() {
        let x = 0.3217;
        assert_eq!(Interval::point(x).sin().lo, x.sin());
    }

    #[test]
    fn sqr_straddling_zero() {
        let s = Interval::new(-2.0, 1.0).sqr();
        assert_eq!(s, Interval::new(0.0, 4.0));
    }

    proptest! {
        #[test]
        fn trig_ranges_enclose_samples(lo in -10.0f64..10.0, w in 0.0f64..7.0, t in 0.0f64..1.0) {
            let x = Interval::new(lo, lo + w);
            let s = lo + t * w;
            prop_assert!(x.cos().contains(s.cos()));
            let sn = x.sin();
            prop_assert!(sn.contains(s.sin()));
        }

        #[test]
        fn products_enclose_samples(a in -5.0f64..5.0, wa in 0.0f64..3.0, b in -5.0f64..5.0, wb in 0.0f64..3.0,
                                    s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let x = Interval::new(a, a + wa);
            let y = Interval::new(b, b + wb);
            let (p, q) = (a + s * wa, b + t * wb);
            prop_assert!((x * y).contains(p * q));
            prop_assert!((x - y).contains(p - q));
            prop_assert!(x.sqr().contains(p * p));
        }
    }
}
