//! Minimal outward-rounded interval arithmetic.
//!
//! Rust gives no access to the FPU rounding mode, so each operation is
//! computed in round-to-nearest and then widened by one ulp on each side via
//! `next_down` / `next_up`. That over-covers the exactly rounded interval, so
//! enclosures stay valid; the cost is at most one extra ulp per operation,
//! which the distribution DP absorbs without visible bracket growth.

/// Closed interval `[lo, hi]` with `lo <= hi` (both finite unless stated).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iv {
    pub lo: f64,
    pub hi: f64,
}

impl Iv {
    pub fn point(x: f64) -> Self {
        Iv { lo: x, hi: x }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Iv { lo, hi }
    }

    /// `[x - 1ulp, x + 1ulp]`, the enclosure of a value known to rounding.
    pub fn ulp(x: f64) -> Self {
        Iv {
            lo: x.next_down(),
            hi: x.next_up(),
        }
    }

    pub const ZERO: Iv = Iv { lo: 0.0, hi: 0.0 };

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersects(self, other: Iv) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// True when `self` lies entirely inside the open interval `(a, b)`.
    pub fn inside_open(self, a: f64, b: f64) -> bool {
        a < self.lo && self.hi < b
    }

    pub fn hull(self, other: Iv) -> Iv {
        Iv {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(self, other: Iv) -> Iv {
        Iv {
            lo: (self.lo + other.lo).next_down(),
            hi: (self.hi + other.hi).next_up(),
        }
    }

    pub fn sub(self, other: Iv) -> Iv {
        Iv {
            lo: (self.lo - other.hi).next_down(),
            hi: (self.hi - other.lo).next_up(),
        }
    }

    /// Product of two nonnegative intervals. Masses and transition weights
    /// are nonnegative throughout the crate, so the general sign analysis is
    /// not needed; the debug assertion documents the contract.
    pub fn mul_nonneg(self, other: Iv) -> Iv {
        debug_assert!(self.lo >= 0.0 && other.lo >= 0.0);
        Iv {
            lo: (self.lo * other.lo).next_down().max(0.0),
            hi: (self.hi * other.hi).next_up(),
        }
    }

    /// General outward-rounded product (all sign combinations).
    pub fn mul(self, other: Iv) -> Iv {
        let corners = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Iv {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    pub fn shift(self, x: f64) -> Iv {
        Iv {
            lo: (self.lo + x).next_down(),
            hi: (self.hi + x).next_up(),
        }
    }

    /// Widen by `eps` on both sides.
    pub fn inflate(self, eps: f64) -> Iv {
        debug_assert!(eps >= 0.0);
        Iv {
            lo: self.lo - eps,
            hi: self.hi + eps,
        }
    }

    /// Clamp to `[lo_bound, hi_bound]`, used to keep masses in `[0, 1]`-type
    /// ranges without invalidating the enclosure.
    pub fn clamp_to(self, lo_bound: f64, hi_bound: f64) -> Iv {
        Iv {
            lo: self.lo.max(lo_bound),
            hi: self.hi.min(hi_bound).max(self.lo.max(lo_bound)),
        }
    }
}

/// Outward-rounded sum of a slice of intervals.
pub fn sum(ivs: impl IntoIterator<Item = Iv>) -> Iv {
    let mut acc = Iv::ZERO;
    for iv in ivs {
        acc = acc.add(iv);
    }
    acc
}
