//! Finite unions of real intervals, used as spectral sets.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        let above = if self.lo == f64::NEG_INFINITY {
            true
        } else if self.lo_closed {
            x >= self.lo - tol
        } else {
            x > self.lo + tol
        };
        let below = if self.hi == f64::INFINITY {
            true
        } else if self.hi_closed {
            x <= self.hi + tol
        } else {
            x < self.hi - tol
        };
        above && below
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    /// Gap between two intervals, zero when they touch or overlap.
    pub fn dist(&self, other: &Interval) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }
}

/// A finite union of intervals with open or closed ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealSet {
    pub parts: Vec<Interval>,
}

impl RealSet {
    pub fn empty() -> Self {
        RealSet { parts: vec![] }
    }

    pub fn all() -> Self {
        Self::closed(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn interval(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        let iv = Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        };
        if iv.is_empty() {
            Self::empty()
        } else {
            RealSet { parts: vec![iv] }
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::interval(lo, hi, true, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::interval(lo, hi, false, false)
    }

    /// [lo, hi)
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self::interval(lo, hi, true, false)
    }

    /// (lo, hi]
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self::interval(lo, hi, false, true)
    }

    pub fn point(a: f64) -> Self {
        Self::closed(a, a)
    }

    pub fn union(&self, other: &RealSet) -> Self {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        RealSet { parts }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x, tol))
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// dist(S1, S2) = inf |x − y|.
    pub fn dist(&self, other: &RealSet) -> f64 {
        let mut d = f64::INFINITY;
        for a in &self.parts {
            for b in &other.parts {
                d = d.min(a.dist(b));
            }
        }
        d
    }

    /// Complement in ℝ. Endpoints switch between open and closed.
    pub fn complement(&self) -> Self {
        let mut parts = self.parts.clone();
        parts.sort_by(|a, b| {
            a.lo.partial_cmp(&b.lo)
                .unwrap()
                .then(b.lo_closed.cmp(&a.lo_closed))
        });
        // merge overlapping pieces first
        let mut merged: Vec<Interval> = Vec::new();
        for p in parts {
            if let Some(last) = merged.last_mut() {
                let touches = p.lo < last.hi
                    || (p.lo == last.hi && (p.lo_closed || last.hi_closed));
                if touches {
                    if p.hi > last.hi || (p.hi == last.hi && p.hi_closed) {
                        last.hi = p.hi;
                        last.hi_closed = p.hi_closed;
                    }
                    continue;
                }
            }
            merged.push(p);
        }
        let mut out = Vec::new();
        let mut lo = f64::NEG_INFINITY;
        let mut lo_closed = true;
        for p in &merged {
            let piece = Interval {
                lo,
                hi: p.lo,
                lo_closed,
                hi_closed: !p.lo_closed,
            };
            if !piece.is_empty() && !(piece.lo == f64::NEG_INFINITY && piece.hi == f64::NEG_INFINITY) {
                out.push(piece);
            }
            lo = p.hi;
            lo_closed = !p.hi_closed;
        }
        if lo < f64::INFINITY {
            out.push(Interval {
                lo,
                hi: f64::INFINITY,
                lo_closed,
                hi_closed: true,
            });
        }
        RealSet { parts: out }
    }

    /// Smallest closed interval containing the set, when bounded.
    pub fn hull(&self) -> Option<(f64, f64)> {
        if self.parts.is_empty() {
            return None;
        }
        let lo = self.parts.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min);
        let hi = self.parts.iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi.is_finite() {
            Some((lo, hi))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_respects_open_ends() {
        let s = RealSet::closed_open(0.0, 1.0);
        assert!(s.contains(0.0, 0.0));
        assert!(!s.contains(1.0, 0.0));
        assert!(s.contains(1.0 - 1e-3, 1e-6));
    }

    #[test]
    fn complement_partitions_line() {
        let s = RealSet::closed(0.0, 1.0).union(&RealSet::open(2.0, 3.0));
        let c = s.complement();
        for &x in &[-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
            assert_ne!(s.contains(x, 0.0), c.contains(x, 0.0), "x = {x}");
        }
        assert!(RealSet::all().complement().is_empty());
        assert!(RealSet::empty().complement().contains(7.0, 0.0));
    }

    #[test]
    fn distance_between_sets() {
        let a = RealSet::closed(0.0, 1.0);
        let b = RealSet::closed(2.5, 3.0).union(&RealSet::point(-1.0));
        assert_eq!(a.dist(&b), 1.0);
        assert_eq!(a.dist(&RealSet::closed(0.5, 4.0)), 0.0);
        assert_eq!(a.hull(), Some((0.0, 1.0)));
    }
}
