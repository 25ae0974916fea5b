//! Continuous, nondecreasing piecewise-linear functions on `[0, ∞)`.
//!
//! A series-parallel component's response (the head label rate it produces
//! for a given inflow when its tail label rate is 1) is such a function.

use crate::rat::Rat;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pwl {
    /// Breakpoints `(y, g(y))`, strictly increasing in `y`, first at `y = 0`.
    pts: Vec<(Rat, Rat)>,
    /// Slope beyond the last breakpoint; positive for every response function.
    tail: Rat,
}

impl Pwl {
    /// `g(y) = y / capacity` (resetting arc).
    pub fn resetting(capacity: &Rat) -> Self {
        Self {
            pts: vec![(Rat::zero(), Rat::zero())],
            tail: capacity.recip(),
        }
    }

    /// `g(y) = max(1, y / capacity)` (non-resetting arc).
    pub fn free(capacity: &Rat) -> Self {
        Self {
            pts: vec![(Rat::zero(), Rat::one()), (capacity.clone(), Rat::one())],
            tail: capacity.recip(),
        }
    }

    pub fn at_zero(&self) -> &Rat {
        &self.pts[0].1
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = &(Rat, Rat)> {
        self.pts.iter()
    }

    pub fn eval(&self, y: &Rat) -> Rat {
        let i = self.pts.partition_point(|(x, _)| x <= y);
        let (x0, l0) = &self.pts[i - 1];
        let slope = match self.pts.get(i) {
            Some((x1, l1)) => (l1 - l0) / (x1 - x0),
            None => self.tail.clone(),
        };
        l0 + slope * (y - x0)
    }

    /// Perspective `c·g(y/c)`: the head label rate when the tail label rate is `c`.
    pub fn respond(&self, c: &Rat, y: &Rat) -> Rat {
        if c.is_zero() {
            y * &self.tail
        } else {
            c * self.eval(&(y / c))
        }
    }

    /// Least `y` with `g(y) >= level`.
    pub fn lo(&self, level: &Rat) -> Rat {
        if self.at_zero() >= level {
            return Rat::zero();
        }
        for w in self.pts.windows(2) {
            let ((x0, l0), (x1, l1)) = (&w[0], &w[1]);
            if l1 >= level {
                return x0 + (level - l0) * (x1 - x0) / (l1 - l0);
            }
        }
        let (xn, ln) = self.pts.last().unwrap();
        xn + (level - ln) / &self.tail
    }

    /// Greatest `y` with `g(y) <= level`, or 0 when `g(0) > level`.
    pub fn hi(&self, level: &Rat) -> Rat {
        if self.at_zero() > level {
            return Rat::zero();
        }
        let (xn, ln) = self.pts.last().unwrap();
        if level >= ln {
            return xn + (level - ln) / &self.tail;
        }
        for i in (0..self.pts.len() - 1).rev() {
            let ((x0, l0), (x1, l1)) = (&self.pts[i], &self.pts[i + 1]);
            if l0 <= level {
                return x0 + (level - l0) * (x1 - x0) / (l1 - l0);
            }
        }
        unreachable!("g(0) <= level was checked")
    }

    /// Builds the function from its values at a superset of its breakpoints
    /// (`xs`, containing 0); it must be linear beyond the largest sample.
    fn from_samples(mut xs: Vec<Rat>, f: impl Fn(&Rat) -> Rat) -> Self {
        xs.sort();
        xs.dedup();
        debug_assert!(xs[0].is_zero());
        let last = xs.last().unwrap().clone();
        let beyond = &last + Rat::one();
        let tail = f(&beyond) - f(&last);
        let mut pts: Vec<(Rat, Rat)> = Vec::with_capacity(xs.len());
        for x in xs {
            let l = f(&x);
            pts.push((x, l));
        }
        let mut out = Self { pts, tail };
        out.simplify();
        out
    }

    /// Drops breakpoints where the slope does not change.
    fn simplify(&mut self) {
        if self.pts.len() < 2 {
            return;
        }
        let mut kept: Vec<(Rat, Rat)> = vec![self.pts[0].clone()];
        for i in 1..self.pts.len() {
            let (x, l) = &self.pts[i];
            let slope_in = {
                let (xp, lp) = kept.last().unwrap();
                (l - lp) / (x - xp)
            };
            let slope_out = match self.pts.get(i + 1) {
                Some((x1, l1)) => (l1 - l) / (x1 - x),
                None => self.tail.clone(),
            };
            if slope_in != slope_out {
                kept.push(self.pts[i].clone());
            }
        }
        self.pts = kept;
    }

    /// Series composition: flow passes through `first` then `second`.
    pub fn series(first: &Pwl, second: &Pwl) -> Pwl {
        let mut xs: Vec<Rat> = first.pts.iter().map(|(x, _)| x.clone()).collect();
        let inner: Vec<&Rat> = second
            .pts
            .iter()
            .map(|(w, _)| w)
            .filter(|w| !w.is_zero())
            .collect();
        for i in 0..first.pts.len() {
            let (x0, l0) = &first.pts[i];
            let (slope, end) = match first.pts.get(i + 1) {
                Some((x1, l1)) => ((l1 - l0) / (x1 - x0), Some(x1)),
                None => (first.tail.clone(), None),
            };
            let intercept = l0 - &slope * x0;
            // y / (intercept + slope*y) = w  →  y = w*intercept / (1 - w*slope)
            for w in &inner {
                let den = Rat::one() - *w * &slope;
                if den.is_zero() {
                    continue;
                }
                let y = *w * &intercept / den;
                if &y >= x0 && end.is_none_or(|e| &y <= e) {
                    xs.push(y);
                }
            }
        }
        Pwl::from_samples(xs, |y| {
            let mid = first.eval(y);
            if mid.is_zero() {
                Rat::zero()
            } else {
                &mid * second.eval(&(y / &mid))
            }
        })
    }

    /// Parallel composition: the inflow splits so that every used branch
    /// reaches the common head label rate and unused branches would exceed it.
    pub fn parallel(branches: &[&Pwl]) -> Pwl {
        let base = branches.iter().map(|g| g.at_zero()).min().unwrap().clone();
        let mut levels: Vec<Rat> = branches
            .iter()
            .flat_map(|g| g.pts.iter().map(|(_, l)| l.clone()))
            .filter(|l| l >= &base)
            .collect();
        levels.sort();
        levels.dedup();
        let total_lo = |l: &Rat| -> Rat { branches.iter().map(|g| g.lo(l)).sum() };
        let total_hi = |l: &Rat| -> Rat { branches.iter().map(|g| g.hi(l)).sum() };
        let mut pts: Vec<(Rat, Rat)> = Vec::new();
        for l in &levels {
            let lo = total_lo(l);
            let hi = total_hi(l);
            if pts.last().is_none_or(|(x, _)| *x < lo) {
                pts.push((lo, l.clone()));
            }
            if hi > pts.last().unwrap().0 {
                pts.push((hi, l.clone()));
            }
        }
        let (xn, ln) = pts.last().unwrap().clone();
        let above = &ln + Rat::one();
        let tail = Rat::one() / (total_lo(&above) - xn);
        let mut out = Pwl { pts, tail };
        out.simplify();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    #[test]
    fn arc_responses() {
        let g = Pwl::free(&frac(3, 4));
        assert_eq!(g.eval(&int(0)), int(1));
        assert_eq!(g.eval(&int(1)), frac(4, 3));
        assert_eq!(g.lo(&int(1)), int(0));
        assert_eq!(g.hi(&int(1)), frac(3, 4));
        assert_eq!(g.lo(&int(2)), frac(3, 2));
        let r = Pwl::resetting(&frac(1, 3));
        assert_eq!(r.eval(&frac(1, 2)), frac(3, 2));
        assert_eq!(r.respond(&int(7), &frac(1, 2)), frac(3, 2));
    }

    #[test]
    fn series_of_free_arcs_is_bottleneck_max() {
        // f (3/4) then g (1/3), both free: max(1, y/(3/4), y/(1/3))
        let g = Pwl::series(&Pwl::free(&frac(3, 4)), &Pwl::free(&frac(1, 3)));
        for y in [int(0), frac(1, 5), frac(1, 3), int(1), int(5)] {
            let expect = [int(1), &y / frac(3, 4), &y / frac(1, 3)]
                .into_iter()
                .max()
                .unwrap();
            assert_eq!(g.eval(&y), expect, "y = {y}");
        }
    }

    #[test]
    fn parallel_splits_evenly_at_common_level() {
        let a = Pwl::free(&int(1));
        let b = Pwl::resetting(&int(1));
        let g = Pwl::parallel(&[&a, &b]);
        // inflow 1: resetting branch alone reaches 1 at y=1, free one accepts [0,1]
        assert_eq!(g.eval(&int(0)), int(0));
        assert_eq!(g.eval(&int(1)), int(1));
        assert_eq!(g.eval(&int(2)), int(1));
        assert_eq!(g.eval(&int(4)), int(2));
    }

    #[test]
    fn lo_hi_are_inverse_of_eval() {
        let g = Pwl::parallel(&[&Pwl::free(&frac(1, 3)), &Pwl::free(&frac(2, 3))]);
        for l in [int(1), frac(3, 2), int(4)] {
            assert_eq!(g.eval(&g.hi(&l)), l);
            assert_eq!(g.eval(&g.lo(&l)), l);
        }
    }
}
