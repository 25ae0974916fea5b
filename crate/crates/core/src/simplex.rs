//! Small dense two-phase simplex over exact rationals (Bland's rule).
//!
//! Used for feasibility subproblems of the thin-flow enumeration and as an
//! independent LP route in tests. Sizes here are tens of variables.

use crate::rat::Rat;
use num_traits::{One, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rat)>,
    pub rel: Rel,
    pub rhs: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rat>, value: Rat },
    Infeasible,
    Unbounded,
}

/// `min objective·x` subject to `constraints`, `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub num_vars: usize,
    pub objective: Vec<Rat>,
    pub constraints: Vec<Constraint>,
}

impl Lp {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![Rat::zero(); num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, Rat)>, rel: Rel, rhs: Rat) {
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    rows: Vec<Vec<Rat>>, // each row: coefficients then rhs
    basis: Vec<usize>,
    num_vars: usize,
    first_art: usize,
    width: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let m = lp.constraints.len();
        let slacks = lp.constraints.iter().filter(|c| c.rel != Rel::Eq).count();
        let n = lp.num_vars;
        let first_art = n + slacks;
        let width = first_art + m;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut row = vec![Rat::zero(); width + 1];
            for (j, a) in &c.coeffs {
                row[*j] += a;
            }
            row[width] = c.rhs.clone();
            match c.rel {
                Rel::Le => {
                    row[slack] = Rat::one();
                    slack += 1;
                }
                Rel::Ge => {
                    row[slack] = -Rat::one();
                    slack += 1;
                }
                Rel::Eq => {}
            }
            if row[width] < Rat::zero() {
                for v in row.iter_mut() {
                    *v = -v.clone();
                }
            }
            row[first_art + i] = Rat::one();
            basis.push(first_art + i);
            rows.push(row);
        }
        Tableau {
            rows,
            basis,
            num_vars: n,
            first_art,
            width,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` over columns `< limit`; returns false if unbounded.
    fn optimize(&mut self, cost: &[Rat], limit: usize) -> bool {
        loop {
            // reduced cost d_j = c_j - c_B B^-1 A_j
            let mut entering = None;
            for j in 0..limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j].clone();
                for (i, row) in self.rows.iter().enumerate() {
                    if !row[j].is_zero() {
                        d -= &cost[self.basis[i]] * &row[j];
                    }
                }
                if d < Rat::zero() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                return true;
            };
            let mut leave: Option<(usize, Rat)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > Rat::zero() {
                    let ratio = &row[self.width] / &row[c];
                    let better = match &leave {
                        None => true,
                        Some((k, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }

    fn run(mut self, objective: &[Rat]) -> LpOutcome {
        let mut phase1 = vec![Rat::zero(); self.width];
        for c in phase1.iter_mut().skip(self.first_art) {
            *c = Rat::one();
        }
        self.optimize(&phase1, self.width);
        let infeas: Rat = self
            .rows
            .iter()
            .zip(&self.basis)
            .filter(|(_, &b)| b >= self.first_art)
            .map(|(row, _)| row[self.width].clone())
            .sum();
        if infeas > Rat::zero() {
            return LpOutcome::Infeasible;
        }
        // drive remaining (zero-valued) artificials out of the basis
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.first_art {
                if let Some(c) = (0..self.first_art).find(|&c| !self.rows[r][c].is_zero()) {
                    self.pivot(r, c);
                    r += 1;
                } else {
                    self.rows.remove(r);
                    self.basis.remove(r);
                }
            } else {
                r += 1;
            }
        }
        let mut cost = vec![Rat::zero(); self.width];
        cost[..self.num_vars].clone_from_slice(objective);
        if !self.optimize(&cost, self.first_art) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![Rat::zero(); self.num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.num_vars {
                x[b] = self.rows[i][self.width].clone();
            }
        }
        let value = x.iter().zip(objective).map(|(a, c)| a * c).sum();
        LpOutcome::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    #[test]
    fn textbook_max() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 → (2, 6), 36
        let mut lp = Lp::new(2);
        lp.objective = vec![int(-3), int(-5)];
        lp.add(vec![(0, int(1))], Rel::Le, int(4));
        lp.add(vec![(1, int(2))], Rel::Le, int(12));
        lp.add(vec![(0, int(3)), (1, int(2))], Rel::Le, int(18));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![int(2), int(6)]);
                assert_eq!(value, int(-36));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn equality_and_infeasible() {
        let mut lp = Lp::new(2);
        lp.add(vec![(0, int(1)), (1, int(1))], Rel::Eq, frac(1, 2));
        lp.add(vec![(0, int(1))], Rel::Ge, int(1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = Lp::new(1);
        lp.objective = vec![int(-1)];
        lp.add(vec![(0, int(1))], Rel::Ge, int(1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = Lp::new(2);
        lp.objective = vec![int(1), int(2)];
        lp.add(vec![(0, int(1)), (1, int(1))], Rel::Eq, int(1));
        lp.add(vec![(0, int(2)), (1, int(2))], Rel::Eq, int(2));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![int(1), int(0)]);
                assert_eq!(value, int(1));
            }
            o => panic!("{o:?}"),
        }
    }
}
