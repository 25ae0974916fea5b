//! Thin flows by depth-first search over per-arc tightness patterns.
//!
//! A non-resetting arc `e = vw` is in exactly one of three states:
//! `Idle` (`x′ = 0`, `ℓ′_w ≤ ℓ′_v`), `Bound` (`x′ = ν·ℓ′_w`, `ℓ′_w ≥ ℓ′_v`)
//! or `Free` (`ℓ′_w = ℓ′_v`, `0 ≤ x′ ≤ ν·ℓ′_w`). A resetting arc always has
//! `x′ = ν·ℓ′_w`. Unassigned arcs are relaxed to `0 ≤ x′ ≤ ν·ℓ′_w`, which
//! contains all three states, so an infeasible relaxation prunes the subtree.

use super::{NtfrError, Order, ThinArc, ThinFlowProblem};
use crate::rat::Rat;
use crate::simplex::{Lp, LpOutcome, Rel};
use num_traits::{One, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Bound,
    Free,
    Idle,
}

struct Search<'a> {
    prob: &'a ThinFlowProblem,
    /// LP column of each node's label; `None` for the source (fixed to 1).
    label_var: Vec<Option<usize>>,
    num_vars: usize,
    branch: Vec<usize>,
    states: Vec<Option<State>>,
}

pub(super) fn solve(prob: &ThinFlowProblem, order: Order) -> Result<(Vec<Rat>, Vec<Rat>), NtfrError> {
    let members = prob.members();
    let mut label_var = vec![None; prob.num_nodes()];
    let mut next = prob.arcs.len();
    for v in 0..prob.num_nodes() {
        if members[v] && v != prob.source {
            label_var[v] = Some(next);
            next += 1;
        }
    }
    let mut branch: Vec<usize> = (0..prob.arcs.len()).filter(|&k| !prob.arcs[k].resetting).collect();
    if order == Order::Reverse {
        branch.reverse();
    }
    let mut search = Search {
        prob,
        label_var,
        num_vars: next,
        branch,
        states: vec![None; prob.arcs.len()],
    };
    let x = search.descend(0).ok_or(NtfrError::NotFound)?;
    let mut labels = vec![Rat::zero(); prob.num_nodes()];
    for v in 0..prob.num_nodes() {
        labels[v] = match search.label_var[v] {
            Some(j) => x[j].clone(),
            None if v == prob.source => Rat::one(),
            None => Rat::zero(),
        };
    }
    let mut flows = vec![Rat::zero(); prob.arc_names.len()];
    for (k, a) in prob.arcs.iter().enumerate() {
        flows[a.index] = x[k].clone();
    }
    Ok((labels, flows))
}

/// Linear form `Σ coeff·var + constant`.
struct Affine {
    terms: Vec<(usize, Rat)>,
    constant: Rat,
}

impl Affine {
    fn add_label(&mut self, s: &Search, v: usize, coeff: Rat) {
        match s.label_var[v] {
            Some(j) => self.terms.push((j, coeff)),
            None => self.constant += coeff,
        }
    }
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) -> Option<Vec<Rat>> {
        if self.dead_node() {
            return None;
        }
        let x = self.feasible()?;
        if depth == self.branch.len() {
            return Some(x);
        }
        let k = self.branch[depth];
        for st in [State::Bound, State::Free, State::Idle] {
            self.states[k] = Some(st);
            if let Some(x) = self.descend(depth + 1) {
                return Some(x);
            }
        }
        self.states[k] = None;
        None
    }

    /// Some non-source node has every entering arc idle, so no entering arc
    /// can attain its label.
    fn dead_node(&self) -> bool {
        let mut live = vec![false; self.prob.num_nodes()];
        let mut seen = vec![false; self.prob.num_nodes()];
        for (k, a) in self.prob.arcs.iter().enumerate() {
            seen[a.head] = true;
            if self.states[k] != Some(State::Idle) {
                live[a.head] = true;
            }
        }
        (0..live.len()).any(|v| seen[v] && !live[v])
    }

    fn constrain(&self, lp: &mut Lp, form: Affine, rel: Rel) {
        lp.add(form.terms, rel, -form.constant);
    }

    /// `x_k - ν·ℓ′_head`.
    fn slack(&self, k: usize, a: &ThinArc) -> Affine {
        let mut f = Affine {
            terms: vec![(k, Rat::one())],
            constant: Rat::zero(),
        };
        f.add_label(self, a.head, -a.capacity.clone());
        f
    }

    /// `ℓ′_head - ℓ′_tail`.
    fn rise(&self, a: &ThinArc) -> Affine {
        let mut f = Affine {
            terms: Vec::new(),
            constant: Rat::zero(),
        };
        f.add_label(self, a.head, Rat::one());
        f.add_label(self, a.tail, -Rat::one());
        f
    }

    fn feasible(&self) -> Option<Vec<Rat>> {
        let prob = self.prob;
        let mut lp = Lp::new(self.num_vars);
        let mut balance: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); prob.num_nodes()];
        for (k, a) in prob.arcs.iter().enumerate() {
            balance[a.head].push((k, Rat::one()));
            balance[a.tail].push((k, -Rat::one()));
        }
        for (v, terms) in balance.into_iter().enumerate() {
            if terms.is_empty() || v == prob.sink {
                continue;
            }
            let rhs = if v == prob.source {
                -prob.inflow.clone()
            } else {
                Rat::zero()
            };
            lp.add(terms, Rel::Eq, rhs);
        }
        for (k, a) in prob.arcs.iter().enumerate() {
            if a.resetting {
                self.constrain(&mut lp, self.slack(k, a), Rel::Eq);
                continue;
            }
            match self.states[k] {
                None => self.constrain(&mut lp, self.slack(k, a), Rel::Le),
                Some(State::Idle) => {
                    lp.add(vec![(k, Rat::one())], Rel::Eq, Rat::zero());
                    self.constrain(&mut lp, self.rise(a), Rel::Le);
                }
                Some(State::Bound) => {
                    self.constrain(&mut lp, self.slack(k, a), Rel::Eq);
                    self.constrain(&mut lp, self.rise(a), Rel::Ge);
                }
                Some(State::Free) => {
                    self.constrain(&mut lp, self.slack(k, a), Rel::Le);
                    self.constrain(&mut lp, self.rise(a), Rel::Eq);
                }
            }
        }
        match lp.solve() {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}
