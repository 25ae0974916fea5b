//! Thin flows on series-parallel subnetworks via response-function composition.

use super::{Pwl, ThinFlowProblem};
use crate::rat::Rat;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

enum Shape {
    Arc(usize),
    Series(Box<Component>, usize, Box<Component>),
    Parallel(Vec<Component>),
}

struct Component {
    shape: Shape,
    response: Pwl,
    tail: usize,
    head: usize,
    /// Smallest instance arc index inside; orders parallel branches.
    key: usize,
}

/// Returns `(ℓ′, x′)` indexed by instance node and arc, or `None` when the
/// subnetwork does not reduce to a single series-parallel component.
pub(super) fn solve(prob: &ThinFlowProblem) -> Option<(Vec<Rat>, Vec<Rat>)> {
    let top = decompose(prob)?;
    let mut labels = vec![Rat::zero(); prob.num_nodes()];
    let mut flows = vec![Rat::zero(); prob.arc_names.len()];
    labels[prob.source] = Rat::one();
    labels[prob.sink] = top.response.eval(&prob.inflow);
    assign(&top, &Rat::one(), &prob.inflow, &mut labels, &mut flows);
    Some((labels, flows))
}

fn decompose(prob: &ThinFlowProblem) -> Option<Component> {
    let mut comps: Vec<Component> = prob
        .arcs
        .iter()
        .map(|a| Component {
            response: if a.resetting {
                Pwl::resetting(&a.capacity)
            } else {
                Pwl::free(&a.capacity)
            },
            shape: Shape::Arc(a.index),
            tail: a.tail,
            head: a.head,
            key: a.index,
        })
        .collect();
    loop {
        let mut groups: BTreeMap<(usize, usize), Vec<Component>> = BTreeMap::new();
        for c in comps.drain(..) {
            groups.entry((c.tail, c.head)).or_default().push(c);
        }
        for ((tail, head), mut group) in groups {
            if group.len() == 1 {
                comps.push(group.pop().unwrap());
                continue;
            }
            group.sort_by_key(|c| c.key);
            let response = Pwl::parallel(&group.iter().map(|c| &c.response).collect::<Vec<_>>());
            comps.push(Component {
                response,
                key: group[0].key,
                shape: Shape::Parallel(group),
                tail,
                head,
            });
        }
        let Some(mid) = series_node(prob, &comps) else {
            break;
        };
        let i = comps.iter().position(|c| c.head == mid).unwrap();
        let first = comps.swap_remove(i);
        let j = comps.iter().position(|c| c.tail == mid).unwrap();
        let second = comps.swap_remove(j);
        comps.push(Component {
            response: Pwl::series(&first.response, &second.response),
            key: first.key.min(second.key),
            tail: first.tail,
            head: second.head,
            shape: Shape::Series(Box::new(first), mid, Box::new(second)),
        });
    }
    match comps.len() {
        1 if comps[0].tail == prob.source && comps[0].head == prob.sink => comps.pop(),
        _ => None,
    }
}

/// An inner node with exactly one component entering and one leaving.
fn series_node(prob: &ThinFlowProblem, comps: &[Component]) -> Option<usize> {
    let n = prob.num_nodes();
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    for c in comps {
        outdeg[c.tail] += 1;
        indeg[c.head] += 1;
    }
    (0..n).find(|&v| v != prob.source && v != prob.sink && indeg[v] == 1 && outdeg[v] == 1)
}

/// Pushes inflow `y` through `comp` whose tail label rate is `c`.
fn assign(comp: &Component, c: &Rat, y: &Rat, labels: &mut [Rat], flows: &mut [Rat]) {
    match &comp.shape {
        Shape::Arc(i) => flows[*i] = y.clone(),
        Shape::Series(first, mid, second) => {
            let m = first.response.respond(c, y);
            labels[*mid] = m.clone();
            assign(first, c, y, labels, flows);
            assign(second, &m, y, labels, flows);
        }
        Shape::Parallel(branches) => {
            if c.is_zero() {
                for b in branches {
                    assign(b, c, &Rat::zero(), labels, flows);
                }
                return;
            }
            let level = comp.response.eval(&(y / c));
            let bounds: Vec<(Rat, Rat)> = branches
                .iter()
                .map(|b| (c * b.response.lo(&level), c * b.response.hi(&level)))
                .collect();
            let mut rest = y - bounds.iter().map(|(lo, _)| lo).sum::<Rat>();
            for (b, (lo, hi)) in branches.iter().zip(bounds) {
                let room = &hi - &lo;
                let take = if rest < room { rest.clone() } else { room };
                rest -= &take;
                assign(b, c, &(lo + take), labels, flows);
            }
            debug_assert!(rest.is_zero());
        }
    }
}
