//! Edmonds–Karp maximum flow over exact rationals.

use crate::rat::Rat;
use num_traits::Zero;
use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: Rat,
    rev: usize,
}

/// Residual network. Edges are added in pairs; `add_edge` returns a handle for
/// reading the flow back.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
    handles: Vec<(usize, usize, Rat)>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            handles: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: Rat) -> usize {
        let i = self.adj[from].len();
        let j = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Edge {
            to,
            cap: cap.clone(),
            rev: j,
        });
        self.adj[to].push(Edge {
            to: from,
            cap: Rat::zero(),
            rev: i,
        });
        self.handles.push((from, i, cap));
        self.handles.len() - 1
    }

    pub fn flow(&self, handle: usize) -> Rat {
        let (from, i, ref cap) = self.handles[handle];
        cap - &self.adj[from][i].cap
    }

    /// Augments from `s` to `t` along BFS-shortest paths until no augmenting
    /// path remains or `limit` units have been pushed.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: Option<&Rat>) -> Rat {
        let mut total = Rat::zero();
        if s == t {
            return total;
        }
        loop {
            if let Some(l) = limit {
                if &total >= l {
                    break;
                }
            }
            let Some(path) = self.bfs_path(s, t) else {
                break;
            };
            let mut push = path
                .iter()
                .map(|&(u, i)| self.adj[u][i].cap.clone())
                .min()
                .expect("nonempty path");
            if let Some(l) = limit {
                let rest = l - &total;
                if rest < push {
                    push = rest;
                }
            }
            for &(u, i) in &path {
                self.adj[u][i].cap -= &push;
                let (to, rev) = (self.adj[u][i].to, self.adj[u][i].rev);
                self.adj[to][rev].cap += &push;
            }
            total += push;
        }
        total
    }

    fn bfs_path(&self, s: usize, t: usize) -> Option<Vec<(usize, usize)>> {
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (i, e) in self.adj[u].iter().enumerate() {
                if !seen[e.to] && e.cap > Rat::zero() {
                    seen[e.to] = true;
                    prev[e.to] = Some((u, i));
                    if e.to == t {
                        let mut path = Vec::new();
                        let mut v = t;
                        while let Some((u, i)) = prev[v] {
                            path.push((u, i));
                            v = u;
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(e.to);
                }
            }
        }
        None
    }

    /// Nodes reachable from `s` through edges with positive residual capacity.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for e in &self.adj[u] {
                if !seen[e.to] && e.cap > Rat::zero() {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    #[test]
    fn diamond() {
        let mut g = FlowNetwork::new(4);
        let a = g.add_edge(0, 1, int(3));
        g.add_edge(0, 2, frac(5, 2));
        g.add_edge(1, 3, int(2));
        g.add_edge(2, 3, int(4));
        g.add_edge(1, 2, int(1));
        assert_eq!(g.max_flow(0, 3, None), frac(11, 2));
        assert_eq!(g.flow(a), int(3));
        let cut = g.residual_reachable(0);
        assert_eq!(cut, vec![true, false, false, false]);
    }

    #[test]
    fn respects_limit() {
        let mut g = FlowNetwork::new(2);
        g.add_edge(0, 1, int(5));
        assert_eq!(g.max_flow(0, 1, Some(&frac(3, 2))), frac(3, 2));
    }
}
