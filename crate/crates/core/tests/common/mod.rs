//! Test-side oracles. Nothing here calls into the library's center code.
#![allow(dead_code)]

use std::collections::VecDeque;

use jordan_core::growth::GrowthEvent;

/// Plain adjacency-list tree.
#[derive(Clone, Debug, Default)]
pub struct Adj {
    pub nbrs: Vec<Vec<usize>>,
}

impl Adj {
    pub fn single() -> Self {
        Self { nbrs: vec![Vec::new()] }
    }

    pub fn from_parents(parents: &[usize]) -> Self {
        let mut t = Self::single();
        for &p in parents {
            t.push(p);
        }
        t
    }

    pub fn push(&mut self, parent: usize) -> usize {
        let id = self.nbrs.len();
        self.nbrs.push(vec![parent]);
        self.nbrs[parent].push(id);
        id
    }

    pub fn apply(&mut self, e: &GrowthEvent) {
        assert_eq!(e.child.index(), self.nbrs.len(), "events out of order");
        self.push(e.parent.index());
    }

    pub fn len(&self) -> usize {
        self.nbrs.len()
    }

    /// Distances from `s`, optionally not crossing `blocked`.
    pub fn bfs(&self, s: usize, blocked: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let du = dist[u].unwrap();
            for &v in &self.nbrs[u] {
                if Some(v) != blocked && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: usize) -> usize {
        self.bfs(v, None).into_iter().flatten().max().unwrap()
    }

    /// Centers and radius via the middle of a longest path.
    pub fn centers_two_sweep(&self) -> (Vec<usize>, usize) {
        let far = |s: usize| {
            let d = self.bfs(s, None);
            let (v, dv) = d
                .iter()
                .enumerate()
                .map(|(i, x)| (i, x.unwrap()))
                .max_by_key(|&(i, x)| (x, std::cmp::Reverse(i)))
                .unwrap();
            (v, dv, d)
        };
        let (a, _, _) = far(0);
        let (b, diam, from_a) = far(a);
        let from_b = self.bfs(b, None);
        let mut c: Vec<usize> = (0..self.len())
            .filter(|&v| {
                let (x, y) = (from_a[v].unwrap(), from_b[v].unwrap());
                x + y == diam && x.max(y) == diam.div_ceil(2)
            })
            .collect();
        c.sort();
        (c, diam.div_ceil(2))
    }

    /// Centers by eccentricity of every vertex.
    pub fn centers_brute(&self) -> (Vec<usize>, usize) {
        let ecc: Vec<usize> = (0..self.len()).map(|v| self.eccentricity(v)).collect();
        let psi = *ecc.iter().min().unwrap();
        ((0..self.len()).filter(|&v| ecc[v] == psi).collect(), psi)
    }

    /// Centroids by largest neighbor component of every vertex.
    pub fn centroids_brute(&self) -> (Vec<usize>, usize) {
        let score = |v: usize| {
            self.nbrs[v]
                .iter()
                .map(|&u| self.bfs(u, Some(v)).iter().flatten().count())
                .max()
                .unwrap_or(0)
        };
        let scores: Vec<usize> = (0..self.len()).map(score).collect();
        let best = *scores.iter().min().unwrap();
        ((0..self.len()).filter(|&v| scores[v] == best).collect(), best)
    }

    /// `(neighbor, depth)` of each neighbor's component, deepest first.
    pub fn branch_depths(&self, v: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.nbrs[v]
            .iter()
            .map(|&u| (u, self.bfs(u, Some(v)).into_iter().flatten().max().unwrap()))
            .collect();
        out.sort_by_key(|&(u, d)| (std::cmp::Reverse(d), u));
        out
    }

    pub fn depth(&self, v: usize) -> usize {
        self.bfs(0, None)[v].unwrap()
    }
}

/// Replays events and hands out the tree as it was after `n` nodes.
pub struct Replay<'a> {
    pub tree: Adj,
    events: &'a [GrowthEvent],
    used: usize,
}

impl<'a> Replay<'a> {
    pub fn new(events: &'a [GrowthEvent]) -> Self {
        Self { tree: Adj::single(), events, used: 0 }
    }

    pub fn advance_to(&mut self, n_nodes: usize) -> &Adj {
        while self.tree.len() < n_nodes {
            self.tree.apply(&self.events[self.used]);
            self.used += 1;
        }
        assert_eq!(self.tree.len(), n_nodes);
        &self.tree
    }
}

/// Smallest fixed point of `(1 - p + p s)^d` by plain iteration from zero.
pub fn extinction_by_iteration(p: f64, d: i32) -> f64 {
    let mut q = 0.0;
    for _ in 0..100_000 {
        let next = (1.0 - p + p * q).powi(d);
        if (next - q).abs() < 1e-15 {
            return next;
        }
        q = next;
    }
    q
}

/// Root of `a e^{-a} = 1 / (d e)` on (0, 1) by iterating `a = e^a / (d e)`.
pub fn gamma_by_iteration(d: u32) -> f64 {
    let c = 1.0 / (f64::from(d) * std::f64::consts::E);
    let mut a = c;
    for _ in 0..10_000 {
        a = c * a.exp();
    }
    a
}

/// `inf_theta e^{theta a} d / (1 + theta)` by dense scan then ternary refinement.
pub fn infimum_by_search(a: f64, d: u32) -> f64 {
    let f = |t: f64| (t * a).exp() * f64::from(d) / (1.0 + t);
    let hi = 2.0 / a + 2.0;
    let steps = 20_000;
    let (mut best, mut arg) = (f(0.0), 0.0);
    for i in 1..=steps {
        let t = hi * i as f64 / steps as f64;
        if f(t) < best {
            best = f(t);
            arg = t;
        }
    }
    let h = hi / steps as f64;
    let (mut lo, mut up) = ((arg - h).max(0.0), arg + h);
    for _ in 0..200 {
        let m1 = lo + (up - lo) / 3.0;
        let m2 = up - (up - lo) / 3.0;
        if f(m1) < f(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    best.min(f(0.5 * (lo + up)))
}
