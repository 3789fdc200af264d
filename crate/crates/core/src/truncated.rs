//! Independent cascade with the tree materialized only down to a cut depth.
//!
//! A 40-step cascade at p = 0.4, d = 4 reaches ~10^8 nodes, yet the Jordan
//! center stays within a few hops of the root. Nodes at the cut depth become
//! opaque: their descendants evolve as a Galton–Watson population that is
//! tracked only by its current generation count, total size and the last step
//! it grew. That is all the height-based center walk needs, and the walk
//! reports when it would have to look inside an opaque node.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::growth::{GrowthEvent, GrowthParams, Model, UnderlyingTreeSpec};
use crate::tree::{NodeId, TreeArena, TreeView};

#[derive(Clone, Debug)]
struct Cohort {
    node: NodeId,
    /// Nodes infected in the most recent step (they infect next step).
    active: u64,
    last_growth: u64,
    hidden: u64,
}

#[derive(Clone, Debug)]
pub struct TruncatedIc {
    arena: TreeArena,
    cut_depth: u32,
    p: f64,
    underlying: UnderlyingTreeSpec,
    step: u64,
    frontier: Vec<NodeId>,
    cohorts: Vec<Cohort>,
    hidden_total: u64,
    height: Vec<u32>,
    latest: Vec<f64>,
    size: Vec<u64>,
}

impl TruncatedIc {
    pub fn start<R: Rng + ?Sized>(params: &GrowthParams, cut_depth: u32, rng: &mut R) -> Result<Self> {
        params.validate()?;
        if params.model != Model::Ic {
            return Err(Error::arg("depth truncation is only defined for the IC model"));
        }
        if cut_depth == 0 {
            return Err(Error::arg("cut depth must be at least 1"));
        }
        let arena = TreeArena::with_root(Some(params.underlying.draw_root_children(rng)));
        let mut me = Self {
            arena,
            cut_depth,
            p: params.p,
            underlying: params.underlying.clone(),
            step: 0,
            frontier: vec![NodeId::ROOT],
            cohorts: Vec::new(),
            hidden_total: 0,
            height: Vec::new(),
            latest: Vec::new(),
            size: Vec::new(),
        };
        me.refresh();
        Ok(me)
    }

    /// View of a fully materialized IC tree observed after `step` steps.
    pub fn from_arena(tree: &TreeArena, cut_depth: u32, step: u64) -> Result<Self> {
        if cut_depth == 0 {
            return Err(Error::arg("cut depth must be at least 1"));
        }
        let mut arena = TreeArena::with_root(None);
        let mut cohorts = Vec::new();
        let mut hidden_total = 0;
        for v in tree.ids().skip(1) {
            if tree.depth(v) > cut_depth {
                // IC ids are level ordered, nothing shallower follows
                break;
            }
            let parent = tree.parent(v).expect("non-root");
            let id = arena.add_child(parent, tree.infected_at(v), None)?;
            debug_assert_eq!(id, v);
            if tree.depth(v) == cut_depth {
                let hidden = tree.subtree_size(v) - 1;
                let last_growth = tree.latest_in_subtree(v) as u64;
                let active = if last_growth == step {
                    count_at_depth(tree, v, (step as u32).saturating_sub(tree.depth(v)))
                } else {
                    0
                };
                hidden_total += hidden;
                cohorts.push(Cohort {
                    node: v,
                    active,
                    last_growth,
                    hidden,
                });
            }
        }
        let mut me = Self {
            arena,
            cut_depth,
            p: 0.0,
            underlying: UnderlyingTreeSpec::regular(2),
            step,
            frontier: Vec::new(),
            cohorts,
            hidden_total,
            height: Vec::new(),
            latest: Vec::new(),
            size: Vec::new(),
        };
        me.refresh();
        Ok(me)
    }

    pub fn cut_depth(&self) -> u32 {
        self.cut_depth
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn materialized(&self) -> &TreeArena {
        &self.arena
    }

    pub fn is_dead(&self) -> bool {
        self.frontier.is_empty() && self.cohorts.iter().all(|c| c.active == 0)
    }

    fn sum_capacity<R: Rng + ?Sized>(&self, nodes: u64, rng: &mut R) -> Result<u64> {
        Ok(match &self.underlying {
            UnderlyingTreeSpec::Regular { d } => nodes * u64::from(*d),
            UnderlyingTreeSpec::Irregular { degree_choices } => {
                let mut remaining = nodes;
                let mut total = 0;
                let k = degree_choices.len();
                for (i, &c) in degree_choices.iter().enumerate() {
                    let take = if i + 1 == k {
                        remaining
                    } else {
                        binomial(remaining, 1.0 / (k - i) as f64, rng)?
                    };
                    total += take * u64::from(c);
                    remaining -= take;
                }
                total
            }
        })
    }

    /// Advance one cascade step; returns the materialized infections only.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<GrowthEvent>> {
        self.step += 1;
        if self.is_dead() {
            return Ok(Vec::new());
        }
        let now = self.step as f64;

        for i in 0..self.cohorts.len() {
            let active = self.cohorts[i].active;
            if active == 0 {
                continue;
            }
            let capacity = self.sum_capacity(active, rng)?;
            let born = binomial(capacity, self.p, rng)?;
            let c = &mut self.cohorts[i];
            c.active = born;
            c.hidden += born;
            if born > 0 {
                c.last_growth = self.step;
            }
            self.hidden_total += born;
        }

        let mut events = Vec::new();
        let frontier = std::mem::take(&mut self.frontier);
        for u in frontier {
            let residual = self.arena.residual_degree(u).unwrap_or(0);
            let hits = binomial(u64::from(residual), self.p, rng)?;
            for _ in 0..hits {
                let child_depth = self.arena.depth(u) + 1;
                let capacity = if child_depth == self.cut_depth {
                    None
                } else {
                    Some(self.underlying.draw_children(rng))
                };
                let child = self.arena.add_child(u, now, capacity)?;
                events.push(GrowthEvent {
                    time: now,
                    parent: u,
                    child,
                });
                if child_depth == self.cut_depth {
                    self.cohorts.push(Cohort {
                        node: child,
                        active: 1,
                        last_growth: self.step,
                        hidden: 0,
                    });
                } else {
                    self.frontier.push(child);
                }
            }
        }
        self.refresh();
        Ok(events)
    }

    fn refresh(&mut self) {
        let n = self.arena.len();
        self.height.clear();
        self.latest.clear();
        self.size.clear();
        self.height.resize(n, 0);
        self.size.resize(n, 1);
        self.latest
            .extend(self.arena.ids().map(|v| self.arena.infected_at(v)));
        for c in &self.cohorts {
            let i = c.node.index();
            self.height[i] = (c.last_growth - u64::from(self.cut_depth)) as u32;
            self.latest[i] = c.last_growth as f64;
            self.size[i] = 1 + c.hidden;
        }
        for v in self.arena.ids().rev() {
            if let Some(p) = self.arena.parent(v) {
                let (i, j) = (v.index(), p.index());
                self.height[j] = self.height[j].max(self.height[i] + 1);
                self.latest[j] = self.latest[j].max(self.latest[i]);
                self.size[j] += self.size[i];
            }
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    if n == 0 || p == 0.0 {
        return Ok(0);
    }
    Ok(Binomial::new(n, p)
        .map_err(|e| Error::arg(e.to_string()))?
        .sample(rng))
}

fn count_at_depth(tree: &TreeArena, v: NodeId, below: u32) -> u64 {
    let mut layer = vec![v];
    for _ in 0..below {
        layer = layer
            .iter()
            .flat_map(|&u| tree.children(u).iter().copied())
            .collect();
    }
    layer.len() as u64
}

impl TreeView for TruncatedIc {
    fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.arena.parent(v)
    }
    fn children(&self, v: NodeId) -> &[NodeId] {
        self.arena.children(v)
    }
    fn depth(&self, v: NodeId) -> u32 {
        self.arena.depth(v)
    }
    fn height(&self, v: NodeId) -> u32 {
        self.height[v.index()]
    }
    fn latest(&self, v: NodeId) -> f64 {
        self.latest[v.index()]
    }
    fn infected_at(&self, v: NodeId) -> f64 {
        self.arena.infected_at(v)
    }
    fn subtree_size(&self, v: NodeId) -> u64 {
        self.size[v.index()]
    }
    fn total_nodes(&self) -> u64 {
        self.arena.len() as u64 + self.hidden_total
    }
    fn is_opaque(&self, v: NodeId) -> bool {
        self.arena.depth(v) == self.cut_depth
    }
}
