//! Seeded growth engines: independent cascade, discrete SI, continuous SI
//! and preferential attachment.
//!
//! The underlying infinite tree is never built. Each infected node carries
//! its residual degree (uninfected underlying neighbors) and the engines only
//! ever draw how many of those get infected, which is exchangeable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{NodeId, TreeArena};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Independent cascade: one round of attempts per node, then sterile.
    Ic,
    /// Discrete-time SI: attempts repeat every step until success.
    Dsi,
    /// Continuous-time SI with Exp(1) edge delays.
    Csi,
    /// Preferential attachment, one leaf per step.
    Pa,
}

impl Model {
    pub fn is_discrete(self) -> bool {
        matches!(self, Model::Ic | Model::Dsi)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Ic => "ic",
            Model::Dsi => "dsi",
            Model::Csi => "csi",
            Model::Pa => "pa",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(Model::Ic),
            "dsi" => Ok(Model::Dsi),
            "csi" | "si" => Ok(Model::Csi),
            "pa" => Ok(Model::Pa),
            other => Err(Error::arg(format!("unknown model {other:?}"))),
        }
    }
}

/// Shape of the underlying tree the infection spreads on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UnderlyingTreeSpec {
    /// Root has `d + 1` children, every other vertex `d`.
    Regular { d: u32 },
    /// Each vertex draws its child count once, uniformly from the choices;
    /// the root gets one extra, as in the regular case.
    Irregular { degree_choices: Vec<u32> },
}

impl UnderlyingTreeSpec {
    pub fn regular(d: u32) -> Self {
        Self::Regular { d }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Regular { d } if *d < 2 => {
                Err(Error::arg(format!("regular tree needs d >= 2, got {d}")))
            }
            Self::Irregular { degree_choices } if degree_choices.is_empty() => {
                Err(Error::arg("irregular tree needs at least one degree choice"))
            }
            Self::Irregular { degree_choices } if degree_choices.iter().any(|&c| c < 3) => Err(
                Error::arg(format!("irregular degree choices must be >= 3, got {degree_choices:?}")),
            ),
            _ => Ok(()),
        }
    }

    /// Smallest child count any non-root vertex can have.
    pub fn min_children(&self) -> u32 {
        match self {
            Self::Regular { d } => *d,
            Self::Irregular { degree_choices } => degree_choices.iter().copied().min().unwrap_or(0),
        }
    }

    pub fn draw_children<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            Self::Regular { d } => *d,
            Self::Irregular { degree_choices } if degree_choices.len() == 1 => degree_choices[0],
            Self::Irregular { degree_choices } => {
                degree_choices[rng.random_range(0..degree_choices.len())]
            }
        }
    }

    pub fn draw_root_children<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.draw_children(rng) + 1
    }
}

/// First satisfied bound wins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopCondition {
    pub max_nodes: Option<usize>,
    pub max_depth: Option<u32>,
    pub max_steps: Option<u64>,
    pub max_time: Option<f64>,
}

impl StopCondition {
    pub fn nodes(n: usize) -> Self {
        Self {
            max_nodes: Some(n),
            ..Self::default()
        }
    }

    pub fn steps(n: u64) -> Self {
        Self {
            max_steps: Some(n),
            ..Self::default()
        }
    }

    pub fn depth(n: u32) -> Self {
        Self {
            max_depth: Some(n),
            ..Self::default()
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.max_nodes.is_none()
            && self.max_depth.is_none()
            && self.max_steps.is_none()
            && self.max_time.is_none()
    }

    /// Whether growth should stop given tree size, tree height, steps taken and clock.
    pub fn reached(&self, nodes: u64, height: u32, steps: u64, clock: f64) -> bool {
        self.max_nodes.is_some_and(|n| nodes >= n as u64)
            || self.max_depth.is_some_and(|d| height >= d)
            || self.max_steps.is_some_and(|s| steps >= s)
            || self.max_time.is_some_and(|t| clock >= t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    /// Step index for discrete models, event time for CSI, node count for PA.
    pub time: f64,
    pub parent: NodeId,
    pub child: NodeId,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    seq: u64,
    parent: NodeId,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap and we pop the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug)]
enum Frontier {
    /// Nodes infected in the previous step.
    Ic(Vec<NodeId>),
    /// Infected nodes that still have uninfected neighbors.
    Dsi(Vec<NodeId>),
    Csi { queue: BinaryHeap<Pending>, seq: u64 },
    /// Every edge endpoint once per edge, so uniform sampling is degree-weighted.
    Pa(Vec<NodeId>),
}

/// Model-specific growth state for one trial.
#[derive(Clone, Debug)]
pub struct GrowthState {
    model: Model,
    p: f64,
    underlying: UnderlyingTreeSpec,
    clock: f64,
    steps: u64,
    frontier: Frontier,
    dead: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthParams {
    pub model: Model,
    pub p: f64,
    pub underlying: UnderlyingTreeSpec,
    /// Reject `p * d_min <= 1` for the discrete models.
    pub strict_supercritical: bool,
}

impl GrowthParams {
    pub fn new(model: Model, p: f64, underlying: UnderlyingTreeSpec) -> Self {
        Self {
            model,
            p,
            underlying,
            strict_supercritical: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model != Model::Pa {
            self.underlying.validate()?;
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::arg(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.strict_supercritical
            && self.model.is_discrete()
            && self.p * f64::from(self.underlying.min_children()) <= 1.0
        {
            return Err(Error::arg(format!(
                "p * d = {} is not supercritical",
                self.p * f64::from(self.underlying.min_children())
            )));
        }
        Ok(())
    }
}

impl GrowthState {
    /// Fresh state and a tree holding only the infected root.
    pub fn start<R: Rng + ?Sized>(params: &GrowthParams, rng: &mut R) -> Result<(Self, TreeArena)> {
        params.validate()?;
        let root_capacity = match params.model {
            Model::Pa => None,
            _ => Some(params.underlying.draw_root_children(rng)),
        };
        let tree = TreeArena::with_root(root_capacity);
        let frontier = match params.model {
            Model::Ic => Frontier::Ic(vec![NodeId::ROOT]),
            Model::Dsi => Frontier::Dsi(vec![NodeId::ROOT]),
            Model::Csi => Frontier::Csi {
                queue: BinaryHeap::new(),
                seq: 0,
            },
            Model::Pa => Frontier::Pa(Vec::new()),
        };
        let mut state = Self {
            model: params.model,
            p: params.p,
            underlying: params.underlying.clone(),
            clock: 0.0,
            steps: 0,
            frontier,
            dead: false,
        };
        if params.model == Model::Csi {
            state.schedule_edges(&tree, NodeId::ROOT, rng);
        }
        Ok((state, tree))
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn underlying(&self) -> &UnderlyingTreeSpec {
        &self.underlying
    }

    /// Number of nodes that may still infect (IC/DSI) or pending edges (CSI).
    pub fn frontier_len(&self) -> usize {
        match &self.frontier {
            Frontier::Ic(v) | Frontier::Dsi(v) | Frontier::Pa(v) => v.len(),
            Frontier::Csi { queue, .. } => queue.len(),
        }
    }

    fn expect_model(&self, model: Model) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::arg(format!("{model} operation on a {} state", self.model)))
        }
    }

    fn infect_children<R: Rng + ?Sized>(
        &self,
        tree: &mut TreeArena,
        parent: NodeId,
        time: f64,
        rng: &mut R,
        events: &mut Vec<GrowthEvent>,
    ) -> Result<()> {
        let residual = tree.residual_degree(parent).unwrap_or(0);
        if residual == 0 || self.p == 0.0 {
            return Ok(());
        }
        let hits = Binomial::new(u64::from(residual), self.p)
            .map_err(|e| Error::arg(e.to_string()))?
            .sample(rng);
        for _ in 0..hits {
            let capacity = self.underlying.draw_children(rng);
            let child = tree.add_child(parent, time, Some(capacity))?;
            events.push(GrowthEvent { time, parent, child });
        }
        Ok(())
    }

    /// One independent-cascade step.
    pub fn step_ic<R: Rng + ?Sized>(
        &mut self,
        tree: &mut TreeArena,
        rng: &mut R,
    ) -> Result<Vec<GrowthEvent>> {
        self.expect_model(Model::Ic)?;
        let Frontier::Ic(active) = &mut self.frontier else {
            unreachable!()
        };
        self.steps += 1;
        self.clock = self.steps as f64;
        if active.is_empty() {
            self.dead = true;
            return Ok(Vec::new());
        }
        let active = std::mem::take(active);
        let mut events = Vec::new();
        for &u in &active {
            self.infect_children(tree, u, self.clock, rng, &mut events)?;
        }
        let next: Vec<NodeId> = events.iter().map(|e| e.child).collect();
        self.dead = next.is_empty();
        self.frontier = Frontier::Ic(next);
        Ok(events)
    }

    /// One discrete-SI step: every infected node with uninfected neighbors tries again.
    pub fn step_dsi<R: Rng + ?Sized>(
        &mut self,
        tree: &mut TreeArena,
        rng: &mut R,
    ) -> Result<Vec<GrowthEvent>> {
        self.expect_model(Model::Dsi)?;
        let Frontier::Dsi(active) = &mut self.frontier else {
            unreachable!()
        };
        let active = std::mem::take(active);
        self.steps += 1;
        self.clock = self.steps as f64;
        let mut events = Vec::new();
        for &u in &active {
            self.infect_children(tree, u, self.clock, rng, &mut events)?;
        }
        let mut next: Vec<NodeId> = active
            .into_iter()
            .filter(|&u| tree.residual_degree(u).unwrap_or(0) > 0)
            .collect();
        next.extend(
            events
                .iter()
                .map(|e| e.child)
                .filter(|&c| tree.residual_degree(c).unwrap_or(0) > 0),
        );
        self.frontier = Frontier::Dsi(next);
        Ok(events)
    }

    fn schedule_edges<R: Rng + ?Sized>(&mut self, tree: &TreeArena, node: NodeId, rng: &mut R) {
        let Frontier::Csi { queue, seq } = &mut self.frontier else {
            return;
        };
        let base = tree.infected_at(node);
        for _ in 0..tree.residual_degree(node).unwrap_or(0) {
            let delay: f64 = Exp1.sample(rng);
            queue.push(Pending {
                time: base + delay,
                seq: *seq,
                parent: node,
            });
            *seq += 1;
        }
    }

    /// Time of the next continuous-SI infection, if any edge is pending.
    pub fn csi_peek(&self) -> Option<f64> {
        match &self.frontier {
            Frontier::Csi { queue, .. } => queue.peek().map(|p| p.time),
            _ => None,
        }
    }

    /// Pop the earliest pending edge and infect across it.
    pub fn csi_next<R: Rng + ?Sized>(
        &mut self,
        tree: &mut TreeArena,
        rng: &mut R,
    ) -> Result<Option<GrowthEvent>> {
        self.expect_model(Model::Csi)?;
        let Frontier::Csi { queue, .. } = &mut self.frontier else {
            unreachable!()
        };
        let Some(next) = queue.pop() else {
            return Ok(None);
        };
        debug_assert!(next.time >= self.clock);
        self.clock = next.time;
        self.steps += 1;
        let capacity = self.underlying.draw_children(rng);
        let child = tree.add_child(next.parent, next.time, Some(capacity))?;
        self.schedule_edges(tree, child, rng);
        Ok(Some(GrowthEvent {
            time: next.time,
            parent: next.parent,
            child,
        }))
    }

    /// Continuous-SI run until `stop` holds, aborting after `max_events`.
    pub fn run_csi<R: Rng + ?Sized>(
        &mut self,
        tree: &mut TreeArena,
        rng: &mut R,
        stop: &StopCondition,
        max_events: usize,
    ) -> Result<CsiRun> {
        self.expect_model(Model::Csi)?;
        let mut events = Vec::new();
        loop {
            if stop.reached(tree.len() as u64, tree.height(NodeId::ROOT), self.steps, self.clock) {
                return Ok(CsiRun {
                    events,
                    truncated: false,
                });
            }
            if let (Some(limit), Some(t)) = (stop.max_time, self.csi_peek()) {
                if t > limit {
                    return Ok(CsiRun {
                        events,
                        truncated: false,
                    });
                }
            }
            if events.len() >= max_events {
                return Ok(CsiRun {
                    events,
                    truncated: true,
                });
            }
            match self.csi_next(tree, rng)? {
                Some(e) => events.push(e),
                None => {
                    return Ok(CsiRun {
                        events,
                        truncated: true,
                    })
                }
            }
        }
    }

    /// Attach one leaf with probability proportional to degree.
    pub fn step_pa<R: Rng + ?Sized>(
        &mut self,
        tree: &mut TreeArena,
        rng: &mut R,
    ) -> Result<GrowthEvent> {
        self.expect_model(Model::Pa)?;
        let event = step_pa(tree, self.pa_endpoints_mut(), rng)?;
        self.steps += 1;
        self.clock = event.time;
        Ok(event)
    }

    fn pa_endpoints_mut(&mut self) -> &mut Vec<NodeId> {
        match &mut self.frontier {
            Frontier::Pa(v) => v,
            _ => unreachable!(),
        }
    }

    /// IC only: no node can infect any more.
    pub fn is_dead(&self) -> Result<bool> {
        self.expect_model(Model::Ic)?;
        Ok(self.dead || matches!(&self.frontier, Frontier::Ic(v) if v.is_empty()))
    }
}

/// Result of a continuous-SI run.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiRun {
    pub events: Vec<GrowthEvent>,
    /// The event budget ran out before the stop condition held.
    pub truncated: bool,
}

/// Preferential-attachment step on an explicit endpoint list (one entry per
/// edge endpoint). A single-node tree attaches to the root.
pub fn step_pa<R: Rng + ?Sized>(
    tree: &mut TreeArena,
    endpoints: &mut Vec<NodeId>,
    rng: &mut R,
) -> Result<GrowthEvent> {
    if tree.is_empty() {
        return Err(Error::state("preferential attachment on an empty tree"));
    }
    let parent = if endpoints.is_empty() {
        NodeId::ROOT
    } else {
        endpoints[rng.random_range(0..endpoints.len())]
    };
    let time = tree.len() as f64;
    let child = tree.add_child(parent, time, None)?;
    endpoints.push(parent);
    endpoints.push(child);
    Ok(GrowthEvent {
        time,
        parent,
        child,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn params(model: Model, p: f64, d: u32) -> GrowthParams {
        GrowthParams::new(model, p, UnderlyingTreeSpec::regular(d))
    }

    #[test]
    fn ic_p1_saturates_root() {
        let mut rng = trial_rng(1, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Ic, 1.0, 2), &mut rng).unwrap();
        assert!(!st.is_dead().unwrap());
        let ev = st.step_ic(&mut tree, &mut rng).unwrap();
        assert_eq!(ev.len(), 3);
        let ev = st.step_ic(&mut tree, &mut rng).unwrap();
        assert_eq!(ev.len(), 6);
        assert!(ev.iter().all(|e| tree.depth(e.child) == 2 && e.time == 2.0));
    }

    #[test]
    fn ic_p0_dies() {
        let mut rng = trial_rng(1, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Ic, 0.0, 4), &mut rng).unwrap();
        assert!(st.step_ic(&mut tree, &mut rng).unwrap().is_empty());
        assert!(st.is_dead().unwrap());
        assert!(st.step_ic(&mut tree, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn ic_nodes_are_sterile_after_one_step() {
        let mut rng = trial_rng(5, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Ic, 0.5, 3), &mut rng).unwrap();
        for step in 1..=12u32 {
            let ev = st.step_ic(&mut tree, &mut rng).unwrap();
            for e in &ev {
                assert_eq!(tree.depth(e.child), step);
                assert_eq!(tree.infected_at(e.parent) + 1.0, e.time);
            }
        }
    }

    #[test]
    fn dsi_p1_matches_ic_p1() {
        let mut r1 = trial_rng(2, 0);
        let mut r2 = trial_rng(2, 0);
        let (mut a, mut ta) = GrowthState::start(&params(Model::Ic, 1.0, 2), &mut r1).unwrap();
        let (mut b, mut tb) = GrowthState::start(&params(Model::Dsi, 1.0, 2), &mut r2).unwrap();
        for _ in 0..4 {
            let ea = a.step_ic(&mut ta, &mut r1).unwrap();
            let eb = b.step_dsi(&mut tb, &mut r2).unwrap();
            assert_eq!(ea, eb);
        }
    }

    #[test]
    fn wrong_model_operations_are_rejected() {
        let mut rng = trial_rng(1, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Dsi, 0.5, 2), &mut rng).unwrap();
        assert!(matches!(st.is_dead(), Err(Error::InvalidArgument(_))));
        assert!(st.step_ic(&mut tree, &mut rng).is_err());
        assert!(st.csi_next(&mut tree, &mut rng).is_err());
    }

    #[test]
    fn strict_supercritical_is_enforced_only_when_asked() {
        let mut p = params(Model::Ic, 0.2, 4);
        assert!(p.validate().is_ok());
        p.strict_supercritical = true;
        assert!(p.validate().is_err());
        p.p = 0.4;
        assert!(p.validate().is_ok());
        assert!(params(Model::Ic, 1.5, 4).validate().is_err());
        assert!(params(Model::Ic, 0.5, 1).validate().is_err());
        let irregular = UnderlyingTreeSpec::Irregular {
            degree_choices: vec![2, 3],
        };
        assert!(irregular.validate().is_err());
    }

    #[test]
    fn csi_stop_at_one_node_is_empty() {
        let mut rng = trial_rng(3, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Csi, 1.0, 4), &mut rng).unwrap();
        let run = st
            .run_csi(&mut tree, &mut rng, &StopCondition::nodes(1), 10)
            .unwrap();
        assert!(run.events.is_empty());
        assert!(!run.truncated);
    }

    #[test]
    fn csi_event_times_increase_and_budget_truncates() {
        let mut rng = trial_rng(3, 1);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Csi, 1.0, 3), &mut rng).unwrap();
        let run = st
            .run_csi(&mut tree, &mut rng, &StopCondition::nodes(1000), 50)
            .unwrap();
        assert!(run.truncated);
        assert_eq!(run.events.len(), 50);
        assert!(run.events.windows(2).all(|w| w[0].time < w[1].time));
        for e in &run.events {
            assert!(tree.infected_at(e.child) > tree.infected_at(e.parent));
        }
        tree.validate().unwrap();
    }

    #[test]
    fn pa_first_edge_is_forced() {
        let mut rng = trial_rng(9, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Pa, 0.0, 2), &mut rng).unwrap();
        let e = st.step_pa(&mut tree, &mut rng).unwrap();
        assert_eq!(e.parent, NodeId::ROOT);
        assert_eq!(e.child, NodeId(1));
        assert_eq!(tree.residual_degree(e.child), None);
    }

    #[test]
    fn regular_capacity_invariant() {
        let mut rng = trial_rng(11, 0);
        let (mut st, mut tree) = GrowthState::start(&params(Model::Dsi, 0.4, 3), &mut rng).unwrap();
        for _ in 0..8 {
            st.step_dsi(&mut tree, &mut rng).unwrap();
        }
        for v in tree.ids() {
            let total = tree.residual_degree(v).unwrap() as usize + tree.children(v).len();
            let expected = if v == NodeId::ROOT { 4 } else { 3 };
            assert_eq!(total, expected);
        }
    }

    #[test]
    fn irregular_capacities_come_from_choices() {
        let spec = UnderlyingTreeSpec::Irregular {
            degree_choices: vec![3, 4],
        };
        let p = GrowthParams::new(Model::Ic, 1.0, spec);
        let mut rng = trial_rng(4, 0);
        let (mut st, mut tree) = GrowthState::start(&p, &mut rng).unwrap();
        for _ in 0..4 {
            st.step_ic(&mut tree, &mut rng).unwrap();
        }
        let mut seen = [false; 2];
        for v in tree.ids().skip(1) {
            let cap = tree.children(v).len() as u32 + tree.residual_degree(v).unwrap();
            assert!(cap == 3 || cap == 4);
            seen[(cap - 3) as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn same_seed_same_events() {
        let run = |seed| {
            let mut rng = trial_rng(seed, 2);
            let (mut st, mut tree) =
                GrowthState::start(&params(Model::Csi, 1.0, 4), &mut rng).unwrap();
            st.run_csi(&mut tree, &mut rng, &StopCondition::nodes(200), 10_000)
                .unwrap()
                .events
        };
        assert_eq!(run(17), run(17));
        assert_ne!(run(17), run(18));
    }
}
