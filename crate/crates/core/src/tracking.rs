//! Incremental center tracking over a growing tree, with verifiers for the
//! movement rules every observation sequence must obey.
//!
//! The tracked ("anchor") center is sticky: it only moves when some vertex
//! has strictly smaller eccentricity than the current one. The full center
//! set and its lowest-id member are reported alongside.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{GrowthEvent, GrowthParams, GrowthState, Model, StopCondition, UnderlyingTreeSpec};
use crate::rng::trial_rng;
use crate::tree::{
    balancedness_center, branches, jordan_center_exact, locate_center, locate_centroid, Branch,
    CenterSet, NodeId, TreeArena, TreeView,
};
use crate::truncated::TruncatedIc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterKind {
    Jordan,
    Balancedness,
}

impl CenterKind {
    pub fn name(self) -> &'static str {
        match self {
            CenterKind::Jordan => "jordan",
            CenterKind::Balancedness => "balancedness",
        }
    }
}

/// When a snapshot is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationPolicy {
    /// After every discrete step (IC, DSI).
    PerStep,
    /// After every single infection (CSI, PA).
    PerNode,
    /// At every integer time (CSI).
    PerUnitTime,
}

impl ObservationPolicy {
    pub fn default_for(model: Model) -> Self {
        if model.is_discrete() {
            Self::PerStep
        } else {
            Self::PerNode
        }
    }

    /// Whether each observation grows any branch by at most one level, which
    /// is what the movement rules assume.
    pub fn single_level(self) -> bool {
        !matches!(self, Self::PerUnitTime)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterSnapshot {
    pub observation_index: usize,
    pub time: f64,
    pub n_nodes: u64,
    pub centers: CenterSet,
    /// Sticky tracked center; moves only on strict improvement.
    pub anchor: NodeId,
    pub anchor_infected_at: f64,
    /// Minimal eccentricity (Jordan) or minimal largest component (balancedness).
    pub psi: u64,
    /// Root distance of the canonical (lowest-id) center.
    pub dist_to_root: u32,
    pub deepest_depth: Option<u32>,
    pub second_deepest_depth: Option<u32>,
    pub set_changed: bool,
    pub moved: bool,
    /// Branches at the anchor (Jordan only).
    pub anchor_branches: Vec<Branch>,
    /// Branches at the previous anchor in the current tree, kept only when the anchor moved.
    pub prior_anchor_branches: Option<Vec<Branch>>,
}

impl CenterSnapshot {
    pub fn canonical(&self) -> NodeId {
        self.centers.canonical()
    }

    /// Branches at the previous observation's anchor, measured now.
    pub fn branches_at_prior_anchor(&self) -> &[Branch] {
        self.prior_anchor_branches
            .as_deref()
            .unwrap_or(&self.anchor_branches)
    }
}

/// Test hook: make the tracker misbehave so verifiers can be exercised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    SkipFirstMove,
}

#[derive(Clone, Debug)]
pub struct CenterTracker {
    kind: CenterKind,
    anchor: Option<NodeId>,
    centers: Option<CenterSet>,
    next_index: usize,
    fault: Option<Fault>,
}

impl CenterTracker {
    pub fn new(kind: CenterKind) -> Self {
        Self {
            kind,
            anchor: None,
            centers: None,
            next_index: 0,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn kind(&self) -> CenterKind {
        self.kind
    }

    /// Snapshot the current tree. Walks from the previous anchor, so the
    /// cost is proportional to how far the center moved.
    pub fn observe<T: TreeView + ?Sized>(&mut self, view: &T, time: f64) -> Result<CenterSnapshot> {
        let index = self.next_index;
        let start = self.anchor.unwrap_or(NodeId::ROOT);
        let (located, centers, psi) = match self.kind {
            CenterKind::Jordan => {
                let loc = locate_center(view, start).ok_or(Error::Unresolved(index))?;
                (loc.center, loc.centers, u64::from(loc.psi))
            }
            CenterKind::Balancedness => {
                let loc = locate_centroid(view, start).ok_or(Error::Unresolved(index))?;
                (loc.center, loc.centers, loc.score)
            }
        };
        let previous = self.anchor;
        let mut anchor = located;
        if let Some(prev) = previous {
            if prev != located && self.fault == Some(Fault::SkipFirstMove) {
                self.fault = None;
                anchor = prev;
            }
        }
        let moved = previous.is_some_and(|p| p != anchor);
        let set_changed = self.centers.is_some_and(|c| c != centers);

        let canonical = centers.canonical();
        let (anchor_branches, prior_anchor_branches, deepest, second) = match self.kind {
            CenterKind::Jordan => {
                let at_anchor = branches(view, anchor);
                let prior = if moved {
                    previous.map(|p| branches(view, p))
                } else {
                    None
                };
                let at_canonical = if canonical == anchor {
                    None
                } else {
                    Some(branches(view, canonical))
                };
                let bs = at_canonical.as_deref().unwrap_or(&at_anchor);
                let deepest = bs.first().map(|b| b.depth);
                let second = bs.get(1).map(|b| b.depth);
                (at_anchor, prior, deepest, second)
            }
            CenterKind::Balancedness => (Vec::new(), None, None, None),
        };

        self.anchor = Some(anchor);
        self.centers = Some(centers);
        self.next_index += 1;
        Ok(CenterSnapshot {
            observation_index: index,
            time,
            n_nodes: view.total_nodes(),
            centers,
            anchor,
            anchor_infected_at: view.infected_at(anchor),
            psi,
            dist_to_root: view.depth(canonical),
            deepest_depth: deepest,
            second_deepest_depth: second,
            set_changed,
            moved,
            anchor_branches,
            prior_anchor_branches,
        })
    }
}

/// Everything recorded for one seeded run and one center kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub model: Model,
    pub kind: CenterKind,
    pub policy: ObservationPolicy,
    pub p: f64,
    pub underlying: UnderlyingTreeSpec,
    pub master_seed: u64,
    pub trial_index: u64,
    pub snapshots: Vec<CenterSnapshot>,
    pub events: Vec<GrowthEvent>,
    /// IC only: the cascade stopped before the stop condition.
    pub dead: bool,
    /// Node cap or event budget hit, or the center left the materialized region.
    pub truncated: bool,
    pub unresolved: bool,
    /// Observations where the incremental center disagreed with full recomputation.
    pub oracle_mismatches: Vec<usize>,
}

impl TrialTrace {
    fn empty(spec: &TrialSpec, kind: CenterKind, master_seed: u64, trial_index: u64) -> Self {
        Self {
            model: spec.params.model,
            kind,
            policy: spec.policy,
            p: spec.params.p,
            underlying: spec.params.underlying.clone(),
            master_seed,
            trial_index,
            snapshots: Vec::new(),
            events: Vec::new(),
            dead: false,
            truncated: false,
            unresolved: false,
            oracle_mismatches: Vec::new(),
        }
    }

    /// Number of completed observations after the initial one.
    pub fn steps(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }
}

/// How to run and observe one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub params: GrowthParams,
    pub stop: StopCondition,
    pub policy: ObservationPolicy,
    pub kinds: Vec<CenterKind>,
    /// IC only: materialize the tree down to this depth and summarize below.
    pub cut_depth: Option<u32>,
    /// Abort (and flag) once the materialized tree exceeds this many nodes.
    pub max_nodes: usize,
    /// CSI only: event budget per trial.
    pub max_events: usize,
    pub record_events: bool,
    /// Recompute every center from scratch and record disagreements.
    pub oracle_check: bool,
    pub fault: Option<Fault>,
}

impl TrialSpec {
    pub fn new(params: GrowthParams, stop: StopCondition) -> Self {
        let policy = ObservationPolicy::default_for(params.model);
        Self {
            params,
            stop,
            policy,
            kinds: vec![CenterKind::Jordan],
            cut_depth: None,
            max_nodes: 10_000_000,
            max_events: 10_000_000,
            record_events: true,
            oracle_check: false,
            fault: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.stop.is_unbounded() {
            return Err(Error::arg("stop condition has no bound"));
        }
        if self.kinds.is_empty() {
            return Err(Error::arg("no center kind requested"));
        }
        match (self.policy, self.params.model) {
            (ObservationPolicy::PerStep, Model::Ic | Model::Dsi)
            | (ObservationPolicy::PerNode, Model::Csi | Model::Pa)
            | (ObservationPolicy::PerUnitTime, Model::Csi) => {}
            (policy, model) => {
                return Err(Error::arg(format!(
                    "observation policy {policy:?} does not apply to {model}"
                )))
            }
        }
        if self.cut_depth.is_some() && self.params.model != Model::Ic {
            return Err(Error::arg("cut depth only applies to the IC model"));
        }
        Ok(())
    }
}

struct Observers {
    trackers: Vec<CenterTracker>,
    traces: Vec<TrialTrace>,
    oracle: bool,
}

impl Observers {
    fn new(spec: &TrialSpec, master_seed: u64, trial_index: u64) -> Self {
        let trackers = spec
            .kinds
            .iter()
            .map(|&k| {
                let t = CenterTracker::new(k);
                match spec.fault {
                    Some(f) if k == CenterKind::Jordan => t.with_fault(f),
                    _ => t,
                }
            })
            .collect();
        let traces = spec
            .kinds
            .iter()
            .map(|&k| TrialTrace::empty(spec, k, master_seed, trial_index))
            .collect();
        Self {
            trackers,
            traces,
            oracle: spec.oracle_check,
        }
    }

    /// Observe every kind; `Ok(false)` means a center left the materialized region.
    fn observe<T: TreeView + ?Sized>(&mut self, view: &T, full: Option<&TreeArena>, time: f64) -> Result<bool> {
        for (tracker, trace) in self.trackers.iter_mut().zip(&mut self.traces) {
            let snap = match tracker.observe(view, time) {
                Ok(s) => s,
                Err(Error::Unresolved(_)) => {
                    for t in &mut self.traces {
                        t.unresolved = true;
                        t.truncated = true;
                    }
                    return Ok(false);
                }
                Err(e) => return Err(e),
            };
            if self.oracle {
                if let Some(tree) = full {
                    let agrees = match tracker.kind() {
                        CenterKind::Jordan => {
                            let exact = jordan_center_exact(tree)?;
                            exact.centers == snap.centers && u64::from(exact.psi) == snap.psi
                        }
                        CenterKind::Balancedness => {
                            let (set, score) = balancedness_center(tree)?;
                            set == snap.centers && score as u64 == snap.psi
                        }
                    };
                    if !agrees {
                        trace.oracle_mismatches.push(snap.observation_index);
                    }
                }
            }
            trace.snapshots.push(snap);
        }
        Ok(true)
    }

    fn record(&mut self, events: &[GrowthEvent], keep: bool) {
        if keep {
            for t in &mut self.traces {
                t.events.extend_from_slice(events);
            }
        }
    }

    fn flag(&mut self, f: impl Fn(&mut TrialTrace)) {
        self.traces.iter_mut().for_each(f);
    }
}

/// Run one seeded trial and record a trace per requested center kind.
pub fn track_trial(spec: &TrialSpec, master_seed: u64, trial_index: u64) -> Result<Vec<TrialTrace>> {
    spec.validate()?;
    let mut rng = trial_rng(master_seed, trial_index);
    let mut obs = Observers::new(spec, master_seed, trial_index);
    let stop = &spec.stop;
    let keep = spec.record_events;

    if let (Model::Ic, Some(cut)) = (spec.params.model, spec.cut_depth) {
        let mut run = TruncatedIc::start(&spec.params, cut, &mut rng)?;
        if !obs.observe(&run, None, 0.0)? {
            return Ok(obs.traces);
        }
        loop {
            let height = run.height(NodeId::ROOT);
            if stop.reached(run.total_nodes(), height, run.steps(), run.steps() as f64) {
                break;
            }
            if run.is_dead() {
                obs.flag(|t| t.dead = true);
                if stop.max_steps.is_none() && stop.max_time.is_none() {
                    break;
                }
            }
            if run.materialized().len() >= spec.max_nodes {
                obs.flag(|t| t.truncated = true);
                break;
            }
            let events = run.step(&mut rng)?;
            obs.record(&events, keep);
            if !obs.observe(&run, None, run.steps() as f64)? {
                break;
            }
        }
        return Ok(obs.traces);
    }

    let (mut state, mut tree) = GrowthState::start(&spec.params, &mut rng)?;
    if !obs.observe(&tree, Some(&tree), 0.0)? {
        return Ok(obs.traces);
    }
    let model = spec.params.model;
    loop {
        let height = tree.height(NodeId::ROOT);
        if stop.reached(tree.len() as u64, height, state.steps(), state.clock()) {
            break;
        }
        if model == Model::Ic && state.is_dead()? && state.steps() > 0 {
            obs.flag(|t| t.dead = true);
            if stop.max_steps.is_none() && stop.max_time.is_none() {
                break;
            }
        }
        if tree.len() >= spec.max_nodes {
            obs.flag(|t| t.truncated = true);
            break;
        }
        let (events, time) = match model {
            Model::Ic => (state.step_ic(&mut tree, &mut rng)?, state.clock()),
            Model::Dsi => (state.step_dsi(&mut tree, &mut rng)?, state.clock()),
            Model::Pa => {
                let e = state.step_pa(&mut tree, &mut rng)?;
                (vec![e], e.time)
            }
            Model::Csi => {
                if state.steps() as usize >= spec.max_events {
                    obs.flag(|t| t.truncated = true);
                    break;
                }
                match spec.policy {
                    ObservationPolicy::PerUnitTime => {
                        let boundary = state.clock().floor() + 1.0;
                        let mut batch = Vec::new();
                        while state.csi_peek().is_some_and(|t| t <= boundary)
                            && !stop.reached(tree.len() as u64, tree.height(NodeId::ROOT), state.steps(), state.clock())
                        {
                            batch.extend(state.csi_next(&mut tree, &mut rng)?);
                        }
                        if batch.is_empty() && state.csi_peek().is_none() {
                            obs.flag(|t| t.truncated = true);
                            break;
                        }
                        // the clock sits at the last event; park it on the boundary
                        (batch, boundary)
                    }
                    _ => match state.csi_next(&mut tree, &mut rng)? {
                        Some(e) => (vec![e], e.time),
                        None => {
                            obs.flag(|t| t.truncated = true);
                            break;
                        }
                    },
                }
            }
        };
        let advance_unit_time = model == Model::Csi && spec.policy == ObservationPolicy::PerUnitTime;
        obs.record(&events, keep);
        if !obs.observe(&tree, Some(&tree), time)? {
            break;
        }
        if advance_unit_time && stop.max_time.is_some_and(|t| time >= t) {
            break;
        }
    }
    Ok(obs.traces)
}

/// Build a tree from a recorded event stream and observe it.
///
/// Per-step and per-unit-time policies group events by time (`floor` of the
/// time for the latter); per-node observes after every event.
pub fn track_events(
    events: &[GrowthEvent],
    kind: CenterKind,
    policy: ObservationPolicy,
) -> Result<Vec<CenterSnapshot>> {
    let mut tree = TreeArena::with_root(None);
    let mut tracker = CenterTracker::new(kind);
    let mut out = vec![tracker.observe(&tree, 0.0)?];
    let group = |e: &GrowthEvent| match policy {
        ObservationPolicy::PerStep => e.time,
        ObservationPolicy::PerUnitTime => e.time.ceil(),
        ObservationPolicy::PerNode => f64::NAN,
    };
    let mut i = 0;
    while i < events.len() {
        let key = group(&events[i]);
        let mut j = i;
        loop {
            let e = &events[j];
            if e.child.index() != tree.len() {
                return Err(Error::state(format!(
                    "event {j} creates node {} but the next id is {}",
                    e.child,
                    tree.len()
                )));
            }
            if !tree.contains(e.parent) {
                return Err(Error::state(format!("event {j} has unknown parent {}", e.parent)));
            }
            tree.add_child(e.parent, e.time, None)
                .map_err(|err| Error::state(format!("event {j}: {err}")))?;
            j += 1;
            if j == events.len() || policy == ObservationPolicy::PerNode || group(&events[j]) != key {
                break;
            }
        }
        let time = match policy {
            ObservationPolicy::PerNode => events[j - 1].time,
            _ => key,
        };
        out.push(tracker.observe(&tree, time)?);
        i = j;
    }
    Ok(out)
}

/// [`track_events`] with the balancedness center.
pub fn track_balancedness(events: &[GrowthEvent], policy: ObservationPolicy) -> Result<Vec<CenterSnapshot>> {
    track_events(events, CenterKind::Balancedness, policy)
}

/// Which movement rule an observation pair violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// The tracked center is a minimizer.
    AnchorIsCenter,
    /// Deepest branch at a center has depth psi - 1.
    DeepestIsPsiMinusOne,
    /// Second deepest branch at a center has depth psi - 1 or psi - 2.
    SecondDeepestRange,
    /// psi never decreases and grows by at most one per observation.
    PsiStep,
    /// Center moves exactly when the second deepest sits at psi - 2 and stays
    /// there while the deepest grows to psi.
    MovementIff,
    /// A move goes to the deepest neighbor.
    MovesToDeepest,
    /// psi is unchanged across a move.
    PsiPreservedOnMove,
    /// A move covers one hop.
    AtMostOneHop,
    /// No move when the two deepest branches both grew.
    TwoDeepestGrewNoMove,
    /// IC: on a move, every other branch of the old center is dead.
    IcSideBranchesDead,
    /// IC: an abandoned center never comes back.
    IcNoReturn,
    /// IC: the old center was infected before the new one.
    IcInfectionOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseFailure {
    pub clause: Clause,
    pub observation_index: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub checked: usize,
    pub failures: Vec<ClauseFailure>,
    /// Transitions where the second and third deepest branches tied.
    pub co_deepest_second: usize,
}

impl VerificationVerdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn merge(&mut self, other: VerificationVerdict) {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self.co_deepest_second += other.co_deepest_second;
    }

    fn fail(&mut self, clause: Clause, index: usize, detail: String) {
        self.failures.push(ClauseFailure {
            clause,
            observation_index: index,
            detail,
        });
    }

    pub fn has(&self, clause: Clause) -> bool {
        self.failures.iter().any(|f| f.clause == clause)
    }
}

fn depth_i(b: Option<&Branch>) -> i64 {
    b.map_or(-1, |b| i64::from(b.depth))
}

/// Static checks on one Jordan snapshot.
pub fn verify_snapshot(s: &CenterSnapshot) -> VerificationVerdict {
    let mut v = VerificationVerdict {
        checked: 1,
        ..Default::default()
    };
    let i = s.observation_index;
    if !s.centers.contains(s.anchor) {
        v.fail(Clause::AnchorIsCenter, i, format!("anchor {} not in {:?}", s.anchor, s.centers));
    }
    if s.n_nodes < 2 {
        return v;
    }
    let psi = s.psi as i64;
    let d1 = depth_i(s.anchor_branches.first());
    let d2 = depth_i(s.anchor_branches.get(1));
    if d1 != psi - 1 {
        v.fail(Clause::DeepestIsPsiMinusOne, i, format!("deepest {d1}, psi {psi}"));
    }
    if d2 != psi - 1 && d2 != psi - 2 {
        v.fail(Clause::SecondDeepestRange, i, format!("second deepest {d2}, psi {psi}"));
    }
    v
}

/// Check one transition between consecutive single-level observations.
pub fn verify_movement(prev: &CenterSnapshot, next: &CenterSnapshot) -> VerificationVerdict {
    let mut v = VerificationVerdict {
        checked: 1,
        ..Default::default()
    };
    let i = next.observation_index;
    let psi = prev.psi as i64;
    if next.psi < prev.psi || next.psi > prev.psi + 1 {
        v.fail(Clause::PsiStep, i, format!("psi {} -> {}", prev.psi, next.psi));
    }
    let before = &prev.anchor_branches;
    let after = next.branches_at_prior_anchor();
    let Some(top) = before.first() else {
        // single node: nothing can move
        if next.moved {
            v.fail(Clause::MovementIff, i, "moved away from a lone root".into());
        }
        return v;
    };
    let depth_now = |n: Option<NodeId>| after.iter().find(|b| b.neighbor == n).map(|b| i64::from(b.depth));
    let d1 = i64::from(top.depth);
    let d2 = depth_i(before.get(1));
    let d1_now = depth_now(top.neighbor).unwrap_or(d1);
    let d2_now = after
        .iter()
        .filter(|b| b.neighbor != top.neighbor)
        .map(|b| i64::from(b.depth))
        .max()
        .unwrap_or(-1);
    if before.len() >= 3 && before[1].depth == before[2].depth && d2 == psi - 2 {
        v.co_deepest_second += 1;
    }

    let must_move = d1 == psi - 1 && d2 == psi - 2 && d1_now == psi && d2_now == psi - 2;
    if must_move != next.moved {
        v.fail(
            Clause::MovementIff,
            i,
            format!(
                "moved = {}, but branches went ({d1}, {d2}) -> ({d1_now}, {d2_now}) at psi {psi}",
                next.moved
            ),
        );
    }
    if before.len() >= 2 {
        let grew = |b: &Branch| depth_now(b.neighbor).is_some_and(|d| d > i64::from(b.depth));
        if grew(&before[0]) && grew(&before[1]) && next.moved {
            v.fail(Clause::TwoDeepestGrewNoMove, i, "moved although the two deepest grew".into());
        }
    }
    if next.moved {
        if Some(next.anchor) != top.neighbor {
            v.fail(
                Clause::MovesToDeepest,
                i,
                format!("moved to {} instead of {:?}", next.anchor, top.neighbor),
            );
        }
        if next.psi != prev.psi {
            v.fail(
                Clause::PsiPreservedOnMove,
                i,
                format!("psi {} -> {} on a move", prev.psi, next.psi),
            );
        }
        if !after.iter().any(|b| b.neighbor == Some(next.anchor)) {
            v.fail(
                Clause::AtMostOneHop,
                i,
                format!("{} is not adjacent to {}", next.anchor, prev.anchor),
            );
        }
    }
    v
}

/// Static and transition checks over a whole Jordan trace.
pub fn verify_trace(trace: &TrialTrace) -> Result<VerificationVerdict> {
    if trace.kind != CenterKind::Jordan {
        return Err(Error::arg("movement rules apply to Jordan traces only"));
    }
    let mut verdict = VerificationVerdict::default();
    for s in &trace.snapshots {
        verdict.merge(verify_snapshot(s));
    }
    if trace.policy.single_level() {
        for w in trace.snapshots.windows(2) {
            verdict.merge(verify_movement(&w[0], &w[1]));
        }
    }
    Ok(verdict)
}

/// IC-specific consequences of the movement rules.
pub fn verify_ic_specifics(trace: &TrialTrace) -> Result<VerificationVerdict> {
    if trace.model != Model::Ic {
        return Err(Error::arg(format!("IC checks on a {} trace", trace.model)));
    }
    if trace.kind != CenterKind::Jordan {
        return Err(Error::arg("IC checks apply to Jordan traces only"));
    }
    let mut v = VerificationVerdict::default();
    let mut abandoned_anchor: HashSet<NodeId> = HashSet::new();
    let mut abandoned_canonical: HashSet<NodeId> = HashSet::new();
    for w in trace.snapshots.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let i = next.observation_index;
        v.checked += 1;
        if next.canonical() != prev.canonical() {
            abandoned_canonical.insert(prev.canonical());
            if abandoned_canonical.contains(&next.canonical()) {
                v.fail(
                    Clause::IcNoReturn,
                    i,
                    format!("canonical center returned to {}", next.canonical()),
                );
            }
        }
        if !next.moved {
            continue;
        }
        abandoned_anchor.insert(prev.anchor);
        if abandoned_anchor.contains(&next.anchor) {
            v.fail(Clause::IcNoReturn, i, format!("center returned to {}", next.anchor));
        }
        let deepest = prev.anchor_branches.first().and_then(|b| b.neighbor);
        for b in next.branches_at_prior_anchor() {
            if b.neighbor != deepest && b.latest >= next.time {
                v.fail(
                    Clause::IcSideBranchesDead,
                    i,
                    format!("branch via {:?} still infecting at {}", b.neighbor, next.time),
                );
            }
        }
        if !(prev.anchor_infected_at < next.anchor_infected_at) {
            v.fail(
                Clause::IcInfectionOrder,
                i,
                format!(
                    "old center infected at {}, new at {}",
                    prev.anchor_infected_at, next.anchor_infected_at
                ),
            );
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub last_change_index: Option<usize>,
    pub changes: usize,
    pub set_changes: usize,
    pub distinct_centers: usize,
    pub max_dist_to_root: u32,
    pub revisit_detected: bool,
    pub stable_in_tail: bool,
}

/// Summarize when and how often the tracked center moved.
pub fn persistence_report(trace: &TrialTrace, tail_window: usize) -> Result<PersistenceReport> {
    let snaps = &trace.snapshots;
    if snaps.is_empty() {
        return Err(Error::arg("empty trace"));
    }
    if tail_window > snaps.len() {
        return Err(Error::arg(format!(
            "tail window {tail_window} exceeds trace length {}",
            snaps.len()
        )));
    }
    let mut seen = HashSet::new();
    let mut abandoned = HashSet::new();
    let mut revisit = false;
    let mut last_change = None;
    let mut changes = 0;
    for (i, s) in snaps.iter().enumerate() {
        if s.moved {
            changes += 1;
            last_change = Some(s.observation_index);
            abandoned.insert(snaps[i - 1].anchor);
            if abandoned.contains(&s.anchor) {
                revisit = true;
            }
        }
        seen.insert(s.anchor);
    }
    let tail_start = snaps.len() - tail_window;
    Ok(PersistenceReport {
        last_change_index: last_change,
        changes,
        set_changes: snaps.iter().filter(|s| s.set_changed).count(),
        distinct_centers: seen.len(),
        max_dist_to_root: snaps.iter().map(|s| s.dist_to_root).max().unwrap_or(0),
        revisit_detected: revisit,
        stable_in_tail: snaps[tail_start..].iter().all(|s| !s.moved),
    })
}
