//! Rooted storage for the infected subtree plus exact center computations.
//!
//! Node ids are handed out in infection order, so a parent always has a
//! smaller id than any of its children. Several routines rely on that to
//! walk the arena bottom-up without an explicit post-order.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    depth: u32,
    infected_at: f64,
    /// `None` means unbounded (preferential attachment has no underlying tree).
    residual: Option<u32>,
    height: u32,
    latest: f64,
    size: u64,
}

/// Index-addressed rooted tree of infected nodes.
///
/// Besides the structural fields the arena keeps, per node, the height, size
/// and latest infection time of its downward subtree, updated on insertion by
/// walking towards the root.
#[derive(Clone, Debug, Default)]
pub struct TreeArena {
    nodes: Vec<Node>,
}

impl TreeArena {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tree holding only the root, infected at time 0.
    pub fn with_root(capacity: Option<u32>) -> Self {
        let mut tree = Self::new();
        tree.nodes.push(Node {
            parent: None,
            children: Vec::new(),
            depth: 0,
            infected_at: 0.0,
            residual: capacity,
            height: 0,
            latest: 0.0,
            size: 1,
        });
        tree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.nodes.len()
    }

    pub fn check(&self, v: NodeId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::arg(format!("unknown node {v} (tree has {} nodes)", self.len())))
        }
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Attach a freshly infected node below `parent`.
    ///
    /// `capacity` is the number of underlying-tree children the new node
    /// has (`None` for unbounded).
    pub fn add_child(
        &mut self,
        parent: NodeId,
        infected_at: f64,
        capacity: Option<u32>,
    ) -> Result<NodeId> {
        self.check(parent)?;
        let p = &self.nodes[parent.index()];
        if !(infected_at > p.infected_at) {
            return Err(Error::state(format!(
                "child infected at {infected_at} but parent {parent} infected at {}",
                p.infected_at
            )));
        }
        if p.residual == Some(0) {
            return Err(Error::state(format!("node {parent} has no uninfected neighbors left")));
        }
        let id = NodeId(
            u32::try_from(self.nodes.len()).map_err(|_| Error::state("arena is full"))?,
        );
        let depth = p.depth + 1;
        let p = &mut self.nodes[parent.index()];
        p.children.push(id);
        if let Some(r) = p.residual.as_mut() {
            *r -= 1;
        }
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            depth,
            infected_at,
            residual: capacity,
            height: 0,
            latest: infected_at,
            size: 1,
        });

        let mut h = 1;
        let mut cur = Some(parent);
        while let Some(u) = cur {
            let node = &mut self.nodes[u.index()];
            if node.height >= h {
                break;
            }
            node.height = h;
            h += 1;
            cur = node.parent;
        }
        let mut cur = Some(parent);
        while let Some(u) = cur {
            let node = &mut self.nodes[u.index()];
            node.size += 1;
            if node.latest < infected_at {
                node.latest = infected_at;
            }
            cur = node.parent;
        }
        Ok(id)
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v.index()].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.index()].children
    }

    pub fn depth(&self, v: NodeId) -> u32 {
        self.nodes[v.index()].depth
    }

    pub fn infected_at(&self, v: NodeId) -> f64 {
        self.nodes[v.index()].infected_at
    }

    pub fn residual_degree(&self, v: NodeId) -> Option<u32> {
        self.nodes[v.index()].residual
    }

    /// Edges on the longest downward path from `v`.
    pub fn height(&self, v: NodeId) -> u32 {
        self.nodes[v.index()].height
    }

    /// Latest infection time among `v` and its descendants.
    pub fn latest_in_subtree(&self, v: NodeId) -> f64 {
        self.nodes[v.index()].latest
    }

    /// Number of nodes in the downward subtree of `v`, itself included.
    pub fn subtree_size(&self, v: NodeId) -> u64 {
        self.nodes[v.index()].size
    }

    pub fn degree(&self, v: NodeId) -> usize {
        let n = &self.nodes[v.index()];
        n.children.len() + usize::from(n.parent.is_some())
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let n = &self.nodes[v.index()];
        n.parent.into_iter().chain(n.children.iter().copied())
    }

    /// Structural self-check used by tests and the verify suite.
    pub fn validate(&self) -> Result<()> {
        let mut roots = 0;
        for v in self.ids() {
            let n = &self.nodes[v.index()];
            match n.parent {
                None => roots += 1,
                Some(p) => {
                    let pn = &self.nodes[p.index()];
                    if n.depth != pn.depth + 1 {
                        return Err(Error::state(format!("depth mismatch at {v}")));
                    }
                    if !(n.infected_at > pn.infected_at) {
                        return Err(Error::state(format!("infection order violated at {v}")));
                    }
                    if p >= v {
                        return Err(Error::state(format!("parent id not below child id at {v}")));
                    }
                }
            }
        }
        if !self.is_empty() && roots != 1 {
            return Err(Error::state(format!("{roots} parentless nodes")));
        }
        Ok(())
    }

    fn bfs(&self, source: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for w in self.neighbors(u) {
                if dist[w.index()] == u32::MAX {
                    dist[w.index()] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Maximum hop distance from `v` to any node of the tree.
pub fn eccentricity(tree: &TreeArena, v: NodeId) -> Result<u32> {
    tree.check(v)?;
    Ok(tree.bfs(v).into_iter().max().unwrap_or(0))
}

/// Hop count along the unique path between `u` and `v`.
pub fn distance(tree: &TreeArena, u: NodeId, v: NodeId) -> Result<u32> {
    tree.check(u)?;
    tree.check(v)?;
    let (mut a, mut b) = (u, v);
    let mut hops = 0;
    while tree.depth(a) > tree.depth(b) {
        a = tree.parent(a).expect("non-root has a parent");
        hops += 1;
    }
    while tree.depth(b) > tree.depth(a) {
        b = tree.parent(b).expect("non-root has a parent");
        hops += 1;
    }
    while a != b {
        a = tree.parent(a).expect("distinct nodes at equal depth have parents");
        b = tree.parent(b).expect("distinct nodes at equal depth have parents");
        hops += 2;
    }
    Ok(hops)
}

/// One or two adjacent Jordan centers, lowest id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CenterSet {
    first: NodeId,
    second: Option<NodeId>,
}

impl CenterSet {
    pub fn single(v: NodeId) -> Self {
        Self { first: v, second: None }
    }

    pub fn pair(a: NodeId, b: NodeId) -> Self {
        debug_assert_ne!(a, b);
        Self {
            first: a.min(b),
            second: Some(a.max(b)),
        }
    }

    /// Lowest-id member; used for all distance-to-root reporting.
    pub fn canonical(&self) -> NodeId {
        self.first
    }

    pub fn len(&self) -> usize {
        1 + usize::from(self.second.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.first == v || self.second == Some(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> {
        std::iter::once(self.first).chain(self.second)
    }
}

/// Jordan center of a tree: the minimizers of eccentricity and their value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JordanCenter {
    pub centers: CenterSet,
    pub psi: u32,
}

/// Exact Jordan center via a double farthest-node sweep; the center is the
/// middle of a diameter path.
pub fn jordan_center_exact(tree: &TreeArena) -> Result<JordanCenter> {
    if tree.is_empty() {
        return Err(Error::state("Jordan center of an empty tree"));
    }
    let farthest = |dist: &[u32]| -> NodeId {
        let mut best = 0;
        for (i, &d) in dist.iter().enumerate() {
            if d > dist[best] {
                best = i;
            }
        }
        NodeId(best as u32)
    };
    let a = farthest(&tree.bfs(NodeId::ROOT));
    let from_a = tree.bfs(a);
    let b = farthest(&from_a);
    let diameter = from_a[b.index()];

    // walk from b back towards a using the BFS layering
    let mut path = Vec::with_capacity(diameter as usize + 1);
    let mut cur = b;
    path.push(cur);
    while cur != a {
        let d = from_a[cur.index()];
        cur = tree
            .neighbors(cur)
            .find(|w| from_a[w.index()] + 1 == d)
            .expect("BFS layering has a predecessor");
        path.push(cur);
    }
    let half = (diameter / 2) as usize;
    let centers = if diameter.is_multiple_of(2) {
        CenterSet::single(path[half])
    } else {
        CenterSet::pair(path[half], path[half + 1])
    };
    Ok(JordanCenter {
        centers,
        psi: diameter.div_ceil(2),
    })
}

/// Neighbor-rooted subtree depths of `v`, deepest first, ties by lower id.
///
/// The depth of a subtree rooted at neighbor `n` is the number of edges on
/// the longest path from `n` staying inside that subtree.
pub fn neighbor_subtree_depths(tree: &TreeArena, v: NodeId) -> Result<Vec<(NodeId, u32)>> {
    tree.check(v)?;
    let mut branch_of = vec![u32::MAX; tree.len()];
    let mut dist = vec![u32::MAX; tree.len()];
    let mut out: Vec<(NodeId, u32)> = tree.neighbors(v).map(|n| (n, 0)).collect();
    let mut queue = VecDeque::new();
    dist[v.index()] = 0;
    for (slot, &(n, _)) in out.iter().enumerate() {
        dist[n.index()] = 1;
        branch_of[n.index()] = slot as u32;
        queue.push_back(n);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()];
        let slot = branch_of[u.index()];
        out[slot as usize].1 = out[slot as usize].1.max(du - 1);
        for w in tree.neighbors(u) {
            if dist[w.index()] == u32::MAX {
                dist[w.index()] = du + 1;
                branch_of[w.index()] = slot;
                queue.push_back(w);
            }
        }
    }
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Balancedness center (centroid): minimizers of the largest neighbor-rooted
/// subtree size, with that size as the score.
pub fn balancedness_center(tree: &TreeArena) -> Result<(CenterSet, usize)> {
    if tree.is_empty() {
        return Err(Error::state("balancedness center of an empty tree"));
    }
    let n = tree.len();
    let mut size = vec![1usize; n];
    for v in tree.ids().rev() {
        if let Some(p) = tree.parent(v) {
            size[p.index()] += size[v.index()];
        }
    }
    let score = |v: NodeId| -> usize {
        let up = n - size[v.index()];
        tree.children(v)
            .iter()
            .map(|c| size[c.index()])
            .fold(up, usize::max)
    };
    let mut best = usize::MAX;
    let mut winners: Vec<NodeId> = Vec::with_capacity(2);
    for v in tree.ids() {
        let s = score(v);
        if s < best {
            best = s;
            winners.clear();
            winners.push(v);
        } else if s == best {
            winners.push(v);
        }
    }
    let set = match winners.as_slice() {
        [a] => CenterSet::single(*a),
        [a, b] => CenterSet::pair(*a, *b),
        _ => return Err(Error::state("more than two centroids in a tree")),
    };
    Ok((set, best))
}

/// Read access needed to locate centers from per-node summaries alone.
///
/// Implemented by [`TreeArena`] and by the depth-truncated IC tree, where
/// nodes at the truncation depth are opaque: their height, size and latest
/// infection are known but their descendants are not materialized.
pub trait TreeView {
    fn parent(&self, v: NodeId) -> Option<NodeId>;
    fn children(&self, v: NodeId) -> &[NodeId];
    fn depth(&self, v: NodeId) -> u32;
    fn height(&self, v: NodeId) -> u32;
    fn latest(&self, v: NodeId) -> f64;
    fn infected_at(&self, v: NodeId) -> f64;
    fn subtree_size(&self, v: NodeId) -> u64;
    /// Total node count, hidden descendants included.
    fn total_nodes(&self) -> u64;
    fn is_opaque(&self, _v: NodeId) -> bool {
        false
    }
}

impl TreeView for TreeArena {
    fn parent(&self, v: NodeId) -> Option<NodeId> {
        TreeArena::parent(self, v)
    }
    fn children(&self, v: NodeId) -> &[NodeId] {
        TreeArena::children(self, v)
    }
    fn height(&self, v: NodeId) -> u32 {
        TreeArena::height(self, v)
    }
    fn latest(&self, v: NodeId) -> f64 {
        self.latest_in_subtree(v)
    }
    fn infected_at(&self, v: NodeId) -> f64 {
        TreeArena::infected_at(self, v)
    }
    fn depth(&self, v: NodeId) -> u32 {
        TreeArena::depth(self, v)
    }
    fn subtree_size(&self, v: NodeId) -> u64 {
        TreeArena::subtree_size(self, v)
    }
    fn total_nodes(&self) -> u64 {
        self.len() as u64
    }
}

/// A neighbor-rooted subtree seen from some vertex.
///
/// `neighbor` is `None` only for the hidden children of an opaque node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub neighbor: Option<NodeId>,
    pub depth: u32,
    /// Latest infection time inside the branch.
    pub latest: f64,
}

fn branch_order(a: &Branch, b: &Branch) -> std::cmp::Ordering {
    b.depth
        .cmp(&a.depth)
        .then_with(|| match (a.neighbor, b.neighbor) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        })
}

/// Depth and latest infection of the branch through `v`'s parent, if any.
fn upward_branch<T: TreeView + ?Sized>(idx: &T, v: NodeId) -> Option<(u32, f64)> {
    let mut chain = Vec::new();
    let mut cur = v;
    while let Some(p) = idx.parent(cur) {
        chain.push((cur, p));
        cur = p;
    }
    // evaluate from the root downwards: up(c) describes the branch via p
    let mut up: Option<(u32, f64)> = None;
    for &(child, p) in chain.iter().rev() {
        let mut depth = 0u32;
        let mut latest = idx.infected_at(p);
        if let Some((d, l)) = up {
            depth = depth.max(d + 1);
            latest = latest.max(l);
        }
        for &s in idx.children(p) {
            if s != child {
                depth = depth.max(idx.height(s) + 1);
                latest = latest.max(idx.latest(s));
            }
        }
        up = Some((depth, latest));
    }
    up
}

/// Neighbor-rooted branches of `v`, deepest first, ties by lower id.
///
/// Height-based counterpart of [`neighbor_subtree_depths`]. For an opaque
/// node the hidden children collapse into a single anonymous branch.
pub fn branches<T: TreeView + ?Sized>(idx: &T, v: NodeId) -> Vec<Branch> {
    let mut out = Vec::with_capacity(idx.children(v).len() + 2);
    if let (Some(p), Some((depth, latest))) = (idx.parent(v), upward_branch(idx, v)) {
        out.push(Branch {
            neighbor: Some(p),
            depth,
            latest,
        });
    }
    if idx.is_opaque(v) {
        if idx.height(v) > 0 {
            out.push(Branch {
                neighbor: None,
                depth: idx.height(v) - 1,
                latest: idx.latest(v),
            });
        }
    } else {
        for &c in idx.children(v) {
            out.push(Branch {
                neighbor: Some(c),
                depth: idx.height(c),
                latest: idx.latest(c),
            });
        }
    }
    out.sort_by(branch_order);
    out
}

/// Eccentricity implied by a sorted branch list.
pub fn eccentricity_from_branches(bs: &[Branch]) -> u32 {
    bs.first().map_or(0, |b| b.depth + 1)
}

/// Center found by descending eccentricity from a start vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Located {
    pub center: NodeId,
    pub centers: CenterSet,
    pub psi: u32,
    pub branches: Vec<Branch>,
    pub hops: u32,
}

/// Walk from `start` towards the deepest branch while that strictly lowers
/// eccentricity. The vertex where the walk stops is a Jordan center; its
/// deepest neighbor joins the set when the two deepest branches differ by
/// exactly one.
///
/// Returns `None` if the walk would need the children of an opaque node.
pub fn locate_center<T: TreeView + ?Sized>(idx: &T, start: NodeId) -> Option<Located> {
    let mut v = start;
    let mut hops = 0;
    loop {
        let bs = branches(idx, v);
        let psi = eccentricity_from_branches(&bs);
        let Some(top) = bs.first() else {
            return Some(Located {
                center: v,
                centers: CenterSet::single(v),
                psi,
                branches: bs,
                hops,
            });
        };
        let d1 = i64::from(top.depth);
        let d2 = bs.get(1).map_or(-1, |b| i64::from(b.depth));
        if d2 <= d1 - 2 {
            v = top.neighbor?;
            hops += 1;
            continue;
        }
        let centers = if d2 == d1 - 1 {
            CenterSet::pair(v, top.neighbor?)
        } else {
            CenterSet::single(v)
        };
        return Some(Located {
            center: v,
            centers,
            psi,
            branches: bs,
            hops,
        });
    }
}

/// Centroid found by descending towards any component larger than half the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocatedCentroid {
    pub center: NodeId,
    pub centers: CenterSet,
    /// Largest neighbor-rooted component at the center.
    pub score: u64,
}

/// Walk from `start` into the neighbor component holding more than half the
/// nodes until none does; the stopping vertex is a balancedness center. A
/// neighbor whose component is exactly half joins the set.
///
/// Returns `None` if the answer depends on descendants of an opaque node.
pub fn locate_centroid<T: TreeView + ?Sized>(view: &T, start: NodeId) -> Option<LocatedCentroid> {
    let n = view.total_nodes();
    let mut v = start;
    loop {
        let up = view.parent(v).map(|p| (p, n - view.subtree_size(v)));
        if view.is_opaque(v) {
            // hidden components could reach half the tree
            if 2 * (view.subtree_size(v) - 1) >= n {
                return None;
            }
            let (p, comp) = up?;
            if 2 * comp > n {
                v = p;
                continue;
            }
            // the largest hidden child component is only bounded by the hidden total
            let hidden = view.subtree_size(v) - 1;
            if comp < hidden {
                return None;
            }
            let centers = if 2 * comp == n {
                CenterSet::pair(v, p)
            } else {
                CenterSet::single(v)
            };
            return Some(LocatedCentroid {
                center: v,
                centers,
                score: comp,
            });
        }
        let comps = up
            .into_iter()
            .chain(view.children(v).iter().map(|&c| (c, view.subtree_size(c))));
        let mut score = 0;
        let mut heavy = None;
        let mut half = None;
        for (w, comp) in comps {
            score = score.max(comp);
            if 2 * comp > n {
                heavy = Some(w);
            } else if 2 * comp == n {
                half = Some(w);
            }
        }
        if let Some(w) = heavy {
            v = w;
            continue;
        }
        let centers = match half {
            Some(w) => CenterSet::pair(v, w),
            None => CenterSet::single(v),
        };
        return Some(LocatedCentroid {
            center: v,
            centers,
            score,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> TreeArena {
        let mut t = TreeArena::with_root(None);
        for i in 1..n {
            t.add_child(NodeId(i as u32 - 1), i as f64, None).unwrap();
        }
        t
    }

    fn star(leaves: usize) -> TreeArena {
        let mut t = TreeArena::with_root(None);
        for i in 0..leaves {
            t.add_child(NodeId::ROOT, 1.0 + i as f64, None).unwrap();
        }
        t
    }

    #[test]
    fn single_node() {
        let t = TreeArena::with_root(Some(3));
        assert_eq!(eccentricity(&t, NodeId::ROOT).unwrap(), 0);
        let c = jordan_center_exact(&t).unwrap();
        assert_eq!(c.centers, CenterSet::single(NodeId::ROOT));
        assert_eq!(c.psi, 0);
        assert!(neighbor_subtree_depths(&t, NodeId::ROOT).unwrap().is_empty());
        assert_eq!(distance(&t, NodeId::ROOT, NodeId::ROOT).unwrap(), 0);
    }

    #[test]
    fn path_eccentricity_and_center() {
        let t = path(3);
        assert_eq!(eccentricity(&t, NodeId(1)).unwrap(), 1);
        assert_eq!(eccentricity(&t, NodeId(0)).unwrap(), 2);
        assert_eq!(distance(&t, NodeId(0), NodeId(2)).unwrap(), 2);

        let t = path(4);
        let c = jordan_center_exact(&t).unwrap();
        assert_eq!(c.centers, CenterSet::pair(NodeId(1), NodeId(2)));
        assert_eq!(c.psi, 2);
        assert_eq!(
            neighbor_subtree_depths(&t, NodeId(1)).unwrap(),
            vec![(NodeId(2), 1), (NodeId(0), 0)]
        );
    }

    #[test]
    fn star_center() {
        let t = star(5);
        let c = jordan_center_exact(&t).unwrap();
        assert_eq!(c.centers, CenterSet::single(NodeId::ROOT));
        assert_eq!(c.psi, 1);
        let t = star(3);
        let d = neighbor_subtree_depths(&t, NodeId::ROOT).unwrap();
        assert_eq!(d, vec![(NodeId(1), 0), (NodeId(2), 0), (NodeId(3), 0)]);
        assert_eq!(balancedness_center(&t).unwrap(), (CenterSet::single(NodeId::ROOT), 1));
    }

    #[test]
    fn balancedness_of_path() {
        assert_eq!(
            balancedness_center(&path(3)).unwrap(),
            (CenterSet::single(NodeId(1)), 1)
        );
        assert_eq!(
            balancedness_center(&path(4)).unwrap(),
            (CenterSet::pair(NodeId(1), NodeId(2)), 2)
        );
    }

    #[test]
    fn empty_tree_errors() {
        let t = TreeArena::new();
        assert!(matches!(jordan_center_exact(&t), Err(Error::InvalidState(_))));
        assert!(balancedness_center(&t).is_err());
        assert!(matches!(eccentricity(&t, NodeId(0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unknown_id_is_invalid_argument() {
        let t = path(3);
        assert!(matches!(eccentricity(&t, NodeId(9)), Err(Error::InvalidArgument(_))));
        assert!(matches!(distance(&t, NodeId(0), NodeId(9)), Err(Error::InvalidArgument(_))));
        assert!(neighbor_subtree_depths(&t, NodeId(3)).is_err());
    }

    #[test]
    fn add_child_rejects_bad_inputs() {
        let mut t = TreeArena::with_root(Some(1));
        assert!(t.add_child(NodeId::ROOT, 0.0, Some(1)).is_err());
        t.add_child(NodeId::ROOT, 1.0, Some(1)).unwrap();
        // root capacity exhausted
        assert!(t.add_child(NodeId::ROOT, 1.0, Some(1)).is_err());
        assert_eq!(t.residual_degree(NodeId::ROOT), Some(0));
    }

    #[test]
    fn heights_and_latest_track_insertions() {
        let mut t = path(4);
        assert_eq!(t.height(NodeId::ROOT), 3);
        let x = t.add_child(NodeId(1), 7.0, None).unwrap();
        assert_eq!(t.height(NodeId(1)), 2);
        assert_eq!(t.latest_in_subtree(NodeId::ROOT), 7.0);
        assert_eq!(t.latest_in_subtree(NodeId(2)), 3.0);
        assert_eq!(t.latest_in_subtree(x), 7.0);
    }

    #[test]
    fn locate_matches_exact_on_path() {
        for n in 1..9 {
            let t = path(n);
            let exact = jordan_center_exact(&t).unwrap();
            let found = locate_center(&t, NodeId::ROOT).unwrap();
            assert_eq!(found.centers, exact.centers, "n = {n}");
            assert_eq!(found.psi, exact.psi);
        }
    }
}
