//! Metric tree with count-only range queries and range joins.
//!
//! The tree is a binary pivot/covering-radius structure in the M-tree
//! family: every node stores a pivot element, the radius covering all
//! elements of its subtree, and either two children or a leaf bucket.
//! It works for any [`MetricSpace`] payload, dimensional or not.
//!
//! Construction is deterministic for a fixed input order: split pivots
//! come from a two-scan farthest-point heuristic seeded at the lowest id,
//! with all ties broken toward the lower id, so repeated builds (and
//! therefore whole pipeline runs) are reproducible.
//!
//! Joins follow three speed-up rules: they return counts instead of
//! materialized pairs wherever counts suffice, they can be restricted to
//! an active subset of the queries, and fully covered subtrees are
//! accounted for by their stored sizes without descending further.

use rayon::prelude::*;

use crate::error::{McCatchError, Result};
use crate::metric::{lp_distance, MetricSpace};

const DEFAULT_LEAF_CAPACITY: usize = 32;

#[derive(Debug, Clone)]
struct LeafEntry {
    id: usize,
    /// Distance to the leaf's pivot, precomputed for triangle filtering.
    to_pivot: f64,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Internal {
        left: usize,
        right: usize,
    },
    Leaf {
        entries: Vec<LeafEntry>,
        /// Entry index of this leaf's first row in the coordinate cache.
        cache_start: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    pivot: usize,
    radius: f64,
    size: usize,
    kind: NodeKind,
}

/// Coordinate copies in leaf order for vector payloads, so the hot leaf
/// scans and pivot tests read contiguous memory instead of chasing
/// element ids. The cached rows are byte-identical to the space's, so
/// cached and uncached distance paths agree exactly.
#[derive(Debug)]
struct VectorCache {
    dim: usize,
    p: f64,
    leaf_coords: Vec<f64>,
    pivot_coords: Vec<f64>,
}

impl VectorCache {
    #[inline]
    fn pivot(&self, node: usize) -> &[f64] {
        &self.pivot_coords[node * self.dim..(node + 1) * self.dim]
    }

    #[inline]
    fn entry(&self, cache_start: usize, k: usize) -> &[f64] {
        &self.leaf_coords[(cache_start + k) * self.dim..(cache_start + k + 1) * self.dim]
    }
}

/// An immutable metric tree over a subset of a space's elements.
///
/// Read-only queries are safe from many threads; join work is
/// partitioned across threads by query element and the results are
/// independent of thread count.
#[derive(Debug)]
pub struct MetricTree {
    nodes: Vec<Node>,
    root: usize,
    ids: Vec<usize>,
    leaf_capacity: usize,
    vectors: Option<VectorCache>,
}

/// Per-query neighbor counts returned by the count-only joins, aligned
/// with the queried id sequence.
pub type CountJoinResult = Vec<usize>;

impl MetricTree {
    /// Builds a tree over all elements of `space` with the default leaf
    /// capacity.
    pub fn build(space: &MetricSpace) -> Result<Self> {
        Self::build_with_capacity(space, DEFAULT_LEAF_CAPACITY)
    }

    /// Builds a tree over all elements with an explicit leaf capacity.
    /// Correctness does not depend on the capacity; only performance does.
    pub fn build_with_capacity(space: &MetricSpace, leaf_capacity: usize) -> Result<Self> {
        let ids: Vec<usize> = (0..space.len()).collect();
        Self::build_subset(space, ids, leaf_capacity)
    }

    /// Builds a tree over an explicit id subset, used for the gelation
    /// join and the nearest-inlier searches.
    pub fn build_subset(
        space: &MetricSpace,
        mut ids: Vec<usize>,
        leaf_capacity: usize,
    ) -> Result<Self> {
        if ids.is_empty() {
            return Err(McCatchError::InvalidInput(
                "cannot build an index over an empty dataset".into(),
            ));
        }
        if leaf_capacity == 0 {
            return Err(McCatchError::Config(
                "leaf capacity must be positive".into(),
            ));
        }
        ids.sort_unstable();
        let mut builder = Builder {
            space,
            nodes: Vec::new(),
            leaf_capacity,
        };
        let pivot = ids[0];
        let root = builder.build_node(ids.clone(), pivot);
        let mut nodes = builder.nodes;
        let vectors = space.vector_params().map(|(dim, p)| {
            let mut leaf_coords = Vec::with_capacity(ids.len() * dim);
            let mut pivot_coords = Vec::with_capacity(nodes.len() * dim);
            for node in nodes.iter_mut() {
                pivot_coords.extend_from_slice(space.vector_row(node.pivot));
                if let NodeKind::Leaf {
                    entries,
                    cache_start,
                } = &mut node.kind
                {
                    *cache_start = leaf_coords.len() / dim;
                    for e in entries.iter() {
                        leaf_coords.extend_from_slice(space.vector_row(e.id));
                    }
                }
            }
            VectorCache {
                dim,
                p,
                leaf_coords,
                pivot_coords,
            }
        });
        Ok(Self {
            nodes,
            root,
            ids,
            leaf_capacity,
            vectors,
        })
    }

    /// Ids indexed by this tree, ascending.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Number of tree nodes (at most `2n`).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Estimates the dataset diameter from the tree top.
    ///
    /// When the root is a leaf the estimate is the exact maximum pairwise
    /// distance of its bucket. Otherwise it is the largest
    /// pivot-to-pivot distance between the root's children, inflated by
    /// both covering radii, which bounds the distance between any two
    /// elements drawn from distinct child subtrees.
    pub fn estimate_diameter(&self, space: &MetricSpace) -> Result<f64> {
        if self.len() < 2 {
            return Err(McCatchError::Degenerate(
                "diameter is undefined for fewer than two elements".into(),
            ));
        }
        let root = &self.nodes[self.root];
        let estimate = match &root.kind {
            NodeKind::Leaf { entries, .. } => {
                let mut max = 0.0f64;
                for i in 0..entries.len() {
                    for j in (i + 1)..entries.len() {
                        max = max.max(space.distance(entries[i].id, entries[j].id));
                    }
                }
                max
            }
            NodeKind::Internal { left, right } => {
                let l = &self.nodes[*left];
                let r = &self.nodes[*right];
                space.distance(l.pivot, r.pivot) + l.radius + r.radius
            }
        };
        if estimate <= 0.0 {
            return Err(McCatchError::Degenerate(
                "all elements coincide; no radii ladder is possible".into(),
            ));
        }
        Ok(estimate)
    }

    /// Counts indexed elements within `radius` of element `query`
    /// (inclusive boundary). The query element itself is counted when it
    /// is part of the tree.
    pub fn count_within(&self, space: &MetricSpace, query: usize, radius: f64) -> usize {
        match &self.vectors {
            Some(cache) => {
                let qrow = space.vector_row(query);
                let d = lp_distance(qrow, cache.pivot(self.root), cache.p);
                self.count_node_vec(qrow, cache, radius, self.root, d)
            }
            None => {
                let d = space.distance(query, self.nodes[self.root].pivot);
                self.count_node(space, query, radius, self.root, d)
            }
        }
    }

    fn count_node(
        &self,
        space: &MetricSpace,
        query: usize,
        radius: f64,
        node: usize,
        dist_to_pivot: f64,
    ) -> usize {
        let n = &self.nodes[node];
        if dist_to_pivot + n.radius <= radius {
            return n.size; // whole subtree inside the ball
        }
        if dist_to_pivot > radius + n.radius {
            return 0;
        }
        match &n.kind {
            NodeKind::Leaf { entries, .. } => {
                // Entries are sorted by pivot distance, so the triangle
                // filter |d(q,p) - d(e,p)| <= r reduces to a range scan.
                let lo = entries.partition_point(|e| e.to_pivot < dist_to_pivot - radius);
                let hi = entries.partition_point(|e| e.to_pivot <= dist_to_pivot + radius);
                entries[lo..hi]
                    .iter()
                    .filter(|e| space.distance(query, e.id) <= radius)
                    .count()
            }
            NodeKind::Internal { left, right } => {
                let dl = space.distance(query, self.nodes[*left].pivot);
                let dr = space.distance(query, self.nodes[*right].pivot);
                self.count_node(space, query, radius, *left, dl)
                    + self.count_node(space, query, radius, *right, dr)
            }
        }
    }

    fn count_node_vec(
        &self,
        qrow: &[f64],
        cache: &VectorCache,
        radius: f64,
        node: usize,
        dist_to_pivot: f64,
    ) -> usize {
        let n = &self.nodes[node];
        if dist_to_pivot + n.radius <= radius {
            return n.size;
        }
        if dist_to_pivot > radius + n.radius {
            return 0;
        }
        match &n.kind {
            NodeKind::Leaf {
                entries,
                cache_start,
            } => {
                let lo = entries.partition_point(|e| e.to_pivot < dist_to_pivot - radius);
                let hi = entries.partition_point(|e| e.to_pivot <= dist_to_pivot + radius);
                (lo..hi)
                    .filter(|&k| lp_distance(qrow, cache.entry(*cache_start, k), cache.p) <= radius)
                    .count()
            }
            NodeKind::Internal { left, right } => {
                let dl = lp_distance(qrow, cache.pivot(*left), cache.p);
                let dr = lp_distance(qrow, cache.pivot(*right), cache.p);
                self.count_node_vec(qrow, cache, radius, *left, dl)
                    + self.count_node_vec(qrow, cache, radius, *right, dr)
            }
        }
    }

    /// Collects the ids of indexed elements within `radius` of `query`
    /// (inclusive), in ascending id order.
    pub fn collect_within(&self, space: &MetricSpace, query: usize, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        match &self.vectors {
            Some(cache) => {
                let qrow = space.vector_row(query);
                let d = lp_distance(qrow, cache.pivot(self.root), cache.p);
                self.collect_node_vec(qrow, cache, radius, self.root, d, &mut out);
            }
            None => {
                let d = space.distance(query, self.nodes[self.root].pivot);
                self.collect_node(space, query, radius, self.root, d, &mut out);
            }
        }
        out.sort_unstable();
        out
    }

    fn collect_node(
        &self,
        space: &MetricSpace,
        query: usize,
        radius: f64,
        node: usize,
        dist_to_pivot: f64,
        out: &mut Vec<usize>,
    ) {
        let n = &self.nodes[node];
        if dist_to_pivot > radius + n.radius {
            return;
        }
        let covered = dist_to_pivot + n.radius <= radius;
        match &n.kind {
            NodeKind::Leaf { entries, .. } => {
                if covered {
                    out.extend(entries.iter().map(|e| e.id));
                    return;
                }
                let lo = entries.partition_point(|e| e.to_pivot < dist_to_pivot - radius);
                let hi = entries.partition_point(|e| e.to_pivot <= dist_to_pivot + radius);
                for e in &entries[lo..hi] {
                    if space.distance(query, e.id) <= radius {
                        out.push(e.id);
                    }
                }
            }
            NodeKind::Internal { left, right } => {
                let dl = space.distance(query, self.nodes[*left].pivot);
                let dr = space.distance(query, self.nodes[*right].pivot);
                self.collect_node(space, query, radius, *left, dl, out);
                self.collect_node(space, query, radius, *right, dr, out);
            }
        }
    }

    fn collect_node_vec(
        &self,
        qrow: &[f64],
        cache: &VectorCache,
        radius: f64,
        node: usize,
        dist_to_pivot: f64,
        out: &mut Vec<usize>,
    ) {
        let n = &self.nodes[node];
        if dist_to_pivot > radius + n.radius {
            return;
        }
        let covered = dist_to_pivot + n.radius <= radius;
        match &n.kind {
            NodeKind::Leaf {
                entries,
                cache_start,
            } => {
                if covered {
                    out.extend(entries.iter().map(|e| e.id));
                    return;
                }
                let lo = entries.partition_point(|e| e.to_pivot < dist_to_pivot - radius);
                let hi = entries.partition_point(|e| e.to_pivot <= dist_to_pivot + radius);
                for (k, e) in entries.iter().enumerate().take(hi).skip(lo) {
                    if lp_distance(qrow, cache.entry(*cache_start, k), cache.p) <= radius {
                        out.push(e.id);
                    }
                }
            }
            NodeKind::Internal { left, right } => {
                let dl = lp_distance(qrow, cache.pivot(*left), cache.p);
                let dr = lp_distance(qrow, cache.pivot(*right), cache.p);
                self.collect_node_vec(qrow, cache, radius, *left, dl, out);
                self.collect_node_vec(qrow, cache, radius, *right, dr, out);
            }
        }
    }

    /// Count-only range self-join: for each queried element, the number
    /// of indexed elements within `radius` (self included). `active`
    /// restricts the queries to a subset; counts align with the queried
    /// id sequence (`self.ids()` when `active` is `None`).
    pub fn count_self_join(
        &self,
        space: &MetricSpace,
        radius: f64,
        active: Option<&[usize]>,
    ) -> CountJoinResult {
        let queries: &[usize] = active.unwrap_or(&self.ids);
        queries
            .par_iter()
            .map(|&q| self.count_within(space, q, radius))
            .collect()
    }

    /// Count-only range cross-join: for each element indexed by
    /// `queries`, the number of elements of `self` within `radius`.
    pub fn count_cross_join(
        &self,
        space: &MetricSpace,
        queries: &MetricTree,
        radius: f64,
    ) -> CountJoinResult {
        self.count_for_queries(space, queries.ids(), radius)
    }

    /// Cross-join counts for an explicit query id list.
    pub fn count_for_queries(
        &self,
        space: &MetricSpace,
        queries: &[usize],
        radius: f64,
    ) -> CountJoinResult {
        queries
            .par_iter()
            .map(|&q| self.count_within(space, q, radius))
            .collect()
    }

    /// Pair-returning range self-join: every unordered pair `{i, j}` of
    /// distinct indexed elements with `d(i, j) <= radius`, reported
    /// exactly once as `(i, j)` with `i < j`, sorted ascending.
    pub fn pair_self_join(&self, space: &MetricSpace, radius: f64) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .ids
            .par_iter()
            .flat_map_iter(|&i| {
                self.collect_within(space, i, radius)
                    .into_iter()
                    .filter(move |&j| j > i)
                    .map(move |j| (i, j))
            })
            .collect();
        edges.sort_unstable();
        edges
    }
}

struct Builder<'a> {
    space: &'a MetricSpace,
    nodes: Vec<Node>,
    leaf_capacity: usize,
}

impl Builder<'_> {
    fn build_node(&mut self, ids: Vec<usize>, pivot: usize) -> usize {
        let radius = ids
            .iter()
            .map(|&i| self.space.distance(pivot, i))
            .fold(0.0f64, f64::max);
        let size = ids.len();
        if ids.len() <= self.leaf_capacity {
            let mut entries: Vec<LeafEntry> = ids
                .into_iter()
                .map(|id| LeafEntry {
                    id,
                    to_pivot: self.space.distance(pivot, id),
                })
                .collect();
            // Sorted by pivot distance for range-scan filtering; ties by
            // id keep the layout deterministic.
            entries.sort_by(|a, b| a.to_pivot.total_cmp(&b.to_pivot).then(a.id.cmp(&b.id)));
            self.nodes.push(Node {
                pivot,
                radius,
                size,
                kind: NodeKind::Leaf {
                    entries,
                    cache_start: 0,
                },
            });
            return self.nodes.len() - 1;
        }

        let (p1, p2) = self.split_pivots(&ids, pivot);
        let (side1, side2) = if self.space.distance(p1, p2) == 0.0 {
            // All candidates coincide; halve by order to keep the
            // recursion balanced.
            let mid = ids.len() / 2;
            (ids[..mid].to_vec(), ids[mid..].to_vec())
        } else {
            let mut side1 = Vec::new();
            let mut side2 = Vec::new();
            for &i in &ids {
                if i == p1 {
                    side1.push(i);
                } else if i == p2 {
                    side2.push(i);
                } else if self.space.distance(i, p1) <= self.space.distance(i, p2) {
                    side1.push(i);
                } else {
                    side2.push(i);
                }
            }
            (side1, side2)
        };

        let left_pivot = if side1.contains(&p1) { p1 } else { side1[0] };
        let right_pivot = if side2.contains(&p2) { p2 } else { side2[0] };
        let left = self.build_node(side1, left_pivot);
        let right = self.build_node(side2, right_pivot);
        self.nodes.push(Node {
            pivot,
            radius,
            size,
            kind: NodeKind::Internal { left, right },
        });
        self.nodes.len() - 1
    }

    /// Approximate farthest pair: scan from the node pivot to the
    /// farthest element, then from that element to its farthest. Ties go
    /// to the lower id so builds are reproducible.
    fn split_pivots(&self, ids: &[usize], pivot: usize) -> (usize, usize) {
        let p1 = self.farthest_from(ids, pivot);
        let p2 = self.farthest_from(ids, p1);
        (p1, p2)
    }

    fn farthest_from(&self, ids: &[usize], from: usize) -> usize {
        let mut best = ids[0];
        let mut best_d = f64::NEG_INFINITY;
        for &i in ids {
            if i == from {
                continue;
            }
            let d = self.space.distance(from, i);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}
