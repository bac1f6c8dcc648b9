//! MDL machinery and microcluster gelation: universal code lengths, the
//! compression cost of integer sets, the data-driven cutoff that splits
//! outliers from inliers, and the grouping of flagged outliers into
//! microclusters.

use crate::error::{McCatchError, Result};
use crate::index::MetricTree;
use crate::metric::MetricSpace;
use crate::oracle::{OraclePlot, RadiiSchedule};

/// Universal code length for integers, extended to the reals: the sum of
/// the positive terms of `log2(z), log2(log2(z)), ...`. Arguments at or
/// below one cost nothing, which keeps zero distances and zero deviations
/// total.
pub fn code_length(z: f64) -> f64 {
    let mut total = 0.0;
    let mut term = z;
    loop {
        term = term.log2();
        if term <= 0.0 || !term.is_finite() {
            return total;
        }
        total += term;
    }
}

/// Cost of compressing a set of nonnegative integers: its cardinality,
/// its rounded-up average, and each value's rounded-up deviation from the
/// average, all under the universal code length. Ones are added where a
/// value may be zero.
pub fn compression_cost(values: &[u64]) -> f64 {
    assert!(!values.is_empty(), "compression cost of an empty set");
    let mean = values.iter().sum::<u64>() as f64 / values.len() as f64;
    let mut cost = code_length(values.len() as f64) + code_length(1.0 + mean.ceil());
    for &v in values {
        cost += code_length(1.0 + (v as f64 - mean).abs().ceil());
    }
    cost
}

/// Histogram of 1NN Distances. Bin `e >= 1` counts elements whose `x`
/// value quantizes to grid index `e`; bin 0 holds the elements with
/// `x < r_1`, zero included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NnDistanceHistogram {
    pub bins: Vec<u64>,
}

impl NnDistanceHistogram {
    /// Tallies the plot's `x` values onto the radii grid.
    pub fn from_plot(plot: &OraclePlot, schedule: &RadiiSchedule) -> Self {
        let mut bins = vec![0u64; schedule.len() + 1];
        for &x in &plot.x {
            bins[schedule.bin_index(x)] += 1;
        }
        Self { bins }
    }

    /// Serializes as TSV rows of `bin_index, radius, count`; bin 0 has no
    /// grid radius and reports 0.
    pub fn to_tsv(&self, schedule: &RadiiSchedule) -> String {
        let mut out = String::from("bin_index\tradius\tcount\n");
        for (e, &count) in self.bins.iter().enumerate() {
            let radius = if e == 0 { 0.0 } else { schedule.radius(e) };
            out.push_str(&format!("{e}\t{}\t{count}\n", crate::fmt_f64(radius)));
        }
        out
    }
}

/// The chosen cutoff: a member of the radii ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    /// 1-based ladder index of the cutoff radius.
    pub index: usize,
    pub value: f64,
}

/// Picks the cutoff by two-partition MDL over the histogram.
///
/// The mode bin anchors the search (elements below `r_1` count toward
/// bin 1 for mode selection only). Every cut position strictly above the
/// mode is scored by the summed compression cost of the two partitions
/// it induces; the cheapest wins and ties go to the smaller index. A
/// mode at the top of the ladder leaves no room to cut and yields
/// `d = r_a`, flagging nothing.
pub fn compute_cutoff(hist: &NnDistanceHistogram, schedule: &RadiiSchedule) -> Result<Cutoff> {
    let a = schedule.len();
    debug_assert_eq!(hist.bins.len(), a + 1);
    if hist.bins.iter().all(|&b| b == 0) {
        return Err(McCatchError::Degenerate(
            "cannot choose a cutoff from an all-zero histogram".into(),
        ));
    }
    let mode = mode_bin(&hist.bins);
    if mode == a {
        return Ok(Cutoff {
            index: a,
            value: schedule.radius(a),
        });
    }
    let mut best_e = 0usize;
    let mut best_cost = f64::INFINITY;
    for e in (mode + 1)..=a {
        let cost = compression_cost(&hist.bins[mode..e]) + compression_cost(&hist.bins[e..=a]);
        if cost < best_cost {
            best_cost = cost;
            best_e = e;
        }
    }
    Ok(Cutoff {
        index: best_e,
        value: schedule.radius(best_e),
    })
}

/// Tallest bin among `1..=a` with bin 0 merged into bin 1; ties go to
/// the smaller index.
fn mode_bin(bins: &[u64]) -> usize {
    let mut best = 1usize;
    let mut best_count = bins[0] + bins[1];
    for (e, &count) in bins.iter().enumerate().skip(2) {
        if count > best_count {
            best_count = count;
            best = e;
        }
    }
    best
}

/// The outlier split induced by a cutoff.
#[derive(Debug, Clone)]
pub struct OutlierPartition {
    /// All outliers `A`: elements with `x >= d` or `y >= d`, ascending.
    pub outliers: Vec<usize>,
    /// Candidates `M` for nonsingleton microclusters: the subset of `A`
    /// with `y >= d`, ascending.
    pub grouped: Vec<usize>,
    pub cutoff: Cutoff,
}

/// Flags every element whose 1NN Distance or Group 1NN Distance reaches
/// the cutoff. Both comparisons are inclusive. An empty result is valid.
pub fn spot_outliers(plot: &OraclePlot, cutoff: Cutoff) -> OutlierPartition {
    let d = cutoff.value;
    let mut outliers = Vec::new();
    let mut grouped = Vec::new();
    for i in 0..plot.len() {
        if plot.x[i] >= d || plot.y[i] >= d {
            outliers.push(i);
            if plot.y[i] >= d {
                grouped.push(i);
            }
        }
    }
    OutlierPartition {
        outliers,
        grouped,
        cutoff,
    }
}

/// One microcluster: a maximal set of outliers grouped together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microcluster {
    /// Member element ids, ascending.
    pub members: Vec<usize>,
    /// True when the cluster came out of the neighborhood graph over
    /// `M`; false for the singletons contributed by `A \ M`.
    pub grouped: bool,
}

/// Gels flagged outliers into disjoint microclusters.
///
/// Elements of `M` are joined at the smallest radius strictly above the
/// largest 1NN Distance seen in `M`, so a point and its nearest neighbor
/// land in the same cluster; connected components of that neighborhood
/// graph become the grouped microclusters. Every remaining outlier is a
/// cluster of itself.
pub fn gel_microclusters(
    space: &MetricSpace,
    partition: &OutlierPartition,
    plot: &OraclePlot,
    schedule: &RadiiSchedule,
    leaf_capacity: usize,
) -> Result<Vec<Microcluster>> {
    let edges = if partition.grouped.is_empty() {
        Vec::new()
    } else {
        let radius = gelation_radius(&partition.grouped, plot, schedule);
        let tree = MetricTree::build_subset(space, partition.grouped.clone(), leaf_capacity)?;
        tree.pair_self_join(space, radius)
    };
    Ok(gel_from_edges(partition, &edges))
}

/// Join radius for the gelation graph: the smallest ladder radius
/// strictly above the largest 1NN Distance seen in `M`.
pub(crate) fn gelation_radius(
    grouped: &[usize],
    plot: &OraclePlot,
    schedule: &RadiiSchedule,
) -> f64 {
    let x_up = grouped.iter().map(|&i| plot.x[i]).fold(0.0f64, f64::max);
    let e = schedule.bin_index(x_up);
    schedule.radius((e + 1).min(schedule.len()))
}

/// Forms the microclusters from a precomputed edge list over `M`:
/// connected components first (ordered by smallest member), then one
/// singleton per leftover outlier.
pub(crate) fn gel_from_edges(
    partition: &OutlierPartition,
    edges: &[(usize, usize)],
) -> Vec<Microcluster> {
    let mut clusters = Vec::new();

    if !partition.grouped.is_empty() {
        let members = &partition.grouped;
        let index_of = |id: usize| members.binary_search(&id).expect("edge endpoint in M");
        let mut uf = UnionFind::new(members.len());
        for &(u, v) in edges {
            uf.union(index_of(u), index_of(v));
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
        for (k, &id) in members.iter().enumerate() {
            groups[uf.find(k)].push(id);
        }
        for group in groups.into_iter().filter(|g| !g.is_empty()) {
            clusters.push(Microcluster {
                members: group,
                grouped: true,
            });
        }
        // Ascending member lists come out of the scan; order clusters by
        // their smallest member for determinism.
        clusters.sort_by_key(|c| c.members[0]);
    }

    for &i in &partition.outliers {
        if partition.grouped.binary_search(&i).is_err() {
            clusters.push(Microcluster {
                members: vec![i],
                grouped: false,
            });
        }
    }
    clusters
}

/// Disjoint sets with union by size and path halving; processing order
/// is fixed by the caller, so the resulting components are deterministic.
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut x = x;
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, x: usize, y: usize) {
        let mut rx = self.find(x);
        let mut ry = self.find(y);
        if rx == ry {
            return;
        }
        // Keep the lower index as the representative on equal sizes.
        if self.size[rx] < self.size[ry] || (self.size[rx] == self.size[ry] && ry < rx) {
            std::mem::swap(&mut rx, &mut ry);
        }
        self.parent[ry] = rx;
        self.size[rx] += self.size[ry];
    }
}
