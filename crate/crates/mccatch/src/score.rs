//! Anomaly scores and the end-to-end detection pipeline.
//!
//! A microcluster's score is the per-member cost, in bits, of describing
//! the cluster relative to its nearest inlier: store the cardinality,
//! the inlier's identifier, the bridge to the closest member, and one
//! average-sized hop per remaining member. Larger bridges and smaller
//! cardinalities both raise the cost per member, which is exactly the
//! ranking the axioms ask for. Per-point scores reuse the same currency
//! on each element's own distance to the nearest inlier.

use crate::detect::{
    code_length, compute_cutoff, gel_microclusters, spot_outliers, Cutoff, Microcluster,
    NnDistanceHistogram, OutlierPartition,
};
use crate::error::{McCatchError, Result};
use crate::index::MetricTree;
use crate::metric::MetricSpace;
use crate::oracle::{
    build_oracle_plot, neighbor_profiles, NeighborProfiles, OraclePlot, RadiiSchedule,
};

/// Hyperparameters of the pipeline. The defaults are the hands-off
/// configuration used for every dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct McCatchConfig {
    /// Number of radii `a` in the ladder.
    pub num_radii: usize,
    /// Maximum plateau slope `b`.
    pub max_slope: f64,
    /// Maximum microcluster cardinality as a fraction of `n`;
    /// `c = max(1, ceil(n * fraction))`.
    pub cardinality_fraction: f64,
    /// Leaf capacity of the metric trees.
    pub leaf_capacity: usize,
}

impl Default for McCatchConfig {
    fn default() -> Self {
        Self {
            num_radii: 15,
            max_slope: 0.1,
            cardinality_fraction: 0.1,
            leaf_capacity: 32,
        }
    }
}

impl McCatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_radii < 2 {
            return Err(McCatchError::Config(format!(
                "number of radii must be at least 2, got {}",
                self.num_radii
            )));
        }
        if self.max_slope.is_nan() || self.max_slope < 0.0 || !self.max_slope.is_finite() {
            return Err(McCatchError::Config(format!(
                "maximum plateau slope must be a nonnegative finite real, got {}",
                self.max_slope
            )));
        }
        if !(self.cardinality_fraction > 0.0 && self.cardinality_fraction <= 1.0) {
            return Err(McCatchError::Config(format!(
                "cardinality fraction must lie in (0, 1], got {}",
                self.cardinality_fraction
            )));
        }
        if self.leaf_capacity == 0 {
            return Err(McCatchError::Config(
                "leaf capacity must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Maximum microcluster cardinality `c` for a dataset of `n` elements.
    pub fn max_cardinality(&self, n: usize) -> usize {
        (((n as f64) * self.cardinality_fraction).ceil() as usize).max(1)
    }
}

/// Distances to the nearest inlier, one per element, on the grid
/// `{0} ∪ R` for outliers and equal to the 1NN Distance for inliers.
///
/// Outliers are resolved by cross-joining the still-unresolved ones
/// against a tree over the inliers at each radius in ascending order:
/// the first radius that sees an inlier pins `dni = r_{e-1}`, with
/// `r_0 = 0`; anything never resolved gets `r_a`.
pub fn nearest_inlier_distances(
    space: &MetricSpace,
    outliers: &[usize],
    schedule: &RadiiSchedule,
    plot: &OraclePlot,
    leaf_capacity: usize,
) -> Result<Vec<f64>> {
    let n = space.len();
    let mut is_outlier = vec![false; n];
    for &i in outliers {
        is_outlier[i] = true;
    }
    let inliers: Vec<usize> = (0..n).filter(|&i| !is_outlier[i]).collect();
    if inliers.is_empty() {
        return Err(McCatchError::Degenerate(
            "every element was flagged as an outlier; scores are undefined".into(),
        ));
    }

    let mut dni = vec![0.0f64; n];
    for &i in &inliers {
        dni[i] = plot.x[i];
    }
    if outliers.is_empty() {
        return Ok(dni);
    }

    let inlier_tree = MetricTree::build_subset(space, inliers, leaf_capacity)?;
    let mut active: Vec<usize> = outliers.to_vec();
    for e in 1..=schedule.len() {
        if active.is_empty() {
            break;
        }
        let counts = inlier_tree.count_for_queries(space, &active, schedule.radius(e));
        let mut unresolved = Vec::with_capacity(active.len());
        for (k, &i) in active.iter().enumerate() {
            if counts[k] > 0 {
                dni[i] = if e == 1 { 0.0 } else { schedule.radius(e - 1) };
            } else {
                unresolved.push(i);
            }
        }
        active = unresolved;
    }
    for &i in &active {
        dni[i] = schedule.last();
    }
    Ok(dni)
}

/// Score of one microcluster from its cardinality, the dataset size, its
/// bridge length `g`, and its members' mean 1NN Distance, all in units
/// of the transformation cost `t` where distances are involved.
pub fn score_microcluster(
    cardinality: usize,
    n: usize,
    bridge_length: f64,
    mean_1nn: f64,
    transformation_cost: f64,
    r1: f64,
) -> f64 {
    debug_assert!(cardinality >= 1);
    let stored_cardinality = code_length(cardinality as f64);
    let stored_inlier_id = code_length(n as f64);
    let bridge = transformation_cost * code_length(bridge_length / r1);
    let hop = transformation_cost * code_length(1.0 + (mean_1nn / r1).ceil());
    (stored_cardinality + stored_inlier_id + bridge + (cardinality - 1) as f64 * hop)
        / cardinality as f64
}

/// Per-point scores: the cost of describing each element in terms of its
/// nearest inlier. Nondecreasing in the distance.
pub fn score_points(dni: &[f64], r1: f64) -> Vec<f64> {
    dni.iter()
        .map(|&d| code_length(1.0 + (d / r1).ceil()))
        .collect()
}

/// A microcluster with its reporting attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMicrocluster {
    /// Member element ids, ascending.
    pub members: Vec<usize>,
    /// True when gelled out of the neighborhood graph over `M`.
    pub grouped: bool,
    /// Bridge's Length: the smallest member distance to a nearest inlier.
    pub bridge_length: f64,
    /// Mean 1NN Distance of the members.
    pub mean_1nn: f64,
    pub score: f64,
}

impl ScoredMicrocluster {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }
}

/// Full output of one pipeline run.
#[derive(Debug)]
pub struct Detection {
    pub diameter: f64,
    pub schedule: RadiiSchedule,
    pub max_cardinality: usize,
    pub profiles: NeighborProfiles,
    pub plot: OraclePlot,
    pub histogram: NnDistanceHistogram,
    pub cutoff: Cutoff,
    pub partition: OutlierPartition,
    /// Microclusters ranked most strange first (descending score, ties
    /// toward the smallest member id).
    pub microclusters: Vec<ScoredMicrocluster>,
    /// 1-based rank of the microcluster each element belongs to, if any.
    pub assignment: Vec<Option<usize>>,
    /// Per-point anomaly scores `w`.
    pub point_scores: Vec<f64>,
}

/// Runs the whole pipeline: index, radii ladder, Oracle plot, cutoff,
/// gelation, and scoring. The microclusters come back ranked most
/// strange first together with the per-point scores.
pub fn run_mccatch(space: &MetricSpace, config: &McCatchConfig) -> Result<Detection> {
    config.validate()?;
    let n = space.len();
    if n < 2 {
        return Err(McCatchError::Degenerate(format!(
            "need at least 2 elements, got {n}"
        )));
    }
    let tree = MetricTree::build_with_capacity(space, config.leaf_capacity)?;
    let diameter = tree.estimate_diameter(space)?;
    let schedule = RadiiSchedule::new(diameter, config.num_radii)?;
    let max_cardinality = config.max_cardinality(n);

    let profiles = neighbor_profiles(&tree, space, &schedule, max_cardinality);
    let plot = build_oracle_plot(&profiles, &schedule, config.max_slope, max_cardinality);
    let histogram = NnDistanceHistogram::from_plot(&plot, &schedule);
    let cutoff = compute_cutoff(&histogram, &schedule)?;
    let partition = spot_outliers(&plot, cutoff);
    let clusters = gel_microclusters(space, &partition, &plot, &schedule, config.leaf_capacity)?;

    let dni = nearest_inlier_distances(
        space,
        &partition.outliers,
        &schedule,
        &plot,
        config.leaf_capacity,
    )?;
    let (microclusters, assignment) =
        score_and_rank(space, &clusters, &plot, &dni, schedule.first(), n);
    let point_scores = score_points(&dni, schedule.first());

    Ok(Detection {
        diameter,
        schedule,
        max_cardinality,
        profiles,
        plot,
        histogram,
        cutoff,
        partition,
        microclusters,
        assignment,
        point_scores,
    })
}

/// Scores the gelled clusters and fixes the reporting order.
pub(crate) fn score_and_rank(
    space: &MetricSpace,
    clusters: &[Microcluster],
    plot: &OraclePlot,
    dni: &[f64],
    r1: f64,
    n: usize,
) -> (Vec<ScoredMicrocluster>, Vec<Option<usize>>) {
    let t = space.transformation_cost();
    let mut scored: Vec<ScoredMicrocluster> = clusters
        .iter()
        .map(|mc| {
            let bridge_length = mc
                .members
                .iter()
                .map(|&i| dni[i])
                .fold(f64::INFINITY, f64::min);
            let mean_1nn =
                mc.members.iter().map(|&i| plot.x[i]).sum::<f64>() / mc.members.len() as f64;
            let score = score_microcluster(mc.members.len(), n, bridge_length, mean_1nn, t, r1);
            ScoredMicrocluster {
                members: mc.members.clone(),
                grouped: mc.grouped,
                bridge_length,
                mean_1nn,
                score,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });

    let mut assignment = vec![None; n];
    for (rank0, mc) in scored.iter().enumerate() {
        for &i in &mc.members {
            assignment[i] = Some(rank0 + 1);
        }
    }
    (scored, assignment)
}
