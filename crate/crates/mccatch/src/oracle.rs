//! Neighbor-count profiles across a radii ladder, plateau extraction,
//! and the Oracle plot.
//!
//! For each element the pipeline tracks how its neighbor count grows as
//! the query radius doubles. Ranges of radii where the count stays
//! (quasi-)flat are plateaus; their lengths approximate distances. The
//! first plateau length is the element's 1NN Distance `x`, the longest
//! eligible middle plateau length is its Group 1NN Distance `y`, and the
//! Oracle plot is the per-element pair `(x, y)` that everything
//! downstream reads.

use rayon::prelude::*;

use crate::error::{McCatchError, Result};
use crate::index::MetricTree;
use crate::metric::MetricSpace;

/// Geometric ladder of query radii `r_1 .. r_a`, each double the
/// previous, ending exactly at the diameter estimate `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiSchedule {
    radii: Vec<f64>,
}

impl RadiiSchedule {
    /// Builds the ladder `r_e = l / 2^(a-e)` for `e = 1..=a`.
    pub fn new(diameter: f64, num_radii: usize) -> Result<Self> {
        if num_radii < 2 {
            return Err(McCatchError::Config(format!(
                "the radii ladder needs at least 2 radii, got {num_radii}"
            )));
        }
        if diameter.is_nan() || diameter <= 0.0 || !diameter.is_finite() {
            return Err(McCatchError::Degenerate(format!(
                "diameter must be a positive finite real, got {diameter}"
            )));
        }
        // Scaling by a power of two is exact, so r_{e+1} == 2 * r_e holds
        // bit for bit and r_a == l.
        let radii = (0..num_radii)
            .map(|k| diameter * (0.5f64).powi((num_radii - 1 - k) as i32))
            .collect();
        Ok(Self { radii })
    }

    /// Number of radii `a`.
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radius `r_e` for a 1-based index `e` in `1..=a`.
    pub fn radius(&self, e: usize) -> f64 {
        self.radii[e - 1]
    }

    /// Smallest radius `r_1`.
    pub fn first(&self) -> f64 {
        self.radii[0]
    }

    /// Largest radius `r_a`, the diameter estimate.
    pub fn last(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.radii
    }

    /// Grid quantization for real-valued plateau lengths: the largest
    /// `e` with `r_e <= x`, or 0 when `x < r_1`. Plateau lengths are
    /// generally not members of the ladder, so operations that index
    /// radii by an `x` value go through this bin.
    pub fn bin_index(&self, x: f64) -> usize {
        // The count of radii at most x is exactly the 1-based index of
        // the largest such radius, and 0 when x < r_1.
        self.radii.partition_point(|&r| r <= x)
    }
}

/// Per-element neighbor counts, one entry per radius from `r_1` upward.
///
/// Profiles are sparse at the top: an entry at radius `r_e` exists only
/// while the previous count stayed within the cardinality cap `c`, and no
/// join runs for `r_a` since every element is a neighbor of every other
/// at the diameter; that count is pinned to `n` directly.
#[derive(Debug, Clone)]
pub struct NeighborProfiles {
    counts: Vec<Vec<usize>>,
}

impl NeighborProfiles {
    pub(crate) fn from_raw(counts: Vec<Vec<usize>>) -> Self {
        Self { counts }
    }

    /// Known counts of element `i`, contiguous from `r_1`.
    pub fn counts(&self, i: usize) -> &[usize] {
        &self.counts[i]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts neighbors for every element across the ladder, querying at
/// each radius only the elements whose previous count was at most `c`.
pub fn neighbor_profiles(
    tree: &MetricTree,
    space: &MetricSpace,
    schedule: &RadiiSchedule,
    max_cardinality: usize,
) -> NeighborProfiles {
    let n = tree.len();
    debug_assert_eq!(n, space.len(), "profile tree must cover the whole dataset");
    let a = schedule.len();
    let mut counts: Vec<Vec<usize>> = vec![Vec::new(); n];

    let first = tree.count_self_join(space, schedule.radius(1), None);
    let mut active: Vec<usize> = Vec::with_capacity(n);
    for (i, &c1) in first.iter().enumerate() {
        counts[i].push(c1);
        if c1 <= max_cardinality {
            active.push(i);
        }
    }

    for e in 2..a {
        if active.is_empty() {
            break;
        }
        let round = tree.count_self_join(space, schedule.radius(e), Some(&active));
        let mut retained = Vec::with_capacity(active.len());
        for (k, &i) in active.iter().enumerate() {
            counts[i].push(round[k]);
            if round[k] <= max_cardinality {
                retained.push(i);
            }
        }
        active = retained;
    }

    // Small-radii-only rule: r_a equals the diameter estimate, so the
    // count there is n by construction.
    for &i in &active {
        counts[i].push(n);
    }

    NeighborProfiles { counts }
}

/// A maximal radii range over which an element's neighbor count stays
/// within the slope bound. Indices are 1-based positions on the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub start: usize,
    pub end: usize,
    /// Neighbor count at the plateau start.
    pub height: usize,
    /// `r_end - r_start`.
    pub length: f64,
}

/// Extracts all plateaus of one element from its known counts.
///
/// The slope between adjacent radii is measured on log-log axes; a
/// plateau is a maximal run of steps with slope at most `b` spanning at
/// least two radii. Plateaus taller than `c` describe ordinary clusters
/// and are excused (dropped). Counts past the sparsity cut are unknown,
/// so the scan treats the last known index as the end of the data.
pub fn find_plateaus(
    counts: &[usize],
    schedule: &RadiiSchedule,
    max_slope: f64,
    max_cardinality: usize,
) -> Vec<Plateau> {
    let k = counts.len();
    let mut plateaus = Vec::new();
    if k < 2 {
        return plateaus;
    }
    let mut run_start = 1usize; // 1-based ladder index
    for j in 1..k {
        let slope = ((counts[j] as f64).ln() - (counts[j - 1] as f64).ln())
            / (schedule.radius(j + 1).ln() - schedule.radius(j).ln());
        if slope > max_slope {
            if j > run_start {
                push_plateau(
                    &mut plateaus,
                    counts,
                    schedule,
                    run_start,
                    j,
                    max_cardinality,
                );
            }
            run_start = j + 1;
        }
    }
    if k > run_start {
        push_plateau(
            &mut plateaus,
            counts,
            schedule,
            run_start,
            k,
            max_cardinality,
        );
    }
    plateaus
}

fn push_plateau(
    out: &mut Vec<Plateau>,
    counts: &[usize],
    schedule: &RadiiSchedule,
    start: usize,
    end: usize,
    max_cardinality: usize,
) {
    let height = counts[start - 1];
    if height > max_cardinality {
        return; // excused: too tall to be a microcluster
    }
    out.push(Plateau {
        start,
        end,
        height,
        length: schedule.radius(end) - schedule.radius(start),
    });
}

/// Picks the middle plateau: the longest one with height above one that
/// does not end at the top of the ladder. Equal lengths go to the
/// earlier start.
fn select_middle(plateaus: &[Plateau], num_radii: usize) -> Option<&Plateau> {
    let mut best: Option<&Plateau> = None;
    for p in plateaus {
        if p.height <= 1 || p.end == num_radii {
            continue;
        }
        match best {
            Some(b) if p.length <= b.length => {}
            _ => best = Some(p),
        }
    }
    best
}

/// The Oracle plot: per element, the 1NN Distance `x`, the Group 1NN
/// Distance `y`, and the grid indices of the plateaus they came from.
#[derive(Debug, Clone)]
pub struct OraclePlot {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// End index of the height-one plateau, when one exists.
    pub first_end: Vec<Option<usize>>,
    /// Start and end indices of the chosen middle plateau.
    pub middle: Vec<Option<(usize, usize)>>,
}

impl OraclePlot {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Serializes the plot as TSV with one row per element. Absent
    /// plateaus leave their index fields empty.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("id\tx\ty\tfirst_end_index\tmiddle_start_index\tmiddle_end_index\n");
        for i in 0..self.len() {
            let first = self.first_end[i].map(|e| e.to_string()).unwrap_or_default();
            let (ms, me) = match self.middle[i] {
                Some((s, e)) => (s.to_string(), e.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                i,
                crate::fmt_f64(self.x[i]),
                crate::fmt_f64(self.y[i]),
                first,
                ms,
                me
            ));
        }
        out
    }
}

/// Builds the Oracle plot from the neighbor profiles.
///
/// `x` is zero when the element already has neighbors at `r_1` (the
/// ladder cannot resolve its first plateau) or when no height-one
/// plateau interval exists; `y` is zero when no middle plateau exists.
/// Per-element plot row: `(x, y, first plateau end, middle plateau)`.
type PlotRow = (f64, f64, Option<usize>, Option<(usize, usize)>);

pub fn build_oracle_plot(
    profiles: &NeighborProfiles,
    schedule: &RadiiSchedule,
    max_slope: f64,
    max_cardinality: usize,
) -> OraclePlot {
    let a = schedule.len();
    let rows: Vec<PlotRow> = (0..profiles.len())
        .into_par_iter()
        .map(|i| {
            let counts = profiles.counts(i);
            let plateaus = find_plateaus(counts, schedule, max_slope, max_cardinality);
            let first = plateaus.iter().find(|p| p.height == 1);
            let (x, first_end) = match first {
                Some(p) if counts[0] == 1 => (p.length, Some(p.end)),
                _ => (0.0, None),
            };
            let (y, middle) = match select_middle(&plateaus, a) {
                Some(p) => (p.length, Some((p.start, p.end))),
                None => (0.0, None),
            };
            (x, y, first_end, middle)
        })
        .collect();

    let mut plot = OraclePlot {
        x: Vec::with_capacity(rows.len()),
        y: Vec::with_capacity(rows.len()),
        first_end: Vec::with_capacity(rows.len()),
        middle: Vec::with_capacity(rows.len()),
    };
    for (x, y, f, m) in rows {
        plot.x.push(x);
        plot.y.push(y);
        plot.first_end.push(f);
        plot.middle.push(m);
    }
    plot
}
