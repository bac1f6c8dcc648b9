//! Evaluation harness: ranking metrics, the axiom win-rate protocol, the
//! runtime scaling benchmark, and a quadratic reference pipeline that
//! serves as the equivalence oracle for the indexed one.

use std::time::Instant;

use rayon::prelude::*;

use crate::detect::{
    compute_cutoff, gel_from_edges, gelation_radius, spot_outliers, NnDistanceHistogram,
};
use crate::error::{McCatchError, Result};
use crate::metric::MetricSpace;
use crate::oracle::{build_oracle_plot, NeighborProfiles, RadiiSchedule};
use crate::score::{
    run_mccatch, score_and_rank, score_points, Detection, McCatchConfig, ScoredMicrocluster,
};
use crate::synth::{
    generate_axiom_scenario, generate_cloud, AxiomKind, CloudKind, CloudSpec, InlierShape, Label,
    ScenarioSpec, SplitMix64,
};

/// Per-element anomaly scores with their ground-truth labels
/// (`true` marks an outlier).
#[derive(Debug, Clone)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledScores {
    fn class_counts(&self) -> Result<(usize, usize)> {
        assert_eq!(self.scores.len(), self.labels.len());
        let positives = self.labels.iter().filter(|&&l| l).count();
        let negatives = self.labels.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(McCatchError::InvalidInput(
                "ranking metrics need both classes present".into(),
            ));
        }
        Ok((positives, negatives))
    }

    /// Indices sorted by descending score; the relative order inside a
    /// tied block never matters to the metrics below.
    fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }
}

/// Area under the ROC curve via the rank statistic; tied scores
/// contribute one half.
pub fn auroc(ls: &LabeledScores) -> Result<f64> {
    let (positives, negatives) = ls.class_counts()?;
    let order = ls.order_desc();
    let mut rank_sum = 0.0f64; // ascending ranks of the positives
    let n = order.len();
    let mut block = 0;
    while block < n {
        let mut end = block;
        while end < n && ls.scores[order[end]] == ls.scores[order[block]] {
            end += 1;
        }
        // Descending position p gets ascending rank n - p; average over
        // the tied block.
        let avg_rank = (2 * n - block - end + 1) as f64 / 2.0;
        for &i in &order[block..end] {
            if ls.labels[i] {
                rank_sum += avg_rank;
            }
        }
        block = end;
    }
    let u = rank_sum - (positives * (positives + 1)) as f64 / 2.0;
    Ok(u / (positives as f64 * negatives as f64))
}

/// Average precision over the precision-recall curve, stepping through
/// distinct score thresholds so that tied blocks contribute a single
/// segment at the block's joint precision.
pub fn average_precision(ls: &LabeledScores) -> Result<f64> {
    let (positives, _) = ls.class_counts()?;
    let order = ls.order_desc();
    let n = order.len();
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut block = 0;
    while block < n {
        let mut end = block;
        let mut block_tp = 0usize;
        while end < n && ls.scores[order[end]] == ls.scores[order[block]] {
            block_tp += usize::from(ls.labels[order[end]]);
            end += 1;
        }
        let prev_tp = tp;
        tp += block_tp;
        seen = end;
        let recall_gain = (tp - prev_tp) as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += recall_gain * precision;
        block = end;
    }
    debug_assert_eq!(seen, n);
    Ok(ap)
}

/// Largest F1 over all score thresholds (predicting the elements at or
/// above the threshold as outliers).
pub fn max_f1(ls: &LabeledScores) -> Result<f64> {
    let (positives, _) = ls.class_counts()?;
    let order = ls.order_desc();
    let n = order.len();
    let mut best = 0.0f64;
    let mut tp = 0usize;
    let mut block = 0;
    while block < n {
        let mut end = block;
        while end < n && ls.scores[order[end]] == ls.scores[order[block]] {
            tp += usize::from(ls.labels[order[end]]);
            end += 1;
        }
        let fp = end - tp;
        let fnn = positives - tp;
        let f1 = 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64;
        best = best.max(f1);
        block = end;
    }
    Ok(best)
}

/// Result of one axiom trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub recovered_red: bool,
    pub recovered_green: bool,
    /// Green scored strictly above red.
    pub ordered: bool,
}

impl TrialOutcome {
    pub fn win(&self) -> bool {
        self.recovered_red && self.recovered_green && self.ordered
    }
}

/// Minimum member-set overlap (Jaccard) for a planted cluster to count
/// as recovered; boundary members may fall into a neighboring grid bin,
/// so exact recovery is not demanded.
pub const RECOVERY_OVERLAP: f64 = 0.8;

/// Runs the pipeline on one generated scenario and checks both planted
/// clusters against the detected microclusters.
pub fn axiom_trial(spec: &ScenarioSpec, config: &McCatchConfig) -> Result<TrialOutcome> {
    let scenario = generate_axiom_scenario(spec)?;
    let space = MetricSpace::vectors(scenario.points, 2.0)?;
    let detection = run_mccatch(&space, config)?;
    let red = labeled_ids(&scenario.labels, Label::RedMc);
    let green = labeled_ids(&scenario.labels, Label::GreenMc);
    let red_match = best_match(&detection.microclusters, &red);
    let green_match = best_match(&detection.microclusters, &green);
    let recovered_red = red_match
        .map(|(_, j)| j >= RECOVERY_OVERLAP)
        .unwrap_or(false);
    let recovered_green = green_match
        .map(|(_, j)| j >= RECOVERY_OVERLAP)
        .unwrap_or(false);
    let ordered = match (green_match, red_match) {
        (Some((g, _)), Some((r, _))) => g.score > r.score,
        _ => false,
    };
    Ok(TrialOutcome {
        recovered_red,
        recovered_green,
        ordered,
    })
}

fn labeled_ids(labels: &[Label], which: Label) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == which)
        .map(|(i, _)| i)
        .collect()
}

/// Detected microcluster with the highest Jaccard overlap against a
/// planted member set.
fn best_match<'a>(
    detected: &'a [ScoredMicrocluster],
    planted: &[usize],
) -> Option<(&'a ScoredMicrocluster, f64)> {
    detected
        .iter()
        .map(|mc| (mc, jaccard(&mc.members, planted)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Win-rate tally over seeded trials of one axiom/shape cell.
#[derive(Debug, Clone)]
pub struct WinRateReport {
    pub axiom: AxiomKind,
    pub shape: InlierShape,
    pub trials: usize,
    pub wins: usize,
}

impl WinRateReport {
    pub fn rate(&self) -> f64 {
        self.wins as f64 / self.trials as f64
    }

    pub fn tsv_header() -> &'static str {
        "axiom\tshape\ttrials\twins\twin_rate\n"
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\n",
            self.axiom.as_str(),
            self.shape.as_str(),
            self.trials,
            self.wins,
            crate::fmt_f64(self.rate())
        )
    }
}

/// Runs `trials` seeded scenarios of one cell and counts the wins: both
/// planted clusters recovered and the green one scored strictly higher.
pub fn axiom_win_rate(
    axiom: AxiomKind,
    shape: InlierShape,
    trials: usize,
    seed: u64,
    inlier_count: usize,
    config: &McCatchConfig,
) -> Result<WinRateReport> {
    if trials == 0 {
        return Err(McCatchError::Config("need at least one trial".into()));
    }
    let mut seeder = SplitMix64::new(seed);
    let trial_seeds: Vec<u64> = (0..trials).map(|_| seeder.next_u64()).collect();
    let outcomes: Vec<Result<TrialOutcome>> = trial_seeds
        .par_iter()
        .map(|&trial_seed| {
            let mut spec = ScenarioSpec::for_axiom(axiom, shape, trial_seed);
            spec.inlier_count = inlier_count;
            axiom_trial(&spec, config)
        })
        .collect();
    let mut wins = 0;
    for outcome in outcomes {
        if outcome?.win() {
            wins += 1;
        }
    }
    Ok(WinRateReport {
        axiom,
        shape,
        trials,
        wins,
    })
}

/// Runtime-vs-size measurements with the fitted log-log slope.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub kind: CloudKind,
    pub dim: usize,
    pub sizes: Vec<usize>,
    /// Wall-clock seconds, one inner vector per size.
    pub runs: Vec<Vec<f64>>,
    pub median_seconds: Vec<f64>,
    pub slope: f64,
    /// `2 - 1/u` for the generating distribution's intrinsic dimension.
    pub expected_slope: f64,
}

impl ScalingReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\tmedian_seconds\truns\n");
        for (k, &n) in self.sizes.iter().enumerate() {
            let runs = self.runs[k]
                .iter()
                .map(|&t| crate::fmt_f64(t))
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&format!(
                "{n}\t{}\t{runs}\n",
                crate::fmt_f64(self.median_seconds[k])
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} dim={} sizes={:?}: fitted log-log slope {:.3} (expected {:.3})",
            self.kind.as_str(),
            self.dim,
            self.sizes,
            self.slope,
            self.expected_slope
        )
    }
}

/// Times full pipeline runs over growing clouds and fits the runtime
/// exponent. Each size is timed `reps` times and summarized by the
/// median to damp scheduler noise.
pub fn scaling_exponent(
    kind: CloudKind,
    dim: usize,
    sizes: &[usize],
    seed: u64,
    reps: usize,
    config: &McCatchConfig,
) -> Result<ScalingReport> {
    if sizes.len() < 4 {
        return Err(McCatchError::Config(format!(
            "scaling fits need at least 4 sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(McCatchError::Config(
            "sizes must be strictly increasing".into(),
        ));
    }
    let reps = reps.max(1);
    let mut runs = Vec::with_capacity(sizes.len());
    let mut medians = Vec::with_capacity(sizes.len());
    for (k, &count) in sizes.iter().enumerate() {
        let spec = CloudSpec {
            kind,
            dim,
            count,
            seed: seed.wrapping_add(k as u64),
        };
        let rows = generate_cloud(&spec)?;
        let space = MetricSpace::vectors(rows, 2.0)?;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let detection = run_mccatch(&space, config)?;
            let elapsed = start.elapsed().as_secs_f64();
            std::hint::black_box(&detection);
            times.push(elapsed);
        }
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        medians.push(sorted[sorted.len() / 2]);
        runs.push(times);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|&t| t.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    let intrinsic_dim = match kind {
        CloudKind::Uniform => dim as f64,
        CloudKind::Diagonal => 1.0,
    };
    Ok(ScalingReport {
        kind,
        dim,
        sizes: sizes.to_vec(),
        runs,
        median_seconds: medians,
        slope,
        expected_slope: 2.0 - 1.0 / intrinsic_dim,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Largest dataset the quadratic reference will accept.
pub const BRUTE_FORCE_CAP: usize = 5000;

/// Quadratic reference pipeline: neighbor counts, gelation edges, and
/// nearest-inlier distances all come from direct distance scans instead
/// of tree joins, while the plateau, cutoff, gelation, and scoring logic
/// is shared with the indexed pipeline. Passing `diameter` pins the
/// radii ladder (the equivalence harness hands over the indexed
/// estimate so both paths quantize identically); otherwise the exact
/// maximum pairwise distance is used.
pub fn brute_force_reference(
    space: &MetricSpace,
    config: &McCatchConfig,
    diameter: Option<f64>,
) -> Result<Detection> {
    config.validate()?;
    let n = space.len();
    if n > BRUTE_FORCE_CAP {
        return Err(McCatchError::Config(format!(
            "brute-force reference refuses n = {n} > {BRUTE_FORCE_CAP}"
        )));
    }
    if n < 2 {
        return Err(McCatchError::Degenerate(format!(
            "need at least 2 elements, got {n}"
        )));
    }
    let diameter = match diameter {
        Some(l) => l,
        None => (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| space.distance(i, j))
                    .fold(0.0f64, f64::max)
            })
            .reduce(|| 0.0, f64::max),
    };
    if diameter.is_nan() || diameter <= 0.0 {
        return Err(McCatchError::Degenerate(
            "all elements coincide; no radii ladder is possible".into(),
        ));
    }
    let schedule = RadiiSchedule::new(diameter, config.num_radii)?;
    let a = schedule.len();
    let max_cardinality = config.max_cardinality(n);

    // Counts by direct scan, with the same sparsity rule as the joins:
    // an entry exists only while the previous count stayed within c, and
    // the top count is pinned to n without being measured.
    let raw: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| space.distance(i, j)).collect();
            let mut counts = Vec::with_capacity(a);
            for e in 1..a {
                let r = schedule.radius(e);
                let count = row.iter().filter(|&&d| d <= r).count();
                counts.push(count);
                if count > max_cardinality {
                    break;
                }
            }
            if counts.len() == a - 1 && *counts.last().unwrap() <= max_cardinality {
                counts.push(n);
            }
            counts
        })
        .collect();
    let profiles = NeighborProfiles::from_raw(raw);

    let plot = build_oracle_plot(&profiles, &schedule, config.max_slope, max_cardinality);
    let histogram = NnDistanceHistogram::from_plot(&plot, &schedule);
    let cutoff = compute_cutoff(&histogram, &schedule)?;
    let partition = spot_outliers(&plot, cutoff);

    let edges = if partition.grouped.is_empty() {
        Vec::new()
    } else {
        let radius = gelation_radius(&partition.grouped, &plot, &schedule);
        let members = &partition.grouped;
        let mut edges = Vec::new();
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                if space.distance(i, j) <= radius {
                    edges.push((i, j));
                }
            }
        }
        edges
    };
    let clusters = gel_from_edges(&partition, &edges);

    let mut is_outlier = vec![false; n];
    for &i in &partition.outliers {
        is_outlier[i] = true;
    }
    if partition.outliers.len() == n {
        return Err(McCatchError::Degenerate(
            "every element was flagged as an outlier; scores are undefined".into(),
        ));
    }
    let mut dni = vec![0.0f64; n];
    for i in 0..n {
        if !is_outlier[i] {
            dni[i] = plot.x[i];
        }
    }
    for &i in &partition.outliers {
        let nearest = (0..n)
            .filter(|&j| !is_outlier[j])
            .map(|j| space.distance(i, j))
            .fold(f64::INFINITY, f64::min);
        dni[i] = match (1..=a).find(|&e| nearest <= schedule.radius(e)) {
            Some(1) => 0.0,
            Some(e) => schedule.radius(e - 1),
            None => schedule.last(),
        };
    }

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

/// Compares two detections: grid-valued quantities must match exactly,
/// code-length reals within `tol`. Returns a description of the first
/// mismatch.
pub fn detections_equal(a: &Detection, b: &Detection, tol: f64) -> std::result::Result<(), String> {
    if a.schedule != b.schedule {
        return Err("radii schedules differ".into());
    }
    if a.max_cardinality != b.max_cardinality {
        return Err("cardinality caps differ".into());
    }
    let n = a.plot.len();
    if n != b.plot.len() {
        return Err("dataset sizes differ".into());
    }
    for i in 0..n {
        if a.profiles.counts(i) != b.profiles.counts(i) {
            return Err(format!(
                "neighbor counts differ for element {i}: {:?} vs {:?}",
                a.profiles.counts(i),
                b.profiles.counts(i)
            ));
        }
        if a.plot.x[i] != b.plot.x[i] || a.plot.y[i] != b.plot.y[i] {
            return Err(format!("plot coordinates differ for element {i}"));
        }
        if a.plot.first_end[i] != b.plot.first_end[i] || a.plot.middle[i] != b.plot.middle[i] {
            return Err(format!("plateau indices differ for element {i}"));
        }
    }
    if a.histogram != b.histogram {
        return Err("histograms differ".into());
    }
    if a.cutoff != b.cutoff {
        return Err(format!("cutoffs differ: {:?} vs {:?}", a.cutoff, b.cutoff));
    }
    if a.partition.outliers != b.partition.outliers || a.partition.grouped != b.partition.grouped {
        return Err("outlier partitions differ".into());
    }
    if a.microclusters.len() != b.microclusters.len() {
        return Err("microcluster counts differ".into());
    }
    for (k, (ma, mb)) in a.microclusters.iter().zip(&b.microclusters).enumerate() {
        if ma.members != mb.members || ma.grouped != mb.grouped {
            return Err(format!("microcluster {k} differs in membership"));
        }
        if ma.bridge_length != mb.bridge_length {
            return Err(format!("microcluster {k} differs in bridge length"));
        }
        if (ma.score - mb.score).abs() > tol || (ma.mean_1nn - mb.mean_1nn).abs() > tol {
            return Err(format!("microcluster {k} differs in score"));
        }
    }
    if a.assignment != b.assignment {
        return Err("assignments differ".into());
    }
    for i in 0..n {
        if (a.point_scores[i] - b.point_scores[i]).abs() > tol {
            return Err(format!("point score differs for element {i}"));
        }
    }
    Ok(())
}
