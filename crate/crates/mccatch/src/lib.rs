//! Microcluster detection for metric datasets.
//!
//! A microcluster is a small group of outliers close to each other but
//! far from everything else; a singleton microcluster is an ordinary
//! one-off outlier. This crate finds both kinds and ranks them together:
//! it indexes the dataset with a metric tree, counts neighbors across a
//! doubling ladder of radii using count-only range joins, reads each
//! element's 1NN Distance and Group 1NN Distance off the plateaus of its
//! neighbor-count curve (the Oracle plot), picks the outlier cutoff by
//! two-partition MDL over the histogram of 1NN Distances, gels the
//! flagged elements into microclusters via a radius-bounded neighborhood
//! graph, and scores every cluster by the per-member cost of describing
//! it relative to its nearest inlier.
//!
//! Everything runs on distances alone, so vectors, words under edit
//! distance, and caller-defined metric payloads all work; see
//! [`MetricSpace`]. The pipeline entry point is [`run_mccatch`] with a
//! [`McCatchConfig`] (the defaults are the hands-off setting). The
//! [`synth`] and [`eval`] modules hold the seeded generators, ranking
//! metrics, scaling harness, and the quadratic reference pipeline used
//! to validate the indexed one.

pub mod detect;
pub mod error;
pub mod eval;
pub mod index;
pub mod metric;
pub mod oracle;
pub mod score;
pub mod synth;

pub use detect::{
    code_length, compression_cost, compute_cutoff, gel_microclusters, spot_outliers, Cutoff,
    Microcluster, NnDistanceHistogram, OutlierPartition,
};
pub use error::{McCatchError, Result};
pub use index::{CountJoinResult, MetricTree};
pub use metric::MetricSpace;
pub use oracle::{
    build_oracle_plot, find_plateaus, neighbor_profiles, NeighborProfiles, OraclePlot, Plateau,
    RadiiSchedule,
};
pub use score::{
    nearest_inlier_distances, run_mccatch, score_microcluster, score_points, Detection,
    McCatchConfig, ScoredMicrocluster,
};

/// Fixed-width float formatting used by every serialized output: 17
/// significant digits, enough to round-trip any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    #[test]
    fn float_formatting_round_trips() {
        for v in [0.0, 1.5, -3.25, 0.1, 1e-300, 123456.789] {
            let s = super::fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
