//! Seeded synthetic data: axiom scenarios, planted-outlier benchmarks,
//! and uniform/diagonal clouds for the scaling runs.
//!
//! All randomness flows through a [`SplitMix64`] stream so a seed fully
//! determines the generated bytes; rerunning a generator with the same
//! spec reproduces the dataset exactly.

use crate::error::{McCatchError, Result};

/// SplitMix64 generator: fixed 64-bit integer arithmetic, documented
/// constants, no global state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` built from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on the cosine branch.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Shape of the inlier mass in an axiom scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InlierShape {
    Gaussian,
    Cross,
    Arc,
}

impl InlierShape {
    pub fn as_str(self) -> &'static str {
        match self {
            InlierShape::Gaussian => "gaussian",
            InlierShape::Cross => "cross",
            InlierShape::Arc => "arc",
        }
    }
}

/// Which axiom a scenario instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxiomKind {
    /// Equal cardinalities, green bridge longer: the farther cluster
    /// must win.
    Isolation,
    /// Equal bridges, green less populous: the smaller cluster must win.
    Cardinality,
}

impl AxiomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AxiomKind::Isolation => "isolation",
            AxiomKind::Cardinality => "cardinality",
        }
    }
}

/// Ground-truth label of a generated element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Inlier,
    RedMc,
    GreenMc,
    Singleton,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Inlier => "inlier",
            Label::RedMc => "red_mc",
            Label::GreenMc => "green_mc",
            Label::Singleton => "singleton",
        }
    }

    pub fn is_outlier(self) -> bool {
        !matches!(self, Label::Inlier)
    }
}

/// Parameters of one axiom scenario. Distances are in units of the
/// inlier shape's characteristic spread (one sigma).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub shape: InlierShape,
    pub axiom: AxiomKind,
    pub inlier_count: usize,
    pub red_cardinality: usize,
    pub green_cardinality: usize,
    /// Lower bound on the red cluster's distance to its nearest inlier.
    pub red_bridge: f64,
    /// Lower bound on the green cluster's distance to its nearest inlier.
    pub green_bridge: f64,
    /// Standard deviation of the planted clusters; far below the bridge
    /// so the clusters stay tight.
    pub mc_spread: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Scenario with the default desk-scale geometry for one axiom cell.
    pub fn for_axiom(axiom: AxiomKind, shape: InlierShape, seed: u64) -> Self {
        match axiom {
            AxiomKind::Isolation => Self {
                shape,
                axiom,
                inlier_count: 10_000,
                red_cardinality: 5,
                green_cardinality: 5,
                red_bridge: 6.0,
                green_bridge: 18.0,
                mc_spread: 5e-5,
                seed,
            },
            AxiomKind::Cardinality => Self {
                shape,
                axiom,
                inlier_count: 10_000,
                red_cardinality: 20,
                green_cardinality: 5,
                red_bridge: 10.0,
                green_bridge: 10.0,
                mc_spread: 5e-5,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inlier_count < 2 {
            return Err(McCatchError::Config("need at least 2 inliers".into()));
        }
        if self.red_cardinality == 0 || self.green_cardinality == 0 {
            return Err(McCatchError::Config(
                "planted clusters cannot be empty".into(),
            ));
        }
        if self.mc_spread.is_nan() || self.mc_spread < 0.0 {
            return Err(McCatchError::Config(
                "cluster spread must be nonnegative".into(),
            ));
        }
        // The shapes are sampled at unit sigma; a bridge inside the
        // inlier spread cannot be planted.
        if self.red_bridge <= 1.0 || self.green_bridge <= 1.0 {
            return Err(McCatchError::Config(
                "bridge distances must exceed the inlier spread".into(),
            ));
        }
        match self.axiom {
            AxiomKind::Isolation => {
                if self.red_cardinality != self.green_cardinality {
                    return Err(McCatchError::Config(
                        "isolation scenarios need equal cardinalities".into(),
                    ));
                }
                if self.green_bridge <= self.red_bridge {
                    return Err(McCatchError::Config(
                        "isolation scenarios need the green bridge to be longer".into(),
                    ));
                }
            }
            AxiomKind::Cardinality => {
                if self.red_bridge != self.green_bridge {
                    return Err(McCatchError::Config(
                        "cardinality scenarios need equal bridges".into(),
                    ));
                }
                if self.green_cardinality >= self.red_cardinality {
                    return Err(McCatchError::Config(
                        "cardinality scenarios need the green cluster to be smaller".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

/// Generates an axiom scenario: the inlier shape, then the red cluster
/// to the left and the green cluster below, each planted so that its
/// nearest inlier is at least the requested bridge away.
pub fn generate_axiom_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut points = sample_shape(spec.shape, spec.inlier_count, &mut rng);
    let mut labels = vec![Label::Inlier; spec.inlier_count];

    let red_dir = [-1.0, 0.0];
    let green_dir = [0.0, -1.0];
    plant_cluster(
        &mut points,
        &mut labels,
        red_dir,
        spec.red_bridge,
        spec.red_cardinality,
        spec.mc_spread,
        Label::RedMc,
        &mut rng,
    );
    plant_cluster(
        &mut points,
        &mut labels,
        green_dir,
        spec.green_bridge,
        spec.green_cardinality,
        spec.mc_spread,
        Label::GreenMc,
        &mut rng,
    );
    Ok(Scenario { points, labels })
}

/// Planted-outlier benchmark: inliers plus isolated singletons and one
/// tight cluster, all bridged at least `min_bridge` sigmas away.
pub fn generate_outlier_benchmark(
    shape: InlierShape,
    inlier_count: usize,
    singleton_count: usize,
    cluster_cardinality: usize,
    min_bridge: f64,
    seed: u64,
) -> Result<Scenario> {
    if inlier_count < 2 {
        return Err(McCatchError::Config("need at least 2 inliers".into()));
    }
    if min_bridge.is_nan() || min_bridge <= 1.0 {
        return Err(McCatchError::Config(
            "bridge distances must exceed the inlier spread".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let mut points = sample_shape(shape, inlier_count, &mut rng);
    let mut labels = vec![Label::Inlier; inlier_count];

    for _ in 0..singleton_count {
        let angle = rng.next_f64() * std::f64::consts::TAU;
        let dir = [angle.cos(), angle.sin()];
        let bridge = min_bridge * (1.0 + rng.next_f64());
        plant_cluster(
            &mut points,
            &mut labels,
            dir,
            bridge,
            1,
            0.0,
            Label::Singleton,
            &mut rng,
        );
    }
    if cluster_cardinality > 0 {
        plant_cluster(
            &mut points,
            &mut labels,
            [0.0, -1.0],
            min_bridge,
            cluster_cardinality,
            5e-5,
            Label::GreenMc,
            &mut rng,
        );
    }
    Ok(Scenario { points, labels })
}

fn sample_shape(shape: InlierShape, count: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let mut points = Vec::with_capacity(count);
    match shape {
        InlierShape::Gaussian => {
            // Unit gaussian truncated at three sigma.
            while points.len() < count {
                let x = rng.next_gaussian();
                let y = rng.next_gaussian();
                if x * x + y * y <= 9.0 {
                    points.push(vec![x, y]);
                }
            }
        }
        InlierShape::Cross => {
            // Two orthogonal bars, long axis truncated at three sigma.
            for i in 0..count {
                let long = truncated_gaussian(rng, 1.5, 3.0);
                let thin = truncated_gaussian(rng, 0.15, 0.45);
                if i % 2 == 0 {
                    points.push(vec![long, thin]);
                } else {
                    points.push(vec![thin, long]);
                }
            }
        }
        InlierShape::Arc => {
            // A 120-degree annular arc of radius three, opening upward.
            for _ in 0..count {
                let angle = (30.0 + 120.0 * rng.next_f64()).to_radians();
                let radius = 3.0 + truncated_gaussian(rng, 0.15, 0.45);
                points.push(vec![radius * angle.cos(), radius * angle.sin()]);
            }
        }
    }
    points
}

fn truncated_gaussian(rng: &mut SplitMix64, sigma: f64, cap: f64) -> f64 {
    loop {
        let v = sigma * rng.next_gaussian();
        if v.abs() <= cap {
            return v;
        }
    }
}

/// Plants a cluster of `cardinality` points centered `bridge` past the
/// inliers' farthest reach along `dir`, which guarantees every inlier is
/// at least `bridge` away from the center.
#[allow(clippy::too_many_arguments)]
fn plant_cluster(
    points: &mut Vec<Vec<f64>>,
    labels: &mut Vec<Label>,
    dir: [f64; 2],
    bridge: f64,
    cardinality: usize,
    spread: f64,
    label: Label,
    rng: &mut SplitMix64,
) {
    let max_projection = points
        .iter()
        .zip(labels.iter())
        .filter(|(_, l)| **l == Label::Inlier)
        .map(|(p, _)| p[0] * dir[0] + p[1] * dir[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let center = [
        dir[0] * (max_projection + bridge),
        dir[1] * (max_projection + bridge),
    ];
    for _ in 0..cardinality {
        points.push(vec![
            center[0] + spread * rng.next_gaussian(),
            center[1] + spread * rng.next_gaussian(),
        ]);
        labels.push(label);
    }
}

/// Kind of synthetic cloud for the scaling runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudKind {
    /// Uniform in the unit hypercube; intrinsic dimension equals the
    /// embedding dimension.
    Uniform,
    /// Points on the main diagonal with small jitter; intrinsic
    /// dimension close to one regardless of the embedding.
    Diagonal,
}

impl CloudKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CloudKind::Uniform => "uniform",
            CloudKind::Diagonal => "diagonal",
        }
    }
}

/// Parameters of a synthetic cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloudSpec {
    pub kind: CloudKind,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
}

const DIAGONAL_JITTER: f64 = 1e-6;

/// Generates a cloud deterministically from its spec.
pub fn generate_cloud(spec: &CloudSpec) -> Result<Vec<Vec<f64>>> {
    if !(1..=50).contains(&spec.dim) {
        return Err(McCatchError::Config(format!(
            "cloud dimensionality must lie in [1, 50], got {}",
            spec.dim
        )));
    }
    if spec.count < 2 {
        return Err(McCatchError::Config("need at least 2 elements".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let rows = (0..spec.count)
        .map(|_| match spec.kind {
            CloudKind::Uniform => (0..spec.dim).map(|_| rng.next_f64()).collect(),
            CloudKind::Diagonal => {
                let t = rng.next_f64();
                (0..spec.dim)
                    .map(|_| t + DIAGONAL_JITTER * (2.0 * rng.next_f64() - 1.0))
                    .collect()
            }
        })
        .collect();
    Ok(rows)
}
