//! Command-line interface: dataset ingestion, pipeline runs, synthetic
//! generators, and the evaluation harness, with all outputs written as
//! stable, reproducible files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mccatch::eval::{
    auroc, average_precision, axiom_win_rate, max_f1, scaling_exponent, LabeledScores,
};
use mccatch::synth::{
    generate_axiom_scenario, generate_cloud, AxiomKind, CloudKind, CloudSpec, InlierShape, Label,
    ScenarioSpec,
};
use mccatch::{fmt_f64, run_mccatch, Detection, McCatchConfig, McCatchError, MetricSpace};

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mccatch",
    version,
    about = "Microcluster detection for metric datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector on a dataset and write the report files.
    Detect(DetectArgs),
    /// Generate seeded synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run the evaluation harness.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    /// Comma-separated vectors, optional header, optional id column.
    VectorCsv,
    /// One string element per line.
    StringsLines,
}

#[derive(Args)]
struct DetectArgs {
    /// Input dataset path.
    #[arg(long)]
    input: PathBuf,
    /// How to interpret the input file.
    #[arg(long, value_enum, default_value = "vector-csv")]
    kind: InputKind,
    /// L_p exponent for vector data (vector input only).
    #[arg(long)]
    lp: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory for the report files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParamArgs {
    /// Number of radii in the ladder.
    #[arg(long = "radii", default_value_t = 15)]
    radii: usize,
    /// Maximum plateau slope.
    #[arg(long = "slope", default_value_t = 0.1)]
    slope: f64,
    /// Maximum microcluster cardinality as a fraction of n.
    #[arg(long = "max-mc-fraction", default_value_t = 0.1)]
    max_mc_fraction: f64,
    /// Worker threads for the joins; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Leaf capacity of the metric trees (performance knob only).
    #[arg(long, default_value_t = 32)]
    leaf_capacity: usize,
}

impl ParamArgs {
    fn config(&self) -> McCatchConfig {
        McCatchConfig {
            num_radii: self.radii,
            max_slope: self.slope,
            cardinality_fraction: self.max_mc_fraction,
            leaf_capacity: self.leaf_capacity,
        }
    }
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Axiom scenario: shaped inliers plus the red and green clusters.
    Axiom(SynthAxiomArgs),
    /// Uniform or diagonal point cloud.
    Cloud(SynthCloudArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Gaussian,
    Cross,
    Arc,
}

impl From<ShapeArg> for InlierShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Gaussian => InlierShape::Gaussian,
            ShapeArg::Cross => InlierShape::Cross,
            ShapeArg::Arc => InlierShape::Arc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxiomArg {
    Isolation,
    Cardinality,
}

impl From<AxiomArg> for AxiomKind {
    fn from(a: AxiomArg) -> Self {
        match a {
            AxiomArg::Isolation => AxiomKind::Isolation,
            AxiomArg::Cardinality => AxiomKind::Cardinality,
        }
    }
}

#[derive(Args)]
struct SynthAxiomArgs {
    #[arg(long, value_enum)]
    shape: ShapeArg,
    #[arg(long, value_enum)]
    axiom: AxiomArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of inliers in the shaped mass.
    #[arg(long, default_value_t = 10_000)]
    inliers: usize,
    /// Output directory for dataset.csv and labels.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloudArg {
    Uniform,
    Diagonal,
}

impl From<CloudArg> for CloudKind {
    fn from(c: CloudArg) -> Self {
        match c {
            CloudArg::Uniform => CloudKind::Uniform,
            CloudArg::Diagonal => CloudKind::Diagonal,
        }
    }
}

#[derive(Args)]
struct SynthCloudArgs {
    #[arg(long, value_enum)]
    kind: CloudArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for dataset.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Win rates over seeded axiom scenarios, per axiom and shape.
    Axioms(EvalAxiomsArgs),
    /// Runtime-vs-size benchmark with the fitted log-log slope.
    Scaling(EvalScalingArgs),
    /// Ranking metrics of the per-point scores against given labels.
    Auroc(EvalAurocArgs),
}

#[derive(Args)]
struct EvalAxiomsArgs {
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    inliers: usize,
    /// Restrict to one shape (default: all three).
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    /// Restrict to one axiom (default: both).
    #[arg(long, value_enum)]
    axiom: Option<AxiomArg>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalScalingArgs {
    #[arg(long, value_enum)]
    kind: CloudArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated dataset sizes, strictly increasing.
    #[arg(long, default_value = "10000,20000,40000,80000,160000")]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed repetitions per size (median reported).
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalAurocArgs {
    /// Dataset file, same formats as detect.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "vector-csv")]
    kind: InputKind,
    #[arg(long)]
    lp: Option<f64>,
    /// Labels CSV (id,label); "inlier" or "0" marks inliers, anything
    /// else an outlier.
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mccatch: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<McCatchError> for CliError {
    fn from(e: McCatchError) -> Self {
        let code = match &e {
            McCatchError::InvalidInput(_) => EXIT_INPUT,
            McCatchError::Degenerate(_) => EXIT_DEGENERATE,
            McCatchError::Config(_) => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Synth(SynthCommand::Axiom(args)) => cmd_synth_axiom(args),
        Command::Synth(SynthCommand::Cloud(args)) => cmd_synth_cloud(args),
        Command::Eval(EvalCommand::Axioms(args)) => cmd_eval_axioms(args),
        Command::Eval(EvalCommand::Scaling(args)) => cmd_eval_scaling(args),
        Command::Eval(EvalCommand::Auroc(args)) => cmd_eval_auroc(args),
    }
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    init_threads(args.params.threads)?;
    let space = load_space(&args.input, args.kind, args.lp)?;
    let config = args.params.config();
    let detection = run_mccatch(&space, &config)?;
    write_detection(&args.out, &detection, &config)?;
    println!(
        "{} elements, cutoff {:.6}, {} microcluster(s); reports in {}",
        space.len(),
        detection.cutoff.value,
        detection.microclusters.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_synth_axiom(args: SynthAxiomArgs) -> Result<(), CliError> {
    let mut spec = ScenarioSpec::for_axiom(args.axiom.into(), args.shape.into(), args.seed);
    spec.inlier_count = args.inliers;
    let scenario = generate_axiom_scenario(&spec)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("dataset.csv"), vectors_csv(&scenario.points))?;
    fs::write(args.out.join("labels.csv"), labels_csv(&scenario.labels))?;
    println!(
        "{} elements ({} inliers) in {}",
        scenario.points.len(),
        args.inliers,
        args.out.display()
    );
    Ok(())
}

fn cmd_synth_cloud(args: SynthCloudArgs) -> Result<(), CliError> {
    let spec = CloudSpec {
        kind: args.kind.into(),
        dim: args.dim,
        count: args.count,
        seed: args.seed,
    };
    let rows = generate_cloud(&spec)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("dataset.csv"), vectors_csv(&rows))?;
    println!(
        "{} x {}d cloud in {}",
        rows.len(),
        args.dim,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval_axioms(args: EvalAxiomsArgs) -> Result<(), CliError> {
    init_threads(args.params.threads)?;
    let config = args.params.config();
    let axioms: Vec<AxiomKind> = match args.axiom {
        Some(a) => vec![a.into()],
        None => vec![AxiomKind::Isolation, AxiomKind::Cardinality],
    };
    let shapes: Vec<InlierShape> = match args.shape {
        Some(s) => vec![s.into()],
        None => vec![InlierShape::Gaussian, InlierShape::Cross, InlierShape::Arc],
    };
    let mut tsv = String::from(mccatch::eval::WinRateReport::tsv_header());
    for &axiom in &axioms {
        for &shape in &shapes {
            let report =
                axiom_win_rate(axiom, shape, args.trials, args.seed, args.inliers, &config)?;
            println!(
                "{}/{}: {}/{} wins ({:.1}%)",
                axiom.as_str(),
                shape.as_str(),
                report.wins,
                report.trials,
                100.0 * report.rate()
            );
            tsv.push_str(&report.tsv_row());
        }
    }
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("axiom_win_rates.tsv"), tsv)?;
    Ok(())
}

fn cmd_eval_scaling(args: EvalScalingArgs) -> Result<(), CliError> {
    init_threads(args.params.threads)?;
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("bad --sizes: {e}")))?;
    let config = args.params.config();
    let report = scaling_exponent(
        args.kind.into(),
        args.dim,
        &sizes,
        args.seed,
        args.reps,
        &config,
    )?;
    println!("{}", report.summary());
    fs::create_dir_all(&args.out)?;
    let name = format!("scaling_{}_{}d.tsv", report.kind.as_str(), report.dim);
    fs::write(args.out.join(name), report.to_tsv())?;
    Ok(())
}

fn cmd_eval_auroc(args: EvalAurocArgs) -> Result<(), CliError> {
    init_threads(args.params.threads)?;
    let space = load_space(&args.input, args.kind, args.lp)?;
    let labels = load_labels(&args.labels, space.len())?;
    let config = args.params.config();
    let detection = run_mccatch(&space, &config)?;
    let ls = LabeledScores {
        scores: detection.point_scores.clone(),
        labels,
    };
    println!("auroc\t{}", fmt_f64(auroc(&ls)?));
    println!("average_precision\t{}", fmt_f64(average_precision(&ls)?));
    println!("max_f1\t{}", fmt_f64(max_f1(&ls)?));
    Ok(())
}

/// Reads a dataset file into a metric space.
fn load_space(path: &Path, kind: InputKind, lp: Option<f64>) -> Result<MetricSpace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    match kind {
        InputKind::VectorCsv => {
            let rows = parse_vector_csv(&text)?;
            Ok(MetricSpace::vectors(rows, lp.unwrap_or(2.0))?)
        }
        InputKind::StringsLines => {
            if lp.is_some() {
                return Err(CliError::config(
                    "--lp only applies to vector input, not strings",
                ));
            }
            let items: Vec<String> = text
                .lines()
                .map(|l| l.trim_end_matches('\r').to_string())
                .collect();
            Ok(MetricSpace::words(items)?)
        }
    }
}

/// Comma-separated vectors. A non-numeric first row is a header; when
/// its first column is labeled "id" the data rows carry explicit ids
/// (which must form a dense 0-based set), otherwise ids follow row
/// order.
fn parse_vector_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty());
    let Some(first) = lines.next() else {
        return Ok(Vec::new());
    };
    let first_fields: Vec<&str> = first.split(',').collect();
    let first_is_data = first_fields.iter().all(|f| f.trim().parse::<f64>().is_ok());
    let has_id = !first_is_data
        && first_fields
            .first()
            .map(|f| f.trim().eq_ignore_ascii_case("id"))
            .unwrap_or(false);

    let mut with_ids: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut plain: Vec<Vec<f64>> = Vec::new();
    let mut parse_row =
        |line: &str, lineno: usize| -> Result<(), CliError> {
            let fields: Vec<&str> = line.split(',').collect();
            let (id_field, coords) = if has_id {
                (Some(fields[0]), &fields[1..])
            } else {
                (None, &fields[..])
            };
            let mut row = Vec::with_capacity(coords.len());
            for f in coords {
                row.push(f.trim().parse::<f64>().map_err(|_| {
                    CliError::input(format!("line {lineno}: bad coordinate {f:?}"))
                })?);
            }
            match id_field {
                Some(f) => {
                    let id = f
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::input(format!("line {lineno}: bad id {f:?}")))?;
                    with_ids.push((id, row));
                }
                None => plain.push(row),
            }
            Ok(())
        };

    let mut lineno = 1;
    if first_is_data {
        parse_row(first, lineno)?;
    }
    for line in lines {
        lineno += 1;
        parse_row(line, lineno)?;
    }

    if has_id {
        let n = with_ids.len();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
        for (id, row) in with_ids {
            if id >= n || rows[id].is_some() {
                return Err(CliError::input(format!(
                    "id column must be a dense 0-based set; id {id} is out of place"
                )));
            }
            rows[id] = Some(row);
        }
        Ok(rows.into_iter().map(|r| r.unwrap()).collect())
    } else {
        Ok(plain)
    }
}

/// Labels CSV with `id,label` rows; returns outlier flags by element id.
fn load_labels(path: &Path, n: usize) -> Result<Vec<bool>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut labels = vec![None; n];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (k == 0 && line.to_ascii_lowercase().starts_with("id,")) {
            continue;
        }
        let Some((id_field, label)) = line.split_once(',') else {
            return Err(CliError::input(format!(
                "labels line {}: expected id,label",
                k + 1
            )));
        };
        let id: usize = id_field
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("labels line {}: bad id {id_field:?}", k + 1)))?;
        if id >= n {
            return Err(CliError::input(format!(
                "labels line {}: id {id} outside the dataset",
                k + 1
            )));
        }
        let label = label.trim();
        labels[id] = Some(!(label.eq_ignore_ascii_case("inlier") || label == "0"));
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| CliError::input(format!("element {i} has no label"))))
        .collect()
}

fn vectors_csv(rows: &[Vec<f64>]) -> String {
    let dim = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = String::from("id");
    for d in 0..dim {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn labels_csv(labels: &[Label]) -> String {
    let mut out = String::from("id,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", l.as_str()));
    }
    out
}

/// Writes the five report files for one detection run.
fn write_detection(
    out: &Path,
    detection: &Detection,
    config: &McCatchConfig,
) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    fs::write(
        out.join("microclusters.json"),
        microclusters_json(detection),
    )?;
    fs::write(out.join("point_scores.csv"), point_scores_csv(detection))?;
    fs::write(out.join("oracle_plot.tsv"), detection.plot.to_tsv())?;
    fs::write(
        out.join("histogram.tsv"),
        detection.histogram.to_tsv(&detection.schedule),
    )?;
    fs::write(out.join("cutoff.txt"), cutoff_txt(detection, config))?;
    Ok(())
}

fn microclusters_json(detection: &Detection) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"n\": {},\n", detection.plot.len()));
    out.push_str(&format!(
        "  \"cutoff\": {},\n",
        fmt_f64(detection.cutoff.value)
    ));
    out.push_str("  \"microclusters\": [\n");
    let last = detection.microclusters.len();
    for (k, mc) in detection.microclusters.iter().enumerate() {
        let members = mc
            .members
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "    {{\"rank\": {}, \"score\": {}, \"cardinality\": {}, \"bridge_length\": {}, \"singleton\": {}, \"members\": [{}]}}{}\n",
            k + 1,
            fmt_f64(mc.score),
            mc.cardinality(),
            fmt_f64(mc.bridge_length),
            !mc.grouped,
            members,
            if k + 1 == last { "" } else { "," }
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

fn point_scores_csv(detection: &Detection) -> String {
    let mut out = String::from("id,score,microcluster_rank\n");
    for i in 0..detection.point_scores.len() {
        let rank = detection.assignment[i]
            .map(|r| r.to_string())
            .unwrap_or_else(|| "-1".to_string());
        out.push_str(&format!(
            "{i},{},{rank}\n",
            fmt_f64(detection.point_scores[i])
        ));
    }
    out
}

fn cutoff_txt(detection: &Detection, config: &McCatchConfig) -> String {
    format!(
        "d={}\nr_1={}\na={}\nb={}\nc={}\nl={}\n",
        fmt_f64(detection.cutoff.value),
        fmt_f64(detection.schedule.first()),
        detection.schedule.len(),
        fmt_f64(config.max_slope),
        detection.max_cardinality,
        fmt_f64(detection.diameter),
    )
}
