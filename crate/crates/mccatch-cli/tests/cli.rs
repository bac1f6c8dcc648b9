//! End-to-end checks of the command-line surface: exit codes, file
//! formats, and the synth -> detect round trip.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mccatch"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mccatch-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mccatch");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("spawn mccatch").status.code().unwrap()
}

#[test]
fn synth_output_is_byte_identical_across_runs() {
    let dir = tmp_dir("synth-repro");
    for sub in ["a", "b"] {
        run_ok(
            bin()
                .args([
                    "synth",
                    "axiom",
                    "--shape",
                    "arc",
                    "--axiom",
                    "cardinality",
                    "--seed",
                    "7",
                    "--inliers",
                    "500",
                    "--out",
                ])
                .arg(dir.join(sub)),
        );
    }
    let a = fs::read(dir.join("a/dataset.csv")).unwrap();
    let b = fs::read(dir.join("b/dataset.csv")).unwrap();
    assert_eq!(a, b);
    let a = fs::read(dir.join("a/labels.csv")).unwrap();
    let b = fs::read(dir.join("b/labels.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn detect_round_trips_the_in_process_pipeline() {
    let dir = tmp_dir("roundtrip");
    run_ok(
        bin()
            .args([
                "synth",
                "axiom",
                "--shape",
                "gaussian",
                "--axiom",
                "isolation",
                "--seed",
                "11",
                "--inliers",
                "800",
                "--out",
            ])
            .arg(&dir),
    );
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("dataset.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );

    // The same scenario through the library must agree with the files.
    let mut spec = mccatch::synth::ScenarioSpec::for_axiom(
        mccatch::synth::AxiomKind::Isolation,
        mccatch::synth::InlierShape::Gaussian,
        11,
    );
    spec.inlier_count = 800;
    let scenario = mccatch::synth::generate_axiom_scenario(&spec).unwrap();
    let space = mccatch::MetricSpace::vectors(scenario.points, 2.0).unwrap();
    let detection = mccatch::run_mccatch(&space, &mccatch::McCatchConfig::default()).unwrap();

    let json = fs::read_to_string(dir.join("run/microclusters.json")).unwrap();
    for (k, mc) in detection.microclusters.iter().enumerate() {
        assert!(
            json.contains(&format!(
                "\"rank\": {}, \"score\": {}",
                k + 1,
                mccatch::fmt_f64(mc.score)
            )),
            "rank {} missing from microclusters.json",
            k + 1
        );
    }
    let scores = fs::read_to_string(dir.join("run/point_scores.csv")).unwrap();
    let first_line = scores.lines().nth(1).unwrap();
    assert!(first_line.starts_with(&format!(
        "0,{}",
        mccatch::fmt_f64(detection.point_scores[0])
    )));
    let cutoff = fs::read_to_string(dir.join("run/cutoff.txt")).unwrap();
    assert!(cutoff.contains(&format!("d={}", mccatch::fmt_f64(detection.cutoff.value))));
}

/// On an axiom scenario the two planted clusters come back as grouped
/// microclusters with the farther (green) one scored above the red one.
#[test]
fn detect_ranks_the_green_cluster_above_the_red() {
    let dir = tmp_dir("greenfirst");
    run_ok(
        bin()
            .args([
                "synth",
                "axiom",
                "--shape",
                "gaussian",
                "--axiom",
                "isolation",
                "--seed",
                "2",
                "--inliers",
                "4000",
                "--out",
            ])
            .arg(&dir),
    );
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("dataset.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    // Red members are ids 4000..4004, green 4005..4009.
    let json = fs::read_to_string(dir.join("run/microclusters.json")).unwrap();
    let rank_of = |member: &str| {
        json.lines()
            .find(|l| l.contains(&format!("members: [{member}").replace("members", "\"members\"")))
            .and_then(|l| {
                l.split("\"rank\": ")
                    .nth(1)?
                    .split(',')
                    .next()?
                    .trim()
                    .parse::<usize>()
                    .ok()
            })
            .unwrap_or_else(|| panic!("no cluster starting at member {member}:\n{json}"))
    };
    let red_rank = rank_of("4000");
    let green_rank = rank_of("4005");
    assert!(
        green_rank < red_rank,
        "green cluster (rank {green_rank}) must outrank red (rank {red_rank})"
    );
    for line in json.lines() {
        if line.contains("members\": [4000") || line.contains("members\": [4005") {
            assert!(
                line.contains("\"singleton\": false"),
                "planted clusters are grouped: {line}"
            );
            assert!(
                line.contains("\"cardinality\": 5"),
                "planted clusters keep 5 members: {line}"
            );
        }
    }
}

#[test]
fn detect_reads_headerless_and_id_free_csv() {
    let dir = tmp_dir("headerless");
    let mut csv = String::new();
    for i in 0..40 {
        csv.push_str(&format!("{}.0,{}.5\n", i % 7, i % 5));
    }
    csv.push_str("90.0,90.0\n");
    fs::write(dir.join("plain.csv"), csv).unwrap();
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("plain.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    let json = fs::read_to_string(dir.join("run/microclusters.json")).unwrap();
    assert!(
        json.contains("\"members\": [40]"),
        "far point flagged:\n{json}"
    );
}

#[test]
fn strings_input_works_with_edit_distance() {
    let dir = tmp_dir("strings");
    let mut names = String::new();
    for _ in 0..30 {
        names.push_str("smith\nsmyth\nsmithe\nsmythe\n");
    }
    names.push_str("xylophone\n");
    fs::write(dir.join("names.txt"), names).unwrap();
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("names.txt"))
            .args(["--kind", "strings-lines", "--out"])
            .arg(dir.join("run")),
    );
    let json = fs::read_to_string(dir.join("run/microclusters.json")).unwrap();
    assert!(
        json.contains("\"members\": [120]"),
        "odd word flagged:\n{json}"
    );
}

#[test]
fn single_row_input_exits_3() {
    let dir = tmp_dir("tiny");
    fs::write(dir.join("one.csv"), "1.0,2.0\n").unwrap();
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("one.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 3);
}

#[test]
fn zero_diameter_input_exits_3() {
    let dir = tmp_dir("flat");
    fs::write(dir.join("same.csv"), "1.0,2.0\n1.0,2.0\n1.0,2.0\n").unwrap();
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("same.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 3);
}

#[test]
fn lp_flag_with_strings_exits_4() {
    let dir = tmp_dir("mismatch");
    fs::write(dir.join("names.txt"), "alpha\nbeta\n").unwrap();
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("names.txt"))
            .args(["--kind", "strings-lines", "--lp", "2", "--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 4);
}

#[test]
fn bad_radii_config_exits_4() {
    let dir = tmp_dir("badcfg");
    fs::write(dir.join("data.csv"), "0.0,0.0\n1.0,1.0\n2.0,2.0\n").unwrap();
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("data.csv"))
            .args(["--radii", "1", "--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 4);
}

#[test]
fn unreadable_or_malformed_input_exits_2() {
    let dir = tmp_dir("badinput");
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("absent.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 2);
    fs::write(dir.join("mangled.csv"), "0.0,0.0\n1.0,oops\n2.0,2.0\n").unwrap();
    let code = exit_code(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("mangled.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    assert_eq!(code, 2);
}

#[test]
fn id_column_rows_can_arrive_out_of_order() {
    let dir = tmp_dir("idcol");
    // Forty grid inliers and one far point, rows written in descending
    // id order; the flagged member must be the id, not the row number.
    let mut csv = String::from("id,x0,x1\n40,95.0,95.0\n");
    for i in (0..40).rev() {
        csv.push_str(&format!("{i},{}.0,{}.5\n", i % 7, i % 5));
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("data.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    let json = fs::read_to_string(dir.join("run/microclusters.json")).unwrap();
    assert!(
        json.contains("\"members\": [40]"),
        "row with id 40 is the outlier:\n{json}"
    );
}

#[test]
fn eval_auroc_reports_metrics_from_labels() {
    let dir = tmp_dir("auroc");
    run_ok(
        bin()
            .args([
                "synth",
                "axiom",
                "--shape",
                "gaussian",
                "--axiom",
                "isolation",
                "--seed",
                "3",
                "--inliers",
                "600",
                "--out",
            ])
            .arg(&dir),
    );
    let out = run_ok(
        bin()
            .args(["eval", "auroc", "--input"])
            .arg(dir.join("dataset.csv"))
            .args(["--labels"])
            .arg(dir.join("labels.csv")),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let auc_line = stdout.lines().find(|l| l.starts_with("auroc")).unwrap();
    let auc: f64 = auc_line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!(auc > 0.95, "planted outliers should rank on top, got {auc}");
}

#[test]
fn eval_axioms_writes_the_win_rate_table() {
    let dir = tmp_dir("axioms");
    run_ok(
        bin()
            .args([
                "eval",
                "axioms",
                "--trials",
                "2",
                "--inliers",
                "600",
                "--shape",
                "gaussian",
                "--axiom",
                "isolation",
                "--seed",
                "13",
                "--out",
            ])
            .arg(&dir),
    );
    let tsv = fs::read_to_string(dir.join("axiom_win_rates.tsv")).unwrap();
    let mut lines = tsv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axiom\tshape\ttrials\twins\twin_rate"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("isolation\tgaussian\t2\t"), "row {row:?}");
}

#[test]
fn scaling_report_has_one_row_per_size() {
    let dir = tmp_dir("scaling");
    run_ok(
        bin()
            .args([
                "eval",
                "scaling",
                "--kind",
                "diagonal",
                "--dim",
                "2",
                "--sizes",
                "400,800,1600,3200",
                "--seed",
                "5",
                "--reps",
                "1",
                "--out",
            ])
            .arg(&dir),
    );
    let tsv = fs::read_to_string(dir.join("scaling_diagonal_2d.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 5, "header plus four sizes:\n{tsv}");
}

#[test]
fn synth_cloud_then_detect_runs_clean() {
    let dir = tmp_dir("cloud");
    run_ok(
        bin()
            .args([
                "synth", "cloud", "--kind", "uniform", "--dim", "3", "--count", "500", "--seed",
                "9", "--out",
            ])
            .arg(&dir),
    );
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("dataset.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    assert!(dir.join("run/oracle_plot.tsv").exists());
    assert!(dir.join("run/histogram.tsv").exists());
}

/// Oracle plot rows carry the plateau indices needed to re-derive the
/// plot offline; absent plateaus leave the fields empty.
#[test]
fn oracle_plot_tsv_has_the_documented_columns() {
    let dir = tmp_dir("plotfmt");
    fs::write(dir.join("data.csv"), "0.0,0.0\n0.1,0.0\n0.0,0.1\n5.0,5.0\n").unwrap();
    run_ok(
        bin()
            .args(["detect", "--input"])
            .arg(dir.join("data.csv"))
            .args(["--out"])
            .arg(dir.join("run")),
    );
    let tsv = fs::read_to_string(dir.join("run/oracle_plot.tsv")).unwrap();
    let mut lines = tsv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id\tx\ty\tfirst_end_index\tmiddle_start_index\tmiddle_end_index"
    );
    assert_eq!(tsv.lines().count(), 5);
    for line in lines {
        assert_eq!(line.split('\t').count(), 6, "row {line:?}");
    }
}
