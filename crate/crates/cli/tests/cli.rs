//! End-to-end tests of the `ceground` binary.

mod common;

use std::fs::{self, File};
use std::io::Write as _;

use common::{machine_json, run_cli, scratch_fuse, stdout_of};

use ceground::fusion::features::random_features;
use ceground::fusion::weights::random_weights;
use ceground::fusion::{fuse_window, FeatureTable};
use ceground::sim::{FileOracle, PerfectOracle, VideoLayout};
use ceground::{ground_small_intestine, FrameClassifier, FrameIndex, SearchConfig};

#[test]
fn generate_writes_the_exact_layout() {
    let dir = tempfile::tempdir().unwrap();
    let layout_path = dir.path().join("layout.txt");
    let out = run_cli(&[
        "generate",
        "--frames",
        "10000",
        "--jitter",
        "0",
        "--layout-out",
        layout_path.to_str().unwrap(),
    ]);
    let stdout = stdout_of(&out);
    let machine = machine_json(&stdout);
    assert_eq!(machine["layout"]["frames"], 10000);
    assert_eq!(machine["layout"]["start"], 721);
    assert_eq!(machine["layout"]["end"], 5210);
    assert_eq!(fs::read_to_string(&layout_path).unwrap(), "10000 721 5210\n");
}

#[test]
fn generate_rejects_an_empty_segment() {
    let out = run_cli(&[
        "generate",
        "--frames",
        "1000",
        "--proportions",
        "0.5,0.5,0.0",
        "--jitter",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("proportion"), "stderr: {stderr}");
}

#[test]
fn generate_is_deterministic_per_seed() {
    let args = [
        "generate", "--frames", "5000", "--seed", "11", "--jitter", "0.2",
    ];
    let a = stdout_of(&run_cli(&args));
    let b = stdout_of(&run_cli(&args));
    assert_eq!(a, b);
    let c = stdout_of(&run_cli(&[
        "generate", "--frames", "5000", "--seed", "12", "--jitter", "0.2",
    ]));
    assert_ne!(a, c);
}

#[test]
fn search_through_a_file_oracle_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let layout_path = dir.path().join("layout.txt");
    let confidences_path = dir.path().join("confidences.csv");
    stdout_of(&run_cli(&[
        "generate",
        "--frames",
        "2000",
        "--jitter",
        "0",
        "--seed",
        "4",
        "--layout-out",
        layout_path.to_str().unwrap(),
        "--confidences-out",
        confidences_path.to_str().unwrap(),
    ]));

    let out = run_cli(&[
        "search",
        "--oracle",
        "file",
        "--confidences",
        confidences_path.to_str().unwrap(),
        "--layout",
        layout_path.to_str().unwrap(),
    ]);
    let machine = machine_json(&stdout_of(&out));

    let oracle = FileOracle::load(&confidences_path).unwrap();
    let direct = ground_small_intestine(&oracle, 2000, &SearchConfig::default()).unwrap();
    assert_eq!(
        machine["segment"]["start"],
        direct.segment.start().get() as u64
    );
    assert_eq!(machine["segment"]["end"], direct.segment.end().get() as u64);
    assert_eq!(
        machine["oracle_calls"],
        direct.oracle_calls() as u64
    );
}

#[test]
fn stride_alpha_switch_changes_the_trace() {
    let base = ["search", "--frames", "1000", "--jitter", "0", "--seed", "2"];
    let plain = machine_json(&stdout_of(&run_cli(&base)));
    let mut folded_args = base.to_vec();
    folded_args.push("--stride-alpha");
    let folded = machine_json(&stdout_of(&run_cli(&folded_args)));
    assert_ne!(plain["traces"], folded["traces"]);
    assert_eq!(plain["config"]["search"]["stride_alpha"], false);
    assert_eq!(folded["config"]["search"]["stride_alpha"], true);
}

#[test]
fn degenerate_grounding_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("colorectum.csv");
    let mut file = File::create(&path).unwrap();
    for t in 1..=64 {
        writeln!(file, "{t},0,0,1").unwrap();
    }
    drop(file);
    let out = run_cli(&[
        "search",
        "--oracle",
        "file",
        "--confidences",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let machine = machine_json(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(machine["degenerate"], true);
    assert_eq!(machine["segment"]["start"], 1);
    assert_eq!(machine["segment"]["end"], 1);
}

#[test]
fn scan_recovers_exact_boundaries_at_full_cost() {
    let out = run_cli(&["scan", "--frames", "10000", "--jitter", "0"]);
    let machine = machine_json(&stdout_of(&out));
    assert_eq!(machine["found"], true);
    assert_eq!(machine["segment"]["start"], 721);
    assert_eq!(machine["segment"]["end"], 5210);
    assert_eq!(machine["oracle_calls"], 10000);
    assert_eq!(machine["evaluation"]["iou"], 1.0);
}

#[test]
fn scan_reports_not_found_without_small_intestine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stomach.csv");
    let mut file = File::create(&path).unwrap();
    for t in 1..=32 {
        writeln!(file, "{t},1,0,0").unwrap();
    }
    drop(file);
    let out = run_cli(&[
        "scan",
        "--oracle",
        "file",
        "--confidences",
        path.to_str().unwrap(),
    ]);
    let machine = machine_json(&stdout_of(&out));
    assert_eq!(machine["found"], false);
    assert_eq!(machine["segment"], serde_json::Value::Null);
}

#[test]
fn single_trial_simulation_matches_a_search_on_the_same_seed() {
    let simulate = machine_json(&stdout_of(&run_cli(&[
        "simulate",
        "--trials",
        "1",
        "--frames",
        "3000",
        "--seed",
        "9",
        "--oracle",
        "noisy",
        "--trial-details",
    ])));
    let search = machine_json(&stdout_of(&run_cli(&[
        "search",
        "--frames",
        "3000",
        "--seed",
        "9",
        "--oracle",
        "noisy",
    ])));
    let trial = &simulate["trials"][0]["result"];
    assert_eq!(trial["predicted"], search["segment"]);
    assert_eq!(trial["iou"], search["evaluation"]["iou"]);
    assert_eq!(simulate["summary"]["iou"]["mean"], search["evaluation"]["iou"]);
}

#[test]
fn fuse_output_round_trips_through_the_file_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let features = random_features(24, 16, 31);
    let weights = random_weights(16, 12, 6, 10, 3, 77);
    let feature_path = dir.path().join("features.txt");
    let weights_path = dir.path().join("weights.txt");
    features
        .write_to(&mut File::create(&feature_path).unwrap())
        .unwrap();
    weights
        .write_to(&mut File::create(&weights_path).unwrap())
        .unwrap();
    let confidences_path = dir.path().join("fused.csv");
    let out = run_cli(&[
        "fuse",
        "--features",
        feature_path.to_str().unwrap(),
        "--weights",
        weights_path.to_str().unwrap(),
        "--radius",
        "3",
        "--confidences-out",
        confidences_path.to_str().unwrap(),
    ]);
    let machine = machine_json(&stdout_of(&out));
    assert_eq!(machine["frames"], 24);

    let oracle = FileOracle::load(&confidences_path).unwrap();
    assert_eq!(oracle.frames(), 24);

    // Edge probe uses the clamp-repeat window; interior probes match a
    // direct fusion call and the scratch oracle.
    let reloaded = FeatureTable::load(&feature_path).unwrap();
    for t in [1usize, 2, 12, 24] {
        let window = reloaded.window(t, 3, 24);
        let direct = fuse_window(&window, &weights).unwrap();
        let served = oracle
            .classify(FrameIndex::new(t).unwrap(), 24)
            .unwrap();
        let owned: Vec<Vec<f64>> = window.iter().map(|f| f.to_vec()).collect();
        let scratch = scratch_fuse(&owned, &weights);
        for ((a, b), c) in served
            .as_array()
            .iter()
            .zip(direct.as_array())
            .zip(scratch)
        {
            assert!((a - b).abs() < 1e-12, "frame {t}: file {a} vs direct {b}");
            assert!((a - c).abs() < 1e-9, "frame {t}: file {a} vs scratch {c}");
        }
    }
    let edge = reloaded.window(1, 3, 24);
    assert_eq!(edge[0], reloaded.frame(1));
    assert_eq!(edge[3], reloaded.frame(1));
}

#[test]
fn noisy_scan_is_brittle_where_the_search_is_not() {
    // Scan takes the first and last frame predicted as small intestine, so
    // a single early or late misclassification stretches its segment; the
    // decaying search absorbs the same noise.
    let dir = tempfile::tempdir().unwrap();
    let layout_path = dir.path().join("layout.txt");
    let confidences_path = dir.path().join("confidences.csv");
    stdout_of(&run_cli(&[
        "generate",
        "--frames",
        "20000",
        "--jitter",
        "0",
        "--seed",
        "5",
        "--oracle",
        "noisy",
        "--layout-out",
        layout_path.to_str().unwrap(),
        "--confidences-out",
        confidences_path.to_str().unwrap(),
    ]));
    let shared = [
        "--oracle",
        "file",
        "--confidences",
        confidences_path.to_str().unwrap(),
        "--layout",
        layout_path.to_str().unwrap(),
    ];
    let mut scan_args = vec!["scan"];
    scan_args.extend_from_slice(&shared);
    let scan = machine_json(&stdout_of(&run_cli(&scan_args)));
    let mut search_args = vec!["search", "--no-trace"];
    search_args.extend_from_slice(&shared);
    let search = machine_json(&stdout_of(&run_cli(&search_args)));
    let scan_iou = scan["evaluation"]["iou"].as_f64().unwrap();
    let search_iou = search["evaluation"]["iou"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&scan_iou));
    assert!(
        search_iou > 0.99,
        "search should absorb i.i.d. noise, got IoU {search_iou}"
    );
    assert!(
        search_iou > scan_iou,
        "search IoU {search_iou} vs scan IoU {scan_iou}"
    );
    assert_eq!(scan["oracle_calls"], 20000);
    assert!(search["oracle_calls"].as_u64().unwrap() < 200);
}

#[test]
fn perfect_oracle_simulation_reaches_high_iou() {
    let machine = machine_json(&stdout_of(&run_cli(&[
        "simulate",
        "--trials",
        "200",
        "--frames",
        "10000",
        "--oracle",
        "perfect",
        "--seed",
        "1",
    ])));
    let mean = machine["summary"]["iou"]["mean"].as_f64().unwrap();
    assert!(mean >= 0.99, "perfect-oracle mean IoU {mean}");
    assert_eq!(machine["summary"]["degenerate_trials"], 0);
}

#[test]
fn eval_scores_a_segment_against_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    let layout_path = dir.path().join("layout.txt");
    VideoLayout::new(10_000, 721, 5210)
        .unwrap()
        .save(&layout_path)
        .unwrap();
    let out = run_cli(&[
        "eval",
        "--layout",
        layout_path.to_str().unwrap(),
        "--segment",
        "700,5300",
    ]);
    let machine = machine_json(&stdout_of(&out));
    assert_eq!(machine["evaluation"]["start_error"], 21);
    assert_eq!(machine["evaluation"]["end_error"], 90);
    let expected_iou = (5210.0 - 721.0 + 1.0) / (5300.0 - 700.0 + 1.0);
    assert!((machine["evaluation"]["iou"].as_f64().unwrap() - expected_iou).abs() < 1e-12);
}

#[test]
fn eval_scores_a_perfect_confidence_file_at_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let layout = VideoLayout::new(600, 100, 400).unwrap();
    let layout_path = dir.path().join("layout.txt");
    layout.save(&layout_path).unwrap();
    let confidences_path = dir.path().join("confidences.csv");
    let oracle = PerfectOracle::new(layout, 0.9).unwrap();
    let mut file = File::create(&confidences_path).unwrap();
    ceground::sim::write_confidence_csv(&mut file, &oracle, 600).unwrap();
    drop(file);
    let out = run_cli(&[
        "eval",
        "--layout",
        layout_path.to_str().unwrap(),
        "--confidences",
        confidences_path.to_str().unwrap(),
    ]);
    let machine = machine_json(&stdout_of(&out));
    assert_eq!(machine["accuracy"]["micro"], 1.0);
    assert_eq!(machine["accuracy"]["macro"], 1.0);
    for i in 0..3 {
        for j in 0..3 {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert_eq!(
                machine["confusion"]["entries"][i][j].as_f64().unwrap(),
                expected
            );
        }
    }
}

#[test]
fn eval_requires_exactly_one_prediction_source() {
    let dir = tempfile::tempdir().unwrap();
    let layout_path = dir.path().join("layout.txt");
    VideoLayout::new(100, 30, 70)
        .unwrap()
        .save(&layout_path)
        .unwrap();
    let out = run_cli(&["eval", "--layout", layout_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_length_search_stays_within_the_call_budget() {
    let out = run_cli(&[
        "search",
        "--frames",
        "125100",
        "--jitter",
        "0",
        "--no-trace",
    ]);
    let machine = machine_json(&stdout_of(&out));
    // 94 probes per boundary, two boundaries.
    assert_eq!(machine["oracle_calls"], 188);
    assert!(machine["oracle_calls"].as_u64().unwrap() <= 240);
}

#[test]
fn usage_problems_exit_with_code_one_and_help_with_zero() {
    let bad = run_cli(&["search", "--oracle", "bogus"]);
    assert_eq!(bad.status.code(), Some(1));
    let help = run_cli(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let missing = run_cli(&["search"]);
    assert_eq!(missing.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert!(stderr.contains("--frames"), "stderr: {stderr}");
}
