//! End-to-end tests of the `pandora` binary: output formats, exit codes,
//! byte determinism, and the `check` aggregation gate.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};

static COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(name: &str) -> PathBuf {
    let id = COUNTER.fetch_add(1, Ordering::SeqCst);
    std::env::temp_dir().join(format!(
        "pandora_cli_test_{}_{}_{}",
        std::process::id(),
        id,
        name
    ))
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = temp_path(name);
    std::fs::write(&path, contents).expect("temp file is writable");
    path
}

fn pandora(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pandora"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

/// Uniform box at cost 0.125 (sigma 0.5) plus a fair 0/1 box at cost 0.25
/// (sigma 0.5).
const TWO_BOX: &str = r#"{
  "version": 1,
  "boxes": [
    { "cost": 0.125, "dist": { "type": "pwl_cdf", "knots": [[0.0, 0.0], [1.0, 1.0]] } },
    { "cost": 0.25, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } }
  ]
}"#;

/// Thresholds (0.8, 0.5): a fair 0/1 box at cost 0.1 and a 0.2-mass-at-1
/// box at cost 0.1.
const POLICY_TWO_BOX: &str = r#"{
  "version": 1,
  "boxes": [
    { "cost": 0.1, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } },
    { "cost": 0.1, "dist": { "type": "discrete", "atoms": [[0.0, 0.8], [1.0, 0.2]] } }
  ]
}"#;

/// Fair 0/1 box at cost 0.25: sigma 0.5, expected utility 0.25.
const SINGLE_BOX: &str = r#"{
  "version": 1,
  "boxes": [
    { "cost": 0.25, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } }
  ]
}"#;

/// The tight construction: fair 0/1 box at cost 0.45 (sigma 0.1).
const TIGHT_TRUE: &str = r#"{
  "version": 1,
  "boxes": [
    { "cost": 0.45, "dist": { "type": "discrete", "atoms": [[0.0, 0.5], [1.0, 0.5]] } }
  ]
}"#;

/// Its shifted-down belief at Kolmogorov distance 0.05 (sigma' 0).
const TIGHT_BELIEVED: &str = r#"{
  "version": 1,
  "boxes": [
    { "cost": 0.45, "dist": { "type": "discrete", "atoms": [[0.0, 0.55], [1.0, 0.45]] } }
  ]
}"#;

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|token| token.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in {line:?}"))
        .parse()
        .unwrap_or_else(|_| panic!("unparsable {key} in {line:?}"))
}

#[test]
fn solve_prints_thresholds_and_order() {
    let path = write_temp("two_box.json", TWO_BOX);
    let out = pandora(&["solve", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let mut lines = text.lines();
    let sigma_line = lines.next().unwrap();
    assert_eq!(lines.next().unwrap(), "order: 1,2");
    let rendered: Vec<f64> = sigma_line
        .strip_prefix("sigma: ")
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!((rendered[0] - 0.5).abs() < 1e-10);
    assert!((rendered[1] - 0.5).abs() < 1e-10);
}

#[test]
fn solve_zero_cost_box_reports_support_top() {
    let json = r#"{
      "version": 1,
      "boxes": [
        { "cost": 0.0, "dist": { "type": "discrete", "atoms": [[0.2, 0.5], [0.8, 0.5]] } }
      ]
    }"#;
    let path = write_temp("zero_cost.json", json);
    let out = pandora(&["solve", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout_of(&out).starts_with("sigma: 0.800000000000"));
}

#[test]
fn simulate_deterministic_trace() {
    let path = write_temp("policy_two_box.json", POLICY_TWO_BOX);
    let out = pandora(&["simulate", path.to_str().unwrap(), "--values", "0.6,0.9"]);
    assert!(out.status.success());
    assert_eq!(
        stdout_of(&out).trim_end(),
        "opened=1 values=0.600000000000 accepted=1 utility=0.500000000000"
    );

    let out = pandora(&["simulate", path.to_str().unwrap(), "--values", "0.3,0.9"]);
    assert_eq!(
        stdout_of(&out).trim_end(),
        "opened=1,2 values=0.300000000000,0.900000000000 accepted=2 utility=0.700000000000"
    );
}

#[test]
fn simulate_point_masses_have_zero_stderr() {
    let json = r#"{
      "version": 1,
      "boxes": [
        { "cost": 0.1, "dist": { "type": "discrete", "atoms": [[0.8, 1.0]] } }
      ]
    }"#;
    let path = write_temp("point.json", json);
    let out = pandora(&[
        "simulate",
        path.to_str().unwrap(),
        "--trials",
        "500",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let line = text.lines().next().unwrap();
    assert_eq!(field(line, "stderr"), 0.0);
    assert!((field(line, "mean") - 0.7).abs() < 1e-12);
}

#[test]
fn simulate_same_seed_same_bytes() {
    let path = write_temp("two_box_mc.json", TWO_BOX);
    let run = || {
        pandora(&[
            "simulate",
            path.to_str().unwrap(),
            "--trials",
            "2000",
            "--seed",
            "77",
        ])
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_requires_exactly_one_input_mode() {
    let path = write_temp("two_box_args.json", TWO_BOX);
    let out = pandora(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = pandora(&["simulate", path.to_str().unwrap(), "--values", "0.5,1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_three_oracles_agree_on_single_box() {
    let path = write_temp("single_box.json", SINGLE_BOX);
    let exact = pandora(&["eval", path.to_str().unwrap(), "--oracle", "exact"]);
    assert!(exact.status.success());
    let exact_text = stdout_of(&exact);
    let exact_value = field(exact_text.lines().next().unwrap(), "utility");
    assert!((exact_value - 0.25).abs() < 1e-10);

    let capped = pandora(&["eval", path.to_str().unwrap(), "--oracle", "capped"]);
    let capped_text = stdout_of(&capped);
    let capped_value = field(capped_text.lines().next().unwrap(), "utility");
    assert!((capped_value - 0.25).abs() < 1e-10);

    let mc = pandora(&[
        "eval",
        path.to_str().unwrap(),
        "--oracle",
        "mc",
        "--trials",
        "100000",
        "--seed",
        "5",
    ]);
    let mc_text = stdout_of(&mc);
    let line = mc_text.lines().next().unwrap();
    let mean = field(line, "utility");
    let stderr = field(line, "stderr");
    assert!((mean - 0.25).abs() <= 3.0 * stderr);
}

#[test]
fn perturb_round_trips_at_zero_epsilon() {
    let path = write_temp("two_box_perturb.json", TWO_BOX);
    let out_path = temp_path("perturbed_zero.json");
    let out = pandora(&[
        "perturb",
        path.to_str().unwrap(),
        "--epsilon",
        "0",
        "--mode",
        "shift_down",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let original = std::fs::read_to_string(&path).unwrap();
    let written = std::fs::read_to_string(&out_path).unwrap();
    let a = pandora_core::io::instance_from_json(&original).unwrap();
    let b = pandora_core::io::instance_from_json(&written).unwrap();
    assert_eq!(a, b);
}

#[test]
fn perturb_shift_down_matches_hand_example() {
    let path = write_temp("tight_true_src.json", TIGHT_TRUE);
    let out_path = temp_path("tight_believed_gen.json");
    let out = pandora(&[
        "perturb",
        path.to_str().unwrap(),
        "--epsilon",
        "0.05",
        "--mode",
        "shift_down",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let written = std::fs::read_to_string(&out_path).unwrap();
    let generated = pandora_core::io::instance_from_json(&written).unwrap();
    let expected = pandora_core::io::instance_from_json(TIGHT_BELIEVED).unwrap();
    assert_eq!(generated, expected);
    // Validated in-ball by construction; the report line carries max_dk.
    let text = stdout_of(&out);
    assert!(text.contains("max_dk=0.0500000000000"), "{text}");
}

#[test]
fn regret_identical_files_is_zero() {
    let path = write_temp("tight_self.json", TIGHT_TRUE);
    let out = pandora(&["regret", path.to_str().unwrap(), path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let line = text.lines().next().unwrap();
    assert_eq!(field(line, "regret"), 0.0);
    assert_eq!(field(line, "stability_gap"), 0.0);
}

#[test]
fn regret_tight_pair_attains_bound() {
    let true_path = write_temp("tight_true.json", TIGHT_TRUE);
    let believed_path = write_temp("tight_believed.json", TIGHT_BELIEVED);
    let out = pandora(&[
        "regret",
        true_path.to_str().unwrap(),
        believed_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let mut lines = text.lines();
    let human = lines.next().unwrap();
    assert!((field(human, "regret") - 0.05).abs() < 1e-9);
    assert!((field(human, "bound") - 0.05).abs() < 1e-12);
    assert!((field(human, "regret_ratio") - 1.0).abs() < 1e-9);
    // CSV header then one row.
    assert_eq!(
        lines.next().unwrap(),
        "n,epsilon,mode,seed,stability_gap,regret,bound,gap_ratio,regret_ratio"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert!((row[1].parse::<f64>().unwrap() - 0.05).abs() < 1e-15);
    assert_eq!(row[2], "manual");
    assert_eq!(row[3], "0");
    assert!((row[8].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn sweep_writes_deterministic_csv_within_regret_band() {
    let config = r#"{
      "n_values": [1, 2],
      "epsilon_values": [0.0, 0.05],
      "instances_per_cell": 5,
      "modes": ["shift_down", "random_mix"],
      "seed": 7,
      "instance_family": "random_discrete"
    }"#;
    let config_path = write_temp("sweep.json", config);
    let out_a = temp_path("sweep_a.csv");
    let out_b = temp_path("sweep_b.csv");
    for out_path in [&out_a, &out_b] {
        let out = pandora(&[
            "sweep",
            config_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "sweep output must be byte-deterministic");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,epsilon,mode,seed,stability_gap,regret,bound,gap_ratio,regret_ratio"
    );
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let n: f64 = fields[0].parse().unwrap();
        let epsilon: f64 = fields[1].parse().unwrap();
        let gap: f64 = fields[4].parse().unwrap();
        let regret: f64 = fields[5].parse().unwrap();
        let bound: f64 = fields[6].parse().unwrap();
        assert!((bound - n * epsilon).abs() < 1e-15);
        assert!(gap <= bound + 1e-9);
        assert!(regret >= -1e-9 && regret <= bound + 1e-9);
        if epsilon == 0.0 {
            assert_eq!(gap, 0.0);
            assert_eq!(regret, 0.0);
        }
        rows += 1;
    }
    assert_eq!(rows, 40);
}

#[test]
fn malformed_files_exit_one_with_diagnostic() {
    let unknown_field = write_temp(
        "unknown_field.json",
        r#"{"version":1,"boxes":[{"cost":0.1,"costt":0.2,"dist":{"type":"discrete","atoms":[[0.5,1.0]]}}]}"#,
    );
    let out = pandora(&["solve", unknown_field.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("costt"),
        "diagnostic should name the field: {err}"
    );

    let bad_version = write_temp("bad_version.json", r#"{"version":2,"boxes":[]}"#);
    let out = pandora(&["solve", bad_version.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = pandora(&["solve", "/nonexistent/instance.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = pandora(&["nonsense-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
}

/// Criterion 9: `check` aggregates every verification suite and exits 0 on
/// the shipped corpus.
#[test]
fn check_aggregates_all_suites_and_exits_zero() {
    let out = pandora(&["check"]);
    let text = stdout_of(&out);
    println!("{text}");
    assert!(out.status.success(), "check failed:\n{text}");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8, "one line per suite:\n{text}");
    for line in &lines {
        assert!(line.contains(": PASS ("), "unexpected line {line}");
    }
}
