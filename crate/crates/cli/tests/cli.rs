use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kshrink_core::estimators::{estimate, EstimatorKind};
use kshrink_core::model::io::{format_f64, write_ksample_csv, KSampleData};
use kshrink_core::model::{canonicalize_ksample, pooled_summary};
use kshrink_core::{DMatrix, DVector, Hyperparameters, LossSpec};
use tempfile::TempDir;

fn kshrink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kshrink")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `(estimator, population, coordinate) -> value` rows of the estimate CSV.
fn mu_hat_rows(csv_text: &str) -> Vec<(String, String, usize, String)> {
    let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(rd.headers().unwrap(), vec!["estimator", "item", "population", "coordinate", "value"]);
    rd.records()
        .map(|r| r.unwrap())
        .filter(|r| &r[1] == "mu_hat")
        .map(|r| (r[0].to_string(), r[2].to_string(), r[3].parse().unwrap(), r[4].to_string()))
        .collect()
}

fn ksample(groups: Vec<Vec<Vec<f64>>>) -> KSampleData {
    KSampleData {
        labels: (1..=groups.len()).map(|i| format!("g{i}")).collect(),
        groups: groups.into_iter().map(|g| g.into_iter().map(DVector::from_vec).collect()).collect(),
    }
}

fn csv_of(data: &KSampleData) -> String {
    let mut buf = Vec::new();
    write_ksample_csv(&mut buf, data).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn eb2_leaves_a_centered_group_at_the_origin() {
    // group 1 averages 0, group 2 averages (2,2,2); with equal designs F = G, so both factors agree
    let data = ksample(vec![
        vec![vec![1.0, -1.0, 0.5], vec![-1.0, 1.0, -0.5], vec![0.0, 0.0, 0.0]],
        vec![vec![3.0, 2.0, 1.0], vec![1.0, 2.0, 3.0], vec![2.0, 2.0, 2.0]],
    ]);
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d0.csv", &csv_of(&data));
    let out = kshrink(&["estimate", "--input", s(&input), "--estimator", "EB2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = mu_hat_rows(&String::from_utf8(out.stdout).unwrap());
    let first: Vec<f64> = rows.iter().filter(|r| r.1 == "g1").map(|r| r.3.parse().unwrap()).collect();
    assert_eq!(first.len(), 3);
    assert!(first.iter().all(|v| v.abs() < 1e-12), "{first:?}");
    assert!(rows.iter().all(|r| r.0 == "EB*"));
}

#[test]
fn empty_input_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "empty.csv", "");
    let out = kshrink(&["estimate", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", "[conditions]\nd = 1.0\n");
    assert_eq!(kshrink(&["check-conditions", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn preliminary_test_needs_inverse_v_loss() {
    let data = ksample(vec![
        vec![vec![0.1, 0.2, 0.3], vec![0.4, -0.2, 0.0]],
        vec![vec![1.0, 0.5, 0.2], vec![0.3, 0.9, 1.1]],
    ]);
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.csv", &csv_of(&data));
    let cfg = write(&dir, "q.toml", "[estimate]\nq = \"identity\"\nestimators = [\"PT\"]\n");
    let out = kshrink(&["estimate", "--config", s(&cfg), "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn check_conditions_reports_the_reference_margins() {
    let out = kshrink(&["check-conditions"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in ["HB1: minimax = true", "HB2: minimax = true", "HB2: proper_prior = false"] {
        assert!(text.contains(line), "missing '{line}' in\n{text}");
    }
    assert!(text.lines().any(|l| l.starts_with("HB1:") && l.contains("HB1c_lhs") && l.contains("9.4")), "{text}");

    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "p2.toml", "[conditions]\np = 2\nk = 2\nn = 20\n");
    let out = kshrink(&["check-conditions", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

const SMALL_EXPERIMENT: &str = r#"
[experiment]
p = 3
k = 3
n = 12
sigma2 = 1.5
v = ["identity", "scaled_identity: 2", "scaled_identity: 0.5"]
estimators = ["JS1", "PT", "PT*", "EB", "EB*", "HB1", "HB2"]
replicates = 40
seed = 11
mean_configs = [
  { name = "zero", mu = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]] },
  { name = "spread", mu = [[-1.0, 0.0, 1.0], [0.5, 0.5, 0.5], [2.0, -2.0, 0.0]] },
]
"#;

fn csv_output(dir: &TempDir, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.path().join(name);
    let mut full = args.to_vec();
    full.extend(["--output", s(&path)]);
    let out = kshrink(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "exp.toml", SMALL_EXPERIMENT);
    let runs: Vec<Vec<u8>> = [("1", "a"), ("1", "b"), ("2", "c"), ("4", "d")]
        .iter()
        .map(|(t, name)| csv_output(&dir, name, &["simulate", "--config", s(&cfg), "--threads", t]))
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
    assert!(String::from_utf8_lossy(&runs[0]).starts_with("config,estimator,risk,se,prial,replicates,seed"));

    let one = csv_output(&dir, "e", &["simulate", "--config", s(&cfg), "--replicates", "1"]);
    let again = csv_output(&dir, "f", &["simulate", "--config", s(&cfg), "--replicates", "1"]);
    assert_eq!(one, again);
}

#[test]
fn table1_is_byte_identical_across_threads() {
    let dir = TempDir::new().unwrap();
    let a = csv_output(&dir, "a", &["table1", "--replicates", "100", "--threads", "1"]);
    let b = csv_output(&dir, "b", &["table1", "--replicates", "100", "--threads", "3"]);
    assert_eq!(a, b);
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 8 * 8);
}

#[test]
fn sigma2_flag_overrides_the_reference_scale() {
    let dir = TempDir::new().unwrap();
    let default = csv_output(&dir, "a", &["table1", "--replicates", "50"]);
    let explicit = csv_output(&dir, "b", &["table1", "--replicates", "50", "--sigma2", "4"]);
    let nominal = csv_output(&dir, "c", &["table1", "--replicates", "50", "--sigma2", "2"]);
    assert_eq!(default, explicit);
    assert_ne!(default, nominal);
    assert_eq!(kshrink(&["table1", "--replicates", "5", "--sigma2", "-1"]).status.code(), Some(2));
}

#[test]
fn estimate_round_trips_serialized_data_bit_exactly() {
    let (p, k, per_group) = (4, 3, [5, 7, 6]);
    let groups: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|i| {
            (0..per_group[i])
                .map(|r| (0..p).map(|j| ((1 + i * 31 + r * 7 + j * 3) as f64).sin() * (1.0 + i as f64)).collect())
                .collect()
        })
        .collect();
    let data = ksample(groups);
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "rt.csv", &csv_of(&data));
    let out = kshrink(&["estimate", "--input", s(&input)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = mu_hat_rows(&String::from_utf8(out.stdout).unwrap());

    let v0 = vec![DMatrix::identity(p, p); k];
    let m = canonicalize_ksample(&data.groups, &v0).unwrap();
    let ls = LossSpec::inverse_of(&m.v).unwrap();
    let ps = pooled_summary(&m, &ls).unwrap();
    let h = Hyperparameters::default();
    let mut expected = Vec::new();
    for kind in EstimatorKind::SHRINKAGE {
        let est = estimate(kind, &m, &ls, &ps, &h).unwrap();
        for (label, mu) in data.labels.iter().zip(&est.mu_hat) {
            for (j, v) in mu.iter().enumerate() {
                expected.push((kind.name().to_string(), label.clone(), j + 1, format_f64(*v)));
            }
        }
    }
    assert_eq!(rows, expected);
}

#[test]
fn validate_passes_at_defaults() {
    let out = kshrink(&["validate"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.starts_with("PASS uer")).count() >= 9, "{text}");
}
