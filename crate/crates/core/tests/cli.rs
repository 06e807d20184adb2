//! End-to-end runs of the `swarmformer` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swarmformer::data::{synthesize_dataset, write_csv, HEART_FEATURES};
use swarmformer::eval::COMPARISON_HEADER;

fn swarmformer(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmformer"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_config(dir: &Path, csv: &str, extra: &str) -> std::path::PathBuf {
    let data = dir.join("data.csv");
    fs::write(&data, csv).unwrap();
    let config = dir.join("config.toml");
    fs::write(&config, format!("[data]\npath = \"{}\"\n{extra}", data.display())).unwrap();
    config
}

const SMALL_SEARCH: &str = r#"
seed = 5
[data.synthetic]
n_rows = 160
[baselines]
forest_trees = 8
boost_rounds = 8
[search]
d_model_menu = [8, 16]
head_menu = [1, 2]
max_layers = 2
fitness_epochs = 2
epochs = 2
[search.swarm]
n_particles = 2
max_iters = 2
[output]
record_timings = false
"#;

#[test]
fn planted_feature_tops_the_correlations() {
    let dir = tempfile::tempdir().unwrap();
    let base = synthesize_dataset(100, 0.1, 1).unwrap();
    // Overwrite `sex` with the label.
    let mut features = base.features().to_vec();
    for (i, &t) in base.targets().iter().enumerate() {
        features[i * 13 + 1] = f64::from(t);
    }
    let planted = swarmformer::data::Dataset::new(
        HEART_FEATURES.iter().map(|s| s.to_string()).collect(),
        features,
        base.targets().to_vec(),
    )
    .unwrap();
    let mut csv = Vec::new();
    write_csv(&planted, &mut csv).unwrap();
    let config = data_config(dir.path(), &String::from_utf8(csv).unwrap(), "");
    let out = dir.path().join("out");
    let o = swarmformer(&["correlate"], &config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let first = text.lines().skip_while(|l| !l.starts_with("strongest")).nth(1).unwrap();
    assert_eq!(first.trim(), "sex ~ target: r = +1.000");
    let matrix = fs::read_to_string(out.join("correlation.csv")).unwrap();
    assert!(matrix.starts_with("# config_digest="));
    let pgm = fs::read_to_string(out.join("correlation.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
}

#[test]
fn table_one_subset_correlates() {
    let dir = tempfile::tempdir().unwrap();
    let rows = "age,sex,trestbps,chol,fbs,thalachh,oldpeak,target
63,1,145,233,1,150,2.3,1
37,1,130,250,0,187,3.5,1
41,0,130,204,0,172,1.4,1
56,1,120,236,0,178,0.8,1
57,0,120,354,0,163,0.6,1
57,1,140,192,0,148,0.4,1
56,0,140,294,0,153,1.3,1
44,1,120,263,0,173,0,1
52,1,172,199,1,162,0.5,1
57,1,150,168,0,174,1.6,1
54,1,140,239,0,160,1.2,1
48,0,130,275,0,139,0.2,1
";
    let config = data_config(dir.path(), rows, "");
    let o = swarmformer(&["correlate"], &config, &dir.path().join("out"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("12 rows, 8 columns"));
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("nowhere.toml");
    let o = swarmformer(&["baselines"], &config, dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nowhere.toml"));
}

#[test]
fn missing_data_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "[data]\npath = \"absent.csv\"\n").unwrap();
    let o = swarmformer(&["correlate"], &config, dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.csv"));
}

#[test]
fn single_class_data_fails_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let base = synthesize_dataset(60, 0.0, 2).unwrap();
    let ones = swarmformer::data::Dataset::new(
        base.feature_names().to_vec(),
        base.features().to_vec(),
        vec![1; base.n_rows()],
    )
    .unwrap();
    let mut csv = Vec::new();
    write_csv(&ones, &mut csv).unwrap();
    let config = data_config(dir.path(), &String::from_utf8(csv).unwrap(), "");
    let o = swarmformer(&["baselines"], &config, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("class"), "{}", stderr(&o));
}

#[test]
fn baselines_write_reports_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, SMALL_SEARCH).unwrap();
    let out = dir.path().join("out");
    let o = swarmformer(&["baselines"], &config, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    assert_eq!(lines.next().unwrap(), COMPARISON_HEADER.join(","));
    assert_eq!(lines.count(), 3);
    for model in ["decision_tree", "random_forest", "boosted_trees"] {
        assert!(out.join(format!("confusion_{model}.csv")).exists());
        assert!(out.join(format!("metrics_{model}.csv")).exists());
    }
}

#[test]
fn resumed_search_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, SMALL_SEARCH).unwrap();
    let full = dir.path().join("full");
    let o = swarmformer(&["search"], &config, &full);
    assert!(o.status.success(), "{}", stderr(&o));

    // Keep the log only up to the end of the first completed iteration.
    let log = fs::read_to_string(full.join("search_log.csv")).unwrap();
    let mut cut = String::new();
    for line in log.lines() {
        cut.push_str(line);
        cut.push('\n');
        if line.starts_with("# completed_iteration=0") {
            break;
        }
    }
    assert!(cut.len() < log.len());
    let resumed = dir.path().join("resumed");
    fs::create_dir_all(&resumed).unwrap();
    fs::write(resumed.join("search_log.csv"), cut).unwrap();
    let o = swarmformer(&["search", "--resume"], &config, &resumed);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["search_log.csv", "convergence.csv", "model.bin", "comparison.csv"] {
        assert!(fs::read(full.join(name)).unwrap() == fs::read(resumed.join(name)).unwrap(), "{name} differs");
    }
    // The saved config names its own directory; everything else must match.
    let config_body = |dir: &Path| -> String {
        fs::read_to_string(dir.join("best_config.toml"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("output_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(config_body(&full), config_body(&resumed));

    let o = swarmformer(&["report"], &config, &resumed);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pso_transformer"));
}
