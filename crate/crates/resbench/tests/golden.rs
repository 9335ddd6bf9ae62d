//! Pinned-seed outputs of every bundled scenario.
//!
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p resbench --test golden`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use resbench::{compare_scenarios, render, Scenario};
use sha2::{Digest, Sha256};

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scenario_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = fs::read_dir(crate_dir().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
}

fn load(name: &str) -> Scenario {
    Scenario::load(&crate_dir().join("scenarios").join(name)).unwrap()
}

/// `sha256  file` lines for every rendered file, plus the JSON files verbatim.
fn current_outputs() -> (String, Vec<(String, Vec<u8>)>) {
    let mut manifest = String::new();
    let mut json = Vec::new();
    for path in scenario_paths() {
        let scenario = Scenario::load(&path).unwrap();
        let rendered = render(&scenario, &scenario.execute().unwrap()).unwrap();
        for (name, bytes) in rendered.files {
            writeln!(manifest, "{}  {name}", hex::encode(Sha256::digest(&bytes))).unwrap();
            if name.ends_with(".json") {
                json.push((name, bytes));
            }
        }
    }
    (manifest, json)
}

#[test]
fn outputs_match_goldens() {
    let dir = crate_dir().join("tests").join("golden");
    let (manifest, json) = current_outputs();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("manifest.sha256"), &manifest).unwrap();
        for (name, bytes) in &json {
            fs::write(dir.join(name), bytes).unwrap();
        }
        return;
    }
    for (name, bytes) in &json {
        let expected = fs::read(dir.join(name)).unwrap_or_else(|_| panic!("missing golden {name}"));
        assert_eq!(
            String::from_utf8_lossy(bytes),
            String::from_utf8_lossy(&expected),
            "{name} drifted"
        );
    }
    let expected = fs::read_to_string(dir.join("manifest.sha256")).unwrap();
    assert_eq!(manifest, expected, "trace hashes drifted");
}

fn golden_summary(name: &str) -> serde_json::Value {
    let path: &Path = &crate_dir().join("tests").join("golden").join(name);
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn adaptive_cell_is_cheaper_on_a_calm_walk() {
    let out = tempfile::tempdir().unwrap();
    let (report, _) =
        compare_scenarios(&[load("rds_calm.json"), load("ards_calm.json")], out.path()).unwrap();
    let d = &report.deltas[0];
    assert!(d.total_cost < 0, "{d:?}");
    assert_eq!(d.identity_losses, 0);
    assert_eq!(report.scenarios[0].identity_losses, 0);

    let rds = golden_summary("rds-calm.summary.json");
    let ards = golden_summary("ards-calm.summary.json");
    assert_eq!(rds["total_cost"], report.scenarios[0].total_cost);
    assert_eq!(ards["total_cost"], report.scenarios[1].total_cost);
}

#[test]
fn self_comparison_is_all_zero() {
    let out = tempfile::tempdir().unwrap();
    let (report, written) =
        compare_scenarios(&[load("rds_calm.json"), load("rds_calm.json")], out.path()).unwrap();
    let d = &report.deltas[0];
    assert_eq!(
        (
            d.total_cost,
            d.identity_losses,
            d.undershoot_steps,
            d.adaptations
        ),
        (0, 0, 0, 0)
    );
    assert_eq!(d.mean_overshoot, 0.0);
    // same file name twice gets index prefixes
    assert!(written.iter().any(|p| p.ends_with("0-rds-calm.csv")));
    assert!(written.iter().any(|p| p.ends_with("1-rds-calm.csv")));
}

#[test]
fn comparison_is_recomputable_from_csv() {
    let out = tempfile::tempdir().unwrap();
    let (report, _) = compare_scenarios(
        &[load("rds_burst.json"), load("ards_burst.json")],
        out.path(),
    )
    .unwrap();
    for summary in &report.scenarios {
        let mut rdr =
            csv::Reader::from_path(out.path().join(format!("{}.csv", summary.name))).unwrap();
        let headers = rdr.headers().unwrap().clone();
        let col = |h: &str| headers.iter().position(|x| x == h).unwrap();
        let (cost, loss, under, over) = (
            col("cost"),
            col("identity_loss"),
            col("undershoot"),
            col("overshoot"),
        );
        let decision = headers.iter().position(|x| x == "decision");
        let mut totals = (0u64, 0usize, 0usize, 0u64, 0usize, 0usize);
        for row in rdr.records() {
            let row = row.unwrap();
            totals.0 += row[cost].parse::<u64>().unwrap();
            totals.1 += usize::from(&row[loss] == "1");
            totals.2 += usize::from(row[under].parse::<u32>().unwrap() > 0);
            totals.3 += row[over].parse::<u64>().unwrap();
            totals.4 += decision.map_or(0, |d| usize::from(&row[d] != "hold"));
            totals.5 += 1;
        }
        assert_eq!(totals.0, summary.total_cost);
        assert_eq!(totals.1, summary.identity_losses);
        assert_eq!(totals.2, summary.undershoot_steps);
        assert_eq!(totals.3 as f64 / totals.5 as f64, summary.mean_overshoot);
        assert_eq!(totals.4, summary.adaptations);
    }
}
