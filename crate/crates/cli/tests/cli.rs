use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    occexpo::fixtures::dir().join(name)
}

fn occexpo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occexpo"))
        .args(args)
        .current_dir(dir)
        .env_remove(occexpo_cli::CLIENT_CMD_ENV)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scores() -> PathBuf {
    fixture("medium63_scores.csv")
}

#[test]
fn score_reproduces_published_ensemble_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scores.csv");
    let o = occexpo(dir.path(), &["score", "--scores", p(&scores()), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let written = occexpo::ScoreTable::load(&out).unwrap();
    let published = occexpo::ScoreTable::load(&scores()).unwrap();
    assert_eq!(written.records.len(), 63);
    for (w, src) in written.records.iter().zip(&published.records) {
        assert_eq!(w.code, src.code);
        assert!((w.stated_ensemble.unwrap() - src.stated_ensemble.unwrap()).abs() <= 5e-4);
    }

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("scores.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "score");
    let digest = &manifest["outputs"][0]["sha256"];
    let bytes = std::fs::read(&out).unwrap();
    let expected: String = {
        use sha2::Digest;
        sha2::Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    };
    assert_eq!(digest.as_str().unwrap(), expected);
    assert_eq!(manifest["inputs"][0]["path"], p(&scores()));
}

#[test]
fn four_decimal_export_unless_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let o = occexpo(dir.path(), &["score", "--scores", p(&scores())]);
    let line = stdout(&o).lines().find(|l| l.starts_with("2-06,")).unwrap().to_owned();
    assert!(line.ends_with(",0.4796"), "{line}");
    let o = occexpo(dir.path(), &["score", "--scores", p(&scores()), "--full-precision"]);
    let line = stdout(&o).lines().find(|l| l.starts_with("2-06,")).unwrap().to_owned();
    let last: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - (0.6673 + 0.4467 + 0.3248) / 3.0).abs() < 1e-12, "{line}");
}

#[test]
fn stats_pair_reports_published_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let o = occexpo(
        dir.path(),
        &["stats", "--scores", p(&scores()), "--pair", "glm", "internlm"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = report["pair"]["r"].as_f64().unwrap();
    assert!((r - 0.5938).abs() <= 0.01);
    assert_eq!(report["pair"]["stars"], "***");
    assert!((report["ensemble_expert"]["r"].as_f64().unwrap() - 0.65).abs() <= 0.01);
}

#[test]
fn stats_scatter_with_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let table = occexpo::ScoreTable::load(&scores()).unwrap();
    let mut outcomes = String::from("code,vacancy_count\n");
    for (i, rec) in table.records.iter().enumerate() {
        outcomes.push_str(&format!("{},{}\n", rec.code, 100 + 7 * i));
    }
    std::fs::write(dir.path().join("vac.csv"), outcomes).unwrap();
    let o = occexpo(
        dir.path(),
        &[
            "stats",
            "--scores",
            p(&scores()),
            "--outcomes",
            "vac.csv",
            "--plot-data",
            "plot.csv",
            "--out",
            "stats.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(report["scatter"]["outcome"], "vacancy_share");
    assert_eq!(report["scatter"]["n"], 63);
    let plot = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "x,y,label");
    assert_eq!(plot.lines().count(), 64);
    assert!(dir.path().join("plot.csv.manifest.json").exists());
}

#[test]
fn simulate_without_adoption_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.toml"),
        "law = \"exponential\"\nrho = 1.0\n[[sector]]\nid = \"a\"\nshare = 0.4\ndelta = 0.0\nexposure = 0.0\n\
         [[sector]]\nid = \"b\"\nshare = 0.6\ndelta = 0.0\nexposure = 0.0\n",
    )
    .unwrap();
    let o = occexpo(dir.path(), &["simulate", "--scenario", "s.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["aggregate_growth"].as_f64().unwrap(), 1.0);
}

#[test]
fn simulate_derives_exposure_from_intensity() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("law = \"exponential\"\n");
    for i in 1..=15 {
        text.push_str(&format!(
            "[[sector]]\nid = \"{i}\"\nbaseline_output = {}.0\ndelta = 0.1\n",
            i
        ));
    }
    std::fs::write(dir.path().join("s.toml"), text).unwrap();
    let o = occexpo(
        dir.path(),
        &[
            "simulate",
            "--scenario",
            "s.toml",
            "--intensity",
            p(&fixture("demo_intensity.csv")),
            "--scores",
            p(&scores()),
            "--decisions",
            "all",
            "--rho",
            "0.5",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["sectors"].as_array().unwrap().len(), 15);
    assert_eq!(report["law"]["rho"], 0.5);
}

#[test]
fn contour_has_neutral_first_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = occexpo(
        dir.path(),
        &["contour", "--scenario", p(&fixture("demo_scenario.toml"))],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 22);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    for r in rows {
        assert_eq!(r.split(',').nth(1).unwrap(), "1.0000");
    }
}

#[test]
fn validate_clean_fixture_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = occexpo(
        dir.path(),
        &[
            "validate",
            "--taxonomy",
            p(&fixture("taxonomy_medium63.csv")),
            "--scores",
            p(&scores()),
            "--intensity",
            p(&fixture("demo_intensity.csv")),
            "--demographics",
            p(&fixture("demo_demographics.csv")),
            "--scenario",
            p(&fixture("demo_scenario.toml")),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validate_names_bad_row_and_orphan_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("beta.csv"),
        "industry_id,2-01,2-02\n1,0.5,0.5\nmining,0.5,0.48\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("tax.csv"),
        "code,title,description,excluded\n2,a,,false\n2-01,b,,false\n3-01,c,,false\n",
    )
    .unwrap();
    let o = occexpo(
        dir.path(),
        &["validate", "--intensity", "beta.csv", "--taxonomy", "tax.csv"],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("row `mining` sums to 0.98"), "{err}");
    assert!(err.contains("line 4: orphan code `3-01`"), "{err}");

    let args = occexpo_cli::ValidateArgs {
        intensity: Some(dir.path().join("beta.csv")),
        ..Default::default()
    };
    let d = occexpo_cli::validate(&args);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].line, Some(3));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    // config: unknown flag, unknown column
    assert_eq!(occexpo(dir.path(), &["score", "--nope"]).status.code(), Some(2));
    assert_eq!(
        occexpo(
            dir.path(),
            &[
                "industry",
                "--intensity",
                p(&fixture("demo_intensity.csv")),
                "--scores",
                p(&scores()),
                "--column",
                "llama"
            ]
        )
        .status
        .code(),
        Some(2)
    );
    // input: missing file, malformed table
    assert_eq!(
        occexpo(dir.path(), &["score", "--scores", "missing.csv"]).status.code(),
        Some(3)
    );
    std::fs::write(
        dir.path().join("bad.csv"),
        "code,title,expert,glm,ensemble\n2-01,x,0.5,1.7,0.5\n",
    )
    .unwrap();
    assert_eq!(
        occexpo(dir.path(), &["score", "--scores", "bad.csv"]).status.code(),
        Some(3)
    );
    // computation: taxonomy leaf without a score
    std::fs::write(dir.path().join("tax.csv"), "code,title\n2,a\n2-01,b\n2-99,c\n").unwrap();
    let o = occexpo(
        dir.path(),
        &[
            "aggregate",
            "--taxonomy",
            "tax.csv",
            "--scores",
            p(&scores()),
            "--out",
            "agg.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    // and no partial output was left behind
    assert!(!dir.path().join("agg.csv").exists());
    assert!(!dir.path().join("agg.csv.manifest.json").exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn every_command_documents_its_flags() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, flags) in [
        (
            "annotate",
            &["--taxonomy", "--out", "--n-samples", "--seed", "--mock", "--models"][..],
        ),
        ("score", &["--scores", "--annotations", "--out", "--full-precision"][..]),
        ("aggregate", &["--taxonomy", "--scores", "--column"][..]),
        ("industry", &["--intensity", "--scores"][..]),
        ("demographic", &["--demographics", "--intensity", "--scores"][..]),
        ("stats", &["--scores", "--pair", "--outcomes", "--thresholds"][..]),
        ("simulate", &["--scenario", "--rho", "--decisions"][..]),
        ("contour", &["--scenario", "--rho", "--points", "--delta-max"][..]),
        (
            "validate",
            &[
                "--taxonomy",
                "--scores",
                "--intensity",
                "--demographics",
                "--outcomes",
                "--scenario",
            ][..],
        ),
        ("pipeline", &["--taxonomy", "--scores", "--intensity", "--out"][..]),
    ] {
        let o = occexpo(dir.path(), &[cmd, "--help"]);
        assert!(o.status.success());
        let help = stdout(&o);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn pipeline_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = occexpo(
        dir.path(),
        &[
            "pipeline",
            "--taxonomy",
            p(&fixture("taxonomy_medium63.csv")),
            "--scores",
            p(&scores()),
            "--intensity",
            p(&fixture("demo_intensity.csv")),
            "--demographics",
            p(&fixture("demo_demographics.csv")),
            "--out",
            "run",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("run");
    for f in [
        "scores.csv",
        "aggregate.csv",
        "industry.csv",
        "demographic.csv",
        "stats.json",
        "manifest.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let agg = std::fs::read_to_string(run.join("aggregate.csv")).unwrap();
    // 5 non-excluded large categories + 63 medium ones
    assert_eq!(agg.lines().count(), 1 + 5 + 63);
    let manifest: Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
}

fn annotated_taxonomy(dir: &Path) {
    std::fs::write(
        dir.join("tax.csv"),
        "code,title,description,excluded\n2,专业技术人员,,false\n2-01,会计,负责记账,false\n2-02,教师,讲授课程,false\n2-03,司机,,false\n",
    )
    .unwrap();
}

#[test]
fn live_client_shim_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    annotated_taxonomy(dir.path());
    std::fs::write(dir.path().join("shim.sh"), "cat > /dev/null\necho \"答案: E2 ($1)\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_occexpo"))
        .args([
            "annotate",
            "--taxonomy",
            "tax.csv",
            "--models",
            "remote",
            "--n-samples",
            "2",
            "--out",
            "store.jsonl",
        ])
        .current_dir(dir.path())
        .env(occexpo_cli::CLIENT_CMD_ENV, "sh shim.sh")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let records = occexpo::annotate::read_records(&dir.path().join("store.jsonl")).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].raw_responses[0].trim(), "答案: E2 (remote)");
    assert_eq!(records[0].timestamp, "2023-11-14T22:13:20Z");
}

#[test]
fn annotation_store_appends() {
    let dir = tempfile::tempdir().unwrap();
    annotated_taxonomy(dir.path());
    for _ in 0..2 {
        let o = occexpo(
            dir.path(),
            &[
                "annotate",
                "--taxonomy",
                "tax.csv",
                "--mock",
                "fixed:E1",
                "--out",
                "store.jsonl",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let records = occexpo::annotate::read_records(&dir.path().join("store.jsonl")).unwrap();
    assert_eq!(records.len(), 4);
}
