use std::fs;
use std::path::Path;

use crowding::error::CrowdingError;
use crowding::market_data::{ingest_book_snapshots, ingest_metaorders, ingest_price_panel, ingest_trades, IngestOptions};
use crowding::pipeline::{run, run_all, Command, RunConfig};
use crowding::synth::{BOOK_FILE, METAORDERS_FILE, PRICES_FILE, TRADES_FILE};

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
        seed = 5
        [synth]
        n_stocks = 12
        n_days = 300
        warmup_days = 300
        crowding_fraction = 0.2
        [stats]
        n_samples = 20
        block_len = 60
        [lags]
        acf_max_lag = 20
        fit_range = [1, 20]
        "#,
    )
    .unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_schema_tagged_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let outcomes = run_all(&cfg).unwrap();
    assert_eq!(outcomes.len(), 7);
    assert!(outcomes.iter().all(|o| o.succeeded()));

    for (file, schema) in [
        ("panel.json", "crowding.panel/1"),
        ("signal.json", "crowding.signal/1"),
        ("sketch.json", "crowding.sketch/1"),
        ("scan.json", "crowding.scan/1"),
        ("lags.json", "crowding.lags/1"),
        ("evolution.json", "crowding.evolution/1"),
        ("profit.json", "crowding.profit/1"),
        ("data/synth.json", "crowding.synth/1"),
    ] {
        assert_eq!(json(&dir.path().join(file))["schema"], schema, "{file}");
    }
    for c in Command::ALL {
        let m = json(&dir.path().join(format!("{c}.manifest.json")));
        assert_eq!(m["schema"], "crowding.manifest/1");
        assert_eq!(m["seed"], 5);
        assert!(!m["outputs"].as_array().unwrap().is_empty());
    }

    let scan = json(&dir.path().join("scan.json"));
    let metrics = scan["metrics"].as_array().unwrap();
    assert_eq!(metrics.len(), 5);
    assert_eq!(metrics[0]["points"].as_array().unwrap().len(), 9);
    let table = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 * 9);

    // A strongly crowded market: trade imbalance follows the flow.
    let trade = &metrics[0];
    assert_eq!(trade["metric"], "i_trade");
    assert!(trade["max_corr"].as_f64().unwrap() > 0.2);

    let sketch = json(&dir.path().join("sketch.json"));
    let n = sketch["dates"].as_array().unwrap().len();
    for k in ["s", "pi", "delta_pi"] {
        assert_eq!(sketch[k].as_array().unwrap().len(), n);
    }
}

#[test]
fn rerun_gives_identical_digests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_all(&small(a.path())).unwrap();
    let again = run_all(&small(a.path())).unwrap();
    let elsewhere = run_all(&small(b.path())).unwrap();
    for ((x, y), z) in first.iter().zip(&again).zip(&elsewhere) {
        assert_eq!(x.manifest.outputs, y.manifest.outputs);
        assert_eq!(x.manifest.inputs, y.manifest.inputs);
        assert_eq!(x.manifest.outputs, z.manifest.outputs);
    }
}

#[test]
fn seed_changes_the_data() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small(b.path());
    cfg.seed = 6;
    let x = run(Command::Synth, &small(a.path())).unwrap();
    let y = run(Command::Synth, &cfg).unwrap();
    assert_ne!(x.manifest.outputs[0].sha256, y.manifest.outputs[0].sha256);
}

#[test]
fn scan_before_panel_names_panel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let err = run(Command::Scan, &cfg).unwrap_err();
    match &err {
        CrowdingError::MissingArtifact { producer, .. } => assert_eq!(producer, "panel"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("crowding panel"));

    // With data but no panel yet, `panel` is still the one named.
    run(Command::Synth, &cfg).unwrap();
    let err = run(Command::Evolve, &cfg).unwrap_err();
    assert!(matches!(err, CrowdingError::MissingArtifact { ref producer, .. } if producer == "panel"));

    let err = run(Command::Panel, &small(&dir.path().join("empty"))).unwrap_err();
    assert!(matches!(err, CrowdingError::MissingArtifact { ref producer, .. } if producer == "synth"));
}

#[test]
fn synthetic_files_ingest_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run(Command::Synth, &cfg).unwrap();
    let data = cfg.data_dir();
    let opts = IngestOptions::default();
    let t = ingest_trades(data.join(TRADES_FILE), &opts).unwrap();
    let b = ingest_book_snapshots(data.join(BOOK_FILE), &opts).unwrap();
    let m = ingest_metaorders(data.join(METAORDERS_FILE)).unwrap();
    let p = ingest_price_panel(data.join(PRICES_FILE)).unwrap();
    assert!(t.is_clean() && b.is_clean() && m.is_clean() && p.is_clean());
    assert!(!t.records.is_empty() && !b.records.is_empty() && !m.records.is_empty());
}

#[test]
fn rejected_rows_fail_the_run_but_keep_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    run(Command::Synth, &cfg).unwrap();
    let data = cfg.data_dir();
    let mut trades = fs::read_to_string(data.join(TRADES_FILE)).unwrap();
    trades.push_str("S000,2011-01-03,40000000,100.0,99.9,0\n");
    let bad = dir.path().join("bad_trades.csv");
    fs::write(&bad, trades).unwrap();
    cfg.data.trades = Some(bad);

    let outcome = run(Command::Panel, &cfg).unwrap();
    assert!(!outcome.succeeded());
    assert_eq!(outcome.errors().len(), 1);
    assert!(outcome.errors()[0].contains("line"));
    assert!(dir.path().join("panel.csv").is_file());
}

#[test]
fn every_config_problem_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.stats.n_samples = 0;
    cfg.scan.d_grid = vec![-1.0];
    cfg.signal.d = 0.0;
    match run(Command::Synth, &cfg).unwrap_err() {
        CrowdingError::Config(errs) => assert!(errs.len() >= 3, "{errs:?}"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(!dir.path().join("data").exists());
}

#[test]
fn liquidity_averaging_records_its_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.stats.averaging = "liquidity".parse().unwrap();
    cfg.scan.bands = false;
    for c in [Command::Synth, Command::Panel, Command::Signal, Command::Scan, Command::Profit] {
        run(c, &cfg).unwrap();
    }
    let scan = json(&dir.path().join("scan.json"));
    assert_eq!(scan["parameters"]["stats"]["correlation"]["averaging"], "liquidity");
    assert_eq!(scan["parameters"]["stats"]["weights"], "mean daily trade count per stock");
    assert!(scan["metrics"][0]["max_corr"].as_f64().unwrap() > 0.2);
}
