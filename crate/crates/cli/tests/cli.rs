use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use income_tails::pipeline::synthetic::{dependent_cell, write_panel_csv, SyntheticCell};
use income_tails::pipeline::CellKey;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_income-tails"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_panel(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut records = Vec::new();
    for (country, year, cap_share) in [("aa", 2000, 0.3), ("aa", 2001, 0.3), ("bb", 2000, 0.001)] {
        let key = CellKey {
            country: country.into(),
            year,
        };
        let spec = SyntheticCell {
            n_households: 20_000,
            cap_share,
            ..SyntheticCell::default()
        };
        records.extend(dependent_cell(&key, &spec, &mut rng));
    }
    write_panel_csv(fs::File::create(path).unwrap(), &records).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn test_subcommand_reports_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("panel.csv");
    write_panel(&data);
    let out = tmp.path().join("out");
    let stdout = ok(&["test", data.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(stdout.contains("cells: 3 (2 tested, 1 skipped)"), "{stdout}");
    let cells = read(&out, "cells.csv");
    let rows: Vec<&str> = cells.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("aa,2000,20000,6000,"));
    assert!(rows[2].ends_with(",NA,too_few_capital"));
    for f in ["summary.csv", "scatter.csv", "histogram.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // Same inputs, same bytes.
    let again = tmp.path().join("again");
    ok(&["test", data.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    for f in ["cells.csv", "summary.csv", "scatter.csv", "histogram.csv"] {
        assert_eq!(read(&out, f), read(&again, f), "{f}");
    }
}

#[test]
fn estimate_skips_the_test() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("panel.csv");
    write_panel(&data);
    let out = tmp.path().join("out");
    let stdout = ok(&[
        "estimate",
        data.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--nmin",
        "10",
    ]);
    assert!(stdout.contains("cells: 3 (0 tested, 3 skipped)"), "{stdout}");
    let cells = read(&out, "cells.csv");
    // The sparse cell now clears the lower threshold and gets a capital exponent.
    assert!(cells.lines().nth(3).unwrap().starts_with("bb,2000,20000,20,1000,"));
}

#[test]
fn schema_errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("panel.csv");
    fs::write(&data, "country,year,household_id,labor_income\naa,2000,1,5\n").unwrap();
    let out = run(&["estimate", data.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("capital_income"));

    let schema = tmp.path().join("schema.txt");
    fs::write(&schema, "capital_income = labor_income\n").unwrap();
    ok(&[
        "estimate",
        data.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("o").to_str().unwrap(),
        "--nmin",
        "1",
    ]);
}

#[test]
fn missing_critical_value_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("panel.csv");
    write_panel(&data);
    let out = run(&["test", data.to_str().unwrap(), "--t0", "0.3", "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate-cv"));
}

#[test]
fn simulate_cv_extends_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |seed: &str| {
        vec![
            "simulate-cv".to_string(),
            "--t0".into(),
            "0.3".into(),
            "--paths".into(),
            "2000".into(),
            "--steps".into(),
            "500".into(),
            "--seed".into(),
            seed.into(),
            "--out-dir".into(),
            tmp.path().to_str().unwrap().into(),
        ]
    };
    let owned = args("9");
    let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
    ok(&refs);
    let table = read(tmp.path(), "critical_values.txt");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "# t0 level value provenance");
    assert_eq!(lines[1], "0.2 0.05 55.44 published");
    assert!(lines[2].starts_with("0.3 0.05 ") && lines[2].ends_with(" simulated"));

    let first = table.clone();
    ok(&refs);
    assert_eq!(read(tmp.path(), "critical_values.txt"), first);

    // The simulated table can then drive a test at t0 = 0.3.
    let data = tmp.path().join("panel.csv");
    write_panel(&data);
    let cv = tmp.path().join("critical_values.txt");
    ok(&[
        "test",
        data.to_str().unwrap(),
        "--t0",
        "0.3",
        "--cv-table",
        cv.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("o").to_str().unwrap(),
    ]);
}

#[test]
fn model_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("model.txt");
    fs::write(
        &cfg,
        "# small run\nn_agents = 2000\nburn_in = 200\nsweep_steps = 5\n",
    )
    .unwrap();
    let run_into = |name: &str| {
        let out = tmp.path().join(name);
        let stdout = ok(&[
            "model",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        (out, stdout)
    };
    let (a, stdout) = run_into("a");
    assert!(stdout.contains("alpha_Y = 3"), "{stdout}");
    for f in [
        "theory.txt",
        "policy.csv",
        "cross_section.csv",
        "simulation.txt",
        "tail_income.csv",
        "tail_norm_wealth.csv",
        "tail_wealth.csv",
        "tail_capital_income.csv",
        "sweep.csv",
    ] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert!(read(&a, "simulation.txt").contains("seed = 4"));
    assert_eq!(read(&a, "sweep.csv").lines().count(), 6);
    let (b, _) = run_into("b");
    for f in ["theory.txt", "policy.csv", "cross_section.csv", "simulation.txt", "tail_wealth.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }

    let sweep_dir = tmp.path().join("sweep");
    let stdout = ok(&["sweep", "--g-min", "0.02", "--g-max", "0.1", "--steps", "3", "--out-dir", sweep_dir.to_str().unwrap()]);
    assert_eq!(stdout.lines().count(), 3);
    let sweep = read(&sweep_dir, "sweep.csv");
    assert_eq!(sweep.lines().next(), Some("g,alpha_income,alpha_tilde,alpha_wealth"));

    fs::write(&cfg, "gama = 2\n").unwrap();
    let out = run(&["model", "--config", cfg.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}
