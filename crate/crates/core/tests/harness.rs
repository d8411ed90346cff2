//! Config loading, orchestration and CSV output end to end.

use riskdp::harness::{
    csv_bytes, load_config, parse_config, run_experiment, write_csv, Algorithm, Cell, GridM, Schema,
};

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const BANDIT: &str = r#"{
  "generator": {"kind": "safe_risky_bandit"},
  "utility": {"kind": "exponential", "beta": 4.0},
  "grid_m": 256,
  "seeds": [0]
}"#;

#[test]
fn config_files_load_or_fail_with_the_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let ok = load_config(&write(&dir, "ok.json", BANDIT)).unwrap();
    assert_eq!(ok.grid_m, GridM::Fixed(256));

    let typo = BANDIT.replace("\"seeds\"", "\"episodez\": 10, \"seeds\"");
    let err = load_config(&write(&dir, "typo.json", &typo)).unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("episodez"), "{err}");
    assert!(err.to_string().contains("typo.json"), "{err}");

    let missing = load_config(&dir.path().join("nope.json")).unwrap_err();
    assert!(missing.is_config());

    let auto = BANDIT.replace("256", "\"auto\", \"algorithm\": \"ucb\", \"episodes\": 100");
    assert_eq!(load_config(&write(&dir, "auto.json", &auto)).unwrap().grid_m, GridM::Auto);
}

#[test]
fn solve_reports_the_safe_arm_at_zero_reward() {
    let mut cfg = parse_config(BANDIT).unwrap();
    cfg.algorithm = Some(Algorithm::Solve);
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.schema, Schema::Solve);
    let row = &out.rows[0];
    assert_eq!(&row[..3], &[Cell::Int(1), Cell::Int(0), Cell::Int(0)]);
    assert_eq!(row[5], Cell::Int(0));
}

#[test]
fn vigu_sweep_emits_one_row_per_cell_and_reruns_identically() {
    let text = r#"{
      "generator": {"kind": "random", "states": 3, "actions": 2, "horizon": 3, "seed": 11},
      "utility": {"kind": "exponential", "beta": 2.0},
      "algorithm": "sweep",
      "grid_m": 16,
      "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
      "mc_trials": 200,
      "fine_grid_multiplier": 2,
      "sweep": {"learner": "vigu", "values": [250, 1000, 4000]}
    }"#;
    let cfg = parse_config(text).unwrap();
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(a.rows.len(), 30);
    let hash = Cell::Text(cfg.hash());
    assert!(a.rows.iter().all(|r| r[7] == hash));
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(csv_bytes(a.schema, &a.rows).unwrap(), csv_bytes(b.schema, &b.rows).unwrap());
}

#[test]
fn csv_files_round_trip_their_floats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(BANDIT).unwrap();
    cfg.algorithm = Some(Algorithm::Solve);
    cfg.grid_m = GridM::Fixed(7);
    let out = run_experiment(&cfg).unwrap();
    let path = dir.path().join("solve.csv");
    write_csv(out.schema, &out.rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "h,s,y_index,y_value,value,action,seed,config_hash");
    for (line, row) in lines.zip(&out.rows) {
        let fields: Vec<&str> = line.split(',').collect();
        match row[4] {
            Cell::Float(v) => assert_eq!(fields[4].parse::<f64>().unwrap(), v),
            _ => unreachable!(),
        }
    }
    let empty = dir.path().join("empty.csv");
    write_csv(Schema::Ucb, &[], &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap().lines().count(), 1);
}
