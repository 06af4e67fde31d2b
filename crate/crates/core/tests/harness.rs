use blocksparse::harness::{
    run_sweep, strip_wall_time, to_csv, BompDims, ExperimentConfig, RuleSpec, Setup, CSV_HEADER,
};

fn desk_bomp() -> Setup {
    Setup::Bomp(BompDims {
        n_blocks: 128,
        block_len: 10,
        measurements: 400,
        sparsity: 8,
    })
}

fn rules(text: &str) -> Vec<RuleSpec> {
    text.split(',').map(|r| r.parse().unwrap()).collect()
}

#[test]
fn grid_accounting() {
    let cfg = ExperimentConfig::new(
        desk_bomp(),
        rules("derived,relative,residual"),
        vec![0.0, 5.0, 10.0, 15.0, 20.0],
        10,
        1,
    );
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 15);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.detection_prob));
        assert!((0.0..=1.0).contains(&r.detection_all_prob));
        assert!(r.nmse >= 0.0);
        assert_eq!(r.trials, 10);
        assert!(r.ser.is_none());
    }
    assert_eq!(rows[0].rule, "derived");
    assert_eq!(rows[5].rule, "relative:0.25");
    assert_eq!(rows[10].rule, "residual");
    assert_eq!(rows[6].snr_db, 5.0);

    let csv = to_csv(&rows).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 15);
}

#[test]
fn near_noiseless_cell() {
    let cfg = ExperimentConfig::new(desk_bomp(), rules("derived"), vec![200.0], 5, 2);
    let row = &run_sweep(&cfg).unwrap()[0];
    assert!(row.nmse < 1e-12, "{}", row.nmse);
    assert_eq!(row.detection_prob, 1.0);
}

#[test]
fn reproducible_csv() {
    let mut cfg = ExperimentConfig::new(desk_bomp(), rules("derived,max"), vec![10.0], 6, 3);
    cfg.omit_wall_time = true;
    let a = to_csv(&run_sweep(&cfg).unwrap()).unwrap();
    let b = to_csv(&run_sweep(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);

    cfg.omit_wall_time = false;
    let timed = to_csv(&run_sweep(&cfg).unwrap()).unwrap();
    assert_eq!(strip_wall_time(&timed).unwrap(), a);
}

#[test]
fn bad_configs_are_rejected() {
    let mut cfg = ExperimentConfig::new(desk_bomp(), rules("derived"), vec![10.0], 0, 0);
    assert!(run_sweep(&cfg).is_err());
    cfg.trials = 1;
    cfg.snr_db.clear();
    assert!(run_sweep(&cfg).is_err());
    cfg.snr_db = vec![10.0];
    cfg.rules.clear();
    assert!(run_sweep(&cfg).is_err());
}

/// Low-SNR orderings at desk scale over 200 trials.
#[test]
fn low_snr_rule_orderings() {
    let cfg = ExperimentConfig::new(
        desk_bomp(),
        rules("derived,relative,residual"),
        vec![0.0],
        200,
        4,
    );
    let rows = run_sweep(&cfg).unwrap();
    let (derived, relative, residual) = (&rows[0], &rows[1], &rows[2]);
    assert!(
        residual.detection_prob < derived.detection_prob,
        "residual {} vs derived {}",
        residual.detection_prob,
        derived.detection_prob
    );
    assert!(
        relative.mean_iterations > derived.mean_iterations,
        "relative {} vs derived {}",
        relative.mean_iterations,
        derived.mean_iterations
    );
}
