use nphmm::harness::{
    fit_rate_slope, read_csv, rerun_cell, run_rate_experiment, write_csv, ExperimentConfig, Statistic, CSV_HEADER,
};
use nphmm::Error;

fn quick(n_grid: Vec<u64>, replicates: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_discrete(17);
    cfg.n_grid = n_grid;
    cfg.replicates = replicates;
    cfg.gibbs.iterations = 240;
    cfg.gibbs.burn_in = 40;
    cfg.gibbs.thin = 4;
    cfg.record_wall_time = false;
    cfg
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&run_rate_experiment(cfg).unwrap(), &mut buf).unwrap();
    buf
}

#[test]
fn one_cell_one_row() {
    let recs = run_rate_experiment(&quick(vec![100], 1)).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert!(r.errors.is_empty(), "{}", r.errors);
    assert!(r.median_d <= r.q90_d && (0.0..=1.0).contains(&r.exceedance_at_m));
}

#[test]
fn replay_is_byte_identical_and_cells_rerun_alone() {
    let cfg = quick(vec![60, 120, 240], 2);
    let a = csv_bytes(&cfg);
    assert_eq!(a, csv_bytes(&cfg));
    let text = String::from_utf8(a.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(text.lines().count(), 1 + 6);
    let recs = read_csv(&a[..]).unwrap();
    let order: Vec<(u64, usize)> = recs.iter().map(|r| (r.n, r.replicate)).collect();
    assert_eq!(order, vec![(60, 0), (60, 1), (120, 0), (120, 1), (240, 0), (240, 1)]);
    for r in [&recs[1], &recs[4]] {
        assert_eq!(&rerun_cell(&cfg, &r.seed_lineage).unwrap(), r);
    }
    let fit = fit_rate_slope(&recs, Statistic::MedianD, 0).unwrap();
    assert!(fit.ci.0 <= fit.slope && fit.slope <= fit.ci.1);
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let mut cfg = quick(vec![50, 100], 1);
    // Far too many windows to enumerate.
    cfg.ell = 40;
    let recs = run_rate_experiment(&cfg).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| !r.errors.is_empty() && r.median_d.is_nan()));
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(matches!(run_rate_experiment(&quick(vec![100, 100], 1)), Err(Error::DegenerateGrid(_))));
    assert!(matches!(run_rate_experiment(&quick(vec![], 1)), Err(Error::DegenerateGrid(_))));
    assert!(run_rate_experiment(&quick(vec![100], 0)).is_err());
    let mut cfg = quick(vec![100], 1);
    cfg.gibbs = nphmm::sampler::GibbsConfig::continuous(2, 0);
    assert!(run_rate_experiment(&cfg).is_err());
}
