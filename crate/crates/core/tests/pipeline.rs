use ehlora::harness::{
    emit_csv, read_csv, run_allocation, run_sweep, run_sweep_variants, run_trial, variants, PowerMode, ScenarioConfig,
    SeedSpec, SweepResult, Variant, SWEEP_COLUMNS,
};
use ehlora::interference::CorrelationKind;
use ehlora::optimizer::EhTimeMode;
use ehlora::phy::noise_power;
use ehlora::{CollisionMode, Error, SfPolicy, Stage};

fn small(seeds: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.seeds = SeedSpec::Range { start: 0, count: seeds };
    cfg
}

#[test]
fn decoupled_full_cap_trial_is_the_weakest_solo_rate() {
    let mut cfg = small(1);
    cfg.corr_policy.kind = CorrelationKind::None;
    cfg.power_mode = PowerMode::FullCap;
    let density = cfg.geometry.user_density_per_km2;
    let t = run_trial(&cfg, 4, density).unwrap();
    let alloc = run_allocation(&cfg, 4, density).unwrap();
    let noise = noise_power(&cfg.phy);
    let expect = t
        .active_ids
        .iter()
        .zip(&t.caps_w)
        .map(|(&id, &cap)| (cap * alloc.topology.users[id].gain / noise).ln_1p())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(t.rates.min_rate_nats, expect);
    assert_eq!(t.powers_w, t.caps_w);
}

#[test]
fn trials_are_reproducible_to_the_byte() {
    let cfg = small(1);
    let a = serde_json::to_vec(&run_trial(&cfg, 17, 6e3).unwrap()).unwrap();
    let b = serde_json::to_vec(&run_trial(&cfg, 17, 6e3).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inter_sf_correlation_is_irrelevant_at_max_off_time() {
    let mut cfg = small(1);
    cfg.col_mode = CollisionMode::EhDependent;
    cfg.eh_policy.mode = EhTimeMode::MaxOffTime;
    for seed in 0..5 {
        cfg.corr_policy.kind = CorrelationKind::CoSfOnly;
        let a = run_trial(&cfg, seed, 1e4).unwrap();
        cfg.corr_policy.kind = CorrelationKind::CoAndInterSf;
        let b = run_trial(&cfg, seed, 1e4).unwrap();
        assert_eq!(a.rates.min_rate_nats, b.rates.min_rate_nats);
    }
}

#[test]
fn maxmin_trial_meets_its_own_target() {
    let cfg = small(1);
    let t = run_trial(&cfg, 2, 5e3).unwrap();
    let t_star = t.t_star_nats.unwrap();
    assert!(t.solver_converged);
    assert!((t.rates.min_rate_nats - t_star).abs() <= cfg.solver_tol_nats);
    for (p, c) in t.powers_w.iter().zip(&t.caps_w) {
        assert!(*p >= 0.0 && p <= c);
    }
    assert_eq!(t.sf_counts.iter().sum::<usize>(), t.active);
    assert_eq!(t.zero_cap_users, 0);
}

#[test]
fn one_density_one_seed_gives_one_row_per_variant() {
    let mut cfg = small(1);
    cfg.density_sweep = vec![4e3];
    cfg.sweep.sf_policy = vec![SfPolicy::Unfair, SfPolicy::Distance];
    cfg.sweep.power_mode = vec![PowerMode::Maxmin, PowerMode::FullCap];
    let r = run_sweep(&cfg).unwrap();
    assert_eq!(r.len(), 4);
    let vs = variants(&cfg);
    for (row, v) in r.rows.iter().zip(&vs) {
        assert_eq!(row.variant(), *v);
    }
    // variants of one cell share the topology
    assert!(r.rows.iter().all(|x| x.users == r.rows[0].users && x.trial_seed == r.rows[0].trial_seed));
}

#[test]
fn mean_min_rate_falls_with_density() {
    let cfg = small(50);
    let r = run_sweep(&cfg).unwrap();
    let s = r.aggregate();
    assert_eq!(s.len(), cfg.density_sweep.len());
    for w in s.windows(2) {
        assert!(w[0].density_per_km2 < w[1].density_per_km2);
        assert!(w[1].mean_min_rate_nats <= w[0].mean_min_rate_nats, "{w:?}");
    }
}

#[test]
fn pathloss_policy_skews_towards_sf7() {
    let cfg = small(20);
    let mean_sf7 = |p: SfPolicy| {
        let mut c = cfg.clone();
        c.sf_policy = p;
        (0..20)
            .map(|s| run_allocation(&c, s, 1e4).unwrap().assignment.group_sizes[0] as f64)
            .sum::<f64>()
            / 20.0
    };
    assert!(mean_sf7(SfPolicy::Pathloss) > mean_sf7(SfPolicy::Unfair));
}

#[test]
fn sweep_is_independent_of_seed_order() {
    let mut a = small(1);
    a.density_sweep = vec![3e3];
    a.seeds = SeedSpec::List(vec![5, 9, 2]);
    let mut b = a.clone();
    b.seeds = SeedSpec::List(vec![2, 5, 9]);
    let ra = run_sweep(&a).unwrap();
    let rb = run_sweep(&b).unwrap();
    for row in &ra.rows {
        assert!(rb.rows.contains(row));
    }
}

#[test]
fn csv_round_trip_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    emit_csv(&SweepResult::default(), &empty).unwrap();
    let text = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(text, format!("{}\n", SWEEP_COLUMNS.join(",")));
    assert!(read_csv(&empty).unwrap().is_empty());

    let mut cfg = small(3);
    cfg.density_sweep = vec![2e3, 5e3];
    let v = Variant {
        corr_policy: CorrelationKind::CoSfOnly,
        ..Variant::of(&cfg)
    };
    let r = run_sweep_variants(&cfg, &[Variant::of(&cfg), v]).unwrap();
    let path = dir.path().join("sweep.csv");
    emit_csv(&r, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), r);
}

#[test]
fn readme_documents_the_sweep_columns() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    assert!(readme.contains(&SWEEP_COLUMNS.join(",")));
}

#[test]
fn errors_name_their_stage() {
    let mut cfg = small(1);
    cfg.phy.sensitivity_dbm = vec![-10.0, -11.0, -12.0, -13.0, -14.0, -15.0];
    match run_trial(&cfg, 0, 1e4) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, Stage::Activation);
            assert!(matches!(*source, Error::EmptyActiveSet));
        }
        other => panic!("unexpected {other:?}"),
    }
    let cfg = small(1);
    let err = run_trial(&cfg, 0, 1.0).unwrap_err();
    assert!(err.to_string().starts_with("topology: empty topology"), "{err}");
}

#[test]
fn shipped_default_config_matches_builtin_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let cfg = ScenarioConfig::load(std::path::Path::new(path)).unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
}
