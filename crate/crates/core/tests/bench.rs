use discover::bench::{
    self, aggregate, comparison_csv, comparison_markdown, filter_suite, load_suite, reference_means, reference_table,
    run_benchmark, BenchmarkConfig, Group, RowStatus, TrainedBy, PUBLISHED_MEANS, REFERENCE_METRICS,
};
use std::path::Path;

fn suite_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench")
}

#[test]
fn embedded_references_match_fixture() {
    let text = include_str!("fixtures/reference_table.csv");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let embedded = reference_table();
    let fixture: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(fixture.len(), embedded.len());
    for (row, cells) in embedded.iter().zip(&fixture) {
        assert_eq!(row.group.as_str(), cells[0]);
        assert_eq!(row.target, cells[1]);
        let by = match row.trained_by {
            TrainedBy::Published => "published",
            TrainedBy::Engine => "engine",
        };
        assert_eq!(by, cells[2]);
        assert_eq!(row.model, cells[3]);
        for (i, m) in REFERENCE_METRICS.iter().enumerate() {
            assert_eq!(header[4 + i], m.as_str());
            let want: Option<f64> = (!cells[4 + i].is_empty()).then(|| cells[4 + i].parse().unwrap());
            assert_eq!(row.get(*m), want, "{} {} {m}", row.target, by);
        }
    }
}

#[test]
fn group_means_reproduce_published_means() {
    for (group, theirs, ours) in PUBLISHED_MEANS {
        let (t, o) = reference_means(group);
        // published means are rounded to three decimals
        assert!((t - theirs).abs() <= 5e-4 + 1e-12, "{group}: {t} vs {theirs}");
        assert!((o - ours).abs() <= 5e-4 + 1e-12, "{group}: {o} vs {ours}");
    }
}

#[test]
fn shipped_suite_loads_with_references() {
    let suite = load_suite(&suite_dir()).unwrap();
    let ids: Vec<&str> = suite.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["aqbench", "climate", "concrete", "hcv", "hearing_loss"]);
    let aq = &suite[0];
    assert_eq!(aq.targets().len(), 15);
    assert_eq!(aq.references("o3_average_values"), (Some(0.60), Some(0.67)));
    let hcv = &suite[3];
    assert_eq!(hcv.references("Category"), (Some(0.915), Some(0.977)));
    let concrete = &suite[2];
    assert_eq!(concrete.references("concrete_compressive_strength"), (Some(3.26), Some(0.28)));
    for cfg in &suite {
        for t in cfg.targets() {
            assert!(cfg.references(&t).0.is_some(), "{} / {t}", cfg.id);
        }
    }
    assert_eq!(filter_suite(suite.clone(), &["hcv".into()]).len(), 1);
    assert_eq!(filter_suite(suite, &["ozone".into()])[0].id, "aqbench");
}

#[test]
fn absent_data_skips_by_availability() {
    let mut suite = load_suite(&suite_dir()).unwrap();
    for c in &mut suite {
        c.run.data.path = Path::new("/nonexistent").join(&c.run.data.path);
    }
    let rows: Vec<_> = bench::run_suite(&suite, Some(99), "t").into_iter().map(|r| r.row).collect();
    let skipped = rows.iter().filter(|r| r.status == RowStatus::Skipped).count();
    assert_eq!(skipped, 5);
    let unavailable = rows.iter().filter(|r| r.status == RowStatus::Unavailable).count();
    assert_eq!(unavailable, 17);
    let agg = aggregate(&rows);
    assert_eq!(agg.len(), 5);
    let ozone = agg.iter().find(|a| a.group == Group::Ozone).unwrap();
    assert!((ozone.published_mean.unwrap() - 0.535).abs() < 5e-4);
    assert!((ozone.engine_mean.unwrap() - 0.653).abs() < 5e-4);
    // the seed override leaves reference columns alone
    let again: Vec<_> = bench::run_suite(&suite, Some(1), "t").into_iter().map(|r| r.row).collect();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!((a.published_value, a.engine_value), (b.published_value, b.engine_value));
    }
    let md = comparison_markdown(&rows, &agg, &[]);
    assert!(md.contains("| Ozone | r2 | 0.535 | 0.653 |  | 0/15 |"), "{md}");
    assert_eq!(comparison_csv(&rows).lines().count(), rows.len() + 1);
}

#[test]
fn multi_target_run_excludes_sibling_targets() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,a,b,o3_average_values,o3_daytime_avg\n");
    for i in 0..240 {
        let a = (i * 37 % 101) as f64 / 101.0;
        let b = (i * 53 % 97) as f64 / 97.0;
        let noise = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
        text.push_str(&format!("{i},{a},{b},{},{}\n", 3.0 * a + noise, 2.0 * a + b + noise));
    }
    std::fs::write(dir.path().join("aq.csv"), text).unwrap();
    let cfg = BenchmarkConfig::from_toml_str(
        r#"
        id = "mini"
        group = "ozone"
        availability = "public_auto"
        targets = ["o3_average_values", "o3_daytime_avg"]
        floors = { o3_average_values = 0.5 }
        [run.data]
        path = "aq.csv"
        target = "o3_average_values"
        ignore = ["id"]
        split_column = "dataset"
        [run.search]
        primary_metric = "r2"
        max_candidates = 2
        families = ["random_forest"]
        "#,
        dir.path(),
    )
    .unwrap();
    let runs = run_benchmark(&cfg, None, "t");
    assert_eq!(runs.len(), 2);
    for run in &runs {
        assert_eq!(run.row.status, RowStatus::Ran, "{:?}", run.row.reason);
        assert!(run.row.reason.as_ref().unwrap().contains("split column"));
        let report = run.report.as_ref().unwrap();
        let groups = report.plan.feature_groups();
        let features: Vec<&str> = groups.iter().map(|g| g.0.as_str()).collect();
        assert!(!features.iter().any(|f| f.starts_with("o3_") || *f == "id"), "{features:?}");
    }
    assert!(runs[0].row.ours.unwrap() > 0.5);
    assert_eq!(runs[0].row.pass, Some(true));
    assert_eq!(runs[1].row.pass, None);
    let again = run_benchmark(&cfg, None, "t");
    assert_eq!(runs[0].row.ours, again[0].row.ours);
}
