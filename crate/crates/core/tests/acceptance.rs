//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Criteria that need benchmark data report FAIL with the reason when the
//! data is absent, without failing the process; set
//! `DISCOVER_ACCEPTANCE_STRICT=1` to make that fatal too. Any criterion that
//! runs and misses its target exits non-zero.

mod common;

use discover::bench::{self, BenchmarkRun, RowStatus, PUBLISHED_MEANS, REFERENCE_METRICS};
use discover::config::RunConfig;
use discover::matrix::Matrix;
use discover::metrics::auc;
use discover::models::{Forest, ForestParams, Gbdt, GbdtParams, MaxFeatures, Network};
use discover::patterns::{mine_patterns, ConditionForm, MiningConfig, PatternKind};
use discover::pipeline;
use discover::report::{mask_timestamp, RunReport};
use discover::rng;
use discover::stats::{mann_whitney_one_tailed, normal_cdf, Direction, Method};
use discover::table::write_csv;
use discover::Task;
use rand::seq::SliceRandom;
use rand::Rng as _;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

struct Outcome {
    pass: bool,
    /// False when the inputs (benchmark data) are missing.
    available: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        available: true,
        detail: detail.into(),
    }
}

fn unavailable(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        available: false,
        detail: detail.into(),
    }
}

fn suite_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench")
}

/// Benchmark runs for criteria 1 to 3, shared with criterion 9.
struct BenchRuns {
    runs: BTreeMap<&'static str, Vec<BenchmarkRun>>,
}

impl BenchRuns {
    fn collect() -> BenchRuns {
        let suite = bench::load_suite(&suite_dir()).expect("benchmark suite loads");
        let mut runs = BTreeMap::new();
        for (id, targets) in [
            ("hcv", None),
            ("concrete", None),
            ("aqbench", Some(vec!["o3_average_values".to_string(), "o3_daytime_avg".to_string()])),
        ] {
            let cfg = suite.iter().find(|c| c.id == id).expect("config present");
            let targets = targets.unwrap_or_else(|| cfg.targets());
            runs.insert(id, bench::run_benchmark_targets(cfg, &targets, None, "acceptance"));
        }
        BenchRuns { runs }
    }

    fn check(&self, id: &str, max_secs: f64) -> Outcome {
        let runs = &self.runs[id];
        if let Some(r) = runs.iter().find(|r| matches!(r.row.status, RowStatus::Unavailable | RowStatus::Skipped)) {
            return unavailable(r.row.reason.clone().unwrap_or_default());
        }
        let mut pass = true;
        let mut parts = Vec::new();
        let mut secs = 0.0;
        for r in runs {
            let row = &r.row;
            secs += row.runtime_secs;
            match (row.status, row.ours, row.floor) {
                (RowStatus::Ran, Some(v), Some(f)) => {
                    let ok = bench::meets_floor(row.metric, v, f);
                    pass &= ok;
                    parts.push(format!("{} {} = {v:.4} (floor {f})", row.target, row.metric));
                }
                _ => {
                    pass = false;
                    parts.push(format!("{}: {:?} {}", row.target, row.status, row.reason.clone().unwrap_or_default()));
                }
            }
        }
        pass &= secs < max_secs;
        parts.push(format!("runtime {secs:.0}s (limit {max_secs:.0}s)"));
        outcome(pass, parts.join("; "))
    }
}

fn c4_pattern_recovery() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let table = common::planted_table(1000, 5, 2.0, seed);
        let p = common::prepare(&table, seed, 100);
        let (result, _) = mine_patterns(&p.model, &p.plan, &p.train, &p.holdout, &MiningConfig::default(), seed)
            .expect("mining runs");
        let ok = result
            .patterns
            .first()
            .is_some_and(|top| common::matches_plant(&p.train, &top.pattern.conditions));
        if ok {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    outcome(hits >= 18, format!("{hits}/20 seeds rank the planted pattern first (misses: {misses:?}); need 18"))
}

fn c5_false_discoveries() -> Outcome {
    let mut total = 0usize;
    for seed in 0..20u64 {
        let table = common::planted_table(500, 30, 0.0, 1000 + seed);
        let p = common::prepare(&table, seed, 100);
        let (result, _) = mine_patterns(&p.model, &p.plan, &p.train, &p.holdout, &MiningConfig::default(), seed)
            .expect("mining runs");
        total += result.of_kind(PatternKind::Discovery).count();
    }
    let mean = total as f64 / 20.0;
    outcome(mean <= 0.5, format!("mean discoveries per noise run = {mean} (limit 0.5)"))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Tail probability of the rank-sum statistic by listing every subset.
fn brute_force_mw(sub: &[f64], reference: &[f64], direction: Direction) -> f64 {
    let mut pooled: Vec<f64> = sub.iter().chain(reference).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let rank = |v: f64| pooled.iter().position(|&p| p == v).unwrap() + 1;
    let observed: usize = sub.iter().map(|&v| rank(v)).sum();
    let big_n = pooled.len();
    let n = sub.len();
    let mut count = 0u64;
    let mut total = 0u64;
    for bits in 0u32..(1 << big_n) {
        if bits.count_ones() as usize != n {
            continue;
        }
        total += 1;
        let s: usize = (0..big_n).filter(|i| bits >> i & 1 == 1).map(|i| i + 1).sum();
        let extreme = match direction {
            Direction::Greater => s >= observed,
            Direction::Less => s <= observed,
        };
        count += extreme as u64;
    }
    assert_eq!(total as f64, binomial(big_n, n));
    count as f64 / total as f64
}

fn c6_statistics_oracles() -> Outcome {
    // normal CDF against a 50-digit reference
    let fixture = include_str!("fixtures/normal_cdf.csv");
    let mut cdf_err: f64 = 0.0;
    let mut points = 0;
    for line in fixture.lines().skip(1) {
        let (x, want) = line.split_once(',').unwrap();
        let (x, want): (f64, f64) = (x.parse().unwrap(), want.parse().unwrap());
        cdf_err = cdf_err.max((normal_cdf(x) - want).abs());
        points += 1;
    }

    let mut r = rng::rng(6);
    let mut mw_err: f64 = 0.0;
    let mut exact_path = true;
    for _ in 0..200 {
        let big_n = r.gen_range(2..=12usize);
        let n = r.gen_range(1..big_n);
        let mut values: Vec<f64> = (0..big_n).map(|i| i as f64 + r.gen::<f64>() * 0.5).collect();
        values.shuffle(&mut r);
        let direction = if r.gen() { Direction::Greater } else { Direction::Less };
        let (sub, reference) = values.split_at(n);
        let got = mann_whitney_one_tailed(sub, reference, direction).unwrap();
        exact_path &= got.method == Method::Exact;
        mw_err = mw_err.max((got.p_value - brute_force_mw(sub, reference, direction)).abs());
    }

    let mut auc_err: f64 = 0.0;
    for _ in 0..100 {
        let len = r.gen_range(4..60);
        let mut labels: Vec<bool> = (0..len).map(|_| r.gen()).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..len).map(|_| (r.gen::<f64>() * 8.0).floor() / 8.0).collect();
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..len {
            for j in 0..len {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        auc_err = auc_err.max((auc(&labels, &scores).unwrap() - wins / pairs).abs());
    }
    outcome(
        points == 10_000 && cdf_err <= 1e-12 && mw_err <= 1e-12 && exact_path && auc_err <= 1e-12,
        format!(
            "normal_cdf max error {cdf_err:.1e} over {points} points; Mann-Whitney exact vs enumeration {mw_err:.1e} \
             (exact path used: {exact_path}); AUC vs pairwise {auc_err:.1e}; tolerance 1e-12"
        ),
    )
}

fn random_matrix(r: &mut rng::Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_columns((0..cols).map(|_| (0..rows).map(|_| r.gen_range(lo..hi)).collect()).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn c7_model_numerics() -> Outcome {
    let mut r = rng::rng(7);

    // MLP gradients against central differences
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let task = if i % 2 == 0 { Task::Regression } else { Task::BinaryClassification };
        let inputs = r.gen_range(1..=5);
        let hidden: Vec<usize> = (0..r.gen_range(1..=2)).map(|_| r.gen_range(1..=6)).collect();
        let rows = r.gen_range(5..=20);
        let x = random_matrix(&mut r, rows, inputs, -1.0, 1.0);
        let y: Vec<f64> = (0..rows)
            .map(|_| match task {
                Task::Regression => rng::standard_normal(&mut r),
                Task::BinaryClassification => r.gen_range(0..2) as f64,
            })
            .collect();
        let mut net = Network::new(task, inputs, &hidden, &mut r);
        let params: Vec<f64> = (0..net.parameter_count()).map(|_| 0.7 * rng::standard_normal(&mut r)).collect();
        net.set_parameters(&params);
        let all: Vec<usize> = (0..rows).collect();
        let (_, analytic) = net.loss_and_gradient(&x, &y, &all);
        let h = 1e-6;
        let numeric: Vec<f64> = (0..params.len())
            .map(|k| {
                let mut p = params.clone();
                p[k] += h;
                net.set_parameters(&p);
                let up = net.mean_loss(&x, &y);
                p[k] -= 2.0 * h;
                net.set_parameters(&p);
                let down = net.mean_loss(&x, &y);
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        let rel = if scale < 1e-10 { 0.0 } else { norm(&diff) / scale };
        worst = worst.max(rel);
    }

    // GBDT: each round adds exactly learning_rate * tree, and a shorter fit
    // is a prefix of a longer one
    let mut additive = true;
    for i in 0..20 {
        let task = if i % 2 == 0 { Task::Regression } else { Task::BinaryClassification };
        let rows = r.gen_range(30..120);
        let x = random_matrix(&mut r, rows, 3, 0.0, 1.0);
        let y: Vec<f64> = (0..rows)
            .map(|k| {
                let s = x.get(k, 0) * 2.0 - x.get(k, 1) + 0.3 * rng::standard_normal(&mut r);
                match task {
                    Task::Regression => s,
                    Task::BinaryClassification => (s > 0.5) as u8 as f64,
                }
            })
            .collect();
        let params = GbdtParams {
            rounds: 30,
            patience: 30,
            subsample: 0.8,
            ..Default::default()
        };
        let (model, _) = Gbdt::fit(task, &x, &y, None, &params, i);
        for k in 0..model.trees.len() {
            let before = model.margin_rounds(&x, k);
            let after = model.margin_rounds(&x, k + 1);
            for row in 0..rows {
                additive &= after[row] == before[row] + model.learning_rate * model.trees[k].predict_row(&x, row);
            }
        }
        let short = GbdtParams {
            rounds: 10,
            patience: 10,
            ..params
        };
        let (prefix, _) = Gbdt::fit(task, &x, &y, None, &short, i);
        additive &= prefix.trees[..] == model.trees[..10];
    }

    // Forest regression stays inside the training target range
    let mut in_range = true;
    for i in 0..100 {
        let rows = r.gen_range(10..80);
        let cols = r.gen_range(1..=5);
        let x = random_matrix(&mut r, rows, cols, 0.0, 1.0);
        let offset = r.gen_range(-50.0..50.0);
        let y: Vec<f64> = (0..rows).map(|_| offset + 10.0 * rng::standard_normal(&mut r)).collect();
        let params = ForestParams {
            trees: r.gen_range(5..30),
            max_depth: [None, Some(3)][i % 2],
            min_samples_leaf: r.gen_range(1..=3),
            max_features: MaxFeatures::Sqrt,
            bootstrap: i % 3 != 0,
        };
        let forest = Forest::fit(&x, &y, &params, i as u64);
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let probe = random_matrix(&mut r, 50, cols, -2.0, 3.0);
        for p in forest.predict(&x).into_iter().chain(forest.predict(&probe)) {
            in_range &= p >= lo && p <= hi;
        }
    }
    outcome(
        worst <= 1e-4 && additive && in_range,
        format!(
            "MLP worst relative gradient error {worst:.1e} over 50 networks (limit 1e-4); \
             GBDT stagewise additivity exact: {additive}; forest outputs within target range on 100 datasets: {in_range}"
        ),
    )
}

fn planted_config(dir: &Path) -> RunConfig {
    let table = common::planted_table(1000, 5, 2.0, 21);
    write_csv(&table, std::fs::File::create(dir.join("planted.csv")).unwrap()).unwrap();
    RunConfig::from_toml_str(
        "seed = 21\n[data]\npath = \"planted.csv\"\ntarget = \"y\"\n\
         [search]\nmax_candidates = 6\n",
    )
    .unwrap()
}

fn c8_determinism(dir: &Path) -> (Outcome, Option<RunReport>) {
    let cfg = planted_config(dir);
    let start = Instant::now();
    let a = pipeline::run(&cfg, dir, "2026-01-01T00:00:00Z").unwrap();
    let b = pipeline::run(&cfg, dir, "2026-12-31T23:59:59Z").unwrap();
    let (ja, jb) = (a.report.to_json(), b.report.to_json());
    let same = mask_timestamp(&ja) == mask_timestamp(&jb);
    let families: std::collections::BTreeSet<String> =
        a.report.leaderboard.entries.iter().map(|e| e.spec.family().to_string()).collect();
    (
        outcome(
            same && ja != jb,
            format!(
                "two runs ({:?} families, {} patterns, {:.0}s) identical after masking the timestamp: {same}",
                families,
                a.report.patterns().len(),
                start.elapsed().as_secs_f64()
            ),
        ),
        Some(a.report),
    )
}

/// (n, mean) of every pattern's train and holdout evidence, recomputed from
/// the CSV text with no library parsing. Returns mismatch descriptions.
fn recompute_evidence(report: &RunReport, csv_path: &Path) -> Result<(usize, Vec<String>), String> {
    let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| e.to_string())?;
    let headers: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(|h| h.trim().to_string()).collect();
    let rows: Vec<Vec<String>> = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(|c| c.trim().to_string()).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let missing = report.config.csv_options().missing_tokens;
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no column {name}"));
    let target = col(&report.data.target)?;
    let positive = &report.data.positive_levels;
    let target_value = |row: &[String]| -> Option<f64> {
        let cell = &row[target];
        if missing.contains(cell) {
            return None;
        }
        if positive.is_empty() {
            cell.parse::<f64>().ok()
        } else {
            Some(positive.contains(cell) as u8 as f64)
        }
    };
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for p in report.patterns() {
        for (label, source_rows, evidence) in [
            ("train", &report.data.train_rows, &p.train),
            ("holdout", &report.data.holdout_rows, &p.holdout),
        ] {
            let mut n = 0usize;
            let mut sum = 0.0;
            for &i in source_rows.iter() {
                let row = &rows[i];
                let Some(y) = target_value(row) else { continue };
                let inside = p.conditions.iter().all(|c| {
                    let cell = &row[col(&c.feature).unwrap()];
                    if missing.contains(cell) {
                        return false;
                    }
                    let v = cell.parse::<f64>();
                    match &c.form {
                        ConditionForm::QuantileAbove { threshold, .. } => v.is_ok_and(|v| v > *threshold),
                        ConditionForm::QuantileBelow { threshold, .. } => v.is_ok_and(|v| v < *threshold),
                        ConditionForm::Interval { lo, hi } => v.is_ok_and(|v| *lo <= v && v <= *hi),
                        ConditionForm::CategoryEquals { level } => cell == level,
                    }
                });
                if inside {
                    n += 1;
                    sum += y;
                }
            }
            let mu = (n > 0).then(|| sum / n as f64);
            let mu_ok = match (mu, evidence.mu) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                (None, None) => true,
                _ => false,
            };
            checked += 1;
            if n != evidence.n || !mu_ok {
                mismatches.push(format!(
                    "rank {} {label}: n {} vs {n}, mu {:?} vs {mu:?}",
                    p.rank, evidence.n, evidence.mu
                ));
            }
        }
    }
    Ok((checked, mismatches))
}

fn c9_evidence(bench: &BenchRuns, planted: Option<&RunReport>, dir: &Path) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    if let Some(report) = planted {
        match recompute_evidence(report, &dir.join("planted.csv")) {
            Ok((checked, bad)) => {
                pass &= bad.is_empty();
                parts.push(format!("planted run: {checked} evidence blocks, {} mismatches {:?}", bad.len(), bad));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("planted run: {e}"));
            }
        }
    }
    let mut bench_reports = 0;
    for runs in bench.runs.values() {
        for run in runs {
            let Some(report) = &run.report else { continue };
            bench_reports += 1;
            match recompute_evidence(report, &run.data_path) {
                Ok((checked, bad)) => {
                    pass &= bad.is_empty();
                    parts.push(format!(
                        "{} / {}: {checked} blocks, {} mismatches",
                        run.row.dataset,
                        run.row.target,
                        bad.len()
                    ));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{} / {}: {e}", run.row.dataset, run.row.target));
                }
            }
        }
    }
    if bench_reports == 0 {
        parts.push("no benchmark report to check: benchmark data unavailable".into());
        return Outcome {
            pass: false,
            available: false,
            detail: parts.join("; "),
        };
    }
    outcome(pass, parts.join("; "))
}

fn c10_transcription() -> Outcome {
    let fixture = include_str!("fixtures/reference_table.csv");
    let table = bench::reference_table();
    let mut mismatches = 0;
    let lines: Vec<&str> = fixture.lines().skip(1).collect();
    for (row, line) in table.iter().zip(&lines) {
        let cells: Vec<&str> = line.split(',').collect();
        let same_id = cells[0] == row.group.as_str() && cells[1] == row.target && cells[3] == row.model;
        let same_values = REFERENCE_METRICS.iter().enumerate().all(|(i, m)| {
            let want: Option<f64> = (!cells[4 + i].is_empty()).then(|| cells[4 + i].parse().unwrap());
            row.get(*m) == want
        });
        mismatches += (!(same_id && same_values)) as usize;
    }
    let mut worst: f64 = 0.0;
    for (group, theirs, ours) in PUBLISHED_MEANS {
        let (t, o) = bench::reference_means(group);
        worst = worst.max((t - theirs).abs()).max((o - ours).abs());
    }
    let (_, ozone) = bench::reference_means(bench::Group::Ozone);
    let pass = lines.len() == table.len() && mismatches == 0 && worst <= 5e-4 + 1e-12 && (ozone - 0.653).abs() <= 5e-4;
    outcome(
        pass,
        format!(
            "{} reference rows, {mismatches} mismatches with the fixture; worst group-mean deviation {worst:.4} \
             (rounding limit 0.0005); ozone engine mean {ozone:.4}",
            table.len()
        ),
    )
}

fn main() {
    // cargo passes libtest flags; listing must not run anything
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let strict = std::env::var("DISCOVER_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let dir = tempfile::tempdir().unwrap();
    let bench = BenchRuns::collect();
    let (c8, planted_report) = c8_determinism(dir.path());
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "HCV holdout accuracy >= 0.90", bench.check("hcv", 180.0)),
        (2, "Concrete holdout RMSE <= 5.0", bench.check("concrete", 300.0)),
        (3, "AQ-Bench R2 >= 0.55 / 0.50", bench.check("aqbench", 900.0)),
        (4, "planted pattern recovery", c4_pattern_recovery()),
        (5, "false-discovery control", c5_false_discoveries()),
        (6, "statistics oracle equivalence", c6_statistics_oracles()),
        (7, "model numerics", c7_model_numerics()),
        (8, "determinism", c8),
        (9, "evidence integrity", c9_evidence(&bench, planted_report.as_ref(), dir.path())),
        (10, "table transcription", c10_transcription()),
    ];
    let mut fatal = false;
    for (n, name, o) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if o.available { "" } else { " [data unavailable]" };
        println!("criterion {n:>2} {status}{note}: {name}: {}", o.detail);
        fatal |= !o.pass && (o.available || strict);
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if fatal {
        std::process::exit(1);
    }
}
