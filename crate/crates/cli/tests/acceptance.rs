//! Acceptance criteria 1-9, run in order with one PASS/FAIL line each.
//!
//! `cargo test -p ldctree-cli --test acceptance` (add `--release` for speed).
//! The process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ldctree::cascade::{train_ldctree, CascadeModel, LevelSpec};
use ldctree::data::{generate_synthetic, split_by_id, SplitSpec, SyntheticKind, SyntheticSpec};
use ldctree::ensemble::{
    partition_features, partition_from_importances, train_eldctree, train_feldctree, EnsembleConfig,
};
use ldctree::metrics::{auc, f1_score, prf_at_topk, ScoredSet};
use ldctree::persistence::{load_model, model_from_str, save_model, to_model_string, AnyModel};
use ldctree::rng::rng_from_seed;
use ldctree::{train_gbdt, Dataset, GbdtConfig};
use rand::Rng as _;

type Verdict = Result<String, String>;

/// Per-iteration training losses of every booster trained by criteria 1-5.
#[derive(Default)]
struct Trained {
    losses: Vec<(String, Vec<f64>)>,
    cascade: Option<CascadeModel>,
    showcase: Vec<AnyModel>,
}

impl Trained {
    fn record(&mut self, label: &str, model: &AnyModel) {
        for (i, b) in model.boosters().into_iter().enumerate() {
            self.losses
                .push((format!("{label}#{i}"), b.training_loss().to_vec()));
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn val_auc(scores: Vec<f64>, data: &Dataset) -> f64 {
    auc(&ScoredSet::new(scores, data.labels().to_vec()).unwrap()).unwrap()
}

fn two_level_cascade(data: &Dataset) -> CascadeModel {
    let all: Vec<usize> = (0..data.n_features()).collect();
    let specs = vec![
        LevelSpec {
            gbdt: GbdtConfig {
                seed: 1,
                ..GbdtConfig::default()
            },
            raw_features: all,
        },
        LevelSpec {
            gbdt: GbdtConfig {
                seed: 2,
                ..GbdtConfig::default()
            },
            raw_features: vec![],
        },
    ];
    train_ldctree(data, &specs).unwrap()
}

fn criterion_1(state: &mut Trained) -> Verdict {
    let started = Instant::now();
    let data = generate_synthetic(&SyntheticSpec::weak_xor(5000, 2, 3, 10)).unwrap();
    let cascade = two_level_cascade(&data);
    let mut worst: f64 = 0.0;
    let mut leaves = 0;
    for (l, level) in cascade.levels().iter().enumerate() {
        let model = level.model();
        let eps = model.config().prob_clamp_epsilon;
        let lr = model.learning_rate();
        let inputs: Vec<Vec<f64>> = data
            .rows()
            .map(|r| cascade.level_input(r, l).unwrap())
            .collect();
        let mut margins = vec![model.base_score(); data.n_rows()];
        for (j, tree) in model.trees().iter().enumerate() {
            let mut sums = vec![0.0; tree.num_leaves()];
            let mut counts = vec![0usize; tree.num_leaves()];
            for (n, x) in inputs.iter().enumerate() {
                let k = tree.apply(x).unwrap();
                margins[n] += lr * tree.leaf_value(k).unwrap();
                let p = (1.0 / (1.0 + (-margins[n]).exp())).clamp(eps, 1.0 - eps);
                let y = data.labels()[n] as f64;
                sums[k] += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
                counts[k] += 1;
            }
            for k in 0..tree.num_leaves() {
                let stored = level.entropy().tree(j)[k];
                check(stored.count == counts[k], || {
                    format!(
                        "level {} tree {} leaf {}: count mismatch",
                        l + 1,
                        j + 1,
                        k + 1
                    )
                })?;
                worst = worst.max((stored.entropy - sums[k] / counts[k] as f64).abs());
                leaves += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    state.record("c1", &AnyModel::Cascade(cascade.clone()));
    state.cascade = Some(cascade);
    check(worst <= 1e-12, || {
        format!("max deviation {worst:e} > 1e-12")
    })?;
    check(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:.1?}")
    })?;
    Ok(format!(
        "{leaves} leaves, max deviation {worst:.1e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_2(state: &mut Trained) -> Verdict {
    let started = Instant::now();
    let data = generate_synthetic(&SyntheticSpec::weak_xor(5000, 2, 3, 10)).unwrap();
    let cascade = state
        .cascade
        .clone()
        .unwrap_or_else(|| two_level_cascade(&data));
    let n = data.n_rows();
    let first = &cascade.levels()[0];
    let second = &cascade.levels()[1];
    // membership[j][k][n]: instance n reaches leaf k of level-1 tree j
    let mut membership: Vec<Vec<Vec<bool>>> = first
        .model()
        .trees()
        .iter()
        .map(|t| vec![vec![false; n]; t.num_leaves()])
        .collect();
    let mut level2_inputs = Vec::with_capacity(n);
    for (i, raw) in data.rows().enumerate() {
        let x1 = cascade.level_input(raw, 0).unwrap();
        for (j, t) in first.model().trees().iter().enumerate() {
            membership[j][t.apply(&x1).unwrap()][i] = true;
        }
        level2_inputs.push(cascade.level_input(raw, 1).unwrap());
    }
    let mut checked = 0;
    for (t, tree) in second.model().trees().iter().enumerate() {
        let reached: Vec<usize> = level2_inputs
            .iter()
            .map(|x| tree.apply(x).unwrap())
            .collect();
        for k in 0..tree.num_leaves() {
            let explanation = cascade.explain_leaf(1, t, k).unwrap();
            let mut expected = vec![true; n];
            for term in &explanation.terms {
                for (i, e) in expected.iter_mut().enumerate() {
                    *e = *e
                        && term
                            .leaves
                            .iter()
                            .any(|&leaf| membership[term.tree][leaf][i]);
                }
            }
            check(explanation.raw_conditions.is_empty(), || {
                "plain cascade path uses raw columns".into()
            })?;
            for i in 0..n {
                check((reached[i] == k) == expected[i], || {
                    format!(
                        "L2.T{}.leaf{}: instance {i} disagrees ({})",
                        t + 1,
                        k + 1,
                        explanation.expression()
                    )
                })?;
            }
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:.1?}")
    })?;
    Ok(format!(
        "{checked} level-2 leaves identical to their expressions, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_3(_: &mut Trained) -> Verdict {
    let rows = [(5.75, 36.39, 9.93), (6.39, 37.40, 10.92)];
    let mut details = Vec::new();
    for (p, r, f1) in rows {
        let got = f1_score(p / 100.0, r / 100.0) * 100.0;
        check((got - f1).abs() <= 0.005, || {
            format!("P={p}% R={r}% gives F1={got:.4}%, expected {f1}%")
        })?;
        details.push(format!("{got:.4}%"));
    }
    // prf_at_topk reports exactly this formula
    let mut rng = rng_from_seed(4);
    let scores: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
    let labels: Vec<u8> = (0..1000)
        .map(|_| u8::from(rng.random::<f64>() < 0.1))
        .collect();
    let set = ScoredSet::new(scores, labels).unwrap();
    for fraction in [0.1, 0.2, 0.5] {
        let prf = prf_at_topk(&set, fraction).unwrap();
        check(prf.f1 == f1_score(prf.precision, prf.recall), || {
            "top-k F1 differs from the formula".into()
        })?;
    }
    Ok(format!(
        "F1 = {} (table: 9.93%, 10.92%)",
        details.join(", ")
    ))
}

fn criterion_4(_: &mut Trained) -> Verdict {
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for set_index in 0..200 {
        let n = rng.random_range(2..=2000);
        let coarse = set_index % 2 == 0;
        let mut scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random();
                if coarse {
                    (s * 10.0).floor() / 10.0
                } else {
                    s
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        labels[0] = 0;
        labels[1] = 1;
        if set_index % 7 == 0 {
            scores.iter_mut().for_each(|s| *s = 0.5);
        }
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            if labels[i] != 1 {
                continue;
            }
            for j in 0..n {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        let got = auc(&ScoredSet::new(scores, labels).unwrap()).unwrap();
        worst = worst.max((got - wins / pairs).abs());
    }
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 sets, max deviation {worst:.1e}"))
}

fn criterion_5(state: &mut Trained) -> Verdict {
    let started = Instant::now();
    let mut means = [0.0; 4];
    let seeds = 5u64;
    let mut per_seed = Vec::new();
    for seed in 0..seeds {
        let spec = SyntheticSpec {
            seed,
            ..SyntheticSpec::weak_xor(50_000, 2, 3, 10)
        };
        let data = generate_synthetic(&spec).unwrap();
        let (train, validation, _) = split_by_id(&data, &SplitSpec::default(), seed).unwrap();
        let gbdt = GbdtConfig {
            num_trees: 50,
            seed,
            ..GbdtConfig::default()
        };
        let all: Vec<usize> = (0..train.n_features()).collect();
        let ensemble = EnsembleConfig {
            first_level_feature_fraction: 1.0,
            scf_cumulative_threshold: 0.5,
            gbdt_config: gbdt.clone(),
            seed,
            ..EnsembleConfig::default()
        };
        let models: Vec<AnyModel> = vec![
            train_gbdt(&train, &gbdt).unwrap().into(),
            train_ldctree(
                &train,
                &[
                    LevelSpec {
                        gbdt: gbdt.clone(),
                        raw_features: all,
                    },
                    LevelSpec {
                        gbdt: GbdtConfig {
                            seed: seed + 1000,
                            ..gbdt.clone()
                        },
                        raw_features: vec![],
                    },
                ],
            )
            .unwrap()
            .into(),
            train_eldctree(&train, &ensemble).unwrap().into(),
            train_feldctree(&train, &ensemble).unwrap().into(),
        ];
        let mut row = Vec::new();
        for (m, model) in models.into_iter().enumerate() {
            let a = val_auc(model.predict_dataset(&validation).unwrap(), &validation);
            means[m] += a / seeds as f64;
            row.push(format!("{a:.4}"));
            state.record(&format!("c5.seed{seed}.{}", model.kind()), &model);
            if seed == 0 {
                state.showcase.push(model);
            }
        }
        per_seed.push(row.join("/"));
    }
    let elapsed = started.elapsed();
    let [naive, ld, eld, feld] = means;
    let summary = format!(
        "mean AUC naive {naive:.4}, ldcTree {ld:.4}, EldcTree {eld:.4}, F-EldcTree {feld:.4}; per seed {}; {:.0}s",
        per_seed.join(" "),
        elapsed.as_secs_f64()
    );
    check(naive + 0.02 <= feld, || {
        format!("naive + 0.02 > F-EldcTree; {summary}")
    })?;
    check(ld <= eld + 0.01, || {
        format!("ldcTree > EldcTree + 0.01; {summary}")
    })?;
    check(eld + 0.01 <= feld + 0.01, || {
        format!("EldcTree > F-EldcTree; {summary}")
    })?;
    check(elapsed < Duration::from_secs(600), || {
        format!("took {elapsed:.0?}; {summary}")
    })?;
    Ok(summary)
}

fn criterion_6(state: &mut Trained) -> Verdict {
    check(!state.losses.is_empty(), || {
        "no boosters were trained by criteria 1-5".into()
    })?;
    let mut iterations = 0;
    for (label, loss) in &state.losses {
        check(!loss.is_empty(), || format!("{label} has no loss trace"))?;
        for (t, w) in loss.windows(2).enumerate() {
            check(w[1] <= w[0] + 1e-9, || {
                format!("{label}: loss rose {} -> {} at tree {}", w[0], w[1], t + 1)
            })?;
        }
        iterations += loss.len() - 1;
    }
    Ok(format!(
        "{} boosters, {iterations} iterations, none increased",
        state.losses.len()
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ldctree"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn bit_identical(a: &AnyModel, b: &AnyModel, width: usize) -> Result<(), String> {
    let mut rng = rng_from_seed(1000);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..width).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (pa, pb) = (a.predict(&x).unwrap(), b.predict(&x).unwrap());
        check(pa.to_bits() == pb.to_bits(), || {
            format!("{} prediction {pa} != {pb}", a.kind())
        })?;
    }
    Ok(())
}

fn criterion_7(state: &mut Trained) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.to_str().unwrap().to_string();
    let data = p("data.csv");
    run_cli(&["gen-data", "--n", "3000", "--out", &s(&data)])?;
    let mut kinds = 0;
    for kind in ["gbdt", "ldctree", "eldctree", "feldctree"] {
        let mut files = Vec::new();
        for run in 0..2 {
            let out = p(&format!("{kind}-{run}.json"));
            run_cli(&[
                "train",
                "--data",
                &s(&data),
                "--model-kind",
                kind,
                "--out",
                &s(&out),
                "--trees",
                "20",
                "--seed",
                "11",
            ])?;
            files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        check(files[0] == files[1], || {
            format!("{kind}: repeated training wrote different bytes")
        })?;
        let loaded = load_model(p(&format!("{kind}-0.json"))).map_err(|e| e.to_string())?;
        let reloaded =
            model_from_str(&to_model_string(&loaded).unwrap()).map_err(|e| e.to_string())?;
        bit_identical(&loaded, &reloaded, loaded.raw_feature_names().len())?;
        kinds += 1;
    }
    let mut in_memory: Vec<AnyModel> = std::mem::take(&mut state.showcase);
    if let Some(c) = state.cascade.take() {
        in_memory.push(c.into());
    }
    for (i, model) in in_memory.iter().enumerate() {
        let path = p(&format!("mem-{i}.json"));
        save_model(model, &path).map_err(|e| e.to_string())?;
        let loaded = load_model(&path).map_err(|e| e.to_string())?;
        bit_identical(model, &loaded, model.raw_feature_names().len())?;
    }
    Ok(format!(
        "{kinds} model kinds byte-identical across repeated CLI runs; {kinds} CLI-trained and {} in-memory models round-trip bit-identically on 1000 instances",
        in_memory.len()
    ))
}

fn criterion_8(_: &mut Trained) -> Verdict {
    let mut timing = Vec::new();
    let mut auc_gaps = Vec::new();
    for seed in 0..3u64 {
        let spec = SyntheticSpec {
            seed,
            ..SyntheticSpec::weak_xor(20_000, 2, 3, 10)
        };
        let data = generate_synthetic(&spec).unwrap();
        let (train, validation, _) = split_by_id(&data, &SplitSpec::default(), seed).unwrap();
        let fit = |depth: usize| {
            let config = GbdtConfig {
                num_trees: 50,
                max_depth: depth,
                seed,
                ..GbdtConfig::default()
            };
            let started = Instant::now();
            let model = train_gbdt(&train, &config).unwrap();
            (
                started.elapsed(),
                val_auc(model.predict_dataset(&validation).unwrap(), &validation),
            )
        };
        let (t4, a4) = fit(4);
        let (_, a8) = fit(8);
        let (t10, _) = fit(10);
        timing.push((t4, t10));
        auc_gaps.push(a8 - a4);
    }
    let t4: Duration = timing.iter().map(|t| t.0).sum();
    let t10: Duration = timing.iter().map(|t| t.1).sum();
    let gap = auc_gaps.iter().sum::<f64>() / auc_gaps.len() as f64;
    let summary = format!(
        "train time depth 4 {:.2}s vs depth 10 {:.2}s; mean AUC(depth 8) - AUC(depth 4) = {gap:+.4}",
        t4.as_secs_f64(),
        t10.as_secs_f64()
    );
    check(t10 > t4, || format!("depth 10 not slower; {summary}"))?;
    check(gap >= -0.005, || format!("depth 8 AUC too low; {summary}"))?;
    Ok(summary)
}

fn expected_partition(importances: &[f64], threshold: f64) -> usize {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| {
        importances[b]
            .partial_cmp(&importances[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut total = 0.0;
    let mut cut = order.len();
    for (i, &f) in order.iter().enumerate() {
        total += importances[f];
        if total >= threshold {
            cut = i + 1;
            break;
        }
    }
    cut.clamp(1, order.len() - 1)
}

fn criterion_9(_: &mut Trained) -> Verdict {
    let spec = SyntheticSpec {
        kind: SyntheticKind::Linear,
        n_instances: 4000,
        n_strong: 1,
        n_weak: 0,
        n_noise: 8,
        noise_level: 0.0,
        seed: 9,
    };
    let data = generate_synthetic(&spec).unwrap();
    let partition = partition_features(
        &data,
        &GbdtConfig {
            num_trees: 30,
            ..GbdtConfig::default()
        },
        0.9,
    )
    .unwrap();
    check(partition.scf.iter().any(|&(f, _)| f == 0), || {
        "dominant feature s0 is not in SCF".into()
    })?;

    let mut rng = rng_from_seed(99);
    for case in 0..100 {
        let n = rng.random_range(2..30);
        let mut imp: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if case % 10 == 0 {
            imp.iter_mut().for_each(|v| *v = 1.0);
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        }
        let threshold = rng.random_range(0.05..0.95);
        let p = partition_from_importances(&imp, threshold).unwrap();
        let mut seen = vec![0; n];
        for &(f, v) in p.scf.iter().chain(&p.wcf) {
            seen[f] += 1;
            check(v == imp[f], || {
                format!("case {case}: importance of {f} altered")
            })?;
        }
        check(seen.iter().all(|&c| c == 1), || {
            format!("case {case}: not a disjoint cover")
        })?;
        let min_scf = p.scf.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let max_wcf = p.wcf.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        check(min_scf >= max_wcf, || {
            format!("case {case}: SCF is not a prefix")
        })?;
        check(p.scf.len() == expected_partition(&imp, threshold), || {
            format!("case {case}: SCF size differs")
        })?;
    }
    Ok(format!(
        "dominant feature in SCF ({} SCF / {} WCF); 100 random vectors partitioned correctly",
        partition.scf.len(),
        partition.wcf.len()
    ))
}

type Criterion = (&'static str, fn(&mut Trained) -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("leaf entropy oracle", criterion_1),
        ("leaf set identity", criterion_2),
        ("top-k F1 arithmetic", criterion_3),
        ("AUC pairwise oracle", criterion_4),
        ("directional improvement", criterion_5),
        ("training loss monotone", criterion_6),
        ("reproducibility", criterion_7),
        ("depth cost trend", criterion_8),
        ("feature partition", criterion_9),
    ];
    let mut state = Trained::default();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(|| run(&mut state))).unwrap_or_else(|panic| {
            Err(format!(
                "panicked: {:?}",
                panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or(panic.downcast_ref::<&str>().copied())
            ))
        });
        match verdict {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
