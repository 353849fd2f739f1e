use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ldctree::cascade::{train_ldctree, CascadeModel, LevelSpec};
use ldctree::data::{
    generate_synthetic, load_csv, split_by_id, write_csv, SplitSpec, SyntheticKind, SyntheticSpec,
};
use ldctree::ensemble::{
    partition_from_importances, train_eldctree, train_feldctree, EnsembleConfig,
};
use ldctree::metrics::{auc, logloss_with_eps, prf_at_topk, ScoredSet};
use ldctree::persistence::{load_model, save_model, AnyModel, ModelKind, Persist};
use ldctree::rng::{derive_seed, stream};
use ldctree::{train_gbdt, Dataset, GbdtConfig};

use crate::failure::{data_error, model_error, Failure};
use crate::{
    BoostArgs, EvaluateArgs, ExplainArgs, GenDataArgs, ImportanceArgs, PredictArgs, SplitArgs,
    TrainArgs,
};

type Outcome = Result<(), Failure>;

fn out_err(e: io::Error) -> Failure {
    // downstream reader went away, e.g. `| head`
    if e.kind() == io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
    Failure::data(format!("cannot write output: {e}"))
}

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    load_csv(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<AnyModel, Failure> {
    load_model(path).map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

fn split_spec(args: &SplitArgs) -> Result<SplitSpec, Failure> {
    match args.split[..] {
        [a, b, c] => SplitSpec::new(a, b, c).map_err(|e| Failure::usage(format!("--split: {e}"))),
        _ => Err(Failure::usage(
            "--split takes three comma-separated fractions",
        )),
    }
}

fn gbdt_config(args: &BoostArgs, seed: u64) -> Result<GbdtConfig, Failure> {
    let d = GbdtConfig::default();
    let config = GbdtConfig {
        num_trees: args.trees.unwrap_or(d.num_trees),
        max_depth: args.depth.unwrap_or(d.max_depth),
        min_instances_per_split: args.min_instances.unwrap_or(d.min_instances_per_split),
        learning_rate: args.lr.unwrap_or(d.learning_rate),
        row_subsample: args.row_subsample.unwrap_or(d.row_subsample),
        feature_subsample: args.feature_subsample.unwrap_or(d.feature_subsample),
        seed,
        prob_clamp_epsilon: d.prob_clamp_epsilon,
    };
    config
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    Ok(config)
}

/// Fails with exit code 3 unless the data columns are the model's raw features.
fn check_feature_space(model: &AnyModel, data: &Dataset) -> Outcome {
    if model.raw_feature_names() != data.feature_names() {
        return Err(Failure::model(format!(
            "feature space mismatch: model expects [{}], data has [{}]",
            model.raw_feature_names().join(","),
            data.feature_names().join(",")
        )));
    }
    Ok(())
}

pub fn gen_data(args: GenDataArgs) -> Outcome {
    let kind: SyntheticKind = args
        .kind
        .parse()
        .map_err(|e| Failure::usage(format!("--kind: {e}")))?;
    let spec = SyntheticSpec {
        kind,
        n_instances: args.n_instances,
        n_strong: args.strong,
        n_weak: args.weak,
        n_noise: args.noise,
        noise_level: args.noise_level,
        seed: args.seed,
    };
    let ds = generate_synthetic(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    write_csv(&ds, &args.out).map_err(data_error)?;
    eprintln!(
        "wrote {} rows x {} features to {}",
        ds.n_rows(),
        ds.n_features(),
        args.out.display()
    );
    Ok(())
}

fn reject_flags(kind: ModelKind, flags: &[(&str, bool)]) -> Outcome {
    match flags.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(Failure::usage(format!(
            "{name} does not apply to --model-kind {kind}"
        ))),
        None => Ok(()),
    }
}

struct SetMetrics {
    auc: Option<f64>,
    logloss: Option<f64>,
}

fn set_metrics(model: &AnyModel, part: &Dataset, eps: f64) -> Result<SetMetrics, Failure> {
    if part.is_empty() {
        return Ok(SetMetrics {
            auc: None,
            logloss: None,
        });
    }
    let scores = model.predict_dataset(part).map_err(model_error)?;
    let set = ScoredSet::new(scores, part.labels().to_vec()).map_err(model_error)?;
    Ok(SetMetrics {
        auc: auc(&set).ok(),
        logloss: Some(logloss_with_eps(&set, eps)),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

pub fn train(args: TrainArgs) -> Outcome {
    let kind: ModelKind = args
        .model_kind
        .parse()
        .map_err(|e| Failure::usage(format!("--model-kind: {e}")))?;
    let levels = ("--levels", args.levels.is_some());
    let cascades = ("--cascades", args.cascades.is_some());
    let first = (
        "--first-level-fraction",
        args.first_level_fraction.is_some(),
    );
    let inject = ("--scf-inject-fraction", args.scf_inject_fraction.is_some());
    let threshold = ("--scf-threshold", args.scf_threshold.is_some());
    match kind {
        ModelKind::Gbdt => reject_flags(kind, &[levels, cascades, first, inject, threshold])?,
        ModelKind::Ldctree => reject_flags(kind, &[cascades, first, inject, threshold])?,
        ModelKind::Eldctree => reject_flags(kind, &[inject, threshold])?,
        ModelKind::Feldctree => {}
    }
    let seed = args.split.seed;
    let spec = split_spec(&args.split)?;
    let gbdt = gbdt_config(&args.boost, seed)?;
    let data = load_data(&args.data)?;
    let (train, validation, test) = split_by_id(&data, &spec, seed).map_err(data_error)?;
    eprintln!(
        "split {} rows into train={} validation={} test={}",
        data.n_rows(),
        train.n_rows(),
        validation.n_rows(),
        test.n_rows()
    );

    let started = Instant::now();
    let model: AnyModel = match kind {
        ModelKind::Gbdt => train_gbdt(&train, &gbdt).map_err(data_error)?.into(),
        ModelKind::Ldctree => {
            let n_levels = args.levels.unwrap_or(2);
            if n_levels == 0 {
                return Err(Failure::usage("--levels must be positive"));
            }
            let specs: Vec<LevelSpec> = (0..n_levels)
                .map(|l| LevelSpec {
                    gbdt: GbdtConfig {
                        seed: derive_seed(seed, stream::LEVEL, l as u64),
                        ..gbdt.clone()
                    },
                    raw_features: if l == 0 {
                        (0..train.n_features()).collect()
                    } else {
                        Vec::new()
                    },
                })
                .collect();
            train_ldctree(&train, &specs).map_err(data_error)?.into()
        }
        ModelKind::Eldctree | ModelKind::Feldctree => {
            let d = EnsembleConfig::default();
            let config = EnsembleConfig {
                num_cascades: args.cascades.unwrap_or(d.num_cascades),
                levels_per_cascade: args.levels.unwrap_or(d.levels_per_cascade),
                first_level_feature_fraction: args
                    .first_level_fraction
                    .unwrap_or(d.first_level_feature_fraction),
                scf_inject_fraction: args.scf_inject_fraction.unwrap_or(d.scf_inject_fraction),
                scf_cumulative_threshold: args.scf_threshold.unwrap_or(d.scf_cumulative_threshold),
                gbdt_config: gbdt.clone(),
                seed,
            };
            config
                .validate()
                .map_err(|e| Failure::usage(e.to_string()))?;
            let trained = if kind == ModelKind::Eldctree {
                train_eldctree(&train, &config)
            } else {
                train_feldctree(&train, &config)
            };
            trained.map_err(data_error)?.into()
        }
    };
    eprintln!("trained {kind} in {:.2}s", started.elapsed().as_secs_f64());

    save_model(&model, &args.out).map_err(model_error)?;
    let boosters = model.boosters();
    let trees: usize = boosters.iter().map(|b| b.num_trees()).sum();
    let eps = gbdt.prob_clamp_epsilon;
    let on_train = set_metrics(&model, &train, eps)?;
    let on_validation = set_metrics(&model, &validation, eps)?;

    let mut out = io::stdout().lock();
    let report = format!(
        "model_kind={kind}\nseed={seed}\nrows_train={}\nrows_validation={}\nrows_test={}\nfeatures={}\nboosters={}\ntrees={trees}\ntrain_auc={}\ntrain_logloss={}\nvalidation_auc={}\nvalidation_logloss={}\nmodel={}\n",
        train.n_rows(),
        validation.n_rows(),
        test.n_rows(),
        train.n_features(),
        boosters.len(),
        fmt_opt(on_train.auc),
        fmt_opt(on_train.logloss),
        fmt_opt(on_validation.auc),
        fmt_opt(on_validation.logloss),
        args.out.display(),
    );
    out.write_all(report.as_bytes()).map_err(out_err)
}

pub fn predict(args: PredictArgs) -> Outcome {
    let model = load(&args.model)?;
    let data = load_data(&args.data)?;
    check_feature_space(&model, &data)?;
    let scores = model.predict_dataset(&data).map_err(model_error)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    writeln!(w, "id,score").map_err(out_err)?;
    for (id, s) in data.ids().iter().zip(&scores) {
        writeln!(w, "{id},{s:.6}").map_err(out_err)?;
    }
    w.flush().map_err(out_err)
}

fn percent_label(fraction: f64) -> String {
    let text = format!("{:.4}", fraction * 100.0);
    let text = text.trim_end_matches('0').trim_end_matches('.');
    format!("top@{text}%")
}

pub fn evaluate(args: EvaluateArgs) -> Outcome {
    if let Some(bad) = args.topk.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Failure::usage(format!(
            "--topk fraction {bad} must lie in (0,1]"
        )));
    }
    let spec = split_spec(&args.split)?;
    let model = load(&args.model)?;
    let data = load_data(&args.data)?;
    let data = match args.part.as_deref() {
        None => data,
        Some(part) => {
            let (train, validation, test) =
                split_by_id(&data, &spec, args.split.seed).map_err(data_error)?;
            match part {
                "train" => train,
                "validation" => validation,
                "test" => test,
                other => {
                    return Err(Failure::usage(format!(
                        "--part must be train, validation or test, got `{other}`"
                    )))
                }
            }
        }
    };
    check_feature_space(&model, &data)?;
    let scores = model.predict_dataset(&data).map_err(model_error)?;
    let set = ScoredSet::new(scores, data.labels().to_vec()).map_err(data_error)?;
    let area = auc(&set).map_err(data_error)?;

    let mut report = String::new();
    report.push_str(&format!("{:<10}{:>10.4}\n", "AUC", area));
    report.push_str(&format!(
        "{:<10}{:>10}{:>10}{:>10}\n",
        "threshold", "precision", "recall", "F1"
    ));
    for &fraction in &args.topk {
        let prf = prf_at_topk(&set, fraction).map_err(data_error)?;
        report.push_str(&format!(
            "{:<10}{:>9.2}%{:>9.2}%{:>9.2}%\n",
            percent_label(fraction),
            prf.precision * 100.0,
            prf.recall * 100.0,
            prf.f1 * 100.0
        ));
    }
    io::stdout()
        .lock()
        .write_all(report.as_bytes())
        .map_err(out_err)
}

pub fn importance(args: ImportanceArgs) -> Outcome {
    let (names, importances) = match (&args.data, &args.model) {
        (Some(path), None) => {
            let spec = split_spec(&args.split)?;
            let seed = derive_seed(args.split.seed, stream::IMPORTANCE, 0);
            let config = gbdt_config(&args.boost, seed)?;
            let data = load_data(path)?;
            let (train, _, _) = split_by_id(&data, &spec, args.split.seed).map_err(data_error)?;
            let model = train_gbdt(&train, &config).map_err(data_error)?;
            (
                model.feature_names().to_vec(),
                model.normalized_importances(),
            )
        }
        (None, Some(path)) => {
            let source = match load(path)? {
                AnyModel::Gbdt(m) => m,
                AnyModel::Ensemble(m) => match m.partition().and_then(|p| p.source.clone()) {
                    Some(src) => src,
                    None => {
                        return Err(Failure::model(format!(
                            "{} model carries no raw-feature importance",
                            m.model_kind()
                        )))
                    }
                },
                AnyModel::Cascade(_) => {
                    return Err(Failure::model(
                        "ldctree model carries no raw-feature importance",
                    ))
                }
            };
            (
                source.feature_names().to_vec(),
                source.normalized_importances(),
            )
        }
        _ => {
            return Err(Failure::usage(
                "exactly one of --data or --model is required",
            ))
        }
    };
    let partition =
        partition_from_importances(&importances, args.threshold).map_err(|e| match e {
            ldctree::Error::InvalidConfig(m) => Failure::usage(m),
            other => Failure::data(other.to_string()),
        })?;
    let scf = partition.scf_indices();
    let mut report = format!("{:<6}{:<16}{:>12}  set\n", "rank", "feature", "importance");
    for (rank, &(i, imp)) in partition.scf.iter().chain(&partition.wcf).enumerate() {
        let set = if scf.contains(&i) { "SCF" } else { "WCF" };
        report.push_str(&format!(
            "{:<6}{:<16}{:>12.6}  {set}\n",
            rank + 1,
            names[i],
            imp
        ));
    }
    let join = |idx: Vec<usize>| {
        idx.iter()
            .map(|&i| names[i].as_str())
            .collect::<Vec<_>>()
            .join(",")
    };
    report.push_str(&format!("threshold={}\n", args.threshold));
    report.push_str(&format!("scf={}\n", join(partition.scf_indices())));
    report.push_str(&format!("wcf={}\n", join(partition.wcf_indices())));
    io::stdout()
        .lock()
        .write_all(report.as_bytes())
        .map_err(out_err)
}

pub fn explain(args: ExplainArgs) -> Outcome {
    for (name, v) in [
        ("--level", args.level),
        ("--tree", args.tree),
        ("--leaf", args.leaf),
    ] {
        if v == 0 {
            return Err(Failure::usage(format!("{name} is 1-based")));
        }
    }
    if args.level == 1 {
        return Err(Failure::usage(
            "level 1 has no preceding level to explain against; use --level 2 or higher",
        ));
    }
    let model = load(&args.model)?;
    let cascade: &CascadeModel = match (&model, args.cascade) {
        (AnyModel::Cascade(c), None) => c,
        (AnyModel::Cascade(_), Some(_)) => {
            return Err(Failure::usage("--cascade applies only to ensemble models"))
        }
        (AnyModel::Ensemble(_), None) => {
            return Err(Failure::usage("--cascade is required for ensemble models"))
        }
        (AnyModel::Ensemble(e), Some(c)) => {
            if c == 0 {
                return Err(Failure::usage("--cascade is 1-based"));
            }
            e.cascades().get(c - 1).ok_or_else(|| {
                Failure::model(format!(
                    "cascade {c} does not exist; the model has {}",
                    e.cascades().len()
                ))
            })?
        }
        (AnyModel::Gbdt(_), _) => return Err(Failure::model("a gbdt model has no cascade levels")),
    };
    if args.level > cascade.num_levels() {
        return Err(Failure::model(format!(
            "level {} does not exist; the cascade has {}",
            args.level,
            cascade.num_levels()
        )));
    }
    let (level, tree, leaf) = (args.level - 1, args.tree - 1, args.leaf - 1);
    let explanation = cascade
        .explain_leaf(level, tree, leaf)
        .map_err(model_error)?;
    let mut report = explanation.render();

    if let Some(path) = &args.data {
        let data = load_data(path)?;
        if cascade.raw_feature_names() != data.feature_names() {
            return Err(Failure::model(
                "feature space mismatch between model and --data",
            ));
        }
        let prev = &cascade.levels()[level - 1];
        let target = &cascade.levels()[level].model().trees()[tree];
        let (mut reached, mut admitted, mut mismatches) = (0usize, 0usize, 0usize);
        for raw in data.rows() {
            let prev_leaves =
                prev.leaves(&cascade.level_input(raw, level - 1).map_err(model_error)?);
            let actual = target
                .apply(&cascade.level_input(raw, level).map_err(model_error)?)
                .map_err(model_error)?;
            let hit = actual == leaf;
            let admits = explanation.admits(&prev_leaves, raw);
            reached += usize::from(hit);
            admitted += usize::from(admits);
            mismatches += usize::from(hit != admits);
        }
        report.push_str(&format!(
            "instances={}\nreached={reached}\nadmitted={admitted}\nmismatches={mismatches}\n",
            data.n_rows()
        ));
    }
    io::stdout()
        .lock()
        .write_all(report.as_bytes())
        .map_err(out_err)
}
