use ldctree::gbdt::{logit, sigmoid};
use ldctree::persistence::to_model_string;
use ldctree::{train_gbdt, Dataset, GbdtConfig};
use proptest::prelude::*;

fn dataset(rows: Vec<(Vec<f64>, bool)>) -> Dataset {
    let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
    let width = rows[0].0.len();
    let names = (0..width).map(|c| format!("f{c}")).collect();
    let labels = rows.iter().map(|r| u8::from(r.1)).collect();
    let features = rows.into_iter().flat_map(|r| r.0).collect();
    Dataset::from_flat(ids, features, labels, names).unwrap()
}

fn rows_strategy() -> impl Strategy<Value = Vec<(Vec<f64>, bool)>> {
    (1usize..4).prop_flat_map(|w| {
        prop::collection::vec(
            (prop::collection::vec(-5.0f64..5.0, w), any::<bool>()),
            30..120,
        )
        .prop_filter("both classes", |rows| {
            rows.iter().any(|r| r.1) && rows.iter().any(|r| !r.1)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_loss_never_increases(
        rows in rows_strategy(),
        depth in 1usize..5,
        lr in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        let ds = dataset(rows);
        let config = GbdtConfig {
            num_trees: 15,
            max_depth: depth,
            min_instances_per_split: 4,
            learning_rate: lr,
            seed,
            ..GbdtConfig::default()
        };
        let model = train_gbdt(&ds, &config).unwrap();
        let loss = model.training_loss();
        prop_assert_eq!(loss.len(), model.num_trees() + 1);
        for w in loss.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
        let eps = config.prob_clamp_epsilon;
        for row in ds.rows() {
            let p = model.predict_proba(row).unwrap();
            prop_assert!(p >= eps && p <= 1.0 - eps);
        }
        if model.per_feature_gain().iter().any(|g| *g > 0.0) {
            let total: f64 = model.feature_importance().iter().map(|(_, v)| v).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn staged_steps_are_bounded_by_leaf_values(rows in rows_strategy(), seed in any::<u64>()) {
        let ds = dataset(rows);
        let config = GbdtConfig { num_trees: 10, max_depth: 3, min_instances_per_split: 4, learning_rate: 0.2, seed, ..GbdtConfig::default() };
        let model = train_gbdt(&ds, &config).unwrap();
        prop_assume!(model.num_trees() > 0);
        let max_leaf = model
            .trees()
            .iter()
            .flat_map(|t| (0..t.num_leaves()).map(move |k| t.leaf_value(k).unwrap().abs()))
            .fold(0.0, f64::max);
        for row in ds.rows() {
            let first = model.trees()[0].apply(row).unwrap();
            let by_hand = sigmoid(model.base_score() + 0.2 * model.trees()[0].leaf_value(first).unwrap());
            prop_assert!((model.staged_proba(row, 1).unwrap() - by_hand).abs() <= 1e-15);
            let mut prev = logit(model.staged_proba(row, 1).unwrap());
            for j in 2..=model.num_trees() {
                let cur = logit(model.staged_proba(row, j).unwrap());
                prop_assert!((cur - prev).abs() <= 0.2 * max_leaf + 1e-9);
                prev = cur;
            }
            prop_assert_eq!(model.staged_proba(row, model.num_trees()).unwrap(), model.predict_proba(row).unwrap());
        }
    }
}

#[test]
fn identical_seeds_serialize_identically() {
    let rows: Vec<(Vec<f64>, bool)> = (0..400)
        .map(|i| {
            let x = ((i * 37) % 101) as f64 / 50.0 - 1.0;
            let z = ((i * 53) % 97) as f64 / 48.0 - 1.0;
            (vec![x, z], x + 0.3 * z > 0.1)
        })
        .collect();
    let ds = dataset(rows);
    let config = GbdtConfig {
        num_trees: 25,
        max_depth: 4,
        ..GbdtConfig::default()
    };
    let a = to_model_string(&train_gbdt(&ds, &config).unwrap()).unwrap();
    let b = to_model_string(&train_gbdt(&ds, &config).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = GbdtConfig { seed: 7, ..config };
    assert_ne!(
        a,
        to_model_string(&train_gbdt(&ds, &other).unwrap()).unwrap()
    );
}
