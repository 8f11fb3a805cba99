use disent_core::analysis::{
    dendrogram, independent_groups_curve, threshold_grid, transfer_protocol, variance_explained, Predictors,
    ScoreRecord, ScoreTable,
};
use disent_core::estimation::{mi_matrix, Estimator, FactorCodeMatrix};
use disent_core::factors::{CodeBatch, CodeMode, FactorBatch, FactorSpace, OracleEncoder};
use disent_core::learners::{fit_gaussian, fit_gbt, gaussian_tc, GbtConfig};
use disent_core::metrics::{
    aggregate_dci_c, aggregate_dci_d, aggregate_mig, aggregate_modularity, aggregate_sap, MetricResult,
};
use disent_core::seed::rng_from_seed;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn matrix(k: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(0.0f64..1.0, k * d).prop_map(move |v| Array2::from_shape_vec((k, d), v).unwrap())
}

fn shaped() -> impl Strategy<Value = Array2<f64>> {
    (1usize..5, 1usize..6).prop_flat_map(|(k, d)| matrix(k + 1, d))
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

type Agg = fn(&FactorCodeMatrix) -> disent_core::Result<MetricResult>;

fn scale_invariant() -> [(&'static str, Agg); 4] {
    [
        ("mig", |m| aggregate_mig(m, None)),
        ("modularity", aggregate_modularity),
        ("dci_d", aggregate_dci_d),
        ("dci_c", aggregate_dci_c),
    ]
}

fn value(f: Agg, m: Array2<f64>) -> Option<f64> {
    f(&FactorCodeMatrix::new(m, Estimator::Gbt).unwrap()).ok().map(|r| r.value)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregations_ignore_code_and_factor_order(
        (m, pc, pf) in shaped().prop_flat_map(|m| {
            let (k, d) = m.dim();
            (Just(m), permutation(d), permutation(k))
        })
    ) {
        let permuted = m.select(Axis(1), &pc).select(Axis(0), &pf);
        for (name, f) in scale_invariant().into_iter().chain([("sap", aggregate_sap as Agg)]) {
            match (value(f, m.clone()), value(f, permuted.clone())) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{name}: {a} vs {b}"),
                (a, b) => prop_assert_eq!(a.is_some(), b.is_some(), "{}", name),
            }
        }
    }

    #[test]
    fn scaling(m in shaped(), c in 0.01f64..100.0) {
        for (name, f) in scale_invariant() {
            if let (Some(a), Some(b)) = (value(f, m.clone()), value(f, &m * c)) {
                prop_assert!((a - b).abs() < 1e-9, "{name}: {a} vs {b}");
            }
        }
        if let (Some(a), Some(b)) = (value(aggregate_sap, m.clone()), value(aggregate_sap, &m * c)) {
            prop_assert!((b - c * a).abs() < 1e-9 * c.max(1.0));
        }
    }

    #[test]
    fn scores_lie_in_unit_interval(m in shaped()) {
        for (name, f) in scale_invariant() {
            if let Some(v) = value(f, m.clone()) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{name}: {v}");
            }
        }
    }

    #[test]
    fn gaussian_tc_ignores_order_and_shift(
        seed in 0u64..1000,
        shift in -50.0f64..50.0,
        p in permutation(4),
    ) {
        let mut rng = rng_from_seed(seed);
        let z = Array2::from_shape_fn((400, 4), |_| rand::Rng::random::<f64>(&mut rng));
        let mixed = z.dot(&ndarray::array![[1.0, 0.3, 0.0, 0.1], [0.0, 1.0, 0.5, 0.0], [0.2, 0.0, 1.0, 0.0], [0.0, 0.0, 0.4, 1.0]]);
        let base = gaussian_tc(&fit_gaussian(mixed.view()).unwrap()).unwrap();
        let mut moved = mixed.select(Axis(1), &p);
        moved.column_mut(1).mapv_inplace(|v| v + shift);
        let other = gaussian_tc(&fit_gaussian(moved.view()).unwrap()).unwrap();
        prop_assert!((base - other).abs() < 1e-9, "{base} vs {other}");
    }

    #[test]
    fn curve_is_bounded(m in shaped()) {
        prop_assume!(m.iter().any(|&v| v > 0.0));
        let (k, d) = m.dim();
        let fc = FactorCodeMatrix::new(m, Estimator::Gbt).unwrap().normalized_by_max();
        for g in independent_groups_curve(&fc, &threshold_grid(40)).unwrap() {
            prop_assert!(g.factors_connected <= k);
            prop_assert!(g.components <= (k + d) / 2);
        }
        let tree = dendrogram(&fc).unwrap();
        prop_assert!(tree.merges.windows(2).all(|w| w[0].threshold >= w[1].threshold));
        let mut seen = std::collections::BTreeSet::new();
        for e in &tree.merges {
            for &a in &e.left {
                for &b in &e.right {
                    prop_assert!(seen.insert((a.min(b), a.max(b))));
                }
            }
        }
    }

    #[test]
    fn nested_designs(values in proptest::collection::vec(-1.0f64..1.0, 36)) {
        let recs = values.iter().enumerate().map(|(i, &v)| ScoreRecord {
            encoder_id: format!("e{i}"),
            dataset_id: "d".into(),
            method: format!("m{}", i % 3),
            hyperparam: format!("h{}", (i / 3) % 4),
            seed: 0,
            metric: "x".into(),
            n_samples: 1,
            value: v,
        }).collect();
        let t = ScoreTable::new(recs).unwrap();
        let a = variance_explained(&t, Predictors::Method)[0].r2.clone();
        let b = variance_explained(&t, Predictors::MethodHyperparam)[0].r2.clone();
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(b >= a - 1e-9, "{a} > {b}");
        }
    }
}

fn random_grid(seed: u64, transform: impl Fn(f64) -> f64) -> ScoreTable {
    let mut rng = rng_from_seed(seed);
    let mut recs = Vec::new();
    for d in 0..3 {
        for m in 0..3 {
            for h in 0..10 {
                for s in 0..10 {
                    recs.push(ScoreRecord {
                        encoder_id: format!("h{h}-s{s}"),
                        dataset_id: format!("d{d}"),
                        method: "m".into(),
                        hyperparam: format!("{h}"),
                        seed: s,
                        metric: format!("metric{m}"),
                        n_samples: 1,
                        value: transform(rand::Rng::random::<f64>(&mut rng)),
                    });
                }
            }
        }
    }
    ScoreTable::new(recs).unwrap()
}

#[test]
fn transfer_is_rank_based() {
    let a = transfer_protocol(&random_grid(5, |v| v), 2000, 9).unwrap();
    let b = transfer_protocol(&random_grid(5, |v| (3.0 * v).exp() - 7.0), 2000, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gbt_importances_follow_feature_order() {
    let mut rng = rng_from_seed(11);
    let x = Array2::from_shape_fn((600, 4), |_| rand::Rng::random::<f64>(&mut rng));
    let y: Vec<usize> = x.rows().into_iter().map(|r| usize::from(r[1] + 0.5 * r[3] > 0.8)).collect();
    let cfg = GbtConfig { n_trees: 20, ..Default::default() };
    let base = fit_gbt(x.view(), &y, &cfg).unwrap();
    let sum: f64 = base.importances().iter().sum();
    assert!((sum - 1.0).abs() < 1e-12 && base.importances().iter().all(|&v| v >= 0.0));
    let p = [2, 0, 3, 1];
    let permuted = fit_gbt(x.select(Axis(1), &p).view(), &y, &cfg).unwrap();
    for (i, &src) in p.iter().enumerate() {
        assert!((permuted.importances()[i] - base.importances()[src]).abs() < 1e-12);
    }
}

#[test]
fn mi_matrix_permutes_with_codes() {
    let space = FactorSpace::from_cardinalities(&[3, 4, 5]).unwrap();
    let f = FactorBatch::enumerate(&space).tile(3);
    let mut rng = rng_from_seed(1);
    let enc = OracleEncoder::rotation(3, 0.2).unwrap();
    let c = enc.encode(&f, CodeMode::Mean, &mut rng).unwrap();
    let p = [2, 0, 1];
    let a = mi_matrix(&f, &c, 20).unwrap();
    let b = mi_matrix(&f, &c.select_columns(&p), 20).unwrap();
    for (j, &src) in p.iter().enumerate() {
        for k in 0..3 {
            assert_eq!(b.values[[k, j]], a.values[[k, src]]);
        }
    }
}

#[test]
fn mi_matrix_ignores_monotone_transforms_on_enumeration() {
    let space = FactorSpace::from_cardinalities(&[4, 5]).unwrap();
    let f = FactorBatch::enumerate(&space);
    let c = OracleEncoder::identity().encode(&f, CodeMode::Mean, &mut rng_from_seed(0)).unwrap();
    // Affine maps keep equal-width bin occupancy.
    let moved = CodeBatch::new(c.values().mapv(|v| 3.0 * v - 1.0), CodeMode::Mean).unwrap();
    let a = mi_matrix(&f, &c, 20).unwrap();
    let b = mi_matrix(&f, &moved, 20).unwrap();
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}
