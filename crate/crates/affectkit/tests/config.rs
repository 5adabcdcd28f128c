use affectkit::config::*;
use affectkit::error::Error;
use affectkit_core::classify::{BoostVariant, ClassifierSpec, Kernel, Metric};
use affectkit_core::dataio::TaskKind;
use affectkit_core::pipeline::{PipelineConfig, Reducer};
use proptest::prelude::*;

#[test]
fn empty_file_gives_gaze_defaults() {
    let cfg = parse_config("# nothing\n\n").unwrap();
    assert_eq!(cfg, PipelineConfig::gaze_quaternion(15));
}

#[test]
fn sections_are_read() {
    let text = "\
task = ck_emotion7
features = dtnnp + phog
reducer = pca
pca.k = 4
classifier = svm
svm.kernel = rbf
svm.c = 2.5
eval.folds = 3
knn.k = 99
";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.task, TaskKind::CkEmotion7);
    assert_eq!(cfg.features.len(), 2);
    assert_eq!(cfg.reducer, Reducer::Pca { k: 4 });
    match &cfg.classifier {
        ClassifierSpec::Svm(p) => {
            assert_eq!(p.kernel, Kernel::parse("rbf").unwrap());
            assert_eq!(p.c, 2.5);
            assert_eq!(p.gamma, None);
        }
        c => panic!("unexpected {c:?}"),
    }
    assert_eq!(cfg.folds, 3);
}

#[test]
fn unknown_keys_are_all_listed() {
    let err = parse_config("knn.k = 3\nknn.kk = 4\nfoo = 1\n").unwrap_err();
    match &err {
        Error::UnknownKeys(keys) => assert_eq!(keys, &["foo".to_string(), "knn.kk".to_string()]),
        e => panic!("unexpected {e}"),
    }
    assert!(err.to_string().contains("knn.kk"));
}

#[test]
fn malformed_lines() {
    let err = parse_config("knn.k = 3\nknn.k = 4\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = parse_config("task gaze9\n").unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
    let err = parse_config("\nknn.k = three\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    assert!(parse_config("classifier = perceptron\n").is_err());
    assert!(parse_config("features = wavelets\n").is_err());
}

#[test]
fn invalid_values_are_rejected() {
    assert!(parse_config("eval.folds = 0\n").is_err());
    assert!(parse_config("knn.k = 0\n").is_err());
}

fn spec() -> impl Strategy<Value = String> {
    let task = prop_oneof![Just("gaze9"), Just("sem_pair3"), Just("ck_emotion7"),];
    let classifier = prop_oneof![
        (1usize..9, prop_oneof![Just("euclidean"), Just("cosine")])
            .prop_map(|(k, m)| format!("classifier = knn\nknn.k = {k}\nknn.metric = {m}\n")),
        (0.01f64..100.0, prop_oneof![Just("linear"), Just("rbf")])
            .prop_map(|(c, k)| format!("classifier = svm\nsvm.c = {c}\nsvm.kernel = {k}\n")),
        (
            1usize..200,
            prop_oneof![Just("gentleboost"), Just("adaboost_m2")]
        )
            .prop_map(|(r, v)| format!("classifier = {v}\nboost.rounds = {r}\n")),
        (1usize..50, proptest::option::of(1usize..12), any::<u64>()).prop_map(|(t, d, s)| {
            let d = d.map_or("none".to_string(), |d| d.to_string());
            format!(
                "classifier = random_forest\nrf.trees = {t}\nrf.max_depth = {d}\nrf.seed = {s}\n"
            )
        }),
    ];
    let reducer = prop_oneof![
        Just(String::from("reducer = none\n")),
        (1usize..20).prop_map(|k| format!("reducer = pca\npca.k = {k}\n")),
        (2.0f64..30.0, any::<u64>())
            .prop_map(|(p, s)| format!("reducer = tsne\ntsne.perplexity = {p}\ntsne.seed = {s}\n")),
    ];
    (task, classifier, reducer, 2usize..10, any::<u64>(), any::<bool>()).prop_map(
        |(t, c, r, folds, seed, mag)| {
            let features = if t == "gaze9" { "qpca(A,15)" } else { "dtnnp + origami" };
            let mag = if mag { "mag.enabled = true\nmag.alpha = 7.5\n" } else { "" };
            format!("task = {t}\nfeatures = {features}\n{c}{r}{mag}eval.folds = {folds}\neval.seed = {seed}\n")
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialize_round_trips(text in spec()) {
        let cfg = parse_config(&text).unwrap();
        let out = serialize_config(&cfg);
        let back = parse_config(&out).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(serialize_config(&back), out);
    }
}

#[test]
fn boost_variant_names() {
    for v in [BoostVariant::GentleboostBinary, BoostVariant::AdaboostM2] {
        let cfg = parse_config(&format!("classifier = {}\n", v.name())).unwrap();
        assert!(matches!(cfg.classifier, ClassifierSpec::Boost { variant, .. } if variant == v));
    }
    let cfg = parse_config("knn.metric = euclidean\n").unwrap();
    assert!(matches!(
        cfg.classifier,
        ClassifierSpec::Knn {
            metric: Metric::Euclidean,
            ..
        }
    ));
}
