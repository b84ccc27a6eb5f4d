use tangseg::corpus::{Corpus, RawDocument};
use tangseg::embedding::EmbeddingConfig;
use tangseg::eval::{
    run_experiment, run_matrix, CorpusRegistry, EmbedPolicy, ExperimentRunner, ExperimentSpec, PipelineConfig,
};
use tangseg::model::ModelConfig;
use tangseg::synth::RuleGenerator;
use tangseg::Error;

fn registry() -> CorpusRegistry {
    let (a, b) = (RuleGenerator::family_a(), RuleGenerator::family_b());
    [
        a.generate("A", 6, 3_000, 1),
        a.generate("A2", 6, 3_000, 2),
        b.generate("B", 6, 3_000, 3),
    ]
    .into_iter()
    .collect()
}

fn config() -> PipelineConfig {
    PipelineConfig {
        embedding: EmbeddingConfig {
            dim: 8,
            window: 3,
            epochs: 2,
            ..EmbeddingConfig::default()
        },
        model: ModelConfig {
            num_layers: 1,
            layer_output_dim: 8,
            epochs: 2,
            ..ModelConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn specs() -> Vec<ExperimentSpec> {
    vec![
        ExperimentSpec::new(1, &["A"], &["A"], "A"),
        ExperimentSpec::new(2, &["A", "A2", "B"], &["A2"], "A"),
        ExperimentSpec::new(3, &["B", "A2", "A"], &["B"], "A"),
        ExperimentSpec::new(4, &["A"], &["A"], "A"),
        ExperimentSpec::new(5, &["A", "A2", "B"], &["A2", "B"], "B"),
    ]
}

#[test]
fn caching_does_not_change_results() {
    let r = registry();
    let cached = ExperimentRunner::new(&r, config()).run_matrix(&specs()).unwrap();
    let uncached = ExperimentRunner::new(&r, config())
        .with_caching(false)
        .run_matrix(&specs())
        .unwrap();
    assert!(cached.provenance.caching && !uncached.provenance.caching);
    assert_eq!(cached.rows.len(), 5);
    for (a, b) in cached.rows.iter().zip(&uncached.rows) {
        assert_eq!(a, b);
    }
    // A repeated spec is a cache hit and reports identically.
    let (first, repeat) = (
        cached.rows[0].report.as_ref().unwrap(),
        cached.rows[3].report.as_ref().unwrap(),
    );
    assert_eq!(first.counts, repeat.counts);
    assert_eq!(first.f1.to_bits(), repeat.f1.to_bits());
}

#[test]
fn single_spec_matches_run_experiment() {
    let r = registry();
    let spec = ExperimentSpec::new(9, &["A", "B"], &["A"], "B");
    let alone = run_experiment(&spec, &r, &config()).unwrap();
    let matrix = run_matrix(&[spec], &r, &config()).unwrap();
    assert_eq!(matrix.rows[0].report.as_ref(), Some(&alone));
    assert_eq!(alone.experiment_id, Some(9));
}

#[test]
fn test_portions_stay_out_of_training() {
    let r = registry();
    let mut runner = ExperimentRunner::new(&r, config());
    let run = runner
        .run(&ExperimentSpec::new(1, &["A", "A2", "B"], &["A", "B"], "A"))
        .unwrap();
    let p = &run.provenance;
    assert!(!p.test_docs.is_empty());
    assert!(p.test_docs.iter().all(|d| d.starts_with("A/")));
    assert!(p.test_docs.is_disjoint(&p.embedding_docs));
    assert!(p.test_docs.is_disjoint(&p.training_docs));
    assert!(p
        .training_docs
        .iter()
        .all(|d| d.starts_with("A/") || d.starts_with("B/")));
    assert!(p.embedding_docs.iter().any(|d| d.starts_with("A2/")));

    let full = PipelineConfig {
        embed_policy: EmbedPolicy::FullCorpora,
        ..config()
    };
    let run = ExperimentRunner::new(&r, full)
        .run(&ExperimentSpec::new(1, &["A"], &["A"], "A"))
        .unwrap();
    assert!(run.provenance.test_docs.is_subset(&run.provenance.embedding_docs));
    assert!(run.provenance.test_docs.is_disjoint(&run.provenance.training_docs));
}

#[test]
fn in_domain_at_least_cross_domain() {
    let r = registry();
    let cfg = PipelineConfig {
        model: ModelConfig {
            num_layers: 1,
            layer_output_dim: 16,
            batch_size: 16,
            epochs: 8,
            ..ModelConfig::default()
        },
        ..config()
    };
    let mut runner = ExperimentRunner::new(&r, cfg);
    let all = ["A", "A2", "B"];
    let in_domain = runner
        .run(&ExperimentSpec::new(1, &all, &["A"], "A"))
        .unwrap()
        .report
        .f1;
    let same_generator = runner
        .run(&ExperimentSpec::new(2, &all, &["A2"], "A"))
        .unwrap()
        .report
        .f1;
    let other_generator = runner
        .run(&ExperimentSpec::new(3, &all, &["B"], "A"))
        .unwrap()
        .report
        .f1;
    assert!(in_domain >= same_generator, "{in_domain} vs {same_generator}");
    assert!(in_domain > other_generator, "{in_domain} vs {other_generator}");
    assert!(in_domain > 0.9, "{in_domain}");
}

#[test]
fn failing_rows_are_marked_and_the_rest_run() {
    let mut r = registry();
    // One document cannot be split 70/30, so its training portion is empty.
    r.insert(Corpus::new("ONE", vec![RawDocument::new("only", "天地也。人王矣。")]))
        .unwrap();
    let specs = vec![
        ExperimentSpec::new(1, &["A"], &["ONE"], "A"),
        ExperimentSpec::new(2, &["A"], &["A"], "A"),
        ExperimentSpec::new(3, &["A"], &["A"], "MISSING"),
    ];
    let result = run_matrix(&specs, &r, &config()).unwrap();
    assert_eq!(result.rows.len(), 3);
    assert!(result.rows[0].report.is_none());
    assert!(result.rows[0].error.as_deref().unwrap().contains("ONE"));
    assert!(result.rows[1].report.is_some() && result.rows[1].error.is_none());
    assert!(result.rows[2].error.as_deref().unwrap().contains("MISSING"));
}

#[test]
fn empty_matrix_is_config_error() {
    assert!(matches!(run_matrix(&[], &registry(), &config()), Err(Error::Config(_))));
}

#[test]
fn cross_corpus_test_is_legal() {
    let spec = ExperimentSpec::new(44, &["A", "A2", "B"], &["A"], "A2");
    let report = run_experiment(&spec, &registry(), &config()).unwrap();
    assert!(report.counts.total() > 0);
}
