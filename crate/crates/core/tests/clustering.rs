use arxflow_core::clustering::{adjusted_rand_index, select_k, DtwConfig, KMeansOptions};
use arxflow_core::ingest::synth_template_corpus;

#[test]
fn template_corpus_selects_three_clusters() {
    for seed in [1u64, 2, 3] {
        let (series, truth) = synth_template_corpus(10, 48, 0.05, seed);
        let sel = select_k(
            &series,
            2..=6,
            &DtwConfig::default(),
            &KMeansOptions::default(),
            seed,
        )
        .unwrap();
        let ari = adjusted_rand_index(&sel.best.assignments, &truth);
        println!("seed {seed}: curve {:?} ari {ari}", sel.curve);
        assert_eq!(sel.best.k, 3);
        assert!(ari >= 0.9);
    }
}

#[test]
fn selection_is_stable_across_seeds() {
    let (series, _) = synth_template_corpus(10, 48, 0.05, 7);
    let a = select_k(
        &series,
        2..=6,
        &DtwConfig::default(),
        &KMeansOptions::default(),
        100,
    )
    .unwrap();
    let b = select_k(
        &series,
        2..=6,
        &DtwConfig::default(),
        &KMeansOptions::default(),
        200,
    )
    .unwrap();
    assert_eq!(a.best.k, b.best.k);
    let again = select_k(
        &series,
        2..=6,
        &DtwConfig::default(),
        &KMeansOptions::default(),
        100,
    )
    .unwrap();
    assert_eq!(a, again);
}
