use sha2::{Digest, Sha256};
use sv_backend::formats::{format_embeddings, format_enrollment, format_prototypes, format_trials};
use sv_backend::synth::{generate_corpus, CorpusSpec};

fn digest(spec: &CorpusSpec) -> String {
    let c = generate_corpus(spec).unwrap();
    let mut h = Sha256::new();
    h.update(format_embeddings(&c.embeddings).unwrap());
    h.update(format_prototypes(&c.prototypes).unwrap());
    h.update(format_trials(&c.trials).unwrap());
    h.update(format_enrollment(&c.enrollment).unwrap());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Pins the generator output so that any change to the sampling order shows up.
#[test]
fn default_corpus_is_stable() {
    assert_eq!(
        digest(&CorpusSpec::default()),
        "569631e7161aa7458a6b30ad90b68c5ccc4e21db4ce117fcd6c0625a7032c865"
    );
}

#[test]
fn seed_changes_the_corpus() {
    let other = CorpusSpec {
        seed: 7,
        ..CorpusSpec::default()
    };
    assert_ne!(digest(&CorpusSpec::default()), digest(&other));
}

#[test]
fn zero_shift_only_relabels() {
    let spec = CorpusSpec {
        language_shift: 0.0,
        ..CorpusSpec::default()
    };
    let c = generate_corpus(&spec).unwrap();
    let english = CorpusSpec {
        english_test_fraction: 1.0,
        ..spec.clone()
    };
    let e = generate_corpus(&english).unwrap();
    let same = c
        .embeddings
        .iter()
        .zip(&e.embeddings)
        .all(|(a, b)| a.vec == b.vec);
    assert!(same);
}
