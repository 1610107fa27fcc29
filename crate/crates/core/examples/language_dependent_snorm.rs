//! Cross-lingual trials: estimate the language offset alpha from the
//! prototypes and compare plain adaptive s-norm against the compensated one.

use std::collections::HashMap;

use sv_backend::lid::{classify, train_gb, CovarianceKind};
use sv_backend::metrics::eer;
use sv_backend::snorm::{estimate_alpha, into_score_set, score_trials, Cohort, ScoringSetup};
use sv_backend::synth::{generate_corpus, Corpus, CorpusSpec};
use sv_backend::{Domain, Embedding, Language};

fn main() -> anyhow::Result<()> {
    let spec = CorpusSpec {
        language_shift: 1.0,
        domain_offset: 0.0,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec)?;
    let embeddings: HashMap<String, Embedding> = corpus
        .embeddings
        .iter()
        .map(|e| (e.utt_id.clone(), e.clone()))
        .collect();
    let enrollment: HashMap<String, Vec<String>> = corpus.enrollment.iter().cloned().collect();

    let offset = estimate_alpha(&corpus.prototypes, 40)?;
    println!(
        "alpha = {:.4} (se {:.4}; Farsi imposter mean {:.4}, USA {:.4})",
        offset.alpha, offset.std_error, offset.mu_farsi, offset.mu_usa
    );

    // detected language of every test utterance
    let gb = train_gb(&corpus.prototypes, CovarianceKind::Full)?;
    let mut lid: HashMap<String, Language> = HashMap::new();
    for e in corpus.test_utterances() {
        lid.insert(e.utt_id.clone(), classify(&gb, &e.vec)?.language);
    }

    let cohort = Cohort::from_embeddings("DEEPMINE", &corpus.embeddings, |e| {
        Corpus::is_training(e) && e.domain == Domain::DeepMine
    })?;
    for (name, setup) in [
        ("raw cosine", ScoringSetup::raw()),
        ("adaptive s-norm", ScoringSetup::snorm(&cohort, 40)),
        (
            "language-dependent s-norm",
            ScoringSetup::snorm_lid(&cohort, 40, &offset, &lid),
        ),
    ] {
        let scores = into_score_set(score_trials(
            &corpus.trials,
            &enrollment,
            &embeddings,
            &setup,
        )?)?;
        println!("{name:<26} EER {:.2}%", 100.0 * eer(&scores)?);
    }
    Ok(())
}
