//! Farsi/English detection with a Gaussian backend trained on prototypes,
//! and the effect of pulling the English mean toward Farsi.

use sv_backend::lid::{adapt_english_mean, classify, train_gb, CovarianceKind};
use sv_backend::synth::{generate_corpus, CorpusSpec};

fn main() -> anyhow::Result<()> {
    let spec = CorpusSpec {
        language_shift: 1.0,
        domain_offset: 0.0,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec)?;
    let gb = train_gb(&corpus.prototypes, CovarianceKind::Full)?;
    let tests: Vec<_> = corpus.test_utterances().collect();

    for w in [1.0, 0.75, 0.5] {
        let model = adapt_english_mean(&gb, w)?;
        let mut correct = 0;
        for e in &tests {
            if classify(&model, &e.vec)?.language == e.language {
                correct += 1;
            }
        }
        println!(
            "english weight {w:.2}: {correct}/{} correct ({:.1}%)",
            tests.len(),
            100.0 * correct as f64 / tests.len() as f64
        );
    }

    let e = tests[0];
    let d = classify(&gb, &e.vec)?;
    println!(
        "{} ({}): decided {} with llr {:+.3}",
        e.utt_id, e.language, d.language, d.llr
    );
    Ok(())
}
