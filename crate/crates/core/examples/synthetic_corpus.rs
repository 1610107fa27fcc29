//! Generates a synthetic corpus and writes it in the text formats read by
//! the command line. Pass an output directory, or a temporary one is used.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sv_backend::formats;
use sv_backend::scores::Label;
use sv_backend::synth::{generate_corpus, CorpusSpec};

fn main() -> anyhow::Result<()> {
    let spec = CorpusSpec {
        seed: 7,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec)?;

    let mut per_domain: BTreeMap<String, usize> = BTreeMap::new();
    for info in corpus.prototypes.speakers() {
        *per_domain.entry(info.domain.to_string()).or_default() += 1;
    }
    println!("training speakers per domain: {per_domain:?}");
    let targets = corpus
        .trials
        .iter()
        .filter(|t| t.label == Some(Label::Target))
        .count();
    println!(
        "{} embeddings of dim {}, {} enrollment models, {} trials ({targets} target)",
        corpus.embeddings.len(),
        spec.dim,
        corpus.enrollment.len(),
        corpus.trials.len()
    );

    let tmp;
    let dir = match std::env::args_os().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    std::fs::create_dir_all(&dir)?;
    formats::write_embeddings(&dir.join("embeddings.tsv"), &corpus.embeddings, false)?;
    formats::write_prototypes(&dir.join("prototypes.tsv"), &corpus.prototypes)?;
    formats::write_trials(&dir.join("trials.tsv"), &corpus.trials)?;
    formats::write_enrollment(&dir.join("enroll.tsv"), &corpus.enrollment)?;
    println!("wrote corpus to {}", dir.display());
    Ok(())
}
