//! Logistic calibration of two systems followed by weighted score fusion.

use std::collections::HashMap;

use sv_backend::calibration::{apply_calibration, fit_calibration};
use sv_backend::metrics::{eer, min_dcf, DcfParams};
use sv_backend::scores::{fuse, ScoreSet};
use sv_backend::snorm::{into_score_set, score_trials, Cohort, ScoringSetup};
use sv_backend::synth::{generate_corpus, Corpus, CorpusSpec};
use sv_backend::Embedding;

fn report(name: &str, s: &ScoreSet) -> anyhow::Result<()> {
    println!(
        "{name:<16} EER {:.2}%  minDCF {:.4}",
        100.0 * eer(s)?,
        min_dcf(s, &DcfParams::default())?
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let corpus = generate_corpus(&CorpusSpec::default())?;
    let embeddings: HashMap<String, Embedding> = corpus
        .embeddings
        .iter()
        .map(|e| (e.utt_id.clone(), e.clone()))
        .collect();
    let enrollment: HashMap<String, Vec<String>> = corpus.enrollment.iter().cloned().collect();
    let cohort = Cohort::from_embeddings("ALL", &corpus.embeddings, Corpus::is_training)?;

    let raw = into_score_set(score_trials(
        &corpus.trials,
        &enrollment,
        &embeddings,
        &ScoringSetup::raw(),
    )?)?;
    let snorm = into_score_set(score_trials(
        &corpus.trials,
        &enrollment,
        &embeddings,
        &ScoringSetup::snorm(&cohort, 40),
    )?)?;

    let mut calibrated = Vec::new();
    for (name, set) in [("raw", &raw), ("snorm", &snorm)] {
        let model = fit_calibration(set, name)?;
        println!("{name}: llr = {:.3} * s + {:+.3}", model.a, model.b);
        calibrated.push(apply_calibration(&model, set));
    }
    let fused = fuse(&calibrated, &[1.0, 2.0])?;

    report("raw", &calibrated[0])?;
    report("snorm", &calibrated[1])?;
    report("fused (1:2)", &fused)?;
    Ok(())
}
