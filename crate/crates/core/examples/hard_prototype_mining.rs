//! Builds mini-batches from prototype similarity: broad mode over all
//! speakers, then domain-balanced mode around the in-domain speakers.

use sv_backend::hpm::{plan_pass_broad, BalancedPlanner, PlannerConfig, PlannerMode};
use sv_backend::prototypes::similarity_matrix;
use sv_backend::synth::{generate_corpus, CorpusSpec};
use sv_backend::Domain;

fn main() -> anyhow::Result<()> {
    let corpus = generate_corpus(&CorpusSpec::default())?;
    let protos = &corpus.prototypes;
    let sim = similarity_matrix(protos, 0);

    let broad = PlannerConfig {
        batch_size: 64,
        anchors_per_batch: 8,
        imposters_per_anchor: 4,
        utterances_per_speaker: 2,
        ..PlannerConfig::with_defaults(PlannerMode::Broad, 1)
    };
    let pass = plan_pass_broad(&broad, &sim, &corpus.inventory, 0)?;
    println!(
        "broad: {} speakers -> {} batches of {}, {} padded groups",
        protos.num_speakers(),
        pass.batches.len(),
        broad.batch_size,
        pass.padded_groups
    );
    let group = pass.groups().next().expect("at least one group");
    let anchor = group[0].speaker;
    println!("first group, anchor {}:", protos.speaker(anchor).speaker_id);
    for block in group.chunks(broad.utterances_per_speaker) {
        let j = block[0].speaker;
        let utts: Vec<&str> = block.iter().map(|e| e.utt_id.as_str()).collect();
        println!(
            "  {:<12} cos {:+.3}  {:?}",
            protos.speaker(j).speaker_id,
            sim.get(anchor, j),
            utts
        );
    }

    let balanced = PlannerConfig {
        mode: PlannerMode::Balanced,
        ..broad
    };
    let mut planner = BalancedPlanner::new(balanced, corpus.inventory.clone(), Domain::DeepMine)?;
    for _ in 0..3 {
        let m = planner.plan_pass(&sim)?;
        let anchors = m.primary_anchors();
        let inside = anchors
            .iter()
            .filter(|&&j| protos.speaker(j).domain == Domain::DeepMine)
            .count();
        println!(
            "balanced pass {}: {} anchors, {inside} in-domain, {} out-of-domain",
            m.pass_id,
            anchors.len(),
            anchors.len() - inside
        );
    }
    Ok(())
}
