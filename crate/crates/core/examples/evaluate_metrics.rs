//! EER and normalized minimum DCF on a handful of hand-written scores.

use sv_backend::metrics::{
    eer_from_scores, eer_with, min_dcf_from_scores, operating_points, DcfParams, EerMethod,
};
use sv_backend::scores::ScoreSet;

fn main() -> anyhow::Result<()> {
    let targets = [2.1, 1.4, 0.9, 0.9, 0.2, -0.3];
    let nontargets = [-2.0, -1.2, -0.8, -0.3, 0.1, 0.9, -1.5, -0.6];

    println!("threshold sweep (P_miss, P_fa):");
    for (pm, pfa) in operating_points(&targets, &nontargets)? {
        println!("  {pm:.3}  {pfa:.3}");
    }
    println!(
        "EER (interpolated) = {:.4}",
        eer_from_scores(&targets, &nontargets)?
    );
    let set = ScoreSet::from_labeled(&targets, &nontargets)?;
    println!(
        "EER (nearest point) = {:.4}",
        eer_with(&set, EerMethod::Nearest)?
    );

    for p_target in [0.01, 0.05, 0.5] {
        let params = DcfParams {
            p_target,
            ..DcfParams::default()
        };
        println!(
            "minDCF at P_target {p_target}: {:.4}",
            min_dcf_from_scores(&targets, &nontargets, &params)?
        );
    }
    Ok(())
}
