//! AAM-softmax loss and its analytic gradient, checked against central
//! finite differences on a small random problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sv_backend::aam::{aam_grad, aam_loss, AamConfig, LabeledBatch};
use sv_backend::prototypes::{PrototypeMatrix, SpeakerInfo};
use sv_backend::{Domain, Language};

fn main() -> anyhow::Result<()> {
    let (speakers, dim, batch) = (6, 8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    };
    let columns = draw(speakers);
    let xs = draw(batch);
    let labels: Vec<usize> = (0..batch).map(|i| i % speakers).collect();
    let info = (0..speakers)
        .map(|j| SpeakerInfo {
            speaker_id: format!("spk{j}"),
            domain: Domain::Vox,
            language: Language::Unknown,
        })
        .collect();
    let protos = PrototypeMatrix::new(columns, info)?;
    let cfg = AamConfig::new(0.2, 30.0)?;
    let data = LabeledBatch::new(xs.clone(), labels.clone())?;

    let loss = aam_loss(&data, &protos, &cfg)?;
    let grad = aam_grad(&data, &protos, &cfg)?;
    println!("loss = {loss:.6}");

    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..batch {
        for k in 0..dim {
            let (mut plus, mut minus) = (xs.clone(), xs.clone());
            plus[i][k] += h;
            minus[i][k] -= h;
            let f = |v| {
                aam_loss(
                    &LabeledBatch::new(v, labels.clone()).unwrap(),
                    &protos,
                    &cfg,
                )
                .unwrap()
            };
            let fd = (f(plus) - f(minus)) / (2.0 * h);
            let a = grad.embeddings[i][k];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-5));
        }
    }
    println!(
        "max relative error over {} embedding components: {worst:.2e}",
        batch * dim
    );
    Ok(())
}
