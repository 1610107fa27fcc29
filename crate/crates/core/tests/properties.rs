mod common;

use proptest::prelude::*;
use sv_backend::aam::{aam_loss, AamConfig, LabeledBatch};
use sv_backend::calibration::{apply_calibration, fit_calibration};
use sv_backend::metrics::{eer_from_scores, min_dcf_from_scores, DcfParams};
use sv_backend::prototypes::{similarity_matrix, PrototypeMatrix, SpeakerInfo};
use sv_backend::scores::{fuse, ScoreSet};
use sv_backend::snorm::{adaptive_snorm, language_dependent_snorm, LanguageOffset, SnormStats};
use sv_backend::{Domain, Language};

fn vectors(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), n).prop_filter("non-zero", |vs| {
        vs.iter()
            .all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
    })
}

fn protos(cols: Vec<Vec<f64>>) -> PrototypeMatrix {
    let speakers = (0..cols.len())
        .map(|j| SpeakerInfo {
            speaker_id: format!("s{j}"),
            domain: Domain::Vox,
            language: Language::Unknown,
        })
        .collect();
    PrototypeMatrix::new(cols, speakers).unwrap()
}

fn stats(mu: f64, sigma: f64) -> SnormStats {
    SnormStats {
        mu,
        sigma,
        top_n: 10,
        cohort_tag: "c".into(),
    }
}

proptest! {
    #[test]
    fn top_similar_starts_with_self_and_descends(cols in vectors(2..12, 5), k in 1usize..12) {
        let n = cols.len();
        let k = k.min(n);
        let sim = similarity_matrix(&protos(cols), 0);
        for i in 0..n {
            let top = sim.top_similar(i, k).unwrap();
            prop_assert_eq!(top.len(), k);
            prop_assert_eq!(top[0], i);
            for w in top[1..].windows(2) {
                prop_assert!(sim.get(i, w[0]) >= sim.get(i, w[1]));
            }
        }
    }

    #[test]
    fn aam_loss_ignores_input_scale(
        cols in vectors(2..6, 4),
        xs in vectors(1..5, 4),
        scale in 0.1..10.0f64,
        margin in 0.0..0.4f64,
    ) {
        let labels: Vec<usize> = (0..xs.len()).map(|i| i % cols.len()).collect();
        let cfg = AamConfig::new(margin, 30.0).unwrap();
        let p = protos(cols);
        let base = aam_loss(&LabeledBatch::new(xs.clone(), labels.clone()).unwrap(), &p, &cfg).unwrap();
        let scaled: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| v * scale).collect()).collect();
        let other = aam_loss(&LabeledBatch::new(scaled, labels).unwrap(), &p, &cfg).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - other).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn zero_offset_is_plain_snorm(
        raw in -1.0..1.0f64,
        me in -1.0..1.0f64, se in 0.01..1.0f64,
        mt in -1.0..1.0f64, st in 0.01..1.0f64,
        english: bool,
    ) {
        let (e, t) = (stats(me, se), stats(mt, st));
        let plain = adaptive_snorm(raw, &e, &t);
        let got = language_dependent_snorm(raw, &e, &t, &LanguageOffset::zero(), english);
        prop_assert_eq!(got.to_bits(), plain.to_bits());
    }

    #[test]
    fn metrics_stay_in_range(
        tar in prop::collection::vec(-5.0..5.0f64, 1..40),
        non in prop::collection::vec(-5.0..5.0f64, 1..40),
    ) {
        let e = eer_from_scores(&tar, &non).unwrap();
        let d = min_dcf_from_scores(&tar, &non, &DcfParams::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(e.to_bits(), common::brute_eer(&tar, &non).to_bits());
    }

    #[test]
    fn fusing_one_system_returns_it(scores in prop::collection::vec(-10.0..10.0f64, 2..30), w in 0.1..5.0f64) {
        let half = scores.len() / 2;
        let set = ScoreSet::from_labeled(&scores[..half.max(1)], &scores[half.max(1)..]).unwrap();
        let fused = fuse(std::slice::from_ref(&set), &[w]).unwrap();
        for (f, s) in fused.records().iter().zip(set.records()) {
            prop_assert_eq!(&f.key, &s.key);
            prop_assert!((f.score - s.score).abs() <= 4.0 * f64::EPSILON * s.score.abs());
        }
    }

    #[test]
    fn calibration_preserves_order(
        tar in prop::collection::vec(0.0..3.0f64, 2..30),
        non in prop::collection::vec(-3.0..1.0f64, 2..30),
    ) {
        let set = ScoreSet::from_labeled(&tar, &non).unwrap();
        let model = fit_calibration(&set, "p").unwrap();
        prop_assert!(model.a > 0.0);
        let cal = apply_calibration(&model, &set);
        let before = eer_from_scores(&tar, &non).unwrap();
        let (t2, n2) = cal.split_by_label().unwrap();
        prop_assert_eq!(before, eer_from_scores(&t2, &n2).unwrap());
    }
}
