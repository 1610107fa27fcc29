//! Deterministic synthetic corpora with speaker, domain and language structure.
//!
//! Every speaker has a base direction `g + w * c_dom`, where `g` is a random
//! unit vector, `c_dom` a per-domain unit center and `w` a per-speaker weight
//! drawn uniformly from `[0, 2 * domain_offset]`. Speech adds a language
//! component: Farsi and English have centers of equal norm
//! `language_center` whose distance is `language_shift`, so English speech
//! shares less of the Farsi component. An utterance is
//! `normalize(center + noise)` with isotropic Gaussian noise of expected norm
//! `1 / sqrt(concentration)`.
//!
//! Training speakers of the VOX and LIBRI domains are English-native and
//! DEEPMINE ones Farsi-native; their prototypes are the normalized
//! native-language centers. Evaluation speakers are DEEPMINE speakers with
//! Farsi enrollment utterances and test utterances that are English with
//! probability `english_test_fraction`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hpm::UtteranceInventory;
use crate::math::{self, Domain, Embedding, Language};
use crate::prototypes::{PrototypeMatrix, SpeakerInfo};
use crate::scores::{Label, Trial, TrialKey};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub dim: usize,
    /// Training speakers per domain.
    pub vox_speakers: usize,
    pub libri_speakers: usize,
    pub deepmine_speakers: usize,
    /// Held-out DEEPMINE speakers used for enrollment and test.
    pub eval_speakers: usize,
    /// Inclusive range of training utterances per speaker.
    pub utts_per_speaker: (usize, usize),
    pub concentration: f64,
    /// Norm of both language centers.
    pub language_center: f64,
    /// Distance between the Farsi and English centers, at most
    /// `2 * language_center`.
    pub language_shift: f64,
    pub domain_offset: f64,
    pub enroll_utts: usize,
    pub test_utts: usize,
    pub english_test_fraction: f64,
    /// Upper bounds; fewer are emitted when the corpus has fewer pairs.
    pub target_trials: usize,
    pub nontarget_trials: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            dim: 32,
            vox_speakers: 150,
            libri_speakers: 50,
            deepmine_speakers: 100,
            eval_speakers: 80,
            utts_per_speaker: (4, 8),
            concentration: 0.7,
            language_center: 1.0,
            language_shift: 0.6,
            domain_offset: 0.3,
            enroll_utts: 3,
            test_utts: 8,
            english_test_fraction: 0.5,
            target_trials: 640,
            nontarget_trials: 20000,
            seed: 2020,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SpecInvalid(m.to_string()));
        if self.dim < 2 {
            return bad("dim must be >= 2");
        }
        if self.vox_speakers == 0 || self.libri_speakers == 0 || self.deepmine_speakers == 0 {
            return bad("every domain needs at least one training speaker");
        }
        if self.eval_speakers < 2 {
            return bad("need at least two evaluation speakers");
        }
        let (lo, hi) = self.utts_per_speaker;
        if lo == 0 || hi < lo {
            return bad("utterance range must satisfy 1 <= min <= max");
        }
        if self.enroll_utts == 0 || self.test_utts == 0 {
            return bad("enrollment and test utterance counts must be >= 1");
        }
        if self.target_trials == 0 || self.nontarget_trials == 0 {
            return bad("trial counts must be >= 1");
        }
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return bad("concentration must be positive");
        }
        if !(self.language_center >= 0.0 && self.language_center.is_finite()) {
            return bad("language center must be finite and >= 0");
        }
        if !(self.language_shift >= 0.0 && self.language_shift <= 2.0 * self.language_center) {
            return bad("language shift must lie in [0, 2 * language_center]");
        }
        if !(self.domain_offset >= 0.0 && self.domain_offset.is_finite()) {
            return bad("domain offset must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.english_test_fraction) {
            return bad("english test fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Output of [`generate_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Training utterances first, then evaluation enrollment and test utterances.
    pub embeddings: Vec<Embedding>,
    pub prototypes: PrototypeMatrix,
    pub inventory: UtteranceInventory,
    /// `(model_id, enrollment utt_ids)` in speaker order.
    pub enrollment: Vec<(String, Vec<String>)>,
    pub trials: Vec<Trial>,
}

impl Corpus {
    pub fn test_utterances(&self) -> impl Iterator<Item = &Embedding> {
        self.embeddings.iter().filter(|e| e.utt_id.contains("-tst"))
    }

    pub fn is_training(e: &Embedding) -> bool {
        e.utt_id.contains("-u")
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = math::l2_normalize(&v) {
            return u;
        }
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

struct Speaker {
    id: String,
    domain: Domain,
    native: Language,
    base: Vec<f64>,
}

/// Language components added to a speaker's base.
struct LanguageModel {
    farsi: Vec<f64>,
    english: Vec<f64>,
}

impl LanguageModel {
    fn new(rng: &mut ChaCha8Rng, spec: &CorpusSpec) -> Self {
        let d = spec.dim;
        let u = unit_gaussian(rng, d);
        // second direction orthogonal to u
        let v = loop {
            let g = unit_gaussian(rng, d);
            let p = math::dot(&g, &u);
            if let Ok(v) = math::l2_normalize(&axpy(-p, &u, &g)) {
                break v;
            }
        };
        let r = spec.language_center;
        let theta = if r > 0.0 {
            2.0 * (spec.language_shift / (2.0 * r)).min(1.0).asin()
        } else {
            0.0
        };
        let (c, s) = (r * theta.cos(), r * theta.sin());
        Self {
            farsi: u.iter().map(|x| r * x).collect(),
            english: u.iter().zip(&v).map(|(x, y)| c * x + s * y).collect(),
        }
    }
}

impl Speaker {
    fn center(&self, lang: Language, lm: &LanguageModel) -> Vec<f64> {
        match lang {
            Language::English => axpy(1.0, &lm.english, &self.base),
            _ => axpy(1.0, &lm.farsi, &self.base),
        }
    }
}

fn utterance(rng: &mut ChaCha8Rng, center: &[f64], spec: &CorpusSpec) -> Vec<f64> {
    let scale = 1.0 / (spec.dim as f64 * spec.concentration).sqrt();
    let v: Vec<f64> = center
        .iter()
        .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    math::l2_normalize(&v).expect("noisy center is nonzero")
}

fn choose(rng: &mut ChaCha8Rng, available: usize, wanted: usize) -> Vec<usize> {
    if wanted >= available {
        return (0..available).collect();
    }
    let mut picked = index::sample(rng, available, wanted).into_vec();
    picked.sort_unstable();
    picked
}

/// Generates a corpus; identical specs give identical corpora.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = Domain::ALL
        .iter()
        .map(|_| unit_gaussian(&mut rng, d))
        .collect();
    let lm = LanguageModel::new(&mut rng, spec);

    let new_speaker = |rng: &mut ChaCha8Rng, id: String, domain: Domain| {
        let g = unit_gaussian(rng, d);
        let w = rng.random_range(0.0..=2.0) * spec.domain_offset;
        let native = if domain == Domain::DeepMine {
            Language::Farsi
        } else {
            Language::English
        };
        Speaker {
            id,
            domain,
            native,
            base: axpy(w, &centers[domain.to_byte() as usize], &g),
        }
    };

    let mut training = Vec::new();
    for (domain, count, prefix) in [
        (Domain::Vox, spec.vox_speakers, "vox"),
        (Domain::Libri, spec.libri_speakers, "libri"),
        (Domain::DeepMine, spec.deepmine_speakers, "dm"),
    ] {
        for k in 0..count {
            training.push(new_speaker(&mut rng, format!("{prefix}{k:04}"), domain));
        }
    }
    let eval: Vec<Speaker> = (0..spec.eval_speakers)
        .map(|k| new_speaker(&mut rng, format!("ev{k:04}"), Domain::DeepMine))
        .collect();

    let mut embeddings = Vec::new();
    let mut columns = Vec::with_capacity(training.len());
    let mut infos = Vec::with_capacity(training.len());
    let mut utts = Vec::with_capacity(training.len());
    for spk in &training {
        let center = spk.center(spk.native, &lm);
        columns.push(math::l2_normalize(&center)?);
        infos.push(SpeakerInfo {
            speaker_id: spk.id.clone(),
            domain: spk.domain,
            language: spk.native,
        });
        let count = rng.random_range(spec.utts_per_speaker.0..=spec.utts_per_speaker.1);
        let mut ids = Vec::with_capacity(count);
        for u in 0..count {
            let utt_id = format!("{}-u{u:03}", spk.id);
            embeddings.push(Embedding {
                utt_id: utt_id.clone(),
                speaker_id: spk.id.clone(),
                domain: spk.domain,
                language: spk.native,
                vec: utterance(&mut rng, &center, spec),
            });
            ids.push(utt_id);
        }
        utts.push(ids);
    }

    let mut enrollment = Vec::with_capacity(eval.len());
    let mut tests: Vec<(usize, String)> = Vec::new();
    for (s, spk) in eval.iter().enumerate() {
        let farsi = spk.center(Language::Farsi, &lm);
        let mut enroll_ids = Vec::with_capacity(spec.enroll_utts);
        for u in 0..spec.enroll_utts {
            let utt_id = format!("{}-enr{u}", spk.id);
            embeddings.push(Embedding {
                utt_id: utt_id.clone(),
                speaker_id: spk.id.clone(),
                domain: spk.domain,
                language: Language::Farsi,
                vec: utterance(&mut rng, &farsi, spec),
            });
            enroll_ids.push(utt_id);
        }
        enrollment.push((format!("m-{}", spk.id), enroll_ids));
        for u in 0..spec.test_utts {
            // always consumed so that vectors do not depend on the fraction
            let coin: f64 = rng.random();
            let lang = if coin < spec.english_test_fraction {
                Language::English
            } else {
                Language::Farsi
            };
            let utt_id = format!("{}-tst{u}", spk.id);
            embeddings.push(Embedding {
                utt_id: utt_id.clone(),
                speaker_id: spk.id.clone(),
                domain: spk.domain,
                language: lang,
                vec: utterance(&mut rng, &spk.center(lang, &lm), spec),
            });
            tests.push((s, utt_id));
        }
    }

    let mut target_pairs = Vec::new();
    let mut nontarget_pairs = Vec::new();
    for (m, (model_id, _)) in enrollment.iter().enumerate() {
        for (s, test_id) in &tests {
            let key = TrialKey::new(model_id.clone(), test_id.clone());
            if *s == m {
                target_pairs.push(key);
            } else {
                nontarget_pairs.push(key);
            }
        }
    }
    let tar_pick = choose(&mut rng, target_pairs.len(), spec.target_trials);
    let non_pick = choose(&mut rng, nontarget_pairs.len(), spec.nontarget_trials);
    let mut trials: Vec<Trial> = tar_pick
        .into_iter()
        .map(|k| Trial {
            key: target_pairs[k].clone(),
            label: Some(Label::Target),
        })
        .chain(non_pick.into_iter().map(|k| Trial {
            key: nontarget_pairs[k].clone(),
            label: Some(Label::Nontarget),
        }))
        .collect();
    trials.sort_by(|a, b| a.key.cmp(&b.key));

    let prototypes = PrototypeMatrix::new(columns, infos)?;
    let inventory = UtteranceInventory::new(utts, training.iter().map(|s| s.domain).collect())?;
    Ok(Corpus {
        embeddings,
        prototypes,
        inventory,
        enrollment,
        trials,
    })
}
