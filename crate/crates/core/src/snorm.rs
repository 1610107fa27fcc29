//! Trial scoring: enrollment models, cosine scores and adaptive s-norm with
//! an optional language-dependent offset on the enrollment side.
//!
//! For a trial between enrollment model `e` and test utterance `t`:
//!
//! ```text
//! s_n = (s - mu_t) / sigma_t + (s - (mu_e - alpha)) / sigma_e
//! ```
//!
//! where `mu_i`, `sigma_i` are the mean and population standard deviation of
//! the top-N cohort scores of side `i`, and `alpha` is zero unless the test
//! utterance was detected as English.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{self, Domain, Embedding, Language};
use crate::prototypes::PrototypeMatrix;
use crate::scores::{Label, ScoreRecord, ScoreSet, Trial, TrialKey};

pub const DEFAULT_TOP_N: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct CohortEntry {
    pub speaker_id: String,
    pub domain: Domain,
    pub language: Language,
    pub vec: Vec<f64>,
}

/// Imposter cohort: one averaged vector per speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    tag: String,
    entries: Vec<CohortEntry>,
}

impl Cohort {
    pub fn new(tag: impl Into<String>, entries: Vec<CohortEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut seen = HashSet::new();
        let dim = entries[0].vec.len();
        for e in &entries {
            if !seen.insert(e.speaker_id.as_str()) {
                return Err(Error::DuplicateId(e.speaker_id.clone()));
            }
            if e.vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.vec.len(),
                });
            }
        }
        Ok(Self {
            tag: tag.into(),
            entries,
        })
    }

    /// One entry per speaker of the accepted embeddings: the mean of that
    /// speaker's length-normalized vectors. Speakers keep first-seen order.
    pub fn from_embeddings<'a, I, F>(
        tag: impl Into<String>,
        embeddings: I,
        accept: F,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Embedding>,
        F: Fn(&Embedding) -> bool,
    {
        let mut order: Vec<&'a Embedding> = Vec::new();
        let mut members: HashMap<&'a str, Vec<&'a [f64]>> = HashMap::new();
        for e in embeddings.into_iter().filter(|e| accept(e)) {
            let list = members.entry(e.speaker_id.as_str()).or_default();
            if list.is_empty() {
                order.push(e);
            }
            list.push(&e.vec);
        }
        let entries = order
            .into_iter()
            .map(|first| {
                let vec =
                    math::average_vectors(members[first.speaker_id.as_str()].iter().copied())?;
                Ok(CohortEntry {
                    speaker_id: first.speaker_id.clone(),
                    domain: first.domain,
                    language: first.language,
                    vec,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tag, entries)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn entries(&self) -> &[CohortEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnormStats {
    pub mu: f64,
    pub sigma: f64,
    /// Number of cohort scores actually used.
    pub top_n: usize,
    pub cohort_tag: String,
}

/// Mean of the `top_n` highest values (all of them if fewer).
fn top_n_mean(mut scores: Vec<f64>, top_n: usize) -> f64 {
    let k = top_n.min(scores.len());
    scores.sort_unstable_by(|a, b| b.total_cmp(a));
    scores[..k].iter().sum::<f64>() / k as f64
}

fn stats_from_scores(mut scores: Vec<f64>, top_n: usize, cohort_tag: &str) -> Result<SnormStats> {
    if scores.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = top_n.min(scores.len());
    scores.sort_unstable_by(|a, b| b.total_cmp(a));
    let top = &scores[..k];
    let mu = top.iter().sum::<f64>() / k as f64;
    let var = top.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / k as f64;
    let sigma = var.sqrt();
    if sigma.is_nan() || sigma <= 1e-12 {
        return Err(Error::DegenerateCohort);
    }
    Ok(SnormStats {
        mu,
        sigma,
        top_n: k,
        cohort_tag: cohort_tag.to_string(),
    })
}

fn cohort_scores(x: &[f64], cohort: &Cohort, exclude: &HashSet<&str>) -> Result<Vec<f64>> {
    cohort
        .entries
        .iter()
        .filter(|e| !exclude.contains(e.speaker_id.as_str()))
        .map(|e| math::cosine(x, &e.vec))
        .collect()
}

fn check_top_n(top_n: usize) -> Result<()> {
    if top_n < 2 {
        return Err(Error::ParamInvalid(format!(
            "top-N must be >= 2, got {top_n}"
        )));
    }
    Ok(())
}

/// Mean and population standard deviation of the `top_n` highest cosine
/// scores of `x` against the cohort. Falls back to the whole cohort (with a
/// warning) when it is smaller than `top_n`.
pub fn snorm_stats(x: &[f64], cohort: &Cohort, top_n: usize) -> Result<SnormStats> {
    snorm_stats_excluding(x, cohort, top_n, &HashSet::new())
}

/// [`snorm_stats`] ignoring cohort speakers listed in `exclude`.
pub fn snorm_stats_excluding(
    x: &[f64],
    cohort: &Cohort,
    top_n: usize,
    exclude: &HashSet<&str>,
) -> Result<SnormStats> {
    check_top_n(top_n)?;
    let scores = cohort_scores(x, cohort, exclude)?;
    if top_n > scores.len() {
        log::warn!(
            "cohort '{}' has {} usable entries, fewer than top-N {top_n}; using all",
            cohort.tag,
            scores.len()
        );
    }
    stats_from_scores(scores, top_n, &cohort.tag)
}

/// Symmetric adaptive s-norm.
pub fn adaptive_snorm(raw: f64, stats_e: &SnormStats, stats_t: &SnormStats) -> f64 {
    (raw - stats_t.mu) / stats_t.sigma + (raw - stats_e.mu) / stats_e.sigma
}

/// Adaptive s-norm with the enrollment-side imposter mean lowered by
/// `offset.alpha` when the test utterance is English.
pub fn language_dependent_snorm(
    raw: f64,
    stats_e: &SnormStats,
    stats_t: &SnormStats,
    offset: &LanguageOffset,
    test_is_english: bool,
) -> f64 {
    if !test_is_english {
        return adaptive_snorm(raw, stats_e, stats_t);
    }
    (raw - stats_t.mu) / stats_t.sigma + (raw - (stats_e.mu - offset.alpha)) / stats_e.sigma
}

/// Cross-language compensation offset estimated on prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageOffset {
    pub alpha: f64,
    /// Mean top-N imposter score of Farsi prototypes against the other Farsi prototypes.
    pub mu_farsi: f64,
    /// Mean top-N imposter score of USA prototypes against the Farsi prototypes.
    pub mu_usa: f64,
    /// Standard error of `alpha` from the spread of the per-prototype means.
    pub std_error: f64,
    pub top_n: usize,
    pub n_farsi: usize,
    pub n_usa: usize,
}

impl LanguageOffset {
    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            mu_farsi: 0.0,
            mu_usa: 0.0,
            std_error: 0.0,
            top_n: 0,
            n_farsi: 0,
            n_usa: 0,
        }
    }
}

fn mean_and_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// `alpha = mu_FA - mu_USA`: Farsi prototypes are scored leave-one-out
/// against the other Farsi prototypes, USA (English-native) prototypes
/// against all Farsi prototypes.
pub fn estimate_alpha(protos: &PrototypeMatrix, top_n: usize) -> Result<LanguageOffset> {
    check_top_n(top_n)?;
    let fa: Vec<Vec<f64>> = protos
        .indices_with_language(Language::Farsi)
        .into_iter()
        .map(|j| protos.unit_column(j))
        .collect();
    let usa: Vec<Vec<f64>> = protos
        .indices_with_language(Language::English)
        .into_iter()
        .map(|j| protos.unit_column(j))
        .collect();
    if fa.len() < top_n + 1 {
        return Err(Error::ClassTooSmall {
            class: "FARSI".into(),
            count: fa.len(),
            needed: top_n + 1,
        });
    }
    if usa.is_empty() {
        return Err(Error::ClassTooSmall {
            class: "USA".into(),
            count: 0,
            needed: 1,
        });
    }
    let fa_means: Vec<f64> = (0..fa.len())
        .map(|i| {
            let scores = (0..fa.len())
                .filter(|&k| k != i)
                .map(|k| math::dot(&fa[i], &fa[k]))
                .collect();
            top_n_mean(scores, top_n)
        })
        .collect();
    let usa_means: Vec<f64> = usa
        .iter()
        .map(|u| top_n_mean(fa.iter().map(|f| math::dot(u, f)).collect(), top_n))
        .collect();
    let (mu_farsi, var_fa) = mean_and_var(&fa_means);
    let (mu_usa, var_usa) = mean_and_var(&usa_means);
    Ok(LanguageOffset {
        alpha: mu_farsi - mu_usa,
        mu_farsi,
        mu_usa,
        std_error: (var_fa / fa.len() as f64 + var_usa / usa.len() as f64).sqrt(),
        top_n,
        n_farsi: fa.len(),
        n_usa: usa.len(),
    })
}

/// Enrollment model: mean of the length-normalized enrollment embeddings.
pub fn build_enrollment_model(utts: &[Embedding]) -> Result<Vec<f64>> {
    math::average_embedding(utts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Raw,
    Snorm,
    SnormLid,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Raw => "raw",
            ScoreMode::Snorm => "snorm",
            ScoreMode::SnormLid => "snorm-lid",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(ScoreMode::Raw),
            "snorm" => Ok(ScoreMode::Snorm),
            "snorm-lid" => Ok(ScoreMode::SnormLid),
            _ => Err(format!("unknown score mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    pub key: TrialKey,
    pub raw: f64,
    /// Output of the requested mode; equals `raw` in raw mode.
    pub normalized: f64,
    pub calibrated: Option<f64>,
    pub label: Option<Label>,
}

/// Everything besides the trials and embeddings that scoring depends on.
#[derive(Debug, Clone, Copy)]
pub struct ScoringSetup<'a> {
    pub mode: ScoreMode,
    pub top_n: usize,
    pub cohort: Option<&'a Cohort>,
    pub offset: Option<&'a LanguageOffset>,
    /// Detected language per test utterance id.
    pub lid: Option<&'a HashMap<String, Language>>,
}

impl<'a> ScoringSetup<'a> {
    pub fn raw() -> Self {
        Self {
            mode: ScoreMode::Raw,
            top_n: DEFAULT_TOP_N,
            cohort: None,
            offset: None,
            lid: None,
        }
    }

    pub fn snorm(cohort: &'a Cohort, top_n: usize) -> Self {
        Self {
            mode: ScoreMode::Snorm,
            top_n,
            cohort: Some(cohort),
            offset: None,
            lid: None,
        }
    }

    pub fn snorm_lid(
        cohort: &'a Cohort,
        top_n: usize,
        offset: &'a LanguageOffset,
        lid: &'a HashMap<String, Language>,
    ) -> Self {
        Self {
            mode: ScoreMode::SnormLid,
            top_n,
            cohort: Some(cohort),
            offset: Some(offset),
            lid: Some(lid),
        }
    }
}

/// Keeps the normalized score of each trial as a [`ScoreSet`].
pub fn into_score_set(scores: Vec<TrialScore>) -> Result<ScoreSet> {
    ScoreSet::new(
        scores
            .into_iter()
            .map(|s| ScoreRecord {
                key: s.key,
                score: s.normalized,
                label: s.label,
            })
            .collect(),
    )
}

/// Scores every trial. Enrollment-model and test-utterance statistics are
/// computed once and reused across trials. Cohort entries belonging to an
/// enrollment model's own speakers are excluded from its statistics.
pub fn score_trials(
    trials: &[Trial],
    enrollment: &HashMap<String, Vec<String>>,
    embeddings: &HashMap<String, Embedding>,
    setup: &ScoringSetup<'_>,
) -> Result<Vec<TrialScore>> {
    let cohort = match setup.mode {
        ScoreMode::Raw => None,
        _ => {
            check_top_n(setup.top_n)?;
            let c = setup.cohort.ok_or_else(|| {
                Error::ConfigInvalid(format!("mode {} needs a cohort", setup.mode))
            })?;
            if setup.top_n > c.len() {
                log::warn!(
                    "cohort '{}' has {} entries, fewer than top-N {}; using all",
                    c.tag,
                    c.len(),
                    setup.top_n
                );
            }
            Some(c)
        }
    };
    let (offset, lid) =
        if setup.mode == ScoreMode::SnormLid {
            (
                Some(setup.offset.ok_or_else(|| {
                    Error::ConfigInvalid("snorm-lid needs a language offset".into())
                })?),
                Some(setup.lid.ok_or_else(|| {
                    Error::ConfigInvalid("snorm-lid needs language decisions".into())
                })?),
            )
        } else {
            (None, None)
        };

    let lookup = |id: &str| {
        embeddings
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    };

    let mut models: HashMap<&str, (Vec<f64>, Option<SnormStats>)> = HashMap::new();
    let mut tests: HashMap<&str, (Vec<f64>, Option<SnormStats>)> = HashMap::new();
    let mut out = Vec::with_capacity(trials.len());
    for trial in trials {
        let model_id = trial.key.model_id.as_str();
        if !models.contains_key(model_id) {
            let utt_ids = enrollment
                .get(model_id)
                .ok_or_else(|| Error::MissingEmbedding(model_id.to_string()))?;
            let utts: Vec<Embedding> = utt_ids
                .iter()
                .map(|u| lookup(u).cloned())
                .collect::<Result<_>>()?;
            let vec = build_enrollment_model(&utts)?;
            let stats = match cohort {
                Some(c) => {
                    let own: HashSet<&str> = utts.iter().map(|e| e.speaker_id.as_str()).collect();
                    let scores = cohort_scores(&vec, c, &own)?;
                    Some(stats_from_scores(scores, setup.top_n, &c.tag)?)
                }
                None => None,
            };
            models.insert(model_id, (vec, stats));
        }
        let test_id = trial.key.test_id.as_str();
        if !tests.contains_key(test_id) {
            let vec = lookup(test_id)?.vec.clone();
            let stats = match cohort {
                Some(c) => Some(stats_from_scores(
                    cohort_scores(&vec, c, &HashSet::new())?,
                    setup.top_n,
                    &c.tag,
                )?),
                None => None,
            };
            tests.insert(test_id, (vec, stats));
        }
        let (mv, ms) = &models[model_id];
        let (tv, ts) = &tests[test_id];
        let raw = math::cosine(mv, tv)?;
        let normalized = match (setup.mode, ms, ts) {
            (ScoreMode::Raw, _, _) => raw,
            (ScoreMode::Snorm, Some(e), Some(t)) => adaptive_snorm(raw, e, t),
            (ScoreMode::SnormLid, Some(e), Some(t)) => {
                let english = match lid.and_then(|l| l.get(test_id)) {
                    Some(lang) => *lang == Language::English,
                    None => return Err(Error::MissingLidDecision(test_id.to_string())),
                };
                language_dependent_snorm(raw, e, t, offset.expect("checked above"), english)
            }
            _ => unreachable!("stats exist whenever a cohort is set"),
        };
        out.push(TrialScore {
            key: trial.key.clone(),
            raw,
            normalized,
            calibrated: None,
            label: trial.label,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::SpeakerInfo;

    fn stats(mu: f64, sigma: f64) -> SnormStats {
        SnormStats {
            mu,
            sigma,
            top_n: 40,
            cohort_tag: "c".into(),
        }
    }

    fn entry(id: &str, v: &[f64]) -> CohortEntry {
        CohortEntry {
            speaker_id: id.into(),
            domain: Domain::DeepMine,
            language: Language::Farsi,
            vec: v.to_vec(),
        }
    }

    fn at_angle(c: f64) -> Vec<f64> {
        vec![c, (1.0 - c * c).sqrt()]
    }

    #[test]
    fn stats_over_selected_scores() {
        let cohort = Cohort::new(
            "c",
            vec![
                entry("a", &at_angle(0.9)),
                entry("b", &at_angle(0.5)),
                entry("c", &at_angle(0.1)),
            ],
        )
        .unwrap();
        let s = snorm_stats(&[1.0, 0.0], &cohort, 2).unwrap();
        assert!((s.mu - 0.7).abs() < 1e-12);
        assert!((s.sigma - 0.2).abs() < 1e-12);
        assert_eq!(s.top_n, 2);
        assert_eq!(s.cohort_tag, "c");

        let all = snorm_stats(&[1.0, 0.0], &cohort, 10).unwrap();
        assert_eq!(all.top_n, 3);
        assert!((all.mu - 0.5).abs() < 1e-12);

        assert!(matches!(
            snorm_stats(&[1.0, 0.0], &cohort, 1),
            Err(Error::ParamInvalid(_))
        ));
    }

    #[test]
    fn self_score_is_kept() {
        let cohort = Cohort::new(
            "c",
            vec![entry("a", &[1.0, 0.0]), entry("b", &at_angle(0.6))],
        )
        .unwrap();
        let s = snorm_stats(&[1.0, 0.0], &cohort, 2).unwrap();
        assert!((s.mu - 0.8).abs() < 1e-12);
        let without = snorm_stats_excluding(&[1.0, 0.0], &cohort, 2, &["b"].into_iter().collect());
        assert_eq!(without, Err(Error::DegenerateCohort));
    }

    #[test]
    fn degenerate_cohort() {
        let cohort =
            Cohort::new("c", vec![entry("a", &[1.0, 1.0]), entry("b", &[2.0, 2.0])]).unwrap();
        assert_eq!(
            snorm_stats(&[1.0, 0.0], &cohort, 2),
            Err(Error::DegenerateCohort)
        );
    }

    #[test]
    fn snorm_examples() {
        assert_eq!(adaptive_snorm(0.5, &stats(0.5, 1.0), &stats(0.5, 1.0)), 0.0);
        let s = stats(0.3, 0.25);
        assert!((adaptive_snorm(0.9, &s, &s) - 2.0 * 0.6 / 0.25).abs() < 1e-12);
        let v = adaptive_snorm(0.8, &stats(0.6, 0.2), &stats(0.5, 0.1));
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn language_offset_engages_only_on_english() {
        let (e, t) = (stats(0.6, 0.2), stats(0.5, 0.1));
        let mut off = LanguageOffset::zero();
        let base = adaptive_snorm(0.8, &e, &t);
        assert_eq!(language_dependent_snorm(0.8, &e, &t, &off, true), base);
        off.alpha = 0.1;
        assert_eq!(language_dependent_snorm(0.8, &e, &t, &off, false), base);
        let shifted = language_dependent_snorm(0.8, &e, &t, &off, true);
        assert!((shifted - (base + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn cohort_from_embeddings_averages_per_speaker() {
        let mk = |utt: &str, spk: &str, v: &[f64]| Embedding {
            utt_id: utt.into(),
            speaker_id: spk.into(),
            domain: Domain::DeepMine,
            language: Language::Farsi,
            vec: v.to_vec(),
        };
        let embs = vec![
            mk("u1", "b", &[2.0, 0.0]),
            mk("u2", "a", &[0.0, 3.0]),
            mk("u3", "b", &[0.0, 1.0]),
        ];
        let c = Cohort::from_embeddings("x", &embs, |_| true).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.entries()[0].speaker_id, "b");
        assert_eq!(c.entries()[0].vec, vec![0.5, 0.5]);
        assert_eq!(c.entries()[1].vec, vec![0.0, 1.0]);
        let only_a = Cohort::from_embeddings("x", &embs, |e| e.speaker_id == "a").unwrap();
        assert_eq!(only_a.len(), 1);
        assert_eq!(
            Cohort::from_embeddings("x", &embs, |_| false),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn enrollment_models() {
        let mk = |v: &[f64]| Embedding {
            utt_id: "u".into(),
            speaker_id: "s".into(),
            domain: Domain::DeepMine,
            language: Language::Farsi,
            vec: v.to_vec(),
        };
        let one = build_enrollment_model(&[mk(&[3.0, 4.0])]).unwrap();
        assert_eq!(one, vec![0.6, 0.8]);
        let three =
            build_enrollment_model(&[mk(&[3.0, 4.0]), mk(&[3.0, 4.0]), mk(&[3.0, 4.0])]).unwrap();
        assert!(math::cosine(&one, &three).unwrap() > 1.0 - 1e-15);
        let mixed =
            build_enrollment_model(&[mk(&[3.0, 4.0]), mk(&[0.0, 2.0]), mk(&[1.0, 0.0])]).unwrap();
        let expected = [(0.6 + 0.0 + 1.0) / 3.0, (0.8 + 1.0 + 0.0) / 3.0];
        assert!((mixed[0] - expected[0]).abs() < 1e-15 && (mixed[1] - expected[1]).abs() < 1e-15);
    }

    fn proto_matrix(fa: &[Vec<f64>], usa: &[Vec<f64>]) -> PrototypeMatrix {
        let mut cols = Vec::new();
        let mut infos = Vec::new();
        for (k, v) in fa.iter().enumerate() {
            cols.push(v.clone());
            infos.push(SpeakerInfo {
                speaker_id: format!("fa{k}"),
                domain: Domain::DeepMine,
                language: Language::Farsi,
            });
        }
        for (k, v) in usa.iter().enumerate() {
            cols.push(v.clone());
            infos.push(SpeakerInfo {
                speaker_id: format!("us{k}"),
                domain: Domain::Vox,
                language: Language::English,
            });
        }
        PrototypeMatrix::new(cols, infos).unwrap()
    }

    #[test]
    fn alpha_on_small_fixture() {
        let fa = vec![vec![1.0, 0.0], at_angle(0.8), at_angle(0.6)];
        let usa = vec![vec![0.0, 1.0], at_angle(-0.5)];
        let off = estimate_alpha(&proto_matrix(&fa, &usa), 2).unwrap();

        // exhaustive pairwise cosines between unit vectors
        let cos = |a: &[f64], b: &[f64]| a[0] * b[0] + a[1] * b[1];
        let mut fa_means = Vec::new();
        for i in 0..3 {
            let s: Vec<f64> = (0..3)
                .filter(|&k| k != i)
                .map(|k| cos(&fa[i], &fa[k]))
                .collect();
            fa_means.push((s[0] + s[1]) / 2.0);
        }
        let mut usa_means = Vec::new();
        for u in &usa {
            let mut s: Vec<f64> = fa.iter().map(|f| cos(u, f)).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            usa_means.push((s[0] + s[1]) / 2.0);
        }
        let mu_fa = fa_means.iter().sum::<f64>() / 3.0;
        let mu_usa = usa_means.iter().sum::<f64>() / 2.0;
        assert!((off.mu_farsi - mu_fa).abs() < 1e-12);
        assert!((off.mu_usa - mu_usa).abs() < 1e-12);
        assert!((off.alpha - (mu_fa - mu_usa)).abs() < 1e-12);
        assert!(off.alpha > 0.0);
        assert_eq!((off.n_farsi, off.n_usa, off.top_n), (3, 2, 2));
    }

    #[test]
    fn alpha_requires_enough_prototypes() {
        let fa = vec![vec![1.0, 0.0], at_angle(0.8)];
        let usa = vec![vec![0.0, 1.0]];
        assert!(matches!(
            estimate_alpha(&proto_matrix(&fa, &usa), 2),
            Err(Error::ClassTooSmall { .. })
        ));
        let fa3 = vec![vec![1.0, 0.0], at_angle(0.8), at_angle(0.3)];
        let no_usa = proto_matrix(&fa3, &[]);
        assert!(matches!(
            estimate_alpha(&no_usa, 2),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn mode_parsing() {
        for m in [ScoreMode::Raw, ScoreMode::Snorm, ScoreMode::SnormLid] {
            assert_eq!(m.to_string().parse::<ScoreMode>().unwrap(), m);
        }
    }
}
