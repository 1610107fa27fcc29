//! Trial lists, score sets and score-level fusion.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    Nontarget,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Target => "target",
            Label::Nontarget => "nontarget",
        }
    }

    pub fn is_target(self) -> bool {
        self == Label::Target
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "target" => Ok(Label::Target),
            "nontarget" => Ok(Label::Nontarget),
            _ => Err(format!("unknown label '{s}'")),
        }
    }
}

/// An (enrollment model, test utterance) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrialKey {
    pub model_id: String,
    pub test_id: String,
}

impl TrialKey {
    pub fn new(model_id: impl Into<String>, test_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            test_id: test_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub key: TrialKey,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub key: TrialKey,
    pub score: f64,
    pub label: Option<Label>,
}

/// Scores of one system over a trial list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    records: Vec<ScoreRecord>,
}

impl ScoreSet {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(&r.key) {
                return Err(Error::DuplicateId(format!(
                    "{} {}",
                    r.key.model_id, r.key.test_id
                )));
            }
            if !r.score.is_finite() {
                return Err(Error::NonFinite(format!(
                    "score of {} {}",
                    r.key.model_id, r.key.test_id
                )));
            }
        }
        Ok(Self { records })
    }

    /// Builds a labeled set from plain target and nontarget score lists.
    pub fn from_labeled(targets: &[f64], nontargets: &[f64]) -> Result<Self> {
        let tar = targets.iter().enumerate().map(|(k, &s)| ScoreRecord {
            key: TrialKey::new(format!("t{k}"), "x"),
            score: s,
            label: Some(Label::Target),
        });
        let non = nontargets.iter().enumerate().map(|(k, &s)| ScoreRecord {
            key: TrialKey::new(format!("n{k}"), "x"),
            score: s,
            label: Some(Label::Nontarget),
        });
        Self::new(tar.chain(non).collect())
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    /// Target and nontarget scores; errors if any label is missing or a class is empty.
    pub fn split_by_label(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tar = Vec::new();
        let mut non = Vec::new();
        for r in &self.records {
            match r.label {
                Some(Label::Target) => tar.push(r.score),
                Some(Label::Nontarget) => non.push(r.score),
                None => {
                    return Err(Error::ParamInvalid(format!(
                        "trial {} {} has no label",
                        r.key.model_id, r.key.test_id
                    )))
                }
            }
        }
        if tar.is_empty() || non.is_empty() {
            return Err(Error::DegenerateLabels);
        }
        Ok((tar, non))
    }

    /// Same keys and labels with every score replaced by `f(score)`.
    pub fn map_scores<F: Fn(f64) -> f64>(&self, f: F) -> ScoreSet {
        ScoreSet {
            records: self
                .records
                .iter()
                .map(|r| ScoreRecord {
                    score: f(r.score),
                    ..r.clone()
                })
                .collect(),
        }
    }
}

/// Weighted average of several systems' scores, `sum w_k s_k / sum w_k`.
///
/// Output follows the trial order of the first set.
pub fn fuse(sets: &[ScoreSet], weights: &[f64]) -> Result<ScoreSet> {
    if sets.is_empty() {
        return Err(Error::EmptySet);
    }
    if sets.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: sets.len(),
            found: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::WeightInvalid(w));
    }
    let first = &sets[0];
    let lookups: Vec<HashMap<&TrialKey, f64>> = sets[1..]
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if s.len() != first.len() {
                return Err(Error::KeyMismatch(format!(
                    "system {} has {} trials, system 0 has {}",
                    k + 1,
                    s.len(),
                    first.len()
                )));
            }
            Ok(s.records.iter().map(|r| (&r.key, r.score)).collect())
        })
        .collect::<Result<_>>()?;
    let total: f64 = weights.iter().sum();
    let mut records = Vec::with_capacity(first.len());
    for r in &first.records {
        let mut acc = weights[0] * r.score;
        for (k, lookup) in lookups.iter().enumerate() {
            let s = lookup.get(&r.key).ok_or_else(|| {
                Error::KeyMismatch(format!(
                    "trial {} {} missing from system {}",
                    r.key.model_id,
                    r.key.test_id,
                    k + 1
                ))
            })?;
            acc += weights[k + 1] * s;
        }
        records.push(ScoreRecord {
            key: r.key.clone(),
            score: acc / total,
            label: r.label,
        });
    }
    Ok(ScoreSet { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64]) -> ScoreSet {
        ScoreSet::new(
            scores
                .iter()
                .enumerate()
                .map(|(k, &s)| ScoreRecord {
                    key: TrialKey::new(format!("m{k}"), format!("t{k}")),
                    score: s,
                    label: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn res2_double_weight() {
        let sets: Vec<ScoreSet> = (0..5).map(|k| set(&[k as f64, 1.0])).collect();
        let fused = fuse(&sets, &[1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        // (0 + 1 + 2*2 + 2*3 + 2*4) / 8
        assert_eq!(fused.scores(), vec![19.0 / 8.0, 1.0]);
    }

    #[test]
    fn single_and_identical_systems() {
        let a = set(&[0.3, -1.2, 4.0]);
        assert_eq!(fuse(std::slice::from_ref(&a), &[3.5]).unwrap(), a);
        assert_eq!(fuse(&[a.clone(), a.clone()], &[0.5, 2.0]).unwrap(), a);
    }

    #[test]
    fn equal_weights_give_mean() {
        let a = set(&[1.0, 2.0]);
        let b = set(&[3.0, -2.0]);
        assert_eq!(fuse(&[a, b], &[1.0, 1.0]).unwrap().scores(), vec![2.0, 0.0]);
    }

    #[test]
    fn fusion_errors() {
        let a = set(&[1.0, 2.0]);
        let b = set(&[1.0]);
        assert!(matches!(
            fuse(&[a.clone(), b], &[1.0, 1.0]),
            Err(Error::KeyMismatch(_))
        ));
        let mut other = a.clone();
        other.records[1].key.test_id = "zzz".into();
        assert!(matches!(
            fuse(&[a.clone(), other], &[1.0, 1.0]),
            Err(Error::KeyMismatch(_))
        ));
        assert!(matches!(
            fuse(std::slice::from_ref(&a), &[0.0]),
            Err(Error::WeightInvalid(_))
        ));
        assert!(matches!(
            fuse(std::slice::from_ref(&a), &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(fuse(&[], &[]), Err(Error::EmptySet)));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let r = ScoreRecord {
            key: TrialKey::new("m", "t"),
            score: 0.0,
            label: None,
        };
        assert!(ScoreSet::new(vec![r.clone(), r]).is_err());
    }
}
