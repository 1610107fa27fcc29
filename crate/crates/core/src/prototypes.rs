//! Speaker prototype matrix and the prototype similarity matrix derived from it.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::math::{self, Domain, Language, NORM_EPS};

/// Metadata for one prototype column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerInfo {
    pub speaker_id: String,
    pub domain: Domain,
    pub language: Language,
}

/// `D x N` matrix of per-speaker prototypes, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix {
    dim: usize,
    columns: Vec<Vec<f64>>,
    speakers: Vec<SpeakerInfo>,
}

impl PrototypeMatrix {
    pub fn new(columns: Vec<Vec<f64>>, speakers: Vec<SpeakerInfo>) -> Result<Self> {
        if columns.len() != speakers.len() {
            return Err(Error::DimensionMismatch {
                expected: speakers.len(),
                found: columns.len(),
            });
        }
        if columns.len() < 2 {
            return Err(Error::ConfigInvalid(format!(
                "prototype matrix needs at least 2 speakers, got {}",
                columns.len()
            )));
        }
        let dim = columns[0].len();
        let mut seen = HashSet::new();
        for (col, info) in columns.iter().zip(&speakers) {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.len(),
                });
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("prototype {}", info.speaker_id)));
            }
            let n = math::norm(col);
            if n <= NORM_EPS {
                return Err(Error::NormUnderflow {
                    norm: n,
                    eps: NORM_EPS,
                });
            }
            if !seen.insert(info.speaker_id.as_str()) {
                return Err(Error::DuplicateId(info.speaker_id.clone()));
            }
        }
        Ok(Self {
            dim,
            columns,
            speakers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_speakers(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn speakers(&self) -> &[SpeakerInfo] {
        &self.speakers
    }

    pub fn speaker(&self, j: usize) -> &SpeakerInfo {
        &self.speakers[j]
    }

    pub fn index_of(&self, speaker_id: &str) -> Option<usize> {
        self.speakers
            .iter()
            .position(|s| s.speaker_id == speaker_id)
    }

    /// Indices of speakers whose native language is `language`.
    pub fn indices_with_language(&self, language: Language) -> Vec<usize> {
        (0..self.num_speakers())
            .filter(|&j| self.speakers[j].language == language)
            .collect()
    }

    pub fn unit_column(&self, j: usize) -> Vec<f64> {
        // Columns were checked non-degenerate at construction.
        math::l2_normalize(&self.columns[j]).expect("validated prototype column")
    }
}

/// Dense `N x N` cosine similarity between prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    epoch_tag: u64,
}

impl SimilarityMatrix {
    /// Wraps a precomputed row-major matrix.
    pub fn from_dense(n: usize, values: Vec<f64>, epoch_tag: u64) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if (values[i * n + i] - 1.0).abs() > 1e-9 {
                return Err(Error::ConfigInvalid(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::ConfigInvalid(format!(
                        "entry ({i},{j}) = {v} outside [-1,1]"
                    )));
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::ConfigInvalid(format!(
                        "entry ({i},{j}) is not symmetric"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            values,
            epoch_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn epoch_tag(&self) -> u64 {
        self.epoch_tag
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// The `k` speakers most similar to `speaker`, most similar first.
    ///
    /// The speaker itself always comes first; the rest are ordered by
    /// descending similarity with ties going to the lower index.
    pub fn top_similar(&self, speaker: usize, k: usize) -> Result<Vec<usize>> {
        self.top_similar_among(speaker, k, |_| true)
    }

    /// Like [`top_similar`](Self::top_similar) but only considers candidates
    /// accepted by `allow` (the speaker itself is always allowed).
    pub fn top_similar_among<F>(&self, speaker: usize, k: usize, allow: F) -> Result<Vec<usize>>
    where
        F: Fn(usize) -> bool,
    {
        if speaker >= self.n {
            return Err(Error::IndexOutOfRange {
                index: speaker,
                len: self.n,
            });
        }
        let row = self.row(speaker);
        let mut others: Vec<usize> = (0..self.n).filter(|&j| j != speaker && allow(j)).collect();
        if k == 0 || k > others.len() + 1 {
            return Err(Error::KTooLarge {
                k,
                n: others.len() + 1,
            });
        }
        others.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let mut out = Vec::with_capacity(k);
        out.push(speaker);
        out.extend_from_slice(&others[..k - 1]);
        Ok(out)
    }
}

/// Pairwise cosine similarity of the prototype columns.
pub fn similarity_matrix(protos: &PrototypeMatrix, epoch_tag: u64) -> SimilarityMatrix {
    let n = protos.num_speakers();
    let units: Vec<Vec<f64>> = (0..n).map(|j| protos.unit_column(j)).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = math::dot(&units[i], &units[j]).clamp(-1.0, 1.0);
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix {
        n,
        values,
        epoch_tag,
    }
}
