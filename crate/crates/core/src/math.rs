//! Vector primitives shared by every scoring stage.
//!
//! All arithmetic is done in `f64`, whatever precision the embeddings were
//! stored in.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Norm floor below which a vector is treated as degenerate.
pub const NORM_EPS: f64 = 1e-12;

/// Training corpus an utterance or speaker comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Vox,
    Libri,
    DeepMine,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Vox, Domain::Libri, Domain::DeepMine];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Vox => "VOX",
            Domain::Libri => "LIBRI",
            Domain::DeepMine => "DEEPMINE",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Domain::Vox => 0,
            Domain::Libri => 1,
            Domain::DeepMine => 2,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        Domain::ALL.get(b as usize).copied()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "VOX" => Ok(Domain::Vox),
            "LIBRI" => Ok(Domain::Libri),
            "DEEPMINE" => Ok(Domain::DeepMine),
            _ => Err(format!("unknown domain '{s}'")),
        }
    }
}

/// Spoken language of an utterance, or native language of a speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    Farsi,
    English,
    Other,
    Unknown,
}

impl Language {
    pub const ALL: [Language; 4] = [
        Language::Farsi,
        Language::English,
        Language::Other,
        Language::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Farsi => "FARSI",
            Language::English => "ENGLISH",
            Language::Other => "OTHER",
            Language::Unknown => "UNKNOWN",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Language::Farsi => 0,
            Language::English => 1,
            Language::Other => 2,
            Language::Unknown => 3,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        Language::ALL.get(b as usize).copied()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "FARSI" => Ok(Language::Farsi),
            "ENGLISH" => Ok(Language::English),
            "OTHER" => Ok(Language::Other),
            "UNKNOWN" => Ok(Language::Unknown),
            _ => Err(format!("unknown language '{s}'")),
        }
    }
}

/// One utterance-level speaker embedding with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utt_id: String,
    pub speaker_id: String,
    pub domain: Domain,
    pub language: Language,
    pub vec: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vec.len()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn checked_norm(v: &[f64], eps: f64) -> Result<f64> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector".into()));
    }
    let n = norm(v);
    if n <= eps {
        return Err(Error::NormUnderflow { norm: n, eps });
    }
    Ok(n)
}

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    l2_normalize_eps(v, NORM_EPS)
}

pub fn l2_normalize_eps(v: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = checked_norm(v, eps)?;
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity `<a,b> / (|a||b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = checked_norm(a, NORM_EPS)?;
    let nb = checked_norm(b, NORM_EPS)?;
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Arithmetic mean of the length-normalized member vectors.
///
/// The result is not re-normalized.
pub fn average_vectors<'a, I>(members: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for v in members {
        let unit = l2_normalize(v)?;
        if count == 0 {
            acc = unit;
        } else {
            if unit.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    expected: acc.len(),
                    found: unit.len(),
                });
            }
            acc.iter_mut().zip(&unit).for_each(|(a, u)| *a += u);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySet);
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    let n = norm(&acc);
    if n <= NORM_EPS {
        return Err(Error::DegenerateAverage { norm: n });
    }
    Ok(acc)
}

pub fn average_embedding(members: &[Embedding]) -> Result<Vec<f64>> {
    average_vectors(members.iter().map(|e| e.vec.as_slice()))
}
