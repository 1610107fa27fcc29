//! Two-class Gaussian-backend language detector (Farsi vs English).
//!
//! Classes share one covariance, so the log-likelihood ratio is affine in the
//! (length-normalized) input embedding.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::math::{self, Language};
use crate::prototypes::{PrototypeMatrix, SpeakerInfo};

/// Relative ridge added to the pooled covariance: `RIDGE_SCALE * trace / D`.
pub const RIDGE_SCALE: f64 = 1e-4;
/// Absolute ridge floor, used when the within-class scatter vanishes.
pub const RIDGE_FLOOR: f64 = 1e-8;
/// English-mean interpolation weight toward the USA mean.
pub const ENGLISH_MEAN_WEIGHT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Full,
    Diagonal,
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::Full => "full",
            CovarianceKind::Diagonal => "diagonal",
        })
    }
}

impl FromStr for CovarianceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(CovarianceKind::Full),
            "diagonal" => Ok(CovarianceKind::Diagonal),
            _ => Err(format!("unknown covariance kind '{s}'")),
        }
    }
}

/// Training class of a prototype.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LidClass {
    Farsi,
    Usa,
}

/// Maps a prototype's native language onto a training class.
pub fn class_from_language(info: &SpeakerInfo) -> Option<LidClass> {
    match info.language {
        Language::Farsi => Some(LidClass::Farsi),
        Language::English => Some(LidClass::Usa),
        Language::Other | Language::Unknown => None,
    }
}

#[derive(Debug, Clone)]
pub struct GaussianBackend {
    mu_fa: Vec<f64>,
    mu_usa: Vec<f64>,
    mu_en: Vec<f64>,
    /// Row-major `D x D` shared covariance, ridge included.
    cov: Vec<f64>,
    weight: f64,
    threshold: f64,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for GaussianBackend {
    fn eq(&self, other: &Self) -> bool {
        self.mu_fa == other.mu_fa
            && self.mu_usa == other.mu_usa
            && self.mu_en == other.mu_en
            && self.cov == other.cov
            && self.weight == other.weight
            && self.threshold == other.threshold
    }
}

/// Outcome of language detection on one embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidDecision {
    pub language: Language,
    pub llr: f64,
}

impl GaussianBackend {
    /// Assembles a backend from its parameters, e.g. after deserialization.
    pub fn from_parts(
        mu_fa: Vec<f64>,
        mu_usa: Vec<f64>,
        cov: Vec<f64>,
        weight: f64,
        threshold: f64,
    ) -> Result<Self> {
        let d = mu_fa.len();
        if mu_usa.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: mu_usa.len(),
            });
        }
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: cov.len(),
            });
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::WeightOutOfRange(weight));
        }
        if !threshold.is_finite() {
            return Err(Error::ParamInvalid(format!("threshold {threshold}")));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-9 {
                    return Err(Error::CovarianceSingular);
                }
            }
        }
        let chol =
            Cholesky::new(DMatrix::from_row_slice(d, d, &cov)).ok_or(Error::CovarianceSingular)?;
        let mu_en = interpolate(&mu_usa, &mu_fa, weight);
        Ok(Self {
            mu_fa,
            mu_usa,
            mu_en,
            cov,
            weight,
            threshold,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_fa.len()
    }

    pub fn mu_fa(&self) -> &[f64] {
        &self.mu_fa
    }

    pub fn mu_usa(&self) -> &[f64] {
        &self.mu_usa
    }

    pub fn mu_en_effective(&self) -> &[f64] {
        &self.mu_en
    }

    pub fn covariance(&self) -> &[f64] {
        &self.cov
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn log_density(&self, x: &[f64], mean: &[f64]) -> f64 {
        let d = self.dim();
        let diff = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        let log_det: f64 = 2.0
            * self
                .chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        -0.5 * (z.norm_squared() + log_det + d as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    /// Log-likelihood ratio English vs Farsi of a length-normalized vector.
    pub fn llr(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let xu = math::l2_normalize(x)?;
        Ok(self.log_density(&xu, &self.mu_en) - self.log_density(&xu, &self.mu_fa))
    }

    /// `(a, b)` such that `llr(x) = a . x/|x| + b`.
    pub fn affine_form(&self) -> (Vec<f64>, f64) {
        let diff = DVector::from_iterator(
            self.dim(),
            self.mu_en.iter().zip(&self.mu_fa).map(|(e, f)| e - f),
        );
        let a = self.chol.solve(&diff);
        let quad = |m: &[f64]| {
            let v = DVector::from_row_slice(m);
            v.dot(&self.chol.solve(&v))
        };
        let b = -0.5 * (quad(&self.mu_en) - quad(&self.mu_fa));
        (a.iter().copied().collect(), b)
    }
}

fn interpolate(usa: &[f64], fa: &[f64], w: f64) -> Vec<f64> {
    usa.iter()
        .zip(fa)
        .map(|(u, f)| w * u + (1.0 - w) * f)
        .collect()
}

/// Trains the backend on length-normalized prototypes, classes taken from
/// each speaker's native language. The English mean starts equal to the USA
/// mean (weight 1).
pub fn train_gb(protos: &PrototypeMatrix, kind: CovarianceKind) -> Result<GaussianBackend> {
    train_gb_with(protos, class_from_language, kind)
}

pub fn train_gb_with<F>(
    protos: &PrototypeMatrix,
    class_of: F,
    kind: CovarianceKind,
) -> Result<GaussianBackend>
where
    F: Fn(&SpeakerInfo) -> Option<LidClass>,
{
    let d = protos.dim();
    let mut fa = Vec::new();
    let mut usa = Vec::new();
    for j in 0..protos.num_speakers() {
        match class_of(protos.speaker(j)) {
            Some(LidClass::Farsi) => fa.push(protos.unit_column(j)),
            Some(LidClass::Usa) => usa.push(protos.unit_column(j)),
            None => {}
        }
    }
    for (name, members) in [("FARSI", &fa), ("USA", &usa)] {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: name.into(),
                count: members.len(),
                needed: 2,
            });
        }
    }
    let mean = |members: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for v in members {
            m.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        }
        m.iter_mut().for_each(|a| *a /= members.len() as f64);
        m
    };
    let mu_fa = mean(&fa);
    let mu_usa = mean(&usa);

    let mut cov = vec![0.0; d * d];
    for (members, mu) in [(&fa, &mu_fa), (&usa, &mu_usa)] {
        for v in members.iter() {
            let c: Vec<f64> = v.iter().zip(mu).map(|(x, m)| x - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += c[i] * c[j];
                }
            }
        }
    }
    let dof = (fa.len() + usa.len() - 2) as f64;
    cov.iter_mut().for_each(|c| *c /= dof);
    if kind == CovarianceKind::Diagonal {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    cov[i * d + j] = 0.0;
                }
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let ridge = (RIDGE_SCALE * trace / d as f64).max(RIDGE_FLOOR);
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
    GaussianBackend::from_parts(mu_fa, mu_usa, cov, 1.0, 0.0)
}

/// Sets the English mean to `w * mu_usa + (1 - w) * mu_fa`.
pub fn adapt_english_mean(gb: &GaussianBackend, w: f64) -> Result<GaussianBackend> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::WeightOutOfRange(w));
    }
    let mut out = gb.clone();
    out.weight = w;
    out.mu_en = interpolate(&gb.mu_usa, &gb.mu_fa, w);
    Ok(out)
}

/// Detects whether `x` is English speech. English iff the LLR exceeds the
/// backend's threshold.
pub fn classify(gb: &GaussianBackend, x: &[f64]) -> Result<LidDecision> {
    let llr = gb.llr(x)?;
    let language = if llr > gb.threshold {
        Language::English
    } else {
        Language::Farsi
    };
    Ok(LidDecision { language, llr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn info(id: String, language: Language) -> SpeakerInfo {
        SpeakerInfo {
            speaker_id: id,
            domain: Domain::Vox,
            language,
        }
    }

    fn protos(fa: &[Vec<f64>], en: &[Vec<f64>]) -> PrototypeMatrix {
        let mut cols = Vec::new();
        let mut infos = Vec::new();
        for (k, v) in fa.iter().enumerate() {
            cols.push(v.clone());
            infos.push(info(format!("fa{k}"), Language::Farsi));
        }
        for (k, v) in en.iter().enumerate() {
            cols.push(v.clone());
            infos.push(info(format!("en{k}"), Language::English));
        }
        PrototypeMatrix::new(cols, infos).unwrap()
    }

    fn jittered(rng: &mut ChaCha8Rng, center: &[f64], n: usize, amp: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + rng.random_range(-amp..amp))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_scatter_gives_ridge_floor() {
        let p = protos(&vec![vec![1.0, 0.0]; 2], &vec![vec![0.0, 2.0]; 3]);
        let gb = train_gb(&p, CovarianceKind::Full).unwrap();
        assert_eq!(gb.mu_fa(), &[1.0, 0.0]);
        assert_eq!(gb.mu_usa(), &[0.0, 1.0]);
        assert_eq!(gb.covariance(), &[RIDGE_FLOOR, 0.0, 0.0, RIDGE_FLOOR]);
        assert_eq!(gb.mu_en_effective(), gb.mu_usa());
    }

    #[test]
    fn jittered_means_and_pooled_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fa = jittered(&mut rng, &[1.0, 0.0], 50, 1e-3);
        let en = jittered(&mut rng, &[0.0, 1.0], 50, 1e-3);
        let gb = train_gb(&protos(&fa, &en), CovarianceKind::Full).unwrap();
        assert!((gb.mu_fa()[0] - 1.0).abs() < 1e-3 && gb.mu_fa()[1].abs() < 1e-3);
        assert!((gb.mu_usa()[1] - 1.0).abs() < 1e-3 && gb.mu_usa()[0].abs() < 1e-3);

        // closed-form pooled covariance of the normalized fixture
        let unit = |v: &Vec<f64>| math::l2_normalize(v).unwrap();
        let mut expected = [0.0; 4];
        for (set, mu) in [(&fa, gb.mu_fa()), (&en, gb.mu_usa())] {
            for v in set.iter().map(unit) {
                let c = [v[0] - mu[0], v[1] - mu[1]];
                expected[0] += c[0] * c[0];
                expected[1] += c[0] * c[1];
                expected[2] += c[1] * c[0];
                expected[3] += c[1] * c[1];
            }
        }
        expected.iter_mut().for_each(|e| *e /= 98.0);
        let ridge = (RIDGE_SCALE * (expected[0] + expected[3]) / 2.0).max(RIDGE_FLOOR);
        expected[0] += ridge;
        expected[3] += ridge;
        for (a, b) in gb.covariance().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn class_too_small() {
        let p = protos(&[vec![1.0, 0.0]], &[vec![0.0, 1.0], vec![0.1, 1.0]]);
        assert!(matches!(
            train_gb(&p, CovarianceKind::Full),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn english_mean_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fa = jittered(&mut rng, &[1.0, 0.2, 0.0], 10, 0.1);
        let en = jittered(&mut rng, &[0.0, 0.2, 1.0], 10, 0.1);
        let gb = train_gb(&protos(&fa, &en), CovarianceKind::Full).unwrap();
        let a = adapt_english_mean(&gb, 0.75).unwrap();
        for k in 0..3 {
            let expected = 0.75 * gb.mu_usa()[k] + 0.25 * gb.mu_fa()[k];
            assert!((a.mu_en_effective()[k] - expected).abs() < 1e-12);
        }
        assert_eq!(
            adapt_english_mean(&gb, 1.0).unwrap().mu_en_effective(),
            gb.mu_usa()
        );
        assert_eq!(
            adapt_english_mean(&gb, 0.0).unwrap().mu_en_effective(),
            gb.mu_fa()
        );
        assert_eq!(adapt_english_mean(&a, 0.75).unwrap(), a);
        assert!(matches!(
            adapt_english_mean(&gb, 1.5),
            Err(Error::WeightOutOfRange(_))
        ));

        // linear in w
        let m = |w| {
            adapt_english_mean(&gb, w)
                .unwrap()
                .mu_en_effective()
                .to_vec()
        };
        let (m0, m1, mh) = (m(0.2), m(0.8), m(0.5));
        for k in 0..3 {
            assert!((mh[k] - 0.5 * (m0[k] + m1[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn class_means_classify_as_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fa = jittered(&mut rng, &[1.0, 0.3, 0.0, 0.1], 12, 0.2);
        let en = jittered(&mut rng, &[0.1, 0.3, 1.0, 0.0], 12, 0.2);
        let gb = adapt_english_mean(
            &train_gb(&protos(&fa, &en), CovarianceKind::Full).unwrap(),
            0.75,
        )
        .unwrap();

        // The class means are not unit vectors; score them through the affine
        // form, which does not re-normalize.
        let (a, b) = gb.affine_form();
        let llr_fa = math::dot(&a, gb.mu_fa()) + b;
        let llr_en = math::dot(&a, gb.mu_en_effective()) + b;
        assert!(llr_fa < 0.0 && llr_en > 0.0);

        let d = classify(&gb, &math::l2_normalize(gb.mu_fa()).unwrap()).unwrap();
        assert_eq!(d.language, Language::Farsi);
        let u = math::l2_normalize(&[0.0, 0.3, 1.0, 0.0]).unwrap();
        assert_eq!(classify(&gb, &u).unwrap().language, Language::English);
        assert!(matches!(
            classify(&gb, &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn llr_is_affine_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fa = jittered(&mut rng, &[1.0, 0.0, 0.5, 0.0, 0.2], 20, 0.3);
        let en = jittered(&mut rng, &[0.0, 1.0, 0.5, 0.2, 0.0], 20, 0.3);
        for kind in [CovarianceKind::Full, CovarianceKind::Diagonal] {
            let gb = adapt_english_mean(&train_gb(&protos(&fa, &en), kind).unwrap(), 0.6).unwrap();
            let (a, b) = gb.affine_form();
            for _ in 0..50 {
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let llr = gb.llr(&x).unwrap();
                let xu = math::l2_normalize(&x).unwrap();
                assert!((llr - (math::dot(&a, &xu) + b)).abs() < 1e-9);
                let scaled: Vec<f64> = x.iter().map(|v| v * 3.7).collect();
                assert_eq!(
                    classify(&gb, &x).unwrap().language,
                    classify(&gb, &scaled).unwrap().language
                );
            }
        }
    }

    #[test]
    fn diagonal_covariance_has_no_off_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fa = jittered(&mut rng, &[1.0, 0.0, 0.0], 6, 0.3);
        let en = jittered(&mut rng, &[0.0, 1.0, 0.0], 6, 0.3);
        let gb = train_gb(&protos(&fa, &en), CovarianceKind::Diagonal).unwrap();
        let c = gb.covariance();
        assert!(c[1] == 0.0 && c[2] == 0.0 && c[5] == 0.0);
    }
}
