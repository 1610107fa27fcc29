//! Additive angular margin (AAM) softmax loss and its analytic gradients.
//!
//! Logits are `s * cos(theta_j)` for non-target prototypes and
//! `s * cos(theta_y + m)` for the target, with both embeddings and
//! prototypes length-normalized and no bias terms.

use crate::error::{Error, Result};
use crate::math::{self, NORM_EPS};
use crate::prototypes::PrototypeMatrix;

/// Cosines are clamped this far inside `[-1, 1]` before `sin(theta)` is taken.
pub const COS_CLAMP: f64 = 1e-9;
/// Gradients are refused when any cosine is this close to `+-1`.
pub const GRAD_SINGULARITY_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AamConfig {
    /// Angular margin in radians.
    pub margin: f64,
    pub scale: f64,
}

impl Default for AamConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            scale: 30.0,
        }
    }
}

impl AamConfig {
    pub fn new(margin: f64, scale: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&margin) {
            return Err(Error::ConfigInvalid(format!(
                "margin {margin} outside [0, pi/2)"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "scale {scale} must be positive"
            )));
        }
        Ok(Self { margin, scale })
    }
}

/// A batch of `n` embeddings with their speaker labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub embeddings: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(embeddings: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptySet);
        }
        if embeddings.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.len(),
                found: labels.len(),
            });
        }
        Ok(Self { embeddings, labels })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

/// Gradients of the batch-mean loss.
#[derive(Debug, Clone, PartialEq)]
pub struct AamGradient {
    /// `n x D`, one row per embedding.
    pub embeddings: Vec<Vec<f64>>,
    /// `D x N`, stored per prototype column like [`PrototypeMatrix`].
    pub prototypes: Vec<Vec<f64>>,
}

struct Unit {
    dir: Vec<f64>,
    norm: f64,
}

fn unit(v: &[f64]) -> Result<Unit> {
    let dir = math::l2_normalize(v)?;
    Ok(Unit {
        norm: math::norm(v),
        dir,
    })
}

fn validate(batch: &LabeledBatch, protos: &PrototypeMatrix) -> Result<()> {
    let n_spk = protos.num_speakers();
    for (x, &y) in batch.embeddings.iter().zip(&batch.labels) {
        if x.len() != protos.dim() {
            return Err(Error::DimensionMismatch {
                expected: protos.dim(),
                found: x.len(),
            });
        }
        if y >= n_spk {
            return Err(Error::IndexOutOfRange {
                index: y,
                len: n_spk,
            });
        }
    }
    Ok(())
}

/// `cos(theta + m)` from `cos(theta)` without an explicit arccos.
fn margin_cos(c: f64, cfg: &AamConfig) -> f64 {
    let c = c.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP);
    let sin = (1.0 - c * c).sqrt();
    c * cfg.margin.cos() - sin * cfg.margin.sin()
}

/// `d cos(theta + m) / d cos(theta)`.
fn margin_cos_deriv(c: f64, cfg: &AamConfig) -> f64 {
    let c = c.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP);
    let sin = (1.0 - c * c).sqrt();
    cfg.margin.cos() + c * cfg.margin.sin() / sin
}

fn logits(cosines: &[f64], label: usize, cfg: &AamConfig) -> Vec<f64> {
    cosines
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            if j == label {
                cfg.scale * margin_cos(c, cfg)
            } else {
                cfg.scale * c
            }
        })
        .collect()
}

/// `-log softmax(z)[label]` computed as `log(1 + sum_{j != y} exp(z_j - z_y))`.
fn neg_log_softmax(z: &[f64], label: usize) -> f64 {
    let zy = z[label];
    let max_other = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_other == f64::NEG_INFINITY {
        return 0.0;
    }
    if max_other > zy {
        let shift = max_other;
        let total: f64 = z.iter().map(|&v| (v - shift).exp()).sum();
        shift + total.ln() - zy
    } else {
        let rest: f64 = z
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(_, &v)| (v - zy).exp())
            .sum();
        rest.ln_1p()
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Mean AAM-softmax loss over the batch.
pub fn aam_loss(batch: &LabeledBatch, protos: &PrototypeMatrix, cfg: &AamConfig) -> Result<f64> {
    validate(batch, protos)?;
    let w: Vec<Vec<f64>> = (0..protos.num_speakers())
        .map(|j| protos.unit_column(j))
        .collect();
    let mut total = 0.0;
    for (x, &y) in batch.embeddings.iter().zip(&batch.labels) {
        let xu = math::l2_normalize(x)?;
        let cos: Vec<f64> = w
            .iter()
            .map(|wj| math::dot(&xu, wj).clamp(-1.0, 1.0))
            .collect();
        total += neg_log_softmax(&logits(&cos, y, cfg), y);
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradients of [`aam_loss`] with respect to the raw (unnormalized)
/// embeddings and prototype columns.
pub fn aam_grad(
    batch: &LabeledBatch,
    protos: &PrototypeMatrix,
    cfg: &AamConfig,
) -> Result<AamGradient> {
    validate(batch, protos)?;
    let n = batch.len();
    let d = protos.dim();
    let w: Vec<Unit> = protos
        .columns()
        .iter()
        .map(|c| unit(c))
        .collect::<Result<_>>()?;
    let mut grad_x = vec![vec![0.0; d]; n];
    let mut grad_w = vec![vec![0.0; d]; w.len()];

    for (i, (x, &y)) in batch.embeddings.iter().zip(&batch.labels).enumerate() {
        let xu = unit(x)?;
        if xu.norm <= NORM_EPS {
            return Err(Error::NormUnderflow {
                norm: xu.norm,
                eps: NORM_EPS,
            });
        }
        let cos: Vec<f64> = w.iter().map(|wj| math::dot(&xu.dir, &wj.dir)).collect();
        if let Some(&c) = cos.iter().find(|c| c.abs() >= 1.0 - GRAD_SINGULARITY_GAP) {
            return Err(Error::GradSingularity { cosine: c });
        }
        let p = softmax(&logits(&cos, y, cfg));
        for (j, wj) in w.iter().enumerate() {
            let dl_dz = (p[j] - if j == y { 1.0 } else { 0.0 }) / n as f64;
            let dz_dc = if j == y {
                cfg.scale * margin_cos_deriv(cos[j], cfg)
            } else {
                cfg.scale
            };
            let g = dl_dz * dz_dc;
            let c = cos[j];
            // dc/dx = (w - c x) / |x|,  dc/dw = (x - c w) / |w|  on unit directions
            for k in 0..d {
                grad_x[i][k] += g * (wj.dir[k] - c * xu.dir[k]) / xu.norm;
                grad_w[j][k] += g * (xu.dir[k] - c * wj.dir[k]) / wj.norm;
            }
        }
    }
    Ok(AamGradient {
        embeddings: grad_x,
        prototypes: grad_w,
    })
}
