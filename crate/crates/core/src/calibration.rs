//! Affine score calibration fitted by L2-regularized logistic regression.
//!
//! The objective is the mean binary cross-entropy of `sigmoid(a * s + b)`
//! against the trial labels plus `lambda / 2 * (a^2 + b^2)`. It is minimized
//! with damped Newton steps; the 2x2 Hessian is solved in closed form.

use crate::error::{Error, Result};
use crate::scores::{ScoreRecord, ScoreSet};

pub const CALIBRATION_L2: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 10_000;
/// Newton decrement below which full steps are taken without a line search.
const NEWTON_REGION: f64 = 1e-12;

/// `s' = a * s + b`, in the log-odds domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub a: f64,
    pub b: f64,
    /// Free-form name of the data the model was trained on.
    pub trained_on: String,
}

impl CalibrationModel {
    pub fn apply(&self, score: f64) -> f64 {
        self.a * score + self.b
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized objective at `(a, b)`; `samples` holds `(score, is_target)`.
pub fn calibration_objective(a: f64, b: f64, samples: &[(f64, bool)]) -> f64 {
    let n = samples.len() as f64;
    let nll: f64 = samples
        .iter()
        .map(|&(s, t)| {
            let z = a * s + b;
            if t {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    nll / n + 0.5 * CALIBRATION_L2 * (a * a + b * b)
}

fn gradient_hessian(a: f64, b: f64, samples: &[(f64, bool)]) -> ([f64; 2], [f64; 3]) {
    let n = samples.len() as f64;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for &(s, t) in samples {
        let p = sigmoid(a * s + b);
        let r = p - if t { 1.0 } else { 0.0 };
        g[0] += r * s;
        g[1] += r;
        let w = p * (1.0 - p);
        h[0] += w * s * s;
        h[1] += w * s;
        h[2] += w;
    }
    g[0] = g[0] / n + CALIBRATION_L2 * a;
    g[1] = g[1] / n + CALIBRATION_L2 * b;
    h[0] = h[0] / n + CALIBRATION_L2;
    h[1] /= n;
    h[2] = h[2] / n + CALIBRATION_L2;
    (g, h)
}

/// Fits `(a, b)` on labeled scores.
pub fn fit_calibration(
    scores: &ScoreSet,
    trained_on: impl Into<String>,
) -> Result<CalibrationModel> {
    let (tar, non) = scores.split_by_label()?;
    let samples: Vec<(f64, bool)> = tar
        .iter()
        .map(|&s| (s, true))
        .chain(non.iter().map(|&s| (s, false)))
        .collect();

    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut f = calibration_objective(a, b, &samples);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (g, h) = gradient_hessian(a, b, &samples);
        grad_norm = g[0].hypot(g[1]);
        if grad_norm < GRAD_TOL {
            return Ok(CalibrationModel {
                a,
                b,
                trained_on: trained_on.into(),
            });
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let (mut da, mut db) = (
            (h[2] * g[0] - h[1] * g[1]) / det,
            (h[0] * g[1] - h[1] * g[0]) / det,
        );
        if !(da.is_finite() && db.is_finite()) || da * g[0] + db * g[1] <= 0.0 {
            // fall back to steepest descent
            da = g[0];
            db = g[1];
        }
        let slope = da * g[0] + db * g[1];
        if slope < NEWTON_REGION {
            // objective changes fall below f64 resolution here; a line
            // search on f would stall, so take the full Newton step
            a -= da;
            b -= db;
            f = calibration_objective(a, b, &samples);
            continue;
        }
        let mut step = 1.0;
        loop {
            let (na, nb) = (a - step * da, b - step * db);
            let nf = calibration_objective(na, nb, &samples);
            if nf <= f - 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no representable decrease left; accept the point as is
                return if grad_norm < 1e-6 {
                    Ok(CalibrationModel {
                        a,
                        b,
                        trained_on: trained_on.into(),
                    })
                } else {
                    Err(Error::NonConvergence { grad_norm })
                };
            }
        }
    }
    Err(Error::NonConvergence { grad_norm })
}

/// Maps every score through the model; keys, labels and order are kept.
pub fn apply_calibration(model: &CalibrationModel, scores: &ScoreSet) -> ScoreSet {
    ScoreSet::new(
        scores
            .records()
            .iter()
            .map(|r| ScoreRecord {
                score: model.apply(r.score),
                ..r.clone()
            })
            .collect(),
    )
    .expect("mapping keeps keys unique")
}
