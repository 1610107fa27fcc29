//! Equal error rate and minimum detection cost.
//!
//! Both metrics are computed on the same operating points: a trial is
//! accepted when its score is `>=` the threshold, and the threshold sweeps
//! every distinct score followed by `+inf`. The lowest distinct score accepts
//! everything, so the sweep starts at `(P_miss, P_fa) = (0, 1)` and ends at
//! `(1, 0)`.

use crate::error::{Error, Result};
use crate::scores::ScoreSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcfParams {
    pub p_target: f64,
    pub c_miss: f64,
    pub c_fa: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self {
            p_target: 0.01,
            c_miss: 1.0,
            c_fa: 1.0,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::ParamInvalid(format!(
                "p_target {} outside (0, 1)",
                self.p_target
            )));
        }
        if !(self.c_miss > 0.0
            && self.c_miss.is_finite()
            && self.c_fa > 0.0
            && self.c_fa.is_finite())
        {
            return Err(Error::ParamInvalid(
                "detection costs must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EerMethod {
    /// Linear interpolation between the two points bracketing the crossover.
    #[default]
    Interpolated,
    /// Mean of `P_miss` and `P_fa` at whichever bracketing point is closer
    /// to the diagonal.
    Nearest,
}

/// `(P_miss, P_fa)` at every operating point, in order of rising threshold.
pub fn operating_points(targets: &[f64], nontargets: &[f64]) -> Result<Vec<(f64, f64)>> {
    if targets.is_empty() || nontargets.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    if targets.iter().chain(nontargets).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let mut all: Vec<(f64, bool)> = targets
        .iter()
        .map(|&s| (s, true))
        .chain(nontargets.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let nt = targets.len() as f64;
    let nn = nontargets.len() as f64;
    let mut misses = 0usize;
    let mut false_accepts = nontargets.len();
    let mut points = Vec::with_capacity(all.len() + 1);
    let mut k = 0;
    while k < all.len() {
        points.push((misses as f64 / nt, false_accepts as f64 / nn));
        let v = all[k].0;
        while k < all.len() && all[k].0 == v {
            if all[k].1 {
                misses += 1;
            } else {
                false_accepts -= 1;
            }
            k += 1;
        }
    }
    points.push((misses as f64 / nt, false_accepts as f64 / nn));
    Ok(points)
}

fn eer_from_points(points: &[(f64, f64)], method: EerMethod) -> f64 {
    let k = points
        .iter()
        .position(|&(pm, pfa)| pm >= pfa)
        .expect("sweep ends at (1, 0)");
    let (pm1, pfa1) = points[k];
    if pm1 == pfa1 {
        return pm1;
    }
    let (pm0, pfa0) = points[k - 1];
    let d0 = pfa0 - pm0;
    let d1 = pfa1 - pm1;
    match method {
        EerMethod::Interpolated => {
            let t = d0 / (d0 - d1);
            pm0 + t * (pm1 - pm0)
        }
        EerMethod::Nearest => {
            if d0 <= -d1 {
                (pm0 + pfa0) / 2.0
            } else {
                (pm1 + pfa1) / 2.0
            }
        }
    }
}

pub fn eer_from_scores(targets: &[f64], nontargets: &[f64]) -> Result<f64> {
    Ok(eer_from_points(
        &operating_points(targets, nontargets)?,
        EerMethod::Interpolated,
    ))
}

/// Equal error rate with interpolation at the crossover.
pub fn eer(scores: &ScoreSet) -> Result<f64> {
    eer_with(scores, EerMethod::Interpolated)
}

pub fn eer_with(scores: &ScoreSet, method: EerMethod) -> Result<f64> {
    let (tar, non) = scores.split_by_label()?;
    Ok(eer_from_points(&operating_points(&tar, &non)?, method))
}

pub fn min_dcf_from_scores(targets: &[f64], nontargets: &[f64], params: &DcfParams) -> Result<f64> {
    params.validate()?;
    let points = operating_points(targets, nontargets)?;
    let DcfParams {
        p_target,
        c_miss,
        c_fa,
    } = *params;
    let norm = (c_miss * p_target).min(c_fa * (1.0 - p_target));
    Ok(points
        .iter()
        .map(|&(pm, pfa)| (c_miss * p_target * pm + c_fa * (1.0 - p_target) * pfa) / norm)
        .fold(f64::INFINITY, f64::min))
}

/// Minimum normalized detection cost over all thresholds.
pub fn min_dcf(scores: &ScoreSet, params: &DcfParams) -> Result<f64> {
    let (tar, non) = scores.split_by_label()?;
    min_dcf_from_scores(&tar, &non, params)
}
