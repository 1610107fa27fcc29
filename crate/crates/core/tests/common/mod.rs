//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Plain softmax cross-entropy over cosine logits, averaged over the batch.
pub fn softmax_ce(xs: &[Vec<f64>], labels: &[usize], ws: &[Vec<f64>], scale: f64) -> f64 {
    let ws: Vec<Vec<f64>> = ws.iter().map(|w| unit(w)).collect();
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let x = unit(x);
        let z: Vec<f64> = ws.iter().map(|w| scale * dot(&x, w)).collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        total += -(z[y].exp() / denom).ln();
    }
    total / xs.len() as f64
}

/// `(P_miss, P_fa)` at every distinct score and at `+inf`, by direct counting.
pub fn brute_points(tar: &[f64], non: &[f64]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = tar.iter().chain(non).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    thresholds
        .iter()
        .map(|&t| {
            let misses = tar.iter().filter(|&&s| s < t).count();
            let fas = non.iter().filter(|&&s| s >= t).count();
            (
                misses as f64 / tar.len() as f64,
                fas as f64 / non.len() as f64,
            )
        })
        .collect()
}

/// EER at the first point where `P_miss >= P_fa`, interpolated linearly
/// from the previous point.
pub fn brute_eer(tar: &[f64], non: &[f64]) -> f64 {
    let pts = brute_points(tar, non);
    for k in 0..pts.len() {
        let (pm1, pfa1) = pts[k];
        if pm1 >= pfa1 {
            if pm1 == pfa1 {
                return pm1;
            }
            let (pm0, pfa0) = pts[k - 1];
            let d0 = pfa0 - pm0;
            let d1 = pfa1 - pm1;
            let t = d0 / (d0 - d1);
            return pm0 + t * (pm1 - pm0);
        }
    }
    unreachable!("last point is (1, 0)")
}

pub fn brute_min_dcf(tar: &[f64], non: &[f64], p: f64, c_miss: f64, c_fa: f64) -> f64 {
    let norm = (c_miss * p).min(c_fa * (1.0 - p));
    brute_points(tar, non)
        .into_iter()
        .map(|(pm, pfa)| (c_miss * p * pm + c_fa * (1.0 - p) * pfa) / norm)
        .fold(f64::INFINITY, f64::min)
}

/// Regularized logistic objective written out directly.
pub fn logistic_objective(a: f64, b: f64, tar: &[f64], non: &[f64], l2: f64) -> f64 {
    let n = (tar.len() + non.len()) as f64;
    let log1pexp = |z: f64| {
        if z > 30.0 {
            z + (-z).exp()
        } else {
            z.exp().ln_1p()
        }
    };
    let nll: f64 = tar.iter().map(|&s| log1pexp(-(a * s + b))).sum::<f64>()
        + non.iter().map(|&s| log1pexp(a * s + b)).sum::<f64>();
    nll / n + 0.5 * l2 * (a * a + b * b)
}

/// Nelder-Mead in two dimensions, restarted until the point stops moving.
pub fn nelder_mead<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64), step: f64) -> (f64, f64) {
    let mut best = start;
    let mut scale = step;
    for _ in 0..50 {
        let next = nelder_mead_once(&f, best, scale);
        let moved = (next.0 - best.0).hypot(next.1 - best.1);
        best = next;
        if moved < 1e-12 {
            break;
        }
        scale = (moved * 10.0).max(1e-6);
    }
    best
}

fn nelder_mead_once<F: Fn(f64, f64) -> f64>(f: &F, start: (f64, f64), step: f64) -> (f64, f64) {
    let eval = |p: [f64; 2]| f(p[0], p[1]);
    let mut s = [
        [start.0, start.1],
        [start.0 + step, start.1],
        [start.0, start.1 + step],
    ];
    let mut v: Vec<f64> = s.iter().map(|&p| eval(p)).collect();
    for _ in 0..20_000 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = [s[idx[0]], s[idx[1]], s[idx[2]]];
        v = vec![v[idx[0]], v[idx[1]], v[idx[2]]];
        let size = (s[1][0] - s[0][0])
            .hypot(s[1][1] - s[0][1])
            .max((s[2][0] - s[0][0]).hypot(s[2][1] - s[0][1]));
        if size < 1e-13 {
            break;
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])];
        let r = along(-1.0);
        let fr = eval(r);
        if fr < v[0] {
            let e = along(-2.0);
            let fe = eval(e);
            if fe < fr {
                s[2] = e;
                v[2] = fe;
            } else {
                s[2] = r;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = r;
            v[2] = fr;
        } else {
            let k = if fr < v[2] { along(-0.5) } else { along(0.5) };
            let fk = eval(k);
            if fk < v[2].min(fr) {
                s[2] = k;
                v[2] = fk;
            } else {
                for i in 1..3 {
                    s[i] = [(s[i][0] + s[0][0]) / 2.0, (s[i][1] + s[0][1]) / 2.0];
                    v[i] = eval(s[i]);
                }
            }
        }
    }
    let k = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    (s[k][0], s[k][1])
}
