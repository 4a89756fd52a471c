//! Precision, recall, PR curves and average precision.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    pub fn add(&mut self, o: &MatchCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// `(P, R)` with `P = tp / (tp + fp)` and `R = tp / (tp + fn)`. Either is 0
/// when its denominator is 0, so an empty prediction set never reports a
/// vacuous precision of 1.
pub fn precision_recall(c: &MatchCounts) -> (f64, f64) {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    /// Cumulative true positives up to this rank.
    pub tp: usize,
    /// 1-based rank.
    pub rank: usize,
}

/// Cumulative precision/recall after each detection in rank order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub n_gt: usize,
    pub points: Vec<PrPoint>,
}

/// Builds the curve from TP/FP flags already sorted by descending score.
/// With `n_gt = 0` every recall is 0.
pub fn pr_curve(flags: &[bool], n_gt: usize) -> PrCurve {
    let mut tp = 0;
    let points = flags
        .iter()
        .enumerate()
        .map(|(i, &is_tp)| {
            tp += is_tp as usize;
            PrPoint {
                precision: tp as f64 / (i + 1) as f64,
                recall: if n_gt == 0 {
                    0.0
                } else {
                    tp as f64 / n_gt as f64
                },
                tp,
                rank: i + 1,
            }
        })
        .collect();
    PrCurve { n_gt, points }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// Exact area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    Points11,
    /// Mean envelope precision at recall 0, 0.01, ..., 1.
    Points101,
}

pub fn average_precision(curve: &PrCurve) -> f64 {
    average_precision_with(curve, ApInterpolation::AllPoint)
}

pub fn average_precision_with(curve: &PrCurve, mode: ApInterpolation) -> f64 {
    if curve.n_gt == 0 || curve.points.is_empty() {
        return 0.0;
    }
    match mode {
        ApInterpolation::AllPoint => {
            all_point_exact(curve).unwrap_or_else(|| all_point_float(curve))
        }
        ApInterpolation::Points11 => sampled(curve, 11),
        ApInterpolation::Points101 => sampled(curve, 101),
    }
}

/// Suffix maxima of precision, as indices into `points`.
fn envelope(points: &[PrPoint]) -> Vec<usize> {
    let mut env = vec![0; points.len()];
    let mut best = points.len() - 1;
    for i in (0..points.len()).rev() {
        let (p, b) = (&points[i], &points[best]);
        // tp_i / rank_i > tp_b / rank_b, compared exactly.
        if (p.tp as u128) * (b.rank as u128) > (b.tp as u128) * (p.rank as u128) {
            best = i;
        }
        env[i] = best;
    }
    env
}

fn all_point_float(curve: &PrCurve) -> f64 {
    let env = envelope(&curve.points);
    let mut prev_r = 0.0;
    let mut ap = 0.0;
    for (i, p) in curve.points.iter().enumerate() {
        ap += (p.recall - prev_r) * curve.points[env[i]].precision;
        prev_r = p.recall;
    }
    ap.clamp(0.0, 1.0)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Non-negative fraction with overflow-checked arithmetic.
#[derive(Clone, Copy)]
struct Frac {
    num: u128,
    den: u128,
}

impl Frac {
    fn new(num: u128, den: u128) -> Self {
        let g = gcd(num, den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    fn checked_add(self, o: Frac) -> Option<Frac> {
        let g = gcd(self.den, o.den);
        let l = (self.den / g).checked_mul(o.den)?;
        let a = self.num.checked_mul(l / self.den)?;
        let b = o.num.checked_mul(l / o.den)?;
        Some(Frac::new(a.checked_add(b)?, l))
    }
}

/// All-point AP in exact rational arithmetic:
/// `sum_i dtp_i * max_{j >= i}(tp_j / rank_j) / n_gt`.
/// Returns `None` if an intermediate overflows `u128`.
fn all_point_exact(curve: &PrCurve) -> Option<f64> {
    let env = envelope(&curve.points);
    let mut acc = Frac::new(0, 1);
    let mut prev_tp = 0;
    for (i, p) in curve.points.iter().enumerate() {
        let dtp = (p.tp - prev_tp) as u128;
        prev_tp = p.tp;
        if dtp == 0 {
            continue;
        }
        let e = &curve.points[env[i]];
        let term = Frac::new(dtp.checked_mul(e.tp as u128)?, e.rank as u128);
        acc = acc.checked_add(term)?;
    }
    let total = Frac::new(acc.num, acc.den.checked_mul(curve.n_gt as u128)?);
    Some((total.num as f64 / total.den as f64).clamp(0.0, 1.0))
}

fn sampled(curve: &PrCurve, n: usize) -> f64 {
    let env = envelope(&curve.points);
    let mut sum = 0.0;
    for k in 0..n {
        let r = k as f64 / (n - 1) as f64;
        if let Some(i) = curve.points.iter().position(|p| p.recall >= r) {
            sum += curve.points[env[i]].precision;
        }
    }
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_recall_cases() {
        let pr = |tp, fp, fn_| precision_recall(&MatchCounts { tp, fp, fn_ });
        assert_eq!(pr(8, 2, 0), (0.8, 1.0));
        assert_eq!(pr(0, 0, 5), (0.0, 0.0));
        assert_eq!(pr(5, 0, 5), (1.0, 0.5));
    }

    #[test]
    fn tp_fp_tp_curve() {
        let c = pr_curve(&[true, false, true], 2);
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(pts, vec![(1.0, 0.5), (0.5, 0.5), (2.0 / 3.0, 1.0)]);
        assert_eq!(average_precision(&c), 5.0 / 6.0);
        assert!((all_point_float(&c) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_empty() {
        let c = pr_curve(&[true; 7], 7);
        assert!(c.points.iter().all(|p| p.precision == 1.0));
        assert_eq!(average_precision(&c), 1.0);
        assert_eq!(average_precision(&pr_curve(&[false, false], 3)), 0.0);
        assert_eq!(average_precision(&pr_curve(&[], 3)), 0.0);
    }

    #[test]
    fn no_ground_truth() {
        let c = pr_curve(&[false, false], 0);
        assert!(c.points.iter().all(|p| p.recall == 0.0));
        assert_eq!(average_precision(&c), 0.0);
    }

    #[test]
    fn sampled_modes() {
        let c = pr_curve(&[true, false, true], 2);
        // Envelope is 1 for r <= 0.5 and 2/3 above.
        let p11 = (6.0 * 1.0 + 5.0 * (2.0 / 3.0)) / 11.0;
        assert!((average_precision_with(&c, ApInterpolation::Points11) - p11).abs() < 1e-12);
        let p101 = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
        assert!((average_precision_with(&c, ApInterpolation::Points101) - p101).abs() < 1e-12);
    }

    #[test]
    fn exact_path_falls_back_on_overflow() {
        // Ranks 1..=200 interleaved so the envelope visits many denominators.
        let flags: Vec<bool> = (0..4000).map(|i| i % 3 != 1).collect();
        let c = pr_curve(&flags, 5000);
        let a = average_precision(&c);
        assert!((a - all_point_float(&c)).abs() < 1e-12);
    }
}
