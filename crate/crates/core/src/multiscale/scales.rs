use serde::Serialize;

use super::hierarchy::ell;
use crate::error::{Error, Result};

/// Target for truncation tails.
const TAIL_TARGET: f64 = 1e-7;
/// Hard cap on summed terms.
const MAX_TERMS: u64 = 200_000_000;

/// Value of one scale condition.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConditionValue {
    /// Supremum or truncated sum.
    pub value: f64,
    /// Rigorous upper bound on the omitted tail (0 for a supremum).
    pub tail_bound: f64,
    pub threshold: f64,
    pub terms: u64,
    /// `value + tail_bound <= threshold`.
    pub pass: bool,
}

impl ConditionValue {
    fn new(value: f64, tail_bound: f64, threshold: f64, terms: u64) -> Self {
        Self {
            value,
            tail_bound,
            threshold,
            terms,
            pass: value + tail_bound <= threshold,
        }
    }
}

/// The three conditions on the block-size sequence.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaleReport {
    pub kappa: u32,
    pub d: usize,
    /// `sup_k k^{2d} l_k^{2d} (2 kappa)^{-(d-1)(k+5)} <= 1/2`.
    pub a1: ConditionValue,
    /// `sum_k (1 + 3^{d-1}) / l_k^{d-1} <= 1/20`.
    pub a2: ConditionValue,
    /// `(1 + 3^d) sum_k k^{2d} (2 kappa)^{-(d-1)(k+6)} <= 1/42`.
    pub a3: ConditionValue,
    pub all_pass: bool,
}

/// Evaluate the three conditions with rigorous truncation.
pub fn check_scale_conditions(kappa: u32, d: usize) -> Result<ScaleReport> {
    if kappa < 1 {
        return Err(Error::param("kappa", "must be at least 1"));
    }
    if d < 2 {
        return Err(Error::param("d", "must be at least 2"));
    }
    let a1 = sup_a1(kappa, d);
    let a2 = sum_a2(kappa, d);
    let a3 = sum_a3(kappa, d);
    Ok(ScaleReport {
        kappa,
        d,
        all_pass: a1.pass && a2.pass && a3.pass,
        a1,
        a2,
        a3,
    })
}

/// The log of the A1 term is concave in `k >= 1`, so the first decrease
/// marks the maximum.
fn sup_a1(kappa: u32, d: usize) -> ConditionValue {
    let dd = d as f64;
    let ln2k = (2.0 * f64::from(kappa)).ln();
    let g = |k: u64| {
        let kf = k as f64;
        2.0 * dd * kf.ln() + 2.0 * dd * (ell(k as usize, kappa) as f64).ln() - (dd - 1.0) * (kf + 5.0) * ln2k
    };
    let mut k = 1u64;
    let mut best = g(1);
    while k < MAX_TERMS {
        let next = g(k + 1);
        if next <= best {
            break;
        }
        best = next;
        k += 1;
    }
    ConditionValue::new(best.exp(), 0.0, 0.5, k + 1)
}

/// Terms are bounded by `c (2 kappa)^{-(d-1)} (k+1)^{-2(d-1)}`, whose tail
/// beyond `K` is at most the integral from `K` to infinity.
fn sum_a2(kappa: u32, d: usize) -> ConditionValue {
    let c = 1.0 + 3f64.powi(d as i32 - 1);
    let e = (d - 1) as i32;
    let s = 2.0 * (d as f64 - 1.0);
    let lead = c / (2.0 * f64::from(kappa)).powi(e);
    let tail = |kk: f64| lead * kk.powf(1.0 - s) / (s - 1.0);
    // Smallest K with tail(K) <= TAIL_TARGET.
    let needed = ((lead / ((s - 1.0) * TAIL_TARGET)).powf(1.0 / (s - 1.0))).ceil() as u64;
    let terms = needed.clamp(1, MAX_TERMS);
    let mut sum = 0.0;
    for k in (0..terms).rev() {
        sum += c / (ell(k as usize, kappa) as f64).powi(e);
    }
    ConditionValue::new(sum, tail(terms as f64), 1.0 / 20.0, terms)
}

/// Ratios of consecutive terms decrease in `k`, giving a geometric tail.
fn sum_a3(kappa: u32, d: usize) -> ConditionValue {
    let dd = d as f64;
    let pre = 1.0 + 3f64.powi(d as i32);
    let base = 2.0 * f64::from(kappa);
    let term = |k: u64| {
        let kf = k as f64;
        (2.0 * dd * kf.ln() - (dd - 1.0) * (kf + 6.0) * base.ln()).exp()
    };
    let ratio = |k: u64| ((k as f64 + 1.0) / k as f64).powf(2.0 * dd) * base.powf(-(dd - 1.0));
    let mut sum = 0.0;
    let mut k = 1u64;
    loop {
        let t = term(k);
        sum += t;
        let r = ratio(k);
        if r < 1.0 {
            let tail = term(k + 1) / (1.0 - ratio(k + 1));
            if tail <= TAIL_TARGET * 1e-2 || k >= MAX_TERMS {
                return ConditionValue::new(pre * sum, pre * tail, 1.0 / 42.0, k);
            }
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_one_fails_a2() {
        let r = check_scale_conditions(1, 2).unwrap();
        // First term alone: (1 + 3) / l_0 = 4 / 3.
        assert!(r.a2.value > 4.0 / 3.0);
        assert!(!r.a2.pass);
        assert!(!r.all_pass);
        assert!(r.a2.tail_bound < 1e-6);
    }

    #[test]
    fn kappa_seventy_passes() {
        let r = check_scale_conditions(70, 2).unwrap();
        assert!(r.a1.pass && r.a2.pass && r.a3.pass && r.all_pass, "{r:?}");
        assert!(r.a2.tail_bound < 1e-6 && r.a3.tail_bound < 1e-6);
    }

    #[test]
    fn monotone_in_kappa() {
        let mut prev = check_scale_conditions(1, 2).unwrap();
        for kappa in [2, 3, 5, 10, 40, 70] {
            let r = check_scale_conditions(kappa, 2).unwrap();
            assert!(r.a2.value <= prev.a2.value && r.a3.value <= prev.a3.value);
            prev = r;
        }
    }

    #[test]
    fn a3_direct_sum_oracle() {
        // Brute force sum of 2000 terms; the remaining tail is negligible.
        for (kappa, d) in [(1u32, 2usize), (2, 2), (1, 3)] {
            let b = 2.0 * kappa as f64;
            let direct: f64 = (1..2000)
                .map(|k| (k as f64).powi(2 * d as i32) * b.powf(-((d - 1) as f64) * (k as f64 + 6.0)))
                .sum::<f64>()
                * (1.0 + 3f64.powi(d as i32));
            let r = check_scale_conditions(kappa, d).unwrap();
            assert!((r.a3.value - direct).abs() <= 1e-9 * direct + r.a3.tail_bound);
        }
    }

    #[test]
    fn a1_brute_force_oracle() {
        let b: f64 = 2.0;
        let brute = (1..400)
            .map(|k| {
                let kf = k as f64;
                let l = 2.0 * (kf + 1.0).powi(2) + 1.0;
                (4.0 * kf.ln() + 4.0 * l.ln() - (kf + 5.0) * b.ln()).exp()
            })
            .fold(0.0f64, f64::max);
        let r = check_scale_conditions(1, 2).unwrap();
        assert!((r.a1.value / brute - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(check_scale_conditions(0, 2).is_err());
        assert!(check_scale_conditions(1, 1).is_err());
    }
}
