//! Plus-boundary magnetization at the center of `[−ℓ, ℓ]²` for the SPM.

use serde::Serialize;
use statrs::distribution::{Binomial, Discrete};

use crate::error::{invalid, Result};
use crate::geometry::{Model, Region, Site};
use crate::gibbs::{multispin, BoundaryCondition, GibbsSpec};
use crate::numeric::{ln_binomial, ln_tanh, log_add_exp, log_sum_exp, LogSum};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnetizationMethod {
    ClosedForm,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagnetizationResult {
    pub ell: u64,
    pub beta: f64,
    /// `L = 2ℓ + 2`.
    pub big_l: u64,
    pub log_n: f64,
    pub log_d: f64,
    pub value: f64,
    pub method: MagnetizationMethod,
}

/// `ln D = ln Σ_i C(L,i) (t^i + t^{L−i})^L`.
pub fn log_denominator(big_l: u64, lt: f64) -> f64 {
    let l = big_l as f64;
    let term = |i: u64| ln_binomial(big_l, i) + l * log_add_exp(i as f64 * lt, (big_l - i) as f64 * lt);
    let mut acc = LogSum::new();
    for i in 0..=big_l / 2 {
        let a = term(i);
        let b = term(big_l - i);
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "D summand not symmetric at i = {i}");
        acc.push(a);
        if 2 * i != big_l {
            acc.push(a);
        }
    }
    acc.value()
}

/// `ln N`, with `N = t^{L²/4} Σ_{u,v} C(L/2,u) C(L/2,v) (t^{2v}+t^{L−2v}+t^{2u}+t^{L−2u})^{L/2}`.
pub fn log_numerator(big_l: u64, lt: f64) -> f64 {
    let h = big_l / 2;
    let l = big_l as f64;
    let mut acc = LogSum::new();
    for u in 0..=h {
        let cu = ln_binomial(h, u);
        let (au, bu) = (2.0 * u as f64 * lt, (l - 2.0 * u as f64) * lt);
        for v in u..=h {
            let inner = log_sum_exp(&[au, bu, 2.0 * v as f64 * lt, (l - 2.0 * v as f64) * lt]);
            let x = cu + ln_binomial(h, v) + h as f64 * inner;
            acc.push(x);
            if v != u {
                acc.push(x);
            }
        }
    }
    l * l / 4.0 * lt + acc.value()
}

/// `μ^{β,+}_{[−ℓ,ℓ]²}(σ_0) = N/D` from the binomial sums.
pub fn magnetization_plus_exact(ell: u64, beta: f64) -> Result<MagnetizationResult> {
    if ell == 0 {
        return Err(invalid("ell must be at least 1"));
    }
    if !(beta >= 0.0) {
        return Err(invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let big_l = 2 * ell + 2;
    if beta == 0.0 {
        return Ok(MagnetizationResult {
            ell,
            beta,
            big_l,
            log_n: f64::NEG_INFINITY,
            log_d: 0.0,
            value: 0.0,
            method: MagnetizationMethod::ClosedForm,
        });
    }
    let lt = ln_tanh(beta / 2.0);
    let log_n = log_numerator(big_l, lt);
    let log_d = log_denominator(big_l, lt);
    let value = (log_n - log_d).exp().min(1.0);
    Ok(MagnetizationResult { ell, beta, big_l, log_n, log_d, value, method: MagnetizationMethod::ClosedForm })
}

/// Enumeration over the 9 spins of `[−1, 1]²`.
pub fn magnetization_brute_force(ell: u64, beta: f64) -> Result<MagnetizationResult> {
    if ell != 1 {
        return Err(invalid("brute force magnetization supports ell = 1 only"));
    }
    let spec = GibbsSpec::meeting(Model::Spm, Region::centered(1), beta, BoundaryCondition::AllPlus);
    let value = multispin(&spec, &[Site::ORIGIN])?;
    Ok(MagnetizationResult {
        ell,
        beta,
        big_l: 4,
        log_n: f64::NAN,
        log_d: f64::NAN,
        value,
        method: MagnetizationMethod::BruteForce,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub beta: f64,
    pub ell: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayScan {
    pub beta: f64,
    pub threshold: f64,
    pub rows: Vec<ScanRow>,
    /// Smallest grid `ℓ` with value below the threshold; `None` when no grid
    /// value falls below it or the threshold exceeds 1, where every value
    /// lies below it and there is nothing to cross.
    pub crossover: Option<u64>,
}

/// Closed-form values over an `ℓ` grid.
pub fn magnetization_decay_scan(beta: f64, ells: &[u64], threshold: f64) -> Result<DecayScan> {
    use rayon::prelude::*;
    let rows = ells
        .par_iter()
        .map(|&ell| magnetization_plus_exact(ell, beta).map(|r| ScanRow { beta, ell, value: r.value }))
        .collect::<Result<Vec<_>>>()?;
    let crossover = if threshold > 1.0 {
        None
    } else {
        rows.iter().filter(|r| r.value < threshold).map(|r| r.ell).min()
    };
    Ok(DecayScan { beta, threshold, rows, crossover })
}

/// Smallest `ℓ ≤ max_ell` with value below the threshold, by doubling then
/// bisection; assumes the value decreases in `ℓ`.
pub fn magnetization_crossover(beta: f64, threshold: f64, max_ell: u64) -> Result<Option<u64>> {
    if threshold > 1.0 {
        return Ok(None);
    }
    let below = |ell: u64| magnetization_plus_exact(ell, beta).map(|r| r.value < threshold);
    if below(1)? {
        return Ok(Some(1));
    }
    let mut lo = 1;
    let mut hi = 2;
    loop {
        if hi > max_ell {
            if below(max_ell)? {
                hi = max_ell;
                break;
            }
            return Ok(None);
        }
        if below(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// `D` against `2^{2L} t^{L²/2} E[((t^X + t^{−X})/2)^L]` with `X + L/2 ~ Bin(L, 1/2)`;
/// returns both logarithms.
pub fn probabilistic_rewrite_check(big_l: u64, beta: f64) -> Result<(f64, f64)> {
    if big_l == 0 || big_l % 2 == 1 || !(beta > 0.0) {
        return Err(invalid("need even L > 0 and beta > 0"));
    }
    let lt = ln_tanh(beta / 2.0);
    let lhs = log_denominator(big_l, lt);
    let bin = Binomial::new(0.5, big_l).map_err(|e| invalid(e.to_string()))?;
    let l = big_l as f64;
    let terms: Vec<f64> = (0..=big_l)
        .map(|i| {
            let x = i as f64 - l / 2.0;
            let ln_cosh = log_add_exp(x * lt, -x * lt) - std::f64::consts::LN_2;
            bin.ln_pmf(i) + l * ln_cosh
        })
        .collect();
    let rhs = 2.0 * l * std::f64::consts::LN_2 + l * l / 2.0 * lt + log_sum_exp(&terms);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_enumeration() {
        for beta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let a = magnetization_plus_exact(1, beta).unwrap().value;
            let b = magnetization_brute_force(1, beta).unwrap().value;
            assert!((a - b).abs() < 1e-10, "beta {beta}: {a} vs {b}");
        }
        assert!(magnetization_brute_force(1, 0.0).unwrap().value.abs() < 1e-15);
        assert!(magnetization_brute_force(2, 1.0).is_err());
    }

    #[test]
    fn small_beta_continuity() {
        let a = magnetization_plus_exact(1, 1e-3).unwrap().value;
        let b = magnetization_brute_force(1, 1e-3).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rewrite_identity() {
        for big_l in [2, 4, 8, 12] {
            let (a, b) = probabilistic_rewrite_check(big_l, 1.3).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn large_ell_is_finite() {
        let r = magnetization_plus_exact(2000, 9.0).unwrap();
        assert!(r.value > 0.0 && r.value <= 1.0);
    }

    #[test]
    fn degenerate_thresholds() {
        let s = magnetization_decay_scan(2.0, &[1, 2, 3], 1.1).unwrap();
        assert_eq!(s.crossover, None);
        assert_eq!(magnetization_crossover(2.0, 1.1, 64).unwrap(), None);
        let s = magnetization_decay_scan(2.0, &[1, 2, 3], 0.0).unwrap();
        assert_eq!(s.crossover, None);
        assert_eq!(magnetization_crossover(2.0, 0.0, 64).unwrap(), None);
    }
}
