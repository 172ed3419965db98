//! Desk-scale estimates of the mixing, cavity and multispin lengths, the
//! renormalization length, and their scaling in `β`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Model;
use crate::gibbs::{psi_family, sm_condition_value, BoundaryFamily, Exactness, MarginalMethod};
use crate::numeric::{linear_fit, ln_tanh};

pub const MULTISPIN_THRESHOLD: f64 = 0.2;
pub const CAVITY_THRESHOLD: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthKind {
    Mix,
    Cavity,
    Multispin,
    Renorm,
}

impl LengthKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LengthKind::Mix => "mix",
            LengthKind::Cavity => "cavity",
            LengthKind::Multispin => "multispin",
            LengthKind::Renorm => "renorm",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certainty {
    Exact,
    Bracket { lo: u64, hi: u64 },
    LowerBound,
}

impl Certainty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Certainty::Exact => "exact",
            Certainty::Bracket { .. } => "bracket",
            Certainty::LowerBound => "lower-bound",
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize)]
pub struct LengthParams {
    pub threshold: Option<f64>,
    pub ratio: Option<u32>,
    pub eps0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthEstimate {
    pub kind: LengthKind,
    pub model: Model,
    pub beta: f64,
    pub value: u64,
    pub certainty: Certainty,
    pub params: LengthParams,
}

impl LengthEstimate {
    /// `(lo, hi)`; both equal `value` unless the estimate is a bracket.
    pub fn bounds(&self) -> (u64, u64) {
        match self.certainty {
            Certainty::Bracket { lo, hi } => (lo, hi),
            _ => (self.value, self.value),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be finite and nonnegative, got {beta}")));
    }
    Ok(())
}

/// `ln(thr)/ln tanh(β/2)`: the number of plaquettes needed to push
/// `tanh(β/2)^n` to the threshold.
fn required_plaquettes(beta: f64, threshold: f64) -> f64 {
    if beta == 0.0 || threshold >= 1.0 {
        return 0.0;
    }
    threshold.ln() / ln_tanh(beta / 2.0)
}

/// Smallest `ℓ ≥ 1` with `ℓ² · scale ≥ r`.
fn min_square(r: f64, scale: f64) -> u64 {
    let mut ell = ((r / scale).max(0.0).sqrt().ceil() as u64).max(1);
    while ell > 1 && ((ell - 1) as f64).powi(2) * scale >= r {
        ell -= 1;
    }
    while (ell as f64).powi(2) * scale < r {
        ell += 1;
    }
    ell
}

/// `ℓ_multispin` bracket: `lo` from the extremal families (4-corner squares,
/// `n = ℓ²`; triangles of side `2^k`, `n = 3^k`), `hi` from the lower bound
/// on `n(A)` (`ℓ²/4`; `3^{k−1}` for `2^k ≤ ℓ`).
pub fn ell_multispin(model: Model, beta: f64, threshold: f64) -> Result<LengthEstimate> {
    check_beta(beta)?;
    if !(threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    let r = required_plaquettes(beta, threshold);
    let (lo, hi) = match model {
        Model::Spm => (min_square(r, 1.0), min_square(r, 0.25)),
        Model::Tpm => {
            let mut lo = 1u64;
            let mut k = 0u32;
            while 3f64.powi(k as i32) < r {
                lo = (1u64 << k) + 1;
                k += 1;
            }
            let mut k = 0u32;
            while 3f64.powi(k as i32 - 1) < r {
                k += 1;
            }
            (lo, 1u64 << k)
        }
        Model::Rect { .. } => return Err(Error::Unsupported("multispin length for spm and tpm only".into())),
    };
    let certainty = if lo == hi { Certainty::Exact } else { Certainty::Bracket { lo, hi } };
    Ok(LengthEstimate {
        kind: LengthKind::Multispin,
        model,
        beta,
        value: lo,
        certainty,
        params: LengthParams { threshold: Some(threshold), ..Default::default() },
    })
}

/// Smallest `ℓ` (a power of two for the TPM) with `β'(β, ℓ) ≤ 1`.
pub fn renorm_length(model: Model, beta: f64) -> Result<LengthEstimate> {
    check_beta(beta)?;
    // β' ≤ 1 iff k ln tanh(β/2) ≤ ln tanh(1/2)
    let r = if beta <= 1.0 { 0.0 } else { ln_tanh(0.5) / ln_tanh(beta / 2.0) };
    let value = match model {
        Model::Spm => min_square(r, 1.0),
        Model::Tpm => {
            let mut n = 0u32;
            while 3f64.powi(n as i32) < r {
                n += 1;
            }
            1u64 << n
        }
        Model::Rect { .. } => return Err(Error::Unsupported("renormalization for spm and tpm only".into())),
    };
    Ok(LengthEstimate {
        kind: LengthKind::Renorm,
        model,
        beta,
        value,
        certainty: Certainty::Exact,
        params: LengthParams::default(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub ell: u32,
    pub value: f64,
    pub std_error: Option<f64>,
    pub exactness: Exactness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanEstimate {
    pub estimate: LengthEstimate,
    pub scan: Vec<ScanPoint>,
}

/// Smallest scanned `ℓ` after which `ψ` stays at or below `u`, with `ψ` over
/// the boundary family in a box of side `Rℓ`. The sup over a partial family
/// and the finite scan both make this a lower bound.
pub fn ell_cavity_estimate(
    model: Model,
    beta: f64,
    u: f64,
    ratio: u32,
    family: &BoundaryFamily,
    method: MarginalMethod,
    max_ell: u32,
) -> Result<ScanEstimate> {
    check_beta(beta)?;
    let params = LengthParams { threshold: Some(u), ratio: Some(ratio), eps0: None };
    if beta == 0.0 {
        let estimate =
            LengthEstimate { kind: LengthKind::Cavity, model, beta, value: 1, certainty: Certainty::Exact, params };
        return Ok(ScanEstimate { estimate, scan: Vec::new() });
    }
    if beta > crate::mcmc::LOW_TEMPERATURE_BETA && !matches!(method, MarginalMethod::Exact) {
        return Err(invalid(format!(
            "sampled cavity estimates are limited to beta <= {}",
            crate::mcmc::LOW_TEMPERATURE_BETA
        )));
    }
    let scan = (1..=max_ell)
        .map(|ell| {
            psi_family(model, ell, ratio, beta, family, method).map(|p| ScanPoint {
                ell,
                value: p.value,
                std_error: p.std_error,
                exactness: p.exactness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let last_above = scan.iter().filter(|p| p.value > u).map(|p| p.ell as u64).max();
    let value = last_above.map_or(1, |l| l + 1);
    let estimate = LengthEstimate { kind: LengthKind::Cavity, model, beta, value, certainty: Certainty::LowerBound, params };
    Ok(ScanEstimate { estimate, scan })
}

/// Smallest `ℓ ≤ max_ell` with `e^{4β‖H‖} ℓ φ(ℓ) ≤ ε₀`; `max_ell + 1` when
/// none is found. Exact only when every scanned `φ` was exact and the
/// condition was met.
pub fn ell_mix_estimate(
    model: Model,
    beta: f64,
    eps0: f64,
    family: &BoundaryFamily,
    max_ell: u32,
) -> Result<ScanEstimate> {
    check_beta(beta)?;
    if !(eps0 > 0.0) {
        return Err(invalid("eps0 must be positive"));
    }
    let params = LengthParams { eps0: Some(eps0), ..Default::default() };
    let mut scan = Vec::new();
    let mut found = None;
    for ell in 1..=max_ell {
        let (v, phi) = sm_condition_value(model, ell, beta, family)?;
        scan.push(ScanPoint { ell, value: v, std_error: None, exactness: phi.exactness });
        if v <= eps0 {
            found = Some(ell as u64);
            break;
        }
    }
    let all_exact = scan.iter().all(|p| p.exactness == Exactness::Exact);
    let (value, certainty) = match found {
        Some(l) if all_exact => (l, Certainty::Exact),
        Some(l) => (l, Certainty::LowerBound),
        None => (max_ell as u64 + 1, Certainty::LowerBound),
    };
    Ok(ScanEstimate { estimate: LengthEstimate { kind: LengthKind::Mix, model, beta, value, certainty, params }, scan })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub model: Model,
    pub kind: LengthKind,
    pub slope: f64,
    pub intercept: f64,
    /// `1/2` (SPM) or `ln 2 / ln 3` (TPM).
    pub target: f64,
    pub betas: Vec<f64>,
    pub ells: Vec<u64>,
}

/// Slope of `ln ℓ` against `β` expected from the multispin scaling.
pub fn target_slope(model: Model) -> Result<f64> {
    match model {
        Model::Spm => Ok(0.5),
        Model::Tpm => Ok(2f64.ln() / 3f64.ln()),
        Model::Rect { .. } => Err(Error::Unsupported("scaling for spm and tpm only".into())),
    }
}

/// Evenly spaced grid `from, from+step, …` up to `to` inclusive.
pub fn beta_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

/// Least-squares fit of `ln ℓ` against `β` for the multispin `lo` scan or the
/// renormalization length.
pub fn scaling_fit(model: Model, kind: LengthKind, betas: &[f64]) -> Result<ScalingFit> {
    let ells = betas
        .par_iter()
        .map(|&b| match kind {
            LengthKind::Multispin => ell_multispin(model, b, MULTISPIN_THRESHOLD).map(|e| e.value),
            LengthKind::Renorm => renorm_length(model, b).map(|e| e.value),
            _ => Err(invalid("only multispin and renorm lengths have closed-form scans")),
        })
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = ells.iter().map(|&l| (l as f64).ln()).collect();
    let (slope, intercept) = linear_fit(betas, &y);
    Ok(ScalingFit { model, kind, slope, intercept, target: target_slope(model)?, betas: betas.to_vec(), ells })
}

/// Settings for [`ordering_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingConfig {
    pub ratio: u32,
    pub cavity_threshold: f64,
    pub multispin_threshold: f64,
    pub eps0: f64,
    pub max_cavity_ell: u32,
    pub max_mix_ell: u32,
    pub family: BoundaryFamily,
    pub method: MarginalMethod,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            ratio: 5,
            cavity_threshold: CAVITY_THRESHOLD,
            multispin_threshold: MULTISPIN_THRESHOLD,
            eps0: 0.1,
            max_cavity_ell: 2,
            max_mix_ell: 2,
            family: BoundaryFamily::declared(8, 1),
            method: MarginalMethod::Auto { sweeps: 40_000, burn_in: 2_000, seed: 1 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingRow {
    pub beta: f64,
    pub multispin: LengthEstimate,
    pub cavity: ScanEstimate,
    pub mix: ScanEstimate,
    /// `ℓ_multispin.lo ≤ ℓ_cavity`.
    pub holds: bool,
}

/// All estimates on a `β` grid; only `ℓ_multispin.lo ≤ ℓ_cavity` is checked.
pub fn ordering_report(model: Model, betas: &[f64], config: &OrderingConfig) -> Result<Vec<OrderingRow>> {
    betas
        .iter()
        .map(|&beta| {
            let multispin = ell_multispin(model, beta, config.multispin_threshold)?;
            let cavity = ell_cavity_estimate(
                model,
                beta,
                config.cavity_threshold,
                config.ratio,
                &config.family,
                config.method,
                config.max_cavity_ell,
            )?;
            let mix = ell_mix_estimate(model, beta, config.eps0, &config.family, config.max_mix_ell)?;
            let holds = multispin.value <= cavity.estimate.value;
            Ok(OrderingRow { beta, multispin, cavity, mix, holds })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlators::tanh_power;

    #[test]
    fn multispin_bracket_is_self_consistent() {
        for model in [Model::Spm, Model::Tpm] {
            for beta in beta_grid(0.5, 12.0, 0.25) {
                let e = ell_multispin(model, beta, 0.2).unwrap();
                let (lo, hi) = e.bounds();
                assert!(lo <= hi);
                let n_at = |ell: u64| match model {
                    Model::Spm => (ell * ell) as usize,
                    _ => 3usize.pow(63 - ell.leading_zeros()),
                };
                assert!(tanh_power(beta, n_at(hi)).0 <= 0.2 + 1e-15, "{model:?} {beta}");
                if lo > 1 {
                    assert!(tanh_power(beta, n_at(lo - 1)).0 > 0.2, "{model:?} {beta}");
                }
            }
        }
    }

    #[test]
    fn multispin_monotone() {
        let mut prev = 0;
        for beta in beta_grid(0.1, 15.0, 0.1) {
            let v = ell_multispin(Model::Spm, beta, 0.2).unwrap().value;
            assert!(v >= prev);
            prev = v;
            assert!(ell_multispin(Model::Spm, beta, 0.1).unwrap().value >= v);
        }
        assert_eq!(ell_multispin(Model::Tpm, 0.0, 0.2).unwrap().bounds(), (1, 1));
        assert_eq!(ell_multispin(Model::Spm, 1e-6, 0.2).unwrap().bounds(), (1, 1));
    }

    #[test]
    fn renorm_length_threshold() {
        use crate::renorm::{beta_prime, RenormSpec};
        for model in [Model::Spm, Model::Tpm] {
            for beta in beta_grid(1.5, 14.0, 0.5) {
                let ell = renorm_length(model, beta).unwrap().value;
                assert!(beta_prime(beta, &RenormSpec::new(model, ell).unwrap()).unwrap().value <= 1.0 + 1e-12);
                let prev = if model == Model::Tpm { ell / 2 } else { ell - 1 };
                if prev >= 1 {
                    assert!(beta_prime(beta, &RenormSpec::new(model, prev).unwrap()).unwrap().value > 1.0);
                }
            }
        }
    }

    #[test]
    fn slopes() {
        let betas = beta_grid(6.0, 20.0, 0.05);
        let f = scaling_fit(Model::Spm, LengthKind::Multispin, &betas).unwrap();
        assert!((f.slope - 0.5).abs() < 0.02, "{}", f.slope);
        let f = scaling_fit(Model::Tpm, LengthKind::Renorm, &betas).unwrap();
        assert!((f.slope - f.target).abs() < 0.03, "{}", f.slope);
    }

    #[test]
    fn mix_zero_beta() {
        let m = ell_mix_estimate(Model::Spm, 0.0, 0.1, &BoundaryFamily::Exhaustive, 2).unwrap();
        assert_eq!(m.estimate.value, 1);
        assert_eq!(m.estimate.certainty, Certainty::Exact);
    }
}
