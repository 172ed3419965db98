//! Multispin averages: the infinite-volume closed form and the finite box
//! with plus boundary through the cycle expansion.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::cycles::{cycle_space, CycleBasis};
use crate::error::{Error, Result};
use crate::f2::{ParitySet, Span};
use crate::geometry::{FamilyMode, Model, Region, Site};
use crate::gibbs::{multispin, BoundaryCondition, GibbsSpec};
use crate::numeric::ln_tanh;
use crate::shadows::{is_null_equivalent, minimal_decomposition};

/// `μ^β([σ]_A)` in infinite volume.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Multispin {
    pub value: f64,
    /// `ln μ`, `-inf` when the average vanishes.
    pub log_value: f64,
    pub equivalent: bool,
    /// `n(A)` when `A ∼ ∅`.
    pub n: Option<usize>,
}

/// `tanh(β/2)^n` computed as `exp(n ln tanh(β/2))`.
pub fn tanh_power(beta: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    if beta == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let l = n as f64 * ln_tanh(beta / 2.0);
    (l.exp(), l)
}

/// `0` unless `A ∼ ∅`, and then `tanh(β/2)^{n(A)}`.
pub fn multispin_infinite(model: Model, a: &[Site], beta: f64) -> Result<Multispin> {
    if !is_null_equivalent(model, a)? {
        return Ok(Multispin { value: 0.0, log_value: f64::NEG_INFINITY, equivalent: false, n: None });
    }
    let n = minimal_decomposition(model, a)?.size;
    let (value, log_value) = tanh_power(beta, n);
    Ok(Multispin { value, log_value, equivalent: true, n: Some(n) })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlusMethod {
    CycleExpansion,
    Enumeration,
}

/// `μ^{β,+}_Λ([σ]_A)` with the size of the representation used for the
/// lower bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlusMultispin {
    pub value: f64,
    pub method: PlusMethod,
    /// Smallest number of distinct clipped plaquettes summing to `A`.
    pub n: usize,
    /// `Π_{B ∈ α_A} tanh(m_B β/2)` for that representation.
    pub spiderman_bound: f64,
}

/// The clipped-plaquette representation of a subset of a region, and the
/// cycle space it is defined up to.
pub struct PlusExpansion {
    pub beta: f64,
    pub space: CycleBasis,
    weights: Vec<f64>,
    uniform: bool,
}

impl PlusExpansion {
    pub fn new(model: Model, region: &Region, beta: f64) -> Result<PlusExpansion> {
        let space = cycle_space(model, region, FamilyMode::Clipped)?;
        let weights: Vec<f64> =
            space.family.plaquettes().iter().map(|p| (p.multiplicity as f64 * beta / 2.0).tanh()).collect();
        let uniform = space.family.plaquettes().iter().all(|p| p.multiplicity == 1);
        Ok(PlusExpansion { beta, space, weights, uniform })
    }

    /// Some `α` with vertex sum `A` inside the region.
    pub fn represent(&self, a: &[Site]) -> Result<ParitySet> {
        let region = &self.space.region;
        let mut target = FixedBitSet::with_capacity(region.len());
        for &s in a {
            target.toggle(region.index_of(s).ok_or(Error::SiteOutsideRegion(s))?);
        }
        let columns: Vec<FixedBitSet> = self
            .space
            .family
            .plaquettes()
            .iter()
            .map(|p| {
                let mut c = FixedBitSet::with_capacity(region.len());
                for &s in &p.sites {
                    c.toggle(region.index_of(s).expect("clipped plaquettes lie in the region"));
                }
                c
            })
            .collect();
        let span = Span::new(&columns, region.len());
        match span.solve(&target) {
            Some(coeffs) => Ok(ParitySet::from(coeffs)),
            None => {
                let residual = span.residual(&target).ones().map(|i| region.sites()[i]).collect();
                Err(Error::NotExpressible { residual })
            }
        }
    }

    fn weight(&self, alpha: &FixedBitSet) -> f64 {
        alpha.ones().map(|i| self.weights[i]).product()
    }

    /// `Σ_{γ ∈ K⁺} w(γ Δ shift)`, and the smallest weight-maximizing
    /// representative of the coset.
    fn coset_sum(&self, shift: &ParitySet) -> Result<(f64, usize, f64)> {
        if self.uniform {
            let t = self.weights.first().copied().unwrap_or(0.0);
            let h = self.space.size_histogram(Some(shift))?;
            let sum = h.iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, &c)| c as f64 * t.powi(k as i32)).sum();
            let n = h.iter().position(|&c| c > 0).unwrap_or(0);
            return Ok((sum, n, t.powi(n as i32)));
        }
        let s = shift.bits().clone();
        self.space.fold(
            || (0.0, usize::MAX, 0.0),
            |acc, gamma| {
                let mut x = gamma.clone();
                x.symmetric_difference_with(&s);
                let w = self.weight(&x);
                acc.0 += w;
                let n = x.count_ones(..);
                if n < acc.1 || (n == acc.1 && w > acc.2) {
                    acc.1 = n;
                    acc.2 = w;
                }
            },
            |a, b| {
                let (n, w) = if b.1 < a.1 || (b.1 == a.1 && b.2 > a.2) { (b.1, b.2) } else { (a.1, a.2) };
                (a.0 + b.0, n, w)
            },
        )
    }

    /// `Σ_γ w(γ Δ α_A) / Σ_γ w(γ)`.
    pub fn multispin(&self, a: &[Site]) -> Result<PlusMultispin> {
        let alpha = self.represent(a)?;
        let (num, n, bound) = self.coset_sum(&alpha)?;
        let (den, _, _) = self.coset_sum(&ParitySet::empty(self.space.universe()))?;
        Ok(PlusMultispin { value: num / den, method: PlusMethod::CycleExpansion, n, spiderman_bound: bound })
    }
}

/// `μ^{β,+}_Λ([σ]_A)` by either method; both report the lower bound.
pub fn multispin_plus_finite(
    model: Model,
    region: &Region,
    a: &[Site],
    beta: f64,
    method: PlusMethod,
) -> Result<PlusMultispin> {
    let exp = PlusExpansion::new(model, region, beta)?;
    let mut r = exp.multispin(a)?;
    if method == PlusMethod::Enumeration {
        let spec = GibbsSpec::meeting(model, region.clone(), beta, BoundaryCondition::AllPlus);
        r.value = multispin(&spec, a)?;
        r.method = PlusMethod::Enumeration;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let m = multispin_infinite(Model::Spm, &Model::Spm.plaquette_sites(Site::new(3, 1)), 1.3).unwrap();
        assert!((m.value - 0.65f64.tanh()).abs() < 1e-15);
        let sq = [Site::new(0, 0), Site::new(2, 0), Site::new(0, 2), Site::new(2, 2)];
        let m = multispin_infinite(Model::Spm, &sq, 2.0).unwrap();
        assert_eq!(m.n, Some(4));
        assert!((m.value - 1f64.tanh().powi(4)).abs() < 1e-15);
        let m = multispin_infinite(Model::Tpm, &[Site::ORIGIN], 2.0).unwrap();
        assert_eq!(m.value, 0.0);
        assert!(!m.equivalent);
    }

    #[test]
    fn expansion_matches_enumeration() {
        let region = Region::centered(1);
        for beta in [0.5, 2.0] {
            for a in [vec![Site::ORIGIN], Model::Spm.plaquette_sites(Site::new(-1, -1)), vec![Site::new(1, 1), Site::new(-1, 0)]] {
                let e = multispin_plus_finite(Model::Spm, &region, &a, beta, PlusMethod::CycleExpansion).unwrap();
                let b = multispin_plus_finite(Model::Spm, &region, &a, beta, PlusMethod::Enumeration).unwrap();
                assert!((e.value - b.value).abs() < 1e-10, "{a:?} {beta}: {} vs {}", e.value, b.value);
                assert!(e.value >= e.spiderman_bound * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn zero_beta_is_indicator() {
        let region = Region::centered(1);
        let r = multispin_plus_finite(Model::Spm, &region, &[], 0.0, PlusMethod::CycleExpansion).unwrap();
        assert_eq!(r.value, 1.0);
        let r = multispin_plus_finite(Model::Spm, &region, &[Site::ORIGIN], 0.0, PlusMethod::CycleExpansion).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn outside_site_rejected() {
        let region = Region::centered(1);
        let err = multispin_plus_finite(Model::Spm, &region, &[Site::new(5, 5)], 1.0, PlusMethod::CycleExpansion);
        assert_eq!(err.unwrap_err(), Error::SiteOutsideRegion(Site::new(5, 5)));
    }
}
