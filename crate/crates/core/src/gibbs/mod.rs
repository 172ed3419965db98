//! Exact finite-volume Gibbs measures by enumeration.
//!
//! The measure on a region `Λ` with boundary condition `τ` gives weight
//! `exp((β/2) Σ_B [σ]_B)` to each configuration, the sum running over the
//! active plaquette family.

mod boundary;
mod enumerate;
mod influence;

pub use boundary::{random_spin, BoundaryCondition, BoundaryFamily, Exactness, EXHAUSTIVE_LIMIT};
pub use enumerate::{Enumerator, LevelSums, Levels, MarginalLevels, Term};
pub use influence::{
    concentric_boxes, phi_ell, psi_family, sm_condition_value, total_variation, total_variation_marginal,
    MarginalMethod, PhiEstimate, PsiEstimate, TvEstimate,
};

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::geometry::{plaquette_family, FamilyMode, Model, Plaquette, Region, Site};

pub const DEFAULT_ENUM_CAP: usize = 28;
const HARD_ENUM_CAP: usize = 40;

/// Largest region enumerated exactly; `PLAQ_ENUM_CAP` overrides the default.
pub fn enumeration_cap() -> usize {
    std::env::var("PLAQ_ENUM_CAP")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|v| v.min(HARD_ENUM_CAP))
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Everything needed to define a finite-volume Gibbs measure.
#[derive(Clone, Debug)]
pub struct GibbsSpec {
    pub model: Model,
    pub region: Region,
    pub beta: f64,
    pub bc: BoundaryCondition,
    pub mode: FamilyMode,
    /// Optional family `P` with `B^f(Λ) ⊆ P ⊆ B(Λ)`, given by bases.
    pub restricted: Option<Vec<Site>>,
}

impl GibbsSpec {
    pub fn new(model: Model, region: Region, beta: f64, bc: BoundaryCondition, mode: FamilyMode) -> Self {
        GibbsSpec { model, region, beta, bc, mode, restricted: None }
    }

    /// Meeting family with the given boundary condition.
    pub fn meeting(model: Model, region: Region, beta: f64, bc: BoundaryCondition) -> Self {
        Self::new(model, region, beta, bc, FamilyMode::Meeting)
    }

    /// Plaquettes inside the region, free boundary.
    pub fn free(model: Model, region: Region, beta: f64) -> Self {
        Self::new(model, region, beta, BoundaryCondition::Free, FamilyMode::Inside)
    }

    pub fn with_restricted(mut self, bases: Vec<Site>) -> Self {
        self.restricted = Some(bases);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    /// The plaquettes entering the energy, after validation.
    pub fn active_plaquettes(&self) -> Result<Vec<Plaquette>> {
        if self.region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if !(self.beta >= 0.0) {
            return Err(invalid(format!("beta must be nonnegative, got {}", self.beta)));
        }
        match self.mode {
            FamilyMode::Inside => {
                if self.restricted.is_some() {
                    return Err(invalid("a restricted family requires mode=meeting"));
                }
                if !self.bc.is_free() {
                    return Err(invalid("mode=inside reads no boundary spins; use bc=free"));
                }
                Ok(plaquette_family(self.model, &self.region, FamilyMode::Inside)?.plaquettes().to_vec())
            }
            FamilyMode::Clipped => {
                if self.restricted.is_some() {
                    return Err(invalid("a restricted family requires mode=meeting"));
                }
                if self.bc != BoundaryCondition::AllPlus {
                    return Err(invalid("the clipped family encodes the plus boundary; use bc=all_plus"));
                }
                Ok(plaquette_family(self.model, &self.region, FamilyMode::Clipped)?.plaquettes().to_vec())
            }
            FamilyMode::Meeting => {
                let meeting = plaquette_family(self.model, &self.region, FamilyMode::Meeting)?;
                let active: Vec<Plaquette> = match &self.restricted {
                    None => {
                        if self.bc.is_free() {
                            return Err(Error::FreeNeedsInside);
                        }
                        meeting.plaquettes().to_vec()
                    }
                    Some(bases) => {
                        let chosen: HashSet<Site> = bases.iter().copied().collect();
                        for b in &chosen {
                            if meeting.index_of(*b).is_none() {
                                return Err(invalid(format!("restricted plaquette {b} does not meet the region")));
                            }
                        }
                        let inside = plaquette_family(self.model, &self.region, FamilyMode::Inside)?;
                        for p in inside.plaquettes() {
                            if !chosen.contains(&p.base) {
                                return Err(invalid(format!("restricted family misses inside plaquette {}", p.base)));
                            }
                        }
                        let active: Vec<Plaquette> =
                            meeting.plaquettes().iter().filter(|p| chosen.contains(&p.base)).cloned().collect();
                        if self.bc.is_free() && active.iter().any(|p| !p.sites.iter().all(|&s| self.region.contains(s))) {
                            return Err(Error::FreeNeedsInside);
                        }
                        active
                    }
                };
                Ok(active)
            }
        }
    }

    /// Exterior sites read by the active plaquettes.
    pub fn exterior_support(&self) -> Result<Vec<Site>> {
        let mut v: Vec<Site> = self
            .active_plaquettes()?
            .iter()
            .flat_map(|p| p.sites.iter().copied())
            .filter(|&s| !self.region.contains(s))
            .collect();
        v.sort();
        v.dedup();
        Ok(v)
    }

    /// Compiles the energy into enumeration terms.
    pub fn enumerator(&self) -> Result<Enumerator> {
        let cap = enumeration_cap();
        if self.region.len() > cap {
            return Err(Error::TooLargeForEnumeration { sites: self.region.len(), cap });
        }
        let plaquettes = self.active_plaquettes()?;
        let support = self.exterior_support()?;
        let spins = if support.is_empty() { Vec::new() } else { self.bc.resolve(&support)? };
        let terms = plaquettes
            .iter()
            .map(|p| {
                let mut mask = 0u64;
                let mut sign = 1i8;
                for &s in &p.sites {
                    match self.region.index_of(s) {
                        Some(i) => mask |= 1 << i,
                        None => {
                            let k = support.binary_search(&s).expect("support covers plaquettes");
                            sign *= spins[k];
                        }
                    }
                }
                Term { mask, sign, multiplicity: p.multiplicity as i32 }
            })
            .collect();
        Ok(Enumerator::new(self.region.len(), terms))
    }
}

/// Read-only view of one configuration of a region.
#[derive(Copy, Clone, Debug)]
pub struct Spins<'a> {
    region: &'a Region,
    config: u64,
}

impl<'a> Spins<'a> {
    pub fn new(region: &'a Region, config: u64) -> Self {
        Spins { region, config }
    }

    pub fn config(&self) -> u64 {
        self.config
    }

    pub fn at(&self, i: usize) -> i8 {
        if self.config >> i & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn get(&self, s: Site) -> Option<i8> {
        self.region.index_of(s).map(|i| self.at(i))
    }

    /// `[σ]_V` for `V` inside the region.
    pub fn product(&self, sites: &[Site]) -> Option<i8> {
        let mut p = 1;
        for &s in sites {
            p *= self.get(s)?;
        }
        Some(p)
    }
}

/// Bit mask of `sites` inside `region`; errors on a site outside it.
pub fn site_mask(region: &Region, sites: &[Site]) -> Result<u64> {
    let mut m = 0u64;
    for &s in sites {
        let i = region.index_of(s).ok_or(Error::SiteOutsideRegion(s))?;
        m ^= 1 << i;
    }
    Ok(m)
}

/// `ln Z`.
pub fn partition_function(spec: &GibbsSpec) -> Result<f64> {
    Ok(spec.enumerator()?.density_of_states().log_partition(spec.beta))
}

/// Expectations of several observables under one enumeration.
pub fn expectations<F>(spec: &GibbsSpec, k: usize, obs: F) -> Result<Vec<f64>>
where
    F: Fn(&Spins, &mut [f64]) + Sync,
{
    let e = spec.enumerator()?;
    let region = &spec.region;
    let sums = e.level_sums(k, |c, out| obs(&Spins::new(region, c), out));
    Ok(sums.expectations(spec.beta))
}

pub fn expectation<F>(spec: &GibbsSpec, f: F) -> Result<f64>
where
    F: Fn(&Spins) -> f64 + Sync,
{
    Ok(expectations(spec, 1, |s, out| out[0] = f(s))?[0])
}

/// `E(fg) - E(f)E(g)`.
pub fn covariance<F, G>(spec: &GibbsSpec, f: F, g: G) -> Result<f64>
where
    F: Fn(&Spins) -> f64 + Sync,
    G: Fn(&Spins) -> f64 + Sync,
{
    let v = expectations(spec, 3, |s, out| {
        let a = f(s);
        let b = g(s);
        out[0] = a;
        out[1] = b;
        out[2] = a * b;
    })?;
    Ok(v[2] - v[0] * v[1])
}

/// `μ([σ]_A)` for `A` inside the region.
pub fn multispin(spec: &GibbsSpec, a: &[Site]) -> Result<f64> {
    let mask = site_mask(&spec.region, a)?;
    expectation(spec, move |s| if (s.config() & mask).count_ones() & 1 == 1 { -1.0 } else { 1.0 })
}

/// Joint law of the spins at `sites`, indexed by the bit pattern with bit `j`
/// set when `σ_{sites[j]} = -1`.
pub fn marginal(spec: &GibbsSpec, sites: &[Site]) -> Result<Vec<f64>> {
    let idx: Vec<usize> = sites
        .iter()
        .map(|&s| spec.region.index_of(s).ok_or(Error::SiteOutsideRegion(s)))
        .collect::<Result<_>>()?;
    let e = spec.enumerator()?;
    let m = e.marginal_levels(1 << idx.len(), |c| {
        idx.iter().enumerate().fold(0usize, |acc, (j, &i)| acc | (((c >> i) & 1) as usize) << j)
    });
    Ok(m.probabilities(spec.beta))
}

/// `h_x` as a function of the interior configuration: the energy change of
/// flipping the exterior spin at `x`, `exp(-β Σ_{B ∋ x} [σ]_B)`, with every
/// plaquette through `x` included.
#[derive(Clone, Debug)]
pub struct HObservable {
    beta: f64,
    terms: Vec<(u64, i8)>,
}

impl HObservable {
    pub fn new(spec: &GibbsSpec, x: Site) -> Result<HObservable> {
        if spec.region.contains(x) {
            return Err(Error::SiteInsideRegion(x));
        }
        let bases = spec.model.plaquettes_through(x);
        let mut terms = Vec::new();
        let mut meets = false;
        for b in bases {
            let sites = spec.model.plaquette_sites(b);
            let exterior: Vec<Site> = sites.iter().copied().filter(|&s| !spec.region.contains(s)).collect();
            let ext = spec.bc.resolve(&exterior)?;
            let sign: i8 = ext.iter().product();
            let mut mask = 0u64;
            for s in &sites {
                if let Some(i) = spec.region.index_of(*s) {
                    mask |= 1 << i;
                    meets = true;
                }
            }
            terms.push((mask, sign));
        }
        if !meets {
            return Err(invalid(format!("no plaquette through {x} meets the region")));
        }
        Ok(HObservable { beta: spec.beta, terms })
    }

    pub fn eval(&self, config: u64) -> f64 {
        let s: i32 = self
            .terms
            .iter()
            .map(|&(m, sign)| if (config & m).count_ones() & 1 == 1 { -(sign as i32) } else { sign as i32 })
            .sum();
        (-self.beta * s as f64).exp()
    }
}

/// `h_x(σ)` for one configuration.
pub fn h_x(spec: &GibbsSpec, x: Site, spins: &Spins) -> Result<f64> {
    Ok(HObservable::new(spec, x)?.eval(spins.config()))
}

/// Largest violation over single spins `f = σ_y` of
/// `μ^{τ^x}(f) − μ^τ(f) = Cov^τ(h_x, f) / μ^τ(h_x)`, where `τ^x` flips the
/// boundary spin at `x`.
pub fn flip_identity_residual(spec: &GibbsSpec, x: Site) -> Result<f64> {
    let support = spec.exterior_support()?;
    let h = HObservable::new(spec, x)?;
    let flipped = spec.clone().with_bc(spec.bc.flipped_at(&support, x)?);
    let n = spec.region.len();
    // slots: σ_y for each y, h, h σ_y for each y
    let base = expectations(spec, 2 * n + 1, |s, out| {
        let hv = h.eval(s.config());
        out[n] = hv;
        for i in 0..n {
            let v = s.at(i) as f64;
            out[i] = v;
            out[n + 1 + i] = hv * v;
        }
    })?;
    let after = expectations(&flipped, n, |s, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = s.at(i) as f64;
        }
    })?;
    let mh = base[n];
    Ok((0..n)
        .map(|i| {
            let cov = base[n + 1 + i] - mh * base[i];
            ((after[i] - base[i]) - cov / mh).abs()
        })
        .fold(0.0, f64::max))
}
