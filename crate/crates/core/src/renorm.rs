//! Exact decimation: the free-boundary measure restricted to a sublattice is
//! again a plaquette model at a renormalized inverse temperature.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Model, Region, Site};
use crate::gibbs::{marginal, GibbsSpec};
use crate::numeric::ln_tanh;

/// Probability of a defect, `q(β) = 1/(1+e^β)`.
pub fn q_of_beta(beta: f64) -> f64 {
    (-beta).exp() / (1.0 + (-beta).exp())
}

/// Inverse of [`q_of_beta`] on `(0, 1/2]`.
pub fn beta_of_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(invalid(format!("q = {q} outside (0, 1/2]")));
    }
    Ok((-q).ln_1p() - q.ln())
}

/// `φ(q, k) = 1/2 − (1−2q)^k / 2`.
pub fn phi_q_k(q: f64, k: f64) -> f64 {
    0.5 - 0.5 * (1.0 - 2.0 * q).powf(k)
}

/// A decimation step and its exponent `k`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RenormSpec {
    pub model: Model,
    pub ell: u64,
    pub k: u64,
}

impl RenormSpec {
    /// `k = ℓ²` (SPM) or `k = 3^n` for `ℓ = 2^n` (TPM).
    pub fn new(model: Model, ell: u64) -> Result<RenormSpec> {
        if ell == 0 {
            return Err(invalid("ell must be positive"));
        }
        let k = match model {
            Model::Spm => ell.checked_mul(ell).ok_or_else(|| invalid("ell too large"))?,
            Model::Tpm => {
                if !ell.is_power_of_two() {
                    return Err(invalid(format!("tpm decimation needs a power of two, got {ell}")));
                }
                3u64.checked_pow(ell.trailing_zeros()).ok_or_else(|| invalid("ell too large"))?
            }
            Model::Rect { .. } => return Err(Error::Unsupported("decimation for spm and tpm only".into())),
        };
        Ok(RenormSpec { model, ell, k })
    }

    /// Exponent for a real `ℓ ≥ 1`: `ℓ²` or `ℓ^{ln 3/ln 2}`.
    pub fn real_exponent(model: Model, ell: f64) -> f64 {
        match model {
            Model::Tpm => ell.powf(3f64.ln() / 2f64.ln()),
            _ => ell * ell,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaPrimeFlag {
    Exact,
    /// `tanh(β/2)^k` below `1e-300`: reported as `2 tanh(β/2)^k`.
    Linearized,
    /// `tanh(β/2)^k` underflows; `β' = 0`.
    Underflow,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct BetaPrime {
    pub value: f64,
    pub flag: BetaPrimeFlag,
}

/// `β' = ln((1 + T)/(1 − T))`, `T = tanh(β/2)^k`, evaluated from `ln T`.
pub fn beta_prime_k(beta: f64, k: f64) -> Result<BetaPrime> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    let ln_t = k * ln_tanh(beta / 2.0);
    let t = ln_t.exp();
    if t == 0.0 {
        return Ok(BetaPrime { value: 0.0, flag: BetaPrimeFlag::Underflow });
    }
    if t < 1e-300 {
        return Ok(BetaPrime { value: 2.0 * t, flag: BetaPrimeFlag::Linearized });
    }
    let value = t.ln_1p() - (-ln_t.exp_m1()).ln();
    Ok(BetaPrime { value, flag: BetaPrimeFlag::Exact })
}

pub fn beta_prime(beta: f64, spec: &RenormSpec) -> Result<BetaPrime> {
    beta_prime_k(beta, spec.k as f64)
}

/// `[η]_{ℓB* + x}`: product of the coarse spins at the corners of the scaled
/// plaquette.
pub fn renormalized_plaquette<F>(model: Model, ell: i32, eta: F, x: Site) -> Result<i8>
where
    F: Fn(Site) -> Option<i8>,
{
    let mut p = 1;
    for s in model.fundamental() {
        let y = x + s.scale(ell);
        p *= eta(y).ok_or(Error::MissingBoundarySpin(y))?;
    }
    Ok(p)
}

/// A decimation region: `Λ_{ℓ,N} = {0..ℓN}²` (SPM) or the triangle `T_{n,N}`
/// with vertices `0`, `2^{n+N} e2`, `2^{n+N}(e1+e2)` (TPM).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecimationRegion {
    pub model: Model,
    /// Decimation step `ℓ` (a power of two for the TPM).
    pub ell: u32,
    pub big_n: u32,
}

impl DecimationRegion {
    pub fn spm(ell: u32, big_n: u32) -> Result<Self> {
        if ell == 0 || big_n == 0 {
            return Err(invalid("ell and N must be positive"));
        }
        Ok(DecimationRegion { model: Model::Spm, ell, big_n })
    }

    /// `ℓ = 2^n`.
    pub fn tpm(n: u32, big_n: u32) -> Result<Self> {
        if big_n == 0 || n > 15 {
            return Err(invalid("need N >= 1 and n <= 15"));
        }
        Ok(DecimationRegion { model: Model::Tpm, ell: 1 << n, big_n })
    }

    fn n(&self) -> u32 {
        self.ell.trailing_zeros()
    }

    pub fn fine(&self) -> Region {
        match self.model {
            Model::Tpm => Region::decimation_triangle(self.n(), self.big_n),
            _ => Region::decimation_box(self.ell, self.big_n),
        }
    }

    /// The unit-step region the decimated spins live on.
    pub fn coarse(&self) -> Region {
        match self.model {
            Model::Tpm => Region::decimation_triangle(0, self.big_n),
            _ => Region::decimation_box(1, self.big_n),
        }
    }

    /// Boundary sites drawn uniformly: South and West sides (SPM), West side (TPM).
    pub fn boundary(&self) -> Vec<Site> {
        let fine = self.fine();
        let mut v: Vec<Site> = fine
            .sites()
            .iter()
            .copied()
            .filter(|s| match self.model {
                Model::Tpm => s.x1 == 0,
                _ => s.x1 == 0 || s.x2 == 0,
            })
            .collect();
        v.sort();
        v
    }

    /// Bases of the plaquettes inside the fine region, in sweep order.
    pub fn plaquette_bases(&self) -> Vec<Site> {
        let fine = self.fine();
        let mut v: Vec<Site> = fine
            .sites()
            .iter()
            .copied()
            .filter(|&b| self.model.plaquette_sites(b).iter().all(|&s| fine.contains(s)))
            .collect();
        match self.model {
            Model::Tpm => v.sort_by_key(|s| (s.x1, s.x2)),
            _ => v.sort(),
        }
        v
    }

    /// The spin configuration with the given boundary spins and plaquette
    /// variables (both in the orders of [`Self::boundary`] and
    /// [`Self::plaquette_bases`]), indexed like the fine region.
    pub fn reconstruct(&self, boundary: &[i8], plaquettes: &[i8]) -> Result<Vec<i8>> {
        let fine = self.fine();
        let bsites = self.boundary();
        let bases = self.plaquette_bases();
        if boundary.len() != bsites.len() || plaquettes.len() != bases.len() {
            return Err(invalid("boundary or plaquette vector has the wrong length"));
        }
        let mut spins = vec![0i8; fine.len()];
        for (s, &v) in bsites.iter().zip(boundary) {
            spins[fine.index_of(*s).expect("boundary in region")] = v;
        }
        // Each plaquette fixes its one spin not yet known: the upper-right one.
        let corner = Site::new(1, 1);
        for (b, &p) in bases.iter().zip(plaquettes) {
            let mut prod = p;
            let mut target = None;
            for s in self.model.plaquette_sites(*b) {
                let i = fine.index_of(s).expect("inside plaquette");
                if s == *b + corner {
                    target = Some(i);
                } else {
                    debug_assert_ne!(spins[i], 0, "sweep order leaves a spin undetermined");
                    prod *= spins[i];
                }
            }
            spins[target.expect("corner site")] = prod;
        }
        Ok(spins)
    }

    /// Plaquette variables of a configuration of the fine region.
    pub fn plaquette_values(&self, spins: &[i8]) -> Vec<i8> {
        let fine = self.fine();
        self.plaquette_bases()
            .iter()
            .map(|b| self.model.plaquette_sites(*b).iter().map(|&s| spins[fine.index_of(s).unwrap()]).product())
            .collect()
    }
}

/// Samples the free-boundary measure as uniform boundary spins plus
/// independent plaquette variables with defect probability `q(β)`.
pub struct FreeSampler {
    pub region: DecimationRegion,
    pub beta: f64,
    rng: ChaCha8Rng,
}

impl FreeSampler {
    pub fn new(region: DecimationRegion, beta: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        FreeSampler { region, beta, rng }
    }

    pub fn sample(&mut self) -> Vec<i8> {
        let q = q_of_beta(self.beta);
        let nb = self.region.boundary().len();
        let np = self.region.plaquette_bases().len();
        let boundary: Vec<i8> = (0..nb).map(|_| if self.rng.gen::<bool>() { 1 } else { -1 }).collect();
        let plaq: Vec<i8> = (0..np).map(|_| if self.rng.gen::<f64>() < q { -1 } else { 1 }).collect();
        let spins = self.region.reconstruct(&boundary, &plaq).expect("consistent lengths");
        debug_assert_eq!(self.region.plaquette_values(&spins), plaq);
        spins
    }
}

/// State-by-state comparison of the decimated marginal with the coarse measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecimationReport {
    pub model: Model,
    pub ell: u32,
    pub big_n: u32,
    pub beta: f64,
    pub beta_prime: f64,
    pub states: usize,
    pub max_discrepancy: f64,
}

/// `μ^{β,f}(σ|_{ℓZ²} = η)` against `μ^{β',f}(η)` on the unit-step region.
pub fn decimation_check(region: &DecimationRegion, beta: f64) -> Result<DecimationReport> {
    let coarse = region.coarse();
    let fine_sites: Vec<Site> = coarse.sites().iter().map(|s| s.scale(region.ell as i32)).collect();
    let fine_spec = GibbsSpec::free(region.model, region.fine(), beta);
    let p = marginal(&fine_spec, &fine_sites)?;
    let spec = RenormSpec::new(region.model, region.ell as u64)?;
    let bp = if beta == 0.0 { 0.0 } else { beta_prime(beta, &spec)?.value };
    let coarse_spec = GibbsSpec::free(region.model, coarse.clone(), bp);
    let q = marginal(&coarse_spec, coarse.sites())?;
    let max = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(DecimationReport {
        model: region.model,
        ell: region.ell,
        big_n: region.big_n,
        beta,
        beta_prime: bp,
        states: p.len(),
        max_discrepancy: max,
    })
}

/// The TPM flip set `T_i` and its size parameter `ℓ_i = 2^{i+1} − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlipMap {
    pub level: u32,
    pub ell: i32,
    pub sites: Vec<Site>,
}

/// `T_0 = {(0,0), (1,0), (1,1)}` and
/// `T_{i+1} = T_i ∪ (T_i + (ℓ_i+1) e1) ∪ (T_i + (ℓ_i+1)(e1+e2))`.
pub fn tpm_flip_map(level: u32) -> Result<FlipMap> {
    if level > 12 {
        return Err(invalid("flip map level above 12"));
    }
    let mut sites = vec![Site::new(0, 0), Site::new(1, 0), Site::new(1, 1)];
    let mut ell = 1;
    for _ in 0..level {
        let d = ell + 1;
        let mut next = sites.clone();
        next.extend(sites.iter().map(|&s| s + Site::new(d, 0)));
        next.extend(sites.iter().map(|&s| s + Site::new(d, d)));
        sites = next;
        ell = 2 * ell + 1;
    }
    sites.sort();
    Ok(FlipMap { level, ell, sites })
}

impl FlipMap {
    /// Bases of the plaquettes whose variable changes when the spins of
    /// `T_i + anchor` are flipped.
    pub fn changed_plaquettes(&self, anchor: Site) -> Vec<Site> {
        let set: std::collections::HashSet<Site> = self.sites.iter().map(|&s| s + anchor).collect();
        let mut bases: Vec<Site> = set.iter().flat_map(|&x| Model::Tpm.plaquettes_through(x)).collect();
        bases.sort();
        bases.dedup();
        bases
            .into_iter()
            .filter(|&b| Model::Tpm.plaquette_sites(b).iter().filter(|s| set.contains(s)).count() % 2 == 1)
            .collect()
    }

    /// Flips the spins of `T_i + anchor` in a configuration of `region`.
    pub fn apply(&self, anchor: Site, region: &Region, spins: &mut [i8]) -> Result<()> {
        for &s in &self.sites {
            let x = s + anchor;
            let i = region.index_of(x).ok_or(Error::SiteOutsideRegion(x))?;
            spins[i] = -spins[i];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_round_trip() {
        assert_eq!(q_of_beta(0.0), 0.5);
        assert!((q_of_beta(2.0) - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-16);
        for b in [0.0, 0.3, 1.0, 5.0, 20.0, 40.0] {
            assert!((beta_of_q(q_of_beta(b)).unwrap() - b).abs() < 1e-12 * (1.0 + b));
        }
        assert!(beta_of_q(0.7).is_err());
        assert!(beta_of_q(0.0).is_err());
    }

    #[test]
    fn phi_values() {
        assert!((phi_q_k(0.1, 4.0) - 0.2952).abs() < 1e-15);
        assert!((phi_q_k(0.3, 1.0) - 0.3).abs() < 1e-15);
        assert_eq!(phi_q_k(0.5, 7.0), 0.5);
    }

    #[test]
    fn beta_prime_forms() {
        let s1 = RenormSpec::new(Model::Spm, 1).unwrap();
        assert!((beta_prime(2.5, &s1).unwrap().value - 2.5).abs() < 1e-12);
        let s2 = RenormSpec::new(Model::Spm, 2).unwrap();
        let t4 = 1.5f64.tanh().powi(4);
        assert!((beta_prime(3.0, &s2).unwrap().value - ((1.0 + t4) / (1.0 - t4)).ln()).abs() < 1e-12);
        let via_q = beta_of_q(phi_q_k(q_of_beta(1.7), 4.0)).unwrap();
        assert!((beta_prime(1.7, &s2).unwrap().value - via_q).abs() < 1e-12);
        assert!(RenormSpec::new(Model::Tpm, 6).is_err());
        assert_eq!(RenormSpec::new(Model::Tpm, 8).unwrap().k, 27);
        let tiny = beta_prime_k(0.01, 1e6).unwrap();
        assert_eq!(tiny.flag, BetaPrimeFlag::Underflow);
        // semigroup: decimating by a then b equals decimating by ab
        let b1 = beta_prime_k(beta_prime_k(4.0, 4.0).unwrap().value, 9.0).unwrap().value;
        assert!((b1 - beta_prime_k(4.0, 36.0).unwrap().value).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_round_trip() {
        for region in [DecimationRegion::spm(2, 2).unwrap(), DecimationRegion::tpm(1, 1).unwrap()] {
            let nb = region.boundary().len();
            let np = region.plaquette_bases().len();
            assert_eq!(nb + np, region.fine().len());
            let mut s = FreeSampler::new(region, 0.7, 4, 0);
            for _ in 0..50 {
                let spins = s.sample();
                let plaq = region.plaquette_values(&spins);
                let bidx: Vec<i8> =
                    region.boundary().iter().map(|b| spins[region.fine().index_of(*b).unwrap()]).collect();
                assert_eq!(region.reconstruct(&bidx, &plaq).unwrap(), spins);
            }
        }
    }

    #[test]
    fn flip_maps() {
        assert_eq!(tpm_flip_map(2).unwrap().sites.len(), 27);
        assert_eq!(tpm_flip_map(2).unwrap().ell, 7);
        for i in 0..=6 {
            let f = tpm_flip_map(i).unwrap();
            assert_eq!(f.sites.len(), 3usize.pow(i + 1));
            let l = f.ell;
            assert_eq!(f.changed_plaquettes(Site::ORIGIN), vec![Site::new(-1, -1), Site::new(l, -1), Site::new(l, l)]);
        }
    }

    #[test]
    fn scaled_plaquette() {
        let eta = |s: Site| if s == Site::new(2, 2) { Some(-1) } else { Some(1) };
        assert_eq!(renormalized_plaquette(Model::Spm, 2, eta, Site::ORIGIN).unwrap(), -1);
        assert_eq!(renormalized_plaquette(Model::Tpm, 2, |_| Some(1), Site::ORIGIN).unwrap(), 1);
        assert!(renormalized_plaquette(Model::Spm, 2, |_| None, Site::ORIGIN).is_err());
    }
}
