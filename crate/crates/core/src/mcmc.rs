//! Single-spin-flip samplers used as statistical oracles.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.3) seeded with
//! `seed_from_u64(seed)` and `set_stream(chain)`, so distinct chains of one
//! seed never share a keystream and equal specs give identical trajectories.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{FamilyMode, Model, Region, RegionDesc, Site};
use crate::gibbs::{BoundaryCondition, GibbsSpec};

/// Above this β the samplers relax slowly and results need long runs.
pub const LOW_TEMPERATURE_BETA: f64 = 2.5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    #[default]
    HeatBath,
    Metropolis,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scan {
    #[default]
    Random,
    Sequential,
}

fn default_batches() -> usize {
    20
}

fn default_thin() -> u64 {
    1
}

/// A fully specified Markov chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub model: Model,
    pub region: RegionDesc,
    /// Exterior spins; ignored on a torus. `free` keeps only inside plaquettes.
    pub bc: BoundaryCondition,
    /// Periodic wrap inside the bounding box of the region (which must be a
    /// full box).
    #[serde(default)]
    pub torus: bool,
    pub beta: f64,
    #[serde(default)]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub scan: Scan,
    pub seed: u64,
    #[serde(default)]
    pub chain: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

impl ChainSpec {
    pub fn new(model: Model, region: RegionDesc, bc: BoundaryCondition, beta: f64, seed: u64) -> Self {
        ChainSpec {
            model,
            region,
            bc,
            torus: false,
            beta,
            dynamics: Dynamics::HeatBath,
            scan: Scan::Random,
            seed,
            chain: 0,
            sweeps: 10_000,
            burn_in: 1_000,
            thin: 1,
            batches: default_batches(),
        }
    }

    pub fn torus(model: Model, w: u32, h: u32, beta: f64, seed: u64) -> Self {
        let mut s = Self::new(
            model,
            RegionDesc::Box { corner: Site::ORIGIN, w, h },
            BoundaryCondition::Free,
            beta,
            seed,
        );
        s.torus = true;
        s
    }

    pub fn with_sweeps(mut self, sweeps: u64, burn_in: u64) -> Self {
        self.sweeps = sweeps;
        self.burn_in = burn_in;
        self
    }

    pub fn with_chain(mut self, chain: u64) -> Self {
        self.chain = chain;
        self
    }

    pub fn with_dynamics(mut self, d: Dynamics) -> Self {
        self.dynamics = d;
        self
    }

    pub fn with_scan(mut self, s: Scan) -> Self {
        self.scan = s;
        self
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.beta > LOW_TEMPERATURE_BETA {
            w.push(format!(
                "beta = {} exceeds {LOW_TEMPERATURE_BETA}: relaxation times grow like e^beta, estimates may be biased",
                self.beta
            ));
        }
        w
    }
}

/// Quantities recorded after each measured sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `[σ]_A`.
    Multispin { sites: Vec<Site> },
    /// Fraction of the listed plaquettes (by base) carrying a defect.
    DefectDensity { bases: Vec<Site> },
    /// Mean spin over the region.
    Magnetization,
}

/// Mean with a batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// Batch-means estimate; trailing samples that do not fill a batch are dropped.
pub fn batch_means(series: &[f64], batches: usize) -> Estimate {
    let batches = batches.max(2).min(series.len().max(1));
    let size = series.len() / batches;
    if size == 0 {
        let mean = series.iter().sum::<f64>() / series.len().max(1) as f64;
        return Estimate { mean, std_error: f64::INFINITY, samples: series.len() };
    }
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Estimate { mean, std_error: (var / b).sqrt(), samples: size * means.len() }
}

#[derive(Clone, Debug)]
struct Plaq {
    sites: Vec<u32>,
    sign: i8,
    weight: i32,
}

/// Mutable chain state.
#[derive(Clone, Debug)]
pub struct Chain {
    region: Region,
    beta: f64,
    dynamics: Dynamics,
    scan: Scan,
    spins: Vec<i8>,
    plaqs: Vec<Plaq>,
    bases: Vec<Site>,
    values: Vec<i8>,
    site_plaqs: Vec<Vec<u32>>,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl Chain {
    /// Starts from the all-plus configuration.
    pub fn new(spec: &ChainSpec) -> Result<Chain> {
        if !(spec.beta >= 0.0) {
            return Err(invalid(format!("beta must be nonnegative, got {}", spec.beta)));
        }
        let region = spec.region.build();
        let (plaqs, bases) = if spec.torus { torus_plaquettes(spec.model, &region)? } else { box_plaquettes(spec, &region)? };
        let mut site_plaqs = vec![Vec::new(); region.len()];
        for (p, pl) in plaqs.iter().enumerate() {
            for &s in &pl.sites {
                site_plaqs[s as usize].push(p as u32);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.chain);
        let mut chain = Chain {
            spins: vec![1; region.len()],
            region,
            beta: spec.beta,
            dynamics: spec.dynamics,
            scan: spec.scan,
            values: vec![0; plaqs.len()],
            plaqs,
            bases,
            site_plaqs,
            rng,
            cursor: 0,
        };
        chain.refresh();
        Ok(chain)
    }

    fn refresh(&mut self) {
        for (p, pl) in self.plaqs.iter().enumerate() {
            self.values[p] = pl.sign * pl.sites.iter().map(|&s| self.spins[s as usize]).product::<i8>();
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn set_spins(&mut self, spins: &[i8]) {
        assert_eq!(spins.len(), self.spins.len());
        self.spins.copy_from_slice(spins);
        self.refresh();
    }

    /// `Σ_{B ∋ i} m_B [σ]_B`.
    pub fn local_field(&self, i: usize) -> i32 {
        self.site_plaqs[i].iter().map(|&p| self.plaqs[p as usize].weight * self.values[p as usize] as i32).sum()
    }

    /// Probability that an update at `i` flips the spin.
    pub fn flip_probability(&self, i: usize) -> f64 {
        // Flipping changes the energy by -2h, the weight by exp(-βh).
        let h = self.local_field(i) as f64;
        match self.dynamics {
            Dynamics::HeatBath => 1.0 / (1.0 + (self.beta * h).exp()),
            Dynamics::Metropolis => (-self.beta * h).exp().min(1.0),
        }
    }

    fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
        for &p in &self.site_plaqs[i] {
            self.values[p as usize] = -self.values[p as usize];
        }
    }

    /// One single-site update; returns the site visited and whether it flipped.
    pub fn step(&mut self) -> (usize, bool) {
        let n = self.spins.len();
        let i = match self.scan {
            Scan::Random => self.rng.gen_range(0..n),
            Scan::Sequential => {
                let i = self.cursor;
                self.cursor = (self.cursor + 1) % n;
                i
            }
        };
        let p = self.flip_probability(i);
        let u: f64 = self.rng.gen();
        let flipped = u < p;
        if flipped {
            self.flip(i);
        }
        (i, flipped)
    }

    /// `|Λ|` updates.
    pub fn sweep(&mut self) {
        for _ in 0..self.spins.len() {
            self.step();
        }
    }

    /// Bit pattern of the spins at the given region indices (bit set for −1).
    pub fn pattern(&self, idx: &[usize]) -> u64 {
        idx.iter().enumerate().fold(0u64, |acc, (j, &i)| acc | ((self.spins[i] < 0) as u64) << j)
    }

    fn plaquette_index(&self, base: Site) -> Option<usize> {
        self.bases.iter().position(|&b| b == base)
    }
}

fn box_plaquettes(spec: &ChainSpec, region: &Region) -> Result<(Vec<Plaq>, Vec<Site>)> {
    let mode = if spec.bc.is_free() { FamilyMode::Inside } else { FamilyMode::Meeting };
    let gspec = GibbsSpec::new(spec.model, region.clone(), spec.beta, spec.bc.clone(), mode);
    let plaquettes = gspec.active_plaquettes()?;
    let support = gspec.exterior_support()?;
    let ext = if support.is_empty() { Vec::new() } else { spec.bc.resolve(&support)? };
    let mut out = Vec::with_capacity(plaquettes.len());
    let mut bases = Vec::with_capacity(plaquettes.len());
    for p in plaquettes {
        let mut sites = Vec::new();
        let mut sign = 1i8;
        for s in &p.sites {
            match region.index_of(*s) {
                Some(i) => sites.push(i as u32),
                None => sign *= ext[support.binary_search(s).expect("support covers plaquettes")],
            }
        }
        bases.push(p.base);
        out.push(Plaq { sites, sign, weight: p.multiplicity as i32 });
    }
    Ok((out, bases))
}

fn torus_plaquettes(model: Model, region: &Region) -> Result<(Vec<Plaq>, Vec<Site>)> {
    let (lo, hi) = region.bounding_box().ok_or(crate::error::Error::EmptyRegion)?;
    let w = hi.x1 - lo.x1 + 1;
    let h = hi.x2 - lo.x2 + 1;
    if region.len() != (w * h) as usize {
        return Err(invalid("a torus needs a full rectangular box"));
    }
    let mut out = Vec::new();
    let mut bases = Vec::new();
    for &b in region.sites() {
        let mut sites: Vec<u32> = model
            .plaquette_sites(b)
            .into_iter()
            .map(|s| {
                let wrapped = Site::new(lo.x1 + (s.x1 - lo.x1).rem_euclid(w), lo.x2 + (s.x2 - lo.x2).rem_euclid(h));
                region.index_of(wrapped).expect("wrapped site in box") as u32
            })
            .collect();
        sites.sort_unstable();
        let before = sites.len();
        sites.dedup();
        if sites.len() != before {
            return Err(invalid("torus too small for the plaquette"));
        }
        bases.push(b);
        out.push(Plaq { sites, sign: 1, weight: 1 });
    }
    Ok((out, bases))
}

/// Per-observable series and batch-means summaries.
#[derive(Clone, Debug, Serialize)]
pub struct ChainOutput {
    pub series: Vec<Vec<f64>>,
    pub estimates: Vec<Estimate>,
    pub warnings: Vec<String>,
}

enum Compiled {
    Multispin(Vec<usize>),
    Defects(Vec<usize>),
    Magnetization,
}

fn compile(chain: &Chain, obs: &[Observable]) -> Result<Vec<Compiled>> {
    obs.iter()
        .map(|o| match o {
            Observable::Multispin { sites } => sites
                .iter()
                .map(|&s| chain.region.index_of(s).ok_or(crate::error::Error::SiteOutsideRegion(s)))
                .collect::<Result<Vec<_>>>()
                .map(Compiled::Multispin),
            Observable::DefectDensity { bases } => {
                if bases.is_empty() {
                    return Err(invalid("defect density over an empty plaquette list"));
                }
                bases
                    .iter()
                    .map(|&b| chain.plaquette_index(b).ok_or_else(|| invalid(format!("plaquette {b} is not active"))))
                    .collect::<Result<Vec<_>>>()
                    .map(Compiled::Defects)
            }
            Observable::Magnetization => Ok(Compiled::Magnetization),
        })
        .collect()
}

impl Compiled {
    fn measure(&self, chain: &Chain) -> f64 {
        match self {
            Compiled::Multispin(idx) => idx.iter().map(|&i| chain.spins[i]).product::<i8>() as f64,
            Compiled::Defects(idx) => {
                idx.iter().filter(|&&p| chain.values[p] < 0).count() as f64 / idx.len() as f64
            }
            Compiled::Magnetization => {
                chain.spins.iter().map(|&s| s as f64).sum::<f64>() / chain.spins.len() as f64
            }
        }
    }
}

/// Runs the chain and records every `thin`-th sweep after burn-in.
pub fn run_chain(spec: &ChainSpec, observables: &[Observable]) -> Result<ChainOutput> {
    let mut chain = Chain::new(spec)?;
    let compiled = compile(&chain, observables)?;
    for _ in 0..spec.burn_in {
        chain.sweep();
    }
    let thin = spec.thin.max(1);
    let mut series = vec![Vec::with_capacity((spec.sweeps / thin) as usize); observables.len()];
    for t in 0..spec.sweeps {
        chain.sweep();
        if (t + 1) % thin == 0 {
            for (k, c) in compiled.iter().enumerate() {
                series[k].push(c.measure(&chain));
            }
        }
    }
    let estimates = series.iter().map(|s| batch_means(s, spec.batches)).collect();
    Ok(ChainOutput { series, estimates, warnings: spec.warnings() })
}

/// `μ([σ]_A)` estimated along the chain.
pub fn estimate_multispin(spec: &ChainSpec, a: &[Site]) -> Result<Estimate> {
    Ok(run_chain(spec, &[Observable::Multispin { sites: a.to_vec() }])?.estimates[0])
}

/// Runs independent copies of a chain with ids `0..count` and pools their
/// batch means.
pub fn estimate_pooled(spec: &ChainSpec, obs: &Observable, chains: u64) -> Result<Estimate> {
    let outs: Vec<ChainOutput> = (0..chains)
        .into_par_iter()
        .map(|c| run_chain(&spec.clone().with_chain(c), std::slice::from_ref(obs)))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = outs.iter().map(|o| o.estimates[0].mean).collect();
    let samples = outs.iter().map(|o| o.estimates[0].samples).sum();
    let mut e = batch_means(&means, means.len());
    e.samples = samples;
    Ok(e)
}

/// Histograms of the spin pattern on `sites`, one per batch.
pub fn pattern_histograms(spec: &ChainSpec, sites: &[Site]) -> Result<Vec<Vec<u64>>> {
    if sites.len() > 20 {
        return Err(invalid("at most 20 sites in a sampled pattern"));
    }
    let mut chain = Chain::new(spec)?;
    let idx: Vec<usize> = sites
        .iter()
        .map(|&s| chain.region.index_of(s).ok_or(crate::error::Error::SiteOutsideRegion(s)))
        .collect::<Result<_>>()?;
    for _ in 0..spec.burn_in {
        chain.sweep();
    }
    let batches = spec.batches.max(2);
    let per = (spec.sweeps / batches as u64).max(1);
    let mut out = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut h = vec![0u64; 1 << idx.len()];
        for _ in 0..per {
            chain.sweep();
            h[chain.pattern(&idx) as usize] += 1;
        }
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let spec = ChainSpec::new(Model::Spm, RegionDesc::Square { ell: 4 }, BoundaryCondition::AllPlus, 1.0, 9)
            .with_sweeps(200, 10);
        let obs = [Observable::Magnetization];
        let a = run_chain(&spec, &obs).unwrap();
        let b = run_chain(&spec, &obs).unwrap();
        assert_eq!(a.series, b.series);
        let c = run_chain(&spec.clone().with_chain(1), &obs).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let spec = ChainSpec::torus(Model::Spm, 8, 8, 0.0, 3).with_sweeps(4000, 10);
        let bases: Vec<Site> = Region::rect(Site::ORIGIN, 8, 8).sites().to_vec();
        let out = run_chain(&spec, &[Observable::DefectDensity { bases }]).unwrap();
        assert!(out.estimates[0].within(0.5, 3.0), "{:?}", out.estimates[0]);
    }

    #[test]
    fn detailed_balance_kernel() {
        // Heat-bath random scan on a 2x2 box: empirical one-step frequencies
        // from each state match the kernel (1/n) p_flip(i, σ).
        let spec = ChainSpec::new(Model::Spm, RegionDesc::Square { ell: 2 }, BoundaryCondition::Checkerboard, 0.8, 11);
        let mut chain = Chain::new(&spec).unwrap();
        let n = 4usize;
        let mut visits = vec![0u64; 16];
        let mut flips = vec![0u64; 16 * n];
        let idx: Vec<usize> = (0..n).collect();
        let mut probs = vec![0.0; 16 * n];
        for c in 0..16u64 {
            let s: Vec<i8> = (0..n).map(|i| if c >> i & 1 == 1 { -1 } else { 1 }).collect();
            chain.set_spins(&s);
            for i in 0..n {
                probs[c as usize * n + i] = chain.flip_probability(i) / n as f64;
            }
        }
        chain.set_spins(&[1; 4]);
        for _ in 0..1_000_000 {
            let c = chain.pattern(&idx) as usize;
            visits[c] += 1;
            let (i, flipped) = chain.step();
            if flipped {
                flips[c * n + i] += 1;
            }
        }
        for c in 0..16 {
            for i in 0..n {
                let p = probs[c * n + i];
                let m = visits[c] as f64;
                let sd = (m * p * (1.0 - p)).sqrt().max(1e-9);
                assert!((flips[c * n + i] as f64 - m * p).abs() <= 3.0 * sd + 1.0, "state {c} site {i}");
            }
        }
    }

    #[test]
    fn batch_means_constant() {
        let e = batch_means(&[2.0; 100], 10);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
    }
}
