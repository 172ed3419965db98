//! The acceptance suite: ten criteria, each a set of checks against
//! independent oracles at fixed tolerances.

use std::time::Instant;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::correlators::{multispin_infinite, multispin_plus_finite, PlusMethod};
use crate::cycles::{
    bottom_row_check, chiave_check, crimea_bound, friuli_sum_check, gamma_family, screening_ratio, spm_stripe_basis,
    tpm_pascal_basis,
};
use crate::error::Result;
use crate::geometry::{Model, Region, RegionDesc, Site};
use crate::gibbs::{flip_identity_residual, BoundaryCondition, BoundaryFamily, GibbsSpec};
use crate::lengths::{beta_grid, ordering_report, scaling_fit, LengthKind, OrderingConfig};
use crate::magnetization::{magnetization_brute_force, magnetization_plus_exact};
use crate::mcmc::{run_chain, ChainSpec, Observable};
use crate::renorm::{decimation_check, q_of_beta, DecimationRegion};
use crate::shadows::{a_of_z, a_of_z_direct, minimal_decomposition};

pub const CRITERIA: u8 = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `PASS [3] magnetization (12 checks, 0.41 s)`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({} checks, {} failed, {:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.checks.len(),
            self.failures().count(),
            self.seconds
        )
    }
}

/// Options shared by the criteria.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Shorter chains and smaller scans; every tolerance is unchanged.
    pub quick: bool,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, seed: 2024 }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }

    fn push(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { label: label.into(), passed, detail: detail.into() });
    }

    fn close(&mut self, label: impl Into<String>, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs();
        self.push(label, err <= tol, format!("got {got:e}, want {want:e}, |diff| {err:e} (tol {tol:e})"));
    }

    fn rel(&mut self, label: impl Into<String>, got: f64, want: f64, tol: f64) {
        let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        self.push(label, err <= tol, format!("got {got:e}, want {want:e}, rel diff {err:e} (tol {tol:e})"));
    }

    fn result<T>(&mut self, label: impl Into<String>, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(label, false, format!("error: {e}"));
                None
            }
        }
    }
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "multispin closed form",
        2 => "decimation identity",
        3 => "plus-boundary magnetization",
        4 => "cycle machinery",
        5 => "staircase exponential identity",
        6 => "pascal membership sets",
        7 => "plus-boundary cycle expansion",
        8 => "scaling slopes",
        9 => "monte carlo cross-validation",
        10 => "desk-scale ordering and flip identity",
        _ => "unknown",
    }
}

/// Runs one criterion; ids outside `1..=10` give a failed outcome.
pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionOutcome {
    let start = Instant::now();
    let mut c = Checks::new();
    match id {
        1 => multispin_closed_form(&mut c),
        2 => decimation(&mut c),
        3 => magnetization(&mut c),
        4 => cycle_machinery(&mut c, opts),
        5 => staircase(&mut c, opts),
        6 => pascal_sets(&mut c, opts),
        7 => plus_expansion(&mut c, opts),
        8 => slopes(&mut c),
        9 => monte_carlo(&mut c, opts),
        10 => ordering(&mut c, opts),
        _ => c.push("id", false, format!("no criterion {id}")),
    }
    let checks = c.0;
    CriterionOutcome {
        id,
        name: criterion_name(id),
        passed: !checks.is_empty() && checks.iter().all(|k| k.passed),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionOutcome> {
    (1..=CRITERIA).map(|id| run_criterion(id, opts)).collect()
}

/// Vertices of the 4-corner square of side `ell` (SPM) or of the triangle of
/// side `ell` (TPM), anchored at `at`.
pub fn extremal_set(model: Model, ell: i32, at: Site) -> Vec<Site> {
    let pts: Vec<Site> = match model {
        Model::Tpm => vec![Site::new(0, 0), Site::new(0, ell), Site::new(ell, ell)],
        _ => vec![Site::new(0, 0), Site::new(ell, 0), Site::new(0, ell), Site::new(ell, ell)],
    };
    pts.into_iter().map(|s| s + at).collect()
}

fn multispin_closed_form(c: &mut Checks) {
    let betas = [0.7, 2.0, 5.0];
    let cases = (1..=4)
        .map(|l| (Model::Spm, l, (l * l) as usize))
        .chain((0..=3).map(|k| (Model::Tpm, 1 << k, 3usize.pow(k as u32))));
    for (model, side, n) in cases {
        let a = extremal_set(model, side, Site::new(3, -2));
        let label = format!("{} side {side}", model.name());
        let Some(d) = c.result(&label, minimal_decomposition(model, &a)) else { continue };
        c.push(format!("{label}: n(A)"), d.size == n, format!("n(A) = {}, want {n}", d.size));
        for beta in betas {
            let Some(m) = c.result(&label, multispin_infinite(model, &a, beta)) else { continue };
            c.rel(format!("{label} beta {beta}: value"), m.value, (beta / 2.0).tanh().powi(n as i32), 1e-13);
        }
    }
}

fn decimation(c: &mut Checks) {
    let regions = [
        DecimationRegion::spm(2, 1),
        DecimationRegion::spm(2, 2),
        DecimationRegion::tpm(1, 1),
    ];
    for r in regions {
        let Some(r) = c.result("region", r) else { continue };
        for beta in [0.5, 1.0, 2.0] {
            let label = format!("{} ell {} N {} beta {beta}", r.model.name(), r.ell, r.big_n);
            if let Some(rep) = c.result(&label, decimation_check(&r, beta)) {
                c.push(
                    label,
                    rep.max_discrepancy <= 1e-10,
                    format!("beta' {:.12}, max discrepancy {:e} over {} states", rep.beta_prime, rep.max_discrepancy, rep.states),
                );
            }
        }
    }
}

fn magnetization(c: &mut Checks) {
    for beta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let closed = magnetization_plus_exact(1, beta);
        let brute = magnetization_brute_force(1, beta);
        if let (Some(a), Some(b)) = (c.result("closed form", closed), c.result("brute force", brute)) {
            c.close(format!("ell 1 beta {beta}"), a.value, b.value, 1e-10);
        }
    }
    for beta in [3.0f64, 4.0, 5.0] {
        let ell = (0.1 * beta.exp() / 2.0).round().max(1.0) as u64;
        if let Some(r) = c.result("positivity", magnetization_plus_exact(ell, beta)) {
            c.push(format!("beta {beta} ell {ell} positivity"), r.value >= 0.2, format!("value {}", r.value));
        }
    }
}

fn cycle_machinery(c: &mut Checks, opts: &VerifyOptions) {
    let n_max = 10;
    let mut rank_ok = true;
    let mut trips = 0u64;
    let mut bad = 0u64;
    for n in 0..=n_max {
        let Some(b) = c.result("pascal basis", tpm_pascal_basis(n)) else { return };
        rank_ok &= b.rank() == n as usize + 2;
        let k = b.len();
        for bits in 0u64..1 << k {
            let mut coeffs = FixedBitSet::with_capacity(k);
            for i in 0..k {
                coeffs.set(i, bits >> i & 1 == 1);
            }
            let alpha = b.combine(&coeffs);
            trips += 1;
            if b.decompose(&alpha).map_or(true, |back| back != coeffs) {
                bad += 1;
            }
        }
    }
    c.push("pascal rank n+2, n <= 10", rank_ok, "");
    c.push("pascal round trip, n <= 10", bad == 0, format!("{trips} vectors, {bad} mismatches"));

    for t in [0.1, 0.5, 0.9] {
        for n in 1..=n_max {
            if let Some(b) = c.result("stripes", spm_stripe_basis(n)) {
                if let Some(s) = c.result("spm sum", b.weighted_cycle_sum(t, true)) {
                    let rhs = crimea_bound(n, t);
                    c.push(format!("spm n {n} t {t} cycle sum"), s <= rhs, format!("{s:e} <= {rhs:e}"));
                }
            }
        }
        for n in 0..=12 {
            if let Some(b) = c.result("pascal", tpm_pascal_basis(n)) {
                if let Some(s) = c.result("tpm sum", b.weighted_cycle_sum(t, true)) {
                    let rhs = crimea_bound(n, t);
                    c.push(format!("tpm n {n} t {t} cycle sum"), s <= rhs, format!("{s:e} <= {rhs:e}"));
                }
            }
        }
    }

    for n in 0..=n_max {
        if let Some(r) = c.result("bottom row", bottom_row_check(n)) {
            c.push(format!("bottom-row plaquette in every cycle, n {n}"), r.ok(), format!("{r:?}"));
        }
    }

    let family = if opts.quick { BoundaryFamily::declared(8, opts.seed) } else { BoundaryFamily::Exhaustive };
    for (model, n, beta) in [(Model::Spm, 1, 1.0), (Model::Spm, 2, 1.0), (Model::Tpm, 2, 2.0), (Model::Tpm, 3, 2.0)] {
        if let Some(r) = c.result("screening", screening_ratio(model, n, beta, &family)) {
            c.push(
                format!("{} n {n} beta {beta} screening ratio", model.name()),
                r.ok,
                format!("ratio {} <= bound {} ({}, {} boundaries)", r.ratio, r.bound, r.exactness.as_str(), r.boundaries),
            );
        }
    }
}

/// A random family on `universe` elements where each set has an element not
/// in any earlier set.
pub fn random_staircase(rng: &mut impl Rng, m: usize, universe: u32) -> Vec<Vec<u32>> {
    let mut order: Vec<u32> = (0..universe).collect();
    order.shuffle(rng);
    (0..m)
        .map(|k| {
            let mut s = vec![order[k]];
            for &x in &order[..k] {
                if rng.gen_bool(0.4) {
                    s.push(x);
                }
            }
            for &x in &order[m..] {
                if rng.gen_bool(0.3) {
                    s.push(x);
                }
            }
            s.sort();
            s
        })
        .collect()
}

fn staircase(c: &mut Checks, opts: &VerifyOptions) {
    for n in 0..=10u32 {
        let mut worst = 0.0f64;
        let mut all_staircase = true;
        for j in -1..=n as i32 {
            let Some(sets) = c.result("gamma family", gamma_family(n, j)) else { return };
            for cc in [-0.8, 1.0] {
                if let Some(r) = c.result("chiave", chiave_check(&sets, cc)) {
                    all_staircase &= r.staircase_ok;
                    worst = worst.max(((r.lhs - r.rhs) / r.rhs).abs());
                }
            }
        }
        c.push(format!("gamma families n {n}"), all_staircase && worst <= 1e-12, format!("max rel diff {worst:e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    let mut staircase = true;
    for _ in 0..100 {
        let m = rng.gen_range(1..=10);
        let universe = rng.gen_range(m as u32..=16);
        let sets = random_staircase(&mut rng, m, universe);
        let cc = rng.gen_range(-2.0..2.0);
        if let Some(r) = c.result("chiave", chiave_check(&sets, cc)) {
            staircase &= r.staircase_ok;
            worst = worst.max(((r.lhs - r.rhs) / r.rhs).abs());
        }
    }
    c.push("100 random staircase families", staircase && worst <= 1e-12, format!("max rel diff {worst:e}"));
    if let Some(r) = c.result("counterexample", chiave_check(&[vec![0, 1], vec![0, 1]], 1.0)) {
        let differs = !r.staircase_ok && (r.lhs - r.rhs).abs() > 1e-6;
        c.push("non-staircase family breaks the identity", differs, format!("lhs {} rhs {}", r.lhs, r.rhs));
    }
}

fn pascal_sets(c: &mut Checks, _opts: &VerifyOptions) {
    for n in 0..=12u32 {
        let mut points = 0;
        let mut bad = Vec::new();
        for z in Region::extended_triangle(n).sites() {
            points += 1;
            match (a_of_z(n, *z), a_of_z_direct(n, *z)) {
                (Ok(a), Ok(b)) => {
                    let lo = z.x1 - z.x2 - 1;
                    let ends = a.contains(&z.x1) && a.contains(&lo) && a.iter().all(|&j| lo <= j && j <= z.x1);
                    if a != b || !ends {
                        bad.push(*z);
                    }
                }
                _ => bad.push(*z),
            }
        }
        c.push(format!("n {n}: lucas path equals membership, endpoints"), bad.is_empty(), format!("{points} sites, bad {bad:?}"));
    }
}

fn plus_expansion(c: &mut Checks, opts: &VerifyOptions) {
    let region = Region::centered(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7);
    let mut sets: Vec<Vec<Site>> = Vec::new();
    while sets.len() < 20 {
        let a: Vec<Site> = region.sites().iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        if !a.is_empty() {
            sets.push(a);
        }
    }
    for beta in [0.5, 2.0] {
        let mut worst = 0.0f64;
        let mut spiderman = true;
        for a in &sets {
            let e = multispin_plus_finite(Model::Spm, &region, a, beta, PlusMethod::CycleExpansion);
            let b = multispin_plus_finite(Model::Spm, &region, a, beta, PlusMethod::Enumeration);
            if let (Some(e), Some(b)) = (c.result("expansion", e), c.result("enumeration", b)) {
                worst = worst.max((e.value - b.value).abs());
                spiderman &= b.value >= e.spiderman_bound * (1.0 - 1e-12) && e.spiderman_bound > 0.0;
            }
        }
        c.push(format!("beta {beta}: expansion equals enumeration on 20 sets"), worst <= 1e-10, format!("max |diff| {worst:e}"));
        c.push(format!("beta {beta}: lower bound tanh^n holds"), spiderman, "");
    }
    for ell in [1u32, 2] {
        let t: f64 = 0.3;
        let fs: [(&str, Box<dyn Fn(&FixedBitSet) -> f64 + Sync>); 3] = [
            ("f = 1", Box::new(|_| 1.0)),
            ("f = t^|a|", Box::new(move |a| t.powi(a.count_ones(..) as i32))),
            ("f = 1(a empty)", Box::new(|a| if a.is_clear() { 1.0 } else { 0.0 })),
        ];
        for (name, f) in fs {
            if let Some((l, r)) = c.result("friuli", friuli_sum_check(ell, f)) {
                c.rel(format!("ell {ell} {name}: two-sided sum"), l, r, 1e-12);
            }
        }
    }
}

fn slopes(c: &mut Checks) {
    let betas = beta_grid(6.0, 20.0, 0.05);
    for (model, tol) in [(Model::Spm, 0.02), (Model::Tpm, 0.03)] {
        for kind in [LengthKind::Multispin, LengthKind::Renorm] {
            if let Some(f) = c.result("fit", scaling_fit(model, kind, &betas)) {
                c.close(format!("{} {} slope", model.name(), kind.as_str()), f.slope, f.target, tol);
            }
        }
    }
}

fn monte_carlo(c: &mut Checks, opts: &VerifyOptions) {
    let scale = if opts.quick { 4 } else { 1 };
    let seed = opts.seed;

    let beta = 2.0;
    let side = 24;
    let spec = ChainSpec::new(
        Model::Spm,
        RegionDesc::Box { corner: Site::ORIGIN, w: side, h: side },
        BoundaryCondition::AllPlus,
        beta,
        seed,
    )
    .with_sweeps(20_000 / scale, 1_000);
    let bases: Vec<Site> = Region::rect(Site::new(1, 1), side - 3, side - 3).sites().to_vec();
    if let Some(out) = c.result("defects", run_chain(&spec, &[Observable::DefectDensity { bases }])) {
        let e = out.estimates[0];
        let q = q_of_beta(beta);
        c.push("spm defect density, beta 2", e.within(q, 3.0), format!("{} +- {} vs q = {q}", e.mean, e.std_error));
    }

    let spec = ChainSpec::new(Model::Spm, RegionDesc::Centered { ell: 1 }, BoundaryCondition::AllPlus, 1.0, seed + 1)
        .with_sweeps(200_000 / scale, 1_000);
    if let (Some(out), Some(exact)) = (
        c.result("magnetization", run_chain(&spec, &[Observable::Multispin { sites: vec![Site::ORIGIN] }])),
        c.result("closed form", magnetization_plus_exact(1, 1.0)),
    ) {
        let e = out.estimates[0];
        c.push(
            "plus magnetization, ell 1, beta 1",
            e.within(exact.value, 3.0),
            format!("{} +- {} vs {}", e.mean, e.std_error, exact.value),
        );
    }

    for (model, side, seed) in [(Model::Spm, 2, seed + 2), (Model::Tpm, 2, seed + 3)] {
        let a = extremal_set(model, side, Site::new(15, 15));
        let spec = ChainSpec::new(
            model,
            RegionDesc::Box { corner: Site::ORIGIN, w: 32, h: 32 },
            BoundaryCondition::AllPlus,
            1.5,
            seed,
        )
        .with_sweeps(20_000 / scale, 1_000);
        let want = multispin_infinite(model, &a, 1.5).map(|m| m.value);
        if let (Some(out), Some(want)) =
            (c.result("multispin", run_chain(&spec, &[Observable::Multispin { sites: a.clone() }])), c.result("closed", want))
        {
            let e = out.estimates[0];
            c.push(
                format!("{} multispin side {side}, beta 1.5", model.name()),
                e.within(want, 3.0),
                format!("{} +- {} vs {want}", e.mean, e.std_error),
            );
        }
    }
}

fn ordering(c: &mut Checks, opts: &VerifyOptions) {
    let mut config = OrderingConfig::default();
    config.family = BoundaryFamily::declared(8, opts.seed);
    if opts.quick {
        config.method = crate::gibbs::MarginalMethod::Auto { sweeps: 10_000, burn_in: 1_000, seed: opts.seed };
    } else {
        config.method = crate::gibbs::MarginalMethod::Auto { sweeps: 40_000, burn_in: 2_000, seed: opts.seed };
    }
    if let Some(rows) = c.result("ordering", ordering_report(Model::Spm, &[0.5, 1.0, 1.5], &config)) {
        for r in rows {
            let (lo, hi) = r.multispin.bounds();
            let psi: Vec<String> = r.cavity.scan.iter().map(|p| format!("psi({}) = {:.4}", p.ell, p.value)).collect();
            c.push(
                format!("beta {}: multispin lo <= cavity", r.beta),
                r.holds,
                format!(
                    "multispin [{lo}, {hi}], cavity >= {} ({}; {})",
                    r.cavity.estimate.value,
                    r.cavity.estimate.certainty.as_str(),
                    psi.join(", ")
                ),
            );
        }
    }
    let spec = GibbsSpec::meeting(Model::Spm, Region::square(2), 0.9, BoundaryCondition::Random { seed: opts.seed, index: 0 });
    if let Some(support) = c.result("support", spec.exterior_support()) {
        let mut worst = 0.0f64;
        for &x in &support {
            if let Some(r) = c.result(format!("flip identity at {x}"), flip_identity_residual(&spec, x)) {
                worst = worst.max(r);
            }
        }
        c.push(
            "flip reweighting identity on Q_2, every exterior site",
            worst <= 1e-12,
            format!("{} sites, max residual {worst:e}", support.len()),
        );
    }
}
