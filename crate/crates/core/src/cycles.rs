//! The F2 space of plaquette sets: cycles, the stripe, Pascal and row/column
//! bases, weighted cycle sums and the bounds built on them.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::f2::{fold_span, ParitySet, Span};
use crate::geometry::{plaquette_family, FamilyMode, Model, PlaquetteFamily, Region, Site};
use crate::gibbs::{partition_function, BoundaryFamily, Exactness, GibbsSpec};
use crate::shadows::pascal_parity;

/// Largest number of independent generators whose span is enumerated.
pub const SPAN_CAP: usize = 24;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SpmStripes,
    TpmPascal,
    PlusBcRowsCols,
    Custom,
}

/// Generators of a space of cycles over a densely indexed plaquette family.
#[derive(Clone, Debug)]
pub struct CycleBasis {
    pub model: Model,
    pub region: Region,
    pub family: PlaquetteFamily,
    pub generators: Vec<ParitySet>,
    pub provenance: Provenance,
    span: Span,
    // per plaquette, the region indices it covers
    incidence: Vec<Vec<usize>>,
}

impl CycleBasis {
    pub fn new(
        model: Model,
        region: Region,
        mode: FamilyMode,
        generators: Vec<ParitySet>,
        provenance: Provenance,
    ) -> Result<CycleBasis> {
        let family = plaquette_family(model, &region, mode)?;
        for g in &generators {
            if g.universe() != family.len() {
                return Err(invalid("generator universe does not match the plaquette family"));
            }
        }
        let bits: Vec<FixedBitSet> = generators.iter().map(|g| g.bits().clone()).collect();
        let span = Span::new(&bits, family.len());
        let incidence = family
            .plaquettes()
            .iter()
            .map(|p| p.sites.iter().filter_map(|&s| region.index_of(s)).collect())
            .collect();
        Ok(CycleBasis { model, region, family, generators, provenance, span, incidence })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.family.len()
    }

    pub fn rank(&self) -> usize {
        self.span.rank()
    }

    /// Relations among the generators, as coefficient vectors.
    pub fn relations(&self) -> &[FixedBitSet] {
        self.span.relations()
    }

    /// Every site of the region lies in an even number of members of `alpha`.
    pub fn is_cycle(&self, alpha: &ParitySet) -> bool {
        let mut odd = FixedBitSet::with_capacity(self.region.len());
        for p in alpha.ones() {
            for &i in &self.incidence[p] {
                odd.toggle(i);
            }
        }
        odd.is_clear()
    }

    /// Coefficients expressing `alpha` in the generators.
    pub fn decompose(&self, alpha: &ParitySet) -> Result<FixedBitSet> {
        if alpha.universe() != self.universe() {
            return Err(invalid("plaquette set over a different universe"));
        }
        self.span.solve(alpha.bits()).ok_or(Error::NotInSpan)
    }

    /// `Σ` of the generators selected by `coeffs`.
    pub fn combine(&self, coeffs: &FixedBitSet) -> ParitySet {
        let mut out = ParitySet::empty(self.universe());
        for i in coeffs.ones() {
            out.add(&self.generators[i]);
        }
        out
    }

    pub fn parity_set(&self, bases: &[Site]) -> Result<ParitySet> {
        let idx: Vec<usize> = bases
            .iter()
            .map(|&b| self.family.index_of(b).ok_or_else(|| invalid(format!("plaquette {b} not in the family"))))
            .collect::<Result<_>>()?;
        Ok(ParitySet::from_indices(self.universe(), idx))
    }

    pub fn bases_of(&self, alpha: &ParitySet) -> Vec<Site> {
        alpha.ones().map(|i| self.family.get(i).base).collect()
    }

    /// An independent subset of the generators spanning the same space.
    pub fn independent(&self) -> Vec<FixedBitSet> {
        self.span.independent().iter().map(|&i| self.generators[i].bits().clone()).collect()
    }

    fn checked_independent(&self) -> Result<Vec<FixedBitSet>> {
        let ind = self.independent();
        if ind.len() > SPAN_CAP {
            return Err(Error::TooManyGenerators { count: ind.len(), cap: SPAN_CAP });
        }
        Ok(ind)
    }

    /// Number of span elements of each cardinality after adding `shift`.
    pub fn size_histogram(&self, shift: Option<&ParitySet>) -> Result<Vec<u64>> {
        let ind = self.checked_independent()?;
        let width = self.universe();
        let shift = shift.map(|s| s.bits().clone()).unwrap_or_else(|| FixedBitSet::with_capacity(width));
        Ok(fold_span(
            &ind,
            width,
            || vec![0u64; width + 1],
            |acc, alpha| acc[alpha.symmetric_difference(&shift).count()] += 1,
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        ))
    }

    /// `Σ t^{|α|}` over the span, optionally without `∅`.
    pub fn weighted_cycle_sum(&self, t: f64, skip_empty: bool) -> Result<f64> {
        let h = self.size_histogram(None)?;
        let mut s: f64 = h.iter().enumerate().skip(1).map(|(k, &c)| c as f64 * t.powi(k as i32)).sum();
        if !skip_empty {
            s += h[0] as f64;
        }
        Ok(s)
    }

    /// Visits every element of the span.
    pub fn fold<A, I, F, M>(&self, init: I, visit: F, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &FixedBitSet) + Sync,
        M: Fn(A, A) -> A,
    {
        let ind = self.checked_independent()?;
        Ok(fold_span(&ind, self.universe(), init, visit, merge))
    }
}

/// The whole cycle space of a family, as the null space of the site incidence
/// over the region. Independent of any named basis.
pub fn cycle_space(model: Model, region: &Region, mode: FamilyMode) -> Result<CycleBasis> {
    let family = plaquette_family(model, region, mode)?;
    let columns: Vec<FixedBitSet> = family
        .plaquettes()
        .iter()
        .map(|p| {
            let mut c = FixedBitSet::with_capacity(region.len());
            for &s in &p.sites {
                if let Some(i) = region.index_of(s) {
                    c.toggle(i);
                }
            }
            c
        })
        .collect();
    let gens = crate::f2::nullspace(&columns, region.len()).into_iter().map(ParitySet::from).collect();
    CycleBasis::new(model, region.clone(), mode, gens, Provenance::Custom)
}

/// Horizontal and vertical stripes `H_0..H_n, V_0..V_n` on `[n]² = {1..n}²`.
pub fn spm_stripe_basis(n: u32) -> Result<CycleBasis> {
    if n == 0 {
        return Err(invalid("stripe basis needs n >= 1"));
    }
    let region = Region::square(n);
    let family = plaquette_family(Model::Spm, &region, FamilyMode::Meeting)?;
    let m = family.len();
    let n = n as i32;
    let mut gens = Vec::with_capacity(2 * (n as usize + 1));
    for j in 0..=n {
        gens.push(ParitySet::from_indices(m, (0..=n).map(|i| family.index_of(Site::new(i, j)).expect("stripe base"))));
    }
    for j in 0..=n {
        gens.push(ParitySet::from_indices(m, (0..=n).map(|i| family.index_of(Site::new(j, i)).expect("stripe base"))));
    }
    CycleBasis::new(Model::Spm, region, FamilyMode::Meeting, gens, Provenance::SpmStripes)
}

/// Pascal cycles `P_{-1}, …, P_n` on the triangle `T*^(n)`.
pub fn tpm_pascal_basis(n: u32) -> Result<CycleBasis> {
    let region = Region::triangle(n);
    let family = plaquette_family(Model::Tpm, &region, FamilyMode::Meeting)?;
    let m = family.len();
    let gens = (-1..=n as i32)
        .map(|i| {
            let idx = family.plaquettes().iter().enumerate().filter_map(|(k, p)| {
                let row = (p.base.x2 + 1) as i64;
                (row >= 0 && pascal_parity(row as u64, (p.base.x1 - i) as i64)).then_some(k)
            });
            ParitySet::from_indices(m, idx)
        })
        .collect();
    CycleBasis::new(Model::Tpm, region, FamilyMode::Meeting, gens, Provenance::TpmPascal)
}

/// Row cycles `R_0..R_{L-1}` then column cycles `C_0..C_{L-1}`, `L = 2ℓ+2`,
/// over the clipped family of `[-ℓ, ℓ]²`.
pub fn plus_bc_generators(ell: u32) -> Result<CycleBasis> {
    if ell == 0 {
        return Err(invalid("plus-boundary generators need ell >= 1"));
    }
    let region = Region::centered(ell);
    let family = plaquette_family(Model::Spm, &region, FamilyMode::Clipped)?;
    let m = family.len();
    let e = ell as i32;
    let range = -e - 1..=e;
    let mut gens = Vec::new();
    for r in range.clone() {
        gens.push(ParitySet::from_indices(m, range.clone().map(|c| family.index_of(Site::new(c, r)).expect("row base"))));
    }
    for c in range.clone() {
        gens.push(ParitySet::from_indices(m, range.clone().map(|r| family.index_of(Site::new(c, r)).expect("column base"))));
    }
    CycleBasis::new(Model::Spm, region, FamilyMode::Clipped, gens, Provenance::PlusBcRowsCols)
}

/// `exp(2(n+2) t^{(n+1)/3}) − 1`.
pub fn crimea_bound(n: u32, t: f64) -> f64 {
    (2.0 * (n as f64 + 2.0) * t.powf((n as f64 + 1.0) / 3.0)).exp_m1()
}

/// Partition-function ratio over boundary conditions and its bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub model: Model,
    pub n: u32,
    pub beta: f64,
    pub ratio: f64,
    pub bound: f64,
    pub exactness: Exactness,
    pub boundaries: usize,
    pub ok: bool,
}

/// The region on which the screening ratio is taken: `[n]²` or `T*^(n)`.
pub fn screening_region(model: Model, n: u32) -> Result<Region> {
    match model {
        Model::Spm if n >= 1 => Ok(Region::square(n)),
        Model::Tpm => Ok(Region::triangle(n)),
        Model::Spm => Err(invalid("square screening region needs n >= 1")),
        Model::Rect { .. } => Err(Error::Unsupported("screening ratio for spm and tpm only".into())),
    }
}

/// `sup_{τ,τ'} Z^τ / Z^{τ'}` with all plaquettes meeting the region, against
/// `3 exp(2(n+2) tanh(β/2)^{(n+1)/3}) − 2`.
pub fn screening_ratio(model: Model, n: u32, beta: f64, family: &BoundaryFamily) -> Result<ScreeningReport> {
    let region = screening_region(model, n)?;
    let support = region.exterior_support(model);
    let (members, exactness) = family.members(&region, &support);
    let logs: Vec<f64> = {
        use rayon::prelude::*;
        members
            .par_iter()
            .map(|bc| partition_function(&GibbsSpec::meeting(model, region.clone(), beta, bc.clone())))
            .collect::<Result<_>>()?
    };
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = (hi - lo).exp();
    let t = (beta / 2.0).tanh();
    let bound = 3.0 * (2.0 * (n as f64 + 2.0) * t.powf((n as f64 + 1.0) / 3.0)).exp() - 2.0;
    Ok(ScreeningReport {
        model,
        n,
        beta,
        ratio,
        bound,
        exactness,
        boundaries: members.len(),
        ok: ratio <= bound * (1.0 + 1e-12),
    })
}

/// Both sides of the exponential-moment identity for a family of parity
/// checks on uniform spins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiaveReport {
    pub lhs: f64,
    pub rhs: f64,
    pub staircase_ok: bool,
}

/// Every set contains an element missing from all earlier ones.
pub fn is_staircase(sets: &[Vec<u32>]) -> bool {
    let mut seen: u64 = 0;
    for s in sets {
        let m = s.iter().fold(0u64, |a, &x| a | 1 << x);
        if m & !seen == 0 {
            return false;
        }
        seen |= m;
    }
    true
}

/// `E[exp(c Σ_k 1([σ]_{A_k} = −1))]` by brute force, and `2^{−m}(e^c+1)^m`.
pub fn chiave_check(sets: &[Vec<u32>], c: f64) -> Result<ChiaveReport> {
    if sets.len() > 16 {
        return Err(invalid("at most 16 sets"));
    }
    let universe = sets.iter().flatten().map(|&x| x + 1).max().unwrap_or(0) as usize;
    if universe > 24 {
        return Err(invalid("universe above 24 elements"));
    }
    let masks: Vec<u64> = sets.iter().map(|s| s.iter().fold(0u64, |a, &x| a ^ 1 << x)).collect();
    let m = sets.len();
    // Histogram of the number of odd parities, then the exact average.
    let mut hist = vec![0u64; m + 1];
    for sigma in 0u64..1 << universe {
        let k = masks.iter().filter(|&&a| (sigma & a).count_ones() & 1 == 1).count();
        hist[k] += 1;
    }
    let total = (1u64 << universe) as f64;
    let lhs = hist.iter().enumerate().map(|(k, &h)| h as f64 * (c * k as f64).exp()).sum::<f64>() / total;
    let rhs = (0.5 * (c.exp() + 1.0)).powi(m as i32);
    Ok(ChiaveReport { lhs, rhs, staircase_ok: is_staircase(sets) })
}

/// The sets `A(z)` for `z` running through `Γ(j)` in order, shifted by one so
/// that the index `−1` becomes `0`.
pub fn gamma_family(n: u32, j: i32) -> Result<Vec<Vec<u32>>> {
    crate::geometry::gamma_set(n, j)?
        .into_iter()
        .map(|z| crate::shadows::a_of_z(n, z).map(|a| a.into_iter().map(|i| (i + 1) as u32).collect()))
        .collect()
}

/// `|α(W)|` for `i` row and `j` column cycles, `L = 2ℓ+2`.
pub fn alpha_w_cardinality(ell: u32, i: u32, j: u32) -> i64 {
    let l = 2 * ell as i64 + 2;
    (i as i64 + j as i64) * l - 2 * i as i64 * j as i64
}

/// `|α(W) Δ α*|` where `α*` is the block of clipped plaquettes based in
/// `[0, ℓ] × [−ℓ−1, −1]` (vertex sum `{0}`), and `W` takes `u` rows among the
/// lower half, `v` in the upper half, `j` columns in the left half and `k` in
/// the right half.
pub fn alpha_w_delta_cardinality(ell: u32, u: u32, v: u32, j: u32, k: u32) -> i64 {
    let l = 2 * ell as i64 + 2;
    let (u, v, j, k) = (u as i64, v as i64, j as i64, k as i64);
    j * l + v * l - 2 * v * j - 2 * u * j - 2 * v * k + 2 * u * k + l * l / 4
}

/// Bases of `α*`.
pub fn alpha_star(ell: u32) -> Vec<Site> {
    let e = ell as i32;
    (-e - 1..=-1).flat_map(|r| (0..=e).map(move |c| Site::new(c, r))).collect()
}

/// `Σ_{α ∈ K⁺} f(α)` over the null space of the clipped incidence, and
/// `(1/2) Σ_{W ⊂ G} f(α(W))` over all subsets of the row/column generators.
pub fn friuli_sum_check<F>(ell: u32, f: F) -> Result<(f64, f64)>
where
    F: Fn(&FixedBitSet) -> f64 + Sync,
{
    let g = plus_bc_generators(ell)?;
    let space = cycle_space(Model::Spm, &g.region, FamilyMode::Clipped)?;
    let lhs = space.fold(|| 0.0, |a, alpha| *a += f(alpha), |a, b| a + b)?;
    let all: Vec<FixedBitSet> = g.generators.iter().map(|p| p.bits().clone()).collect();
    if all.len() > SPAN_CAP {
        return Err(Error::TooManyGenerators { count: all.len(), cap: SPAN_CAP });
    }
    let rhs = 0.5 * fold_span(&all, g.universe(), || 0.0, |a, alpha| *a += f(alpha), |a, b| a + b);
    Ok((lhs, rhs))
}

/// Outcome of an exhaustive property check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub checked: u64,
    pub violations: u64,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Every nonempty cycle of `T*^(n)`, taken from the null space of the
/// incidence rather than from the Pascal basis, contains a plaquette based on
/// the row `x2 = −1`.
pub fn bottom_row_check(n: u32) -> Result<CheckReport> {
    let space = cycle_space(Model::Tpm, &Region::triangle(n), FamilyMode::Meeting)?;
    let bottom: FixedBitSet = space
        .family
        .plaquettes()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.base.x2 == -1)
        .map(|(i, _)| i)
        .fold(FixedBitSet::with_capacity(space.universe()), |mut b, i| {
            b.insert(i);
            b
        });
    space.fold(
        || CheckReport { checked: 0, violations: 0 },
        |acc, alpha| {
            acc.checked += 1;
            if !alpha.is_clear() && alpha.intersection_count(&bottom) == 0 {
                acc.violations += 1;
            }
        },
        |a, b| CheckReport { checked: a.checked + b.checked, violations: a.violations + b.violations },
    )
}

/// `|α| ≥ (|α(1)| + |α(2)|)/3` for every SPM cycle on `[n]²`, where
/// `α = α(1) + α(2)` splits into horizontal and vertical stripes and the
/// split using at most half of the horizontal stripes is taken.
pub fn economic_check(n: u32) -> Result<CheckReport> {
    let basis = spm_stripe_basis(n)?;
    let k = n as usize + 1;
    if 2 * k > SPAN_CAP {
        return Err(Error::TooManyGenerators { count: 2 * k, cap: SPAN_CAP });
    }
    let mut report = CheckReport { checked: 0, violations: 0 };
    for rows in 0u32..1 << k {
        for cols in 0u32..1 << k {
            let (r, c) = if 2 * rows.count_ones() as usize <= k { (rows, cols) } else { (!rows & ((1 << k) - 1), !cols & ((1 << k) - 1)) };
            let mut a1 = ParitySet::empty(basis.universe());
            let mut a2 = ParitySet::empty(basis.universe());
            for i in 0..k {
                if r >> i & 1 == 1 {
                    a1.add(&basis.generators[i]);
                }
                if c >> i & 1 == 1 {
                    a2.add(&basis.generators[k + i]);
                }
            }
            let alpha = a1.sum(&a2);
            report.checked += 1;
            if 3 * alpha.len() < a1.len() + a2.len() {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stripes() {
        let b = spm_stripe_basis(1).unwrap();
        assert_eq!(b.bases_of(&b.generators[0]), vec![Site::new(0, 0), Site::new(1, 0)]);
        for n in 1..=5 {
            let b = spm_stripe_basis(n).unwrap();
            assert_eq!(b.rank(), 2 * n as usize + 1);
            assert!(b.generators.iter().all(|g| b.is_cycle(g) && g.len() == n as usize + 1));
            assert_eq!(cycle_space(Model::Spm, &b.region, FamilyMode::Meeting).unwrap().rank(), b.rank());
        }
    }

    #[test]
    fn single_interior_plaquette_is_not_a_cycle() {
        let r = Region::square(5);
        let sp = cycle_space(Model::Spm, &r, FamilyMode::Meeting).unwrap();
        let a = sp.parity_set(&[Site::new(2, 2)]).unwrap();
        assert!(!sp.is_cycle(&a));
        assert!(sp.is_cycle(&ParitySet::empty(sp.universe())));
    }

    #[test]
    fn pascal_basis() {
        for n in 0..=10 {
            let b = tpm_pascal_basis(n).unwrap();
            assert_eq!(b.len(), n as usize + 2);
            assert_eq!(b.rank(), n as usize + 2);
            assert!(b.generators.iter().all(|g| b.is_cycle(g)));
            // (i, -1) + B* lies in P_j iff i = j
            for (j, g) in b.generators.iter().enumerate() {
                let bottom: Vec<Site> = b.bases_of(g).into_iter().filter(|s| s.x2 == -1).collect();
                assert_eq!(bottom, vec![Site::new(j as i32 - 1, -1)]);
            }
        }
        let b = tpm_pascal_basis(4).unwrap();
        let target = b.generators[1 + 1].sum(&b.generators[4 + 1]);
        let c = b.decompose(&target).unwrap();
        assert_eq!(c.ones().collect::<Vec<_>>(), vec![2, 5]);
        let bad = b.parity_set(&[Site::new(0, 0)]).unwrap();
        assert_eq!(b.decompose(&bad).unwrap_err(), Error::NotInSpan);
    }

    #[test]
    fn plus_generators_relation() {
        for ell in 1..=3 {
            let g = plus_bc_generators(ell).unwrap();
            let l = 2 * ell as usize + 2;
            assert_eq!(g.len(), 2 * l);
            assert_eq!(g.rank(), 2 * l - 1);
            assert_eq!(g.relations().len(), 1);
            assert_eq!(g.relations()[0].count_ones(..), 2 * l);
            assert!(g.generators.iter().all(|x| g.is_cycle(x)));
        }
    }

    #[test]
    fn alpha_w_examples() {
        assert_eq!(alpha_w_cardinality(1, 0, 0), 0);
        assert_eq!(alpha_w_cardinality(1, 4, 4), 0);
        assert_eq!(alpha_w_cardinality(1, 1, 1), 6);
        let g = plus_bc_generators(1).unwrap();
        let w = g.generators[0].sum(&g.generators[4]);
        assert_eq!(w.len(), 6);
        let star = g.parity_set(&alpha_star(1)).unwrap();
        let sum = crate::shadows::vertex_sum(Model::Spm, &alpha_star(1));
        let inside: Vec<Site> = sum.into_iter().filter(|s| g.region.contains(*s)).collect();
        assert_eq!(inside, vec![Site::ORIGIN]);
        assert_eq!(star.len(), 4);
    }

    #[test]
    fn chiave_small() {
        let r = chiave_check(&[vec![0]], 0.7).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-15);
        let r = chiave_check(&[vec![0, 1], vec![0, 1]], 1.0).unwrap();
        assert!(!r.staircase_ok);
        assert!((r.lhs - r.rhs).abs() > 1e-3);
    }

    #[test]
    fn crimea_zero() {
        assert_eq!(crimea_bound(3, 0.0), 0.0);
    }
}
