use std::collections::HashSet;

use proptest::prelude::*;

use plaquette::cycles::{plus_bc_generators, spm_stripe_basis, tpm_pascal_basis};
use plaquette::geometry::{gamma_set, plaquette_family};
use plaquette::gibbs::{
    flip_identity_residual, marginal, partition_function, BoundaryCondition, GibbsSpec,
};
use plaquette::renorm::{beta_prime_k, DecimationRegion};
use plaquette::shadows::{minimal_decomposition, minimal_decomposition_with, vertex_sum, Screen};
use plaquette::{FamilyMode, Model, Region, Site};

fn toggle(set: &mut HashSet<Site>, sites: impl IntoIterator<Item = Site>) {
    for s in sites {
        if !set.insert(s) {
            set.remove(&s);
        }
    }
}

fn sorted(set: HashSet<Site>) -> Vec<Site> {
    let mut v: Vec<Site> = set.into_iter().collect();
    v.sort();
    v
}

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Spm), Just(Model::Tpm)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn family_is_translation_covariant(m in model(), w in 1u32..4, h in 1u32..4, dx in -5i32..5, dy in -5i32..5) {
        let v = Site::new(dx, dy);
        let region = Region::rect(Site::ORIGIN, w, h);
        for mode in [FamilyMode::Meeting, FamilyMode::Inside, FamilyMode::Clipped] {
            let a: Vec<Site> = plaquette_family(m, &region, mode).unwrap().bases().into_iter().map(|b| b + v).collect();
            let b = plaquette_family(m, &region.translate(v), mode).unwrap().bases();
            prop_assert_eq!(sorted(a.into_iter().collect()), sorted(b.into_iter().collect()));
        }
    }

    #[test]
    fn inside_is_part_of_meeting(m in model(), w in 1u32..5, h in 1u32..5) {
        let region = Region::rect(Site::new(2, -1), w, h);
        let meeting: HashSet<Site> = plaquette_family(m, &region, FamilyMode::Meeting).unwrap().bases().into_iter().collect();
        for b in plaquette_family(m, &region, FamilyMode::Inside).unwrap().bases() {
            prop_assert!(meeting.contains(&b));
        }
    }

    #[test]
    fn cycle_sums_are_cycles(n in 1u32..7, a in any::<u32>(), b in any::<u32>()) {
        for basis in [tpm_pascal_basis(n).unwrap(), spm_stripe_basis(n).unwrap()] {
            let pick = |bits: u32| {
                let mut s = plaquette::f2::ParitySet::empty(basis.universe());
                for (i, g) in basis.generators.iter().enumerate() {
                    if bits >> (i % 32) & 1 == 1 {
                        s.add(g);
                    }
                }
                s
            };
            let x = pick(a);
            let y = pick(b);
            prop_assert!(basis.is_cycle(&x));
            prop_assert!(basis.is_cycle(&x.sum(&y)));
        }
    }

    #[test]
    fn decomposition_recovers_random_plaquette_sums(
        m in model(),
        bases in proptest::collection::hash_set((0i32..12, 0i32..12), 1..=12),
    ) {
        let bases: Vec<Site> = bases.into_iter().map(|(a, b)| Site::new(a, b)).collect();
        let mut a = HashSet::new();
        for &b in &bases {
            toggle(&mut a, m.plaquette_sites(b));
        }
        let a = sorted(a);
        let d = minimal_decomposition(m, &a).unwrap();
        let mut want = bases.clone();
        want.sort();
        prop_assert_eq!(d.bases, want);
    }

    #[test]
    fn decomposition_does_not_depend_on_the_screen(
        m in model(),
        bases in proptest::collection::vec((0i32..8, 0i32..8), 1..8),
        shift in 1i32..6,
    ) {
        let mut a = HashSet::new();
        for (x, y) in bases {
            toggle(&mut a, m.plaquette_sites(Site::new(x, y)));
        }
        let a = sorted(a);
        prop_assume!(!a.is_empty());
        let (s1, s2) = match m {
            Model::Tpm => (Screen::Line { height: 9 }, Screen::Line { height: 9 + shift }),
            _ => (
                Screen::Corner { positive: false, apex: Site::new(9, 9) },
                Screen::Corner { positive: false, apex: Site::new(9 + shift, 10 + 2 * shift) },
            ),
        };
        let d1 = minimal_decomposition_with(m, &a, &s1).unwrap();
        let d2 = minimal_decomposition_with(m, &a, &s2).unwrap();
        prop_assert_eq!(d1, d2);
    }

    #[test]
    fn separated_spm_sets_need_many_plaquettes(
        ell in 2i32..=12,
        rects in proptest::collection::vec((0i32..40, 0i32..40, 0i32..25, 0i32..25), 1..4),
    ) {
        let mut a = HashSet::new();
        for (x, y, w, h) in rects {
            let (w, h) = (ell + w, ell + h);
            toggle(&mut a, [Site::new(x, y), Site::new(x + w, y), Site::new(x, y + h), Site::new(x + w, y + h)]);
        }
        let a = sorted(a);
        prop_assume!(!a.is_empty());
        let sep = a.iter().enumerate().flat_map(|(i, p)| a[i + 1..].iter().map(move |q| p.l1(*q))).min().unwrap_or(u32::MAX);
        prop_assume!(sep >= ell as u32);
        let n = minimal_decomposition(Model::Spm, &a).unwrap().size;
        prop_assert!(4 * n >= (ell * ell) as usize, "n = {n}, ell = {ell}");
    }

    #[test]
    fn separated_tpm_sets_need_many_plaquettes(
        k in 1u32..=4,
        tris in proptest::collection::vec((0i32..40, 0i32..40, 0u32..2), 1..4),
    ) {
        let mut a = HashSet::new();
        for (x, y, extra) in tris {
            let s = 1i32 << (k + extra);
            toggle(&mut a, [Site::new(x, y), Site::new(x, y + s), Site::new(x + s, y + s)]);
        }
        let a = sorted(a);
        prop_assume!(!a.is_empty());
        let ell = 1u32 << k;
        let sep = a.iter().enumerate().flat_map(|(i, p)| a[i + 1..].iter().map(move |q| p.tri_distance(*q))).min().unwrap_or(u32::MAX);
        prop_assume!(sep >= ell);
        let n = minimal_decomposition(Model::Tpm, &a).unwrap().size;
        prop_assert!(n >= 3usize.pow(k - 1), "n = {n}, k = {k}");
    }

    #[test]
    fn decimation_composes(beta in 0.3f64..12.0, a in 1u32..6, b in 1u32..6) {
        let (a, b) = (a as f64, b as f64);
        let two = beta_prime_k(beta, a * a).unwrap();
        prop_assume!(two.value > 0.0);
        let lhs = beta_prime_k(two.value, b * b).unwrap().value;
        let rhs = beta_prime_k(beta, a * a * b * b).unwrap().value;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "{lhs} vs {rhs}");
    }

    #[test]
    fn reconstruction_is_a_bijection(spins in proptest::collection::vec(any::<bool>(), 25), tpm in any::<bool>()) {
        let region = if tpm { DecimationRegion::tpm(1, 1).unwrap() } else { DecimationRegion::spm(2, 2).unwrap() };
        let fine = region.fine();
        let sigma: Vec<i8> = (0..fine.len()).map(|i| if spins[i % spins.len()] ^ (i % 7 == 3) { -1 } else { 1 }).collect();
        let boundary: Vec<i8> = region.boundary().iter().map(|b| sigma[fine.index_of(*b).unwrap()]).collect();
        let plaq = region.plaquette_values(&sigma);
        prop_assert_eq!(boundary.len() + plaq.len(), fine.len());
        prop_assert_eq!(region.reconstruct(&boundary, &plaq).unwrap(), sigma);
    }

    #[test]
    fn flip_identity_holds(beta in 0.0f64..2.0, index in 0u32..50) {
        let spec = GibbsSpec::meeting(Model::Spm, Region::square(2), beta, BoundaryCondition::Random { seed: 3, index });
        for x in spec.exterior_support().unwrap() {
            prop_assert!(flip_identity_residual(&spec, x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn partition_ratio_is_bounded(beta in 0.0f64..2.0, i in 0u32..40, j in 0u32..40) {
        let region = Region::square(2);
        let a = GibbsSpec::meeting(Model::Spm, region.clone(), beta, BoundaryCondition::Random { seed: 1, index: i });
        let b = a.clone().with_bc(BoundaryCondition::Random { seed: 1, index: j });
        let support = a.exterior_support().unwrap();
        let ta = a.bc.resolve(&support).unwrap();
        let tb = b.bc.resolve(&support).unwrap();
        let differs: HashSet<Site> = support.iter().zip(ta.iter().zip(&tb)).filter(|(_, (x, y))| x != y).map(|(s, _)| *s).collect();
        let k = plaquette_family(Model::Spm, &region, FamilyMode::Meeting)
            .unwrap()
            .plaquettes()
            .iter()
            .filter(|p| p.sites.iter().any(|s| differs.contains(s)))
            .count();
        let log_ratio = partition_function(&a).unwrap() - partition_function(&b).unwrap();
        prop_assert!(log_ratio.abs() <= 2.0 * beta * Model::Spm.half_norm() * k as f64 + 1e-12);
    }
}

#[test]
fn gamma_sets_cover_the_extended_triangle_twice() {
    for n in 0..=64u32 {
        let mut count = std::collections::HashMap::new();
        for j in -1..=n as i32 {
            let g = gamma_set(n, j).unwrap();
            assert_eq!(g.len(), n as usize + 2);
            for z in g {
                *count.entry(z).or_insert(0) += 1;
            }
        }
        let ext = Region::extended_triangle(n);
        assert_eq!(count.len(), ext.len());
        for z in ext.sites() {
            let want = if z.x2 == -1 { 1 } else { 2 };
            assert_eq!(count[z], want, "n {n} z {z}");
        }
    }
}

#[test]
fn row_and_column_flips_preserve_the_partition_function() {
    for n in [2u32, 3] {
        for beta in [0.4, 1.3] {
            let spec = GibbsSpec::meeting(Model::Spm, Region::square(n), beta, BoundaryCondition::AllPlus);
            let z = partition_function(&spec).unwrap();
            for r in 0..=n as i32 + 1 {
                for bc in [
                    BoundaryCondition::Row { x2: r },
                    BoundaryCondition::Column { x1: r },
                    BoundaryCondition::Cross { x1: r, x2: n as i32 + 1 - r },
                ] {
                    let zz = partition_function(&spec.clone().with_bc(bc.clone())).unwrap();
                    assert!((z - zz).abs() < 1e-12, "{bc:?}: {z} vs {zz}");
                }
            }
        }
    }
}

#[test]
fn dlr_consistency_on_the_inner_ring() {
    let beta = 0.8;
    let q3 = GibbsSpec::meeting(Model::Spm, Region::square(3), beta, BoundaryCondition::Random { seed: 11, index: 4 });
    let center = Site::new(2, 2);
    let ring: Vec<Site> = Region::square(3).sites().iter().copied().filter(|&s| s != center).collect();
    let mut sites = vec![center];
    sites.extend(&ring);
    let joint = marginal(&q3, &sites).unwrap();
    for eta in 0..1usize << ring.len() {
        let p_plus = joint[eta << 1];
        let p_minus = joint[(eta << 1) | 1];
        let cond = p_minus / (p_plus + p_minus);
        let bc = BoundaryCondition::explicit(ring.iter().enumerate().map(|(j, &s)| (s, if eta >> j & 1 == 1 { -1 } else { 1 })));
        let q1 = GibbsSpec::meeting(Model::Spm, Region::new([center]), beta, bc);
        let m = marginal(&q1, &[center]).unwrap();
        assert!((cond - m[1]).abs() < 1e-12, "eta {eta}: {cond} vs {}", m[1]);
    }
}

#[test]
fn pascal_rank_is_full() {
    for n in 0..=32 {
        let b = tpm_pascal_basis(n).unwrap();
        assert_eq!(b.rank(), n as usize + 2);
        assert!(b.relations().is_empty());
    }
}

#[test]
fn row_column_generators_have_one_relation() {
    for ell in [1u32, 2] {
        let g = plus_bc_generators(ell).unwrap();
        let rel = g.relations();
        assert_eq!(rel.len(), 1);
        assert_eq!(rel[0].count_ones(..), g.len());
    }
}

#[test]
fn economic_inequality() {
    for n in 1..=8 {
        let r = plaquette::cycles::economic_check(n).unwrap();
        assert!(r.ok(), "n {n}: {r:?}");
    }
}

#[test]
fn stripe_basis_spans_the_cycle_space() {
    for n in 1..=6 {
        let stripes = spm_stripe_basis(n).unwrap();
        let full = plaquette::cycles::cycle_space(Model::Spm, &Region::square(n), FamilyMode::Meeting).unwrap();
        assert_eq!(stripes.rank(), full.rank());
        assert_eq!(stripes.rank(), 2 * n as usize + 1);
    }
}

#[test]
fn vertex_sum_of_nothing_is_empty() {
    assert!(vertex_sum(Model::Spm, &[]).is_empty());
}

#[test]
fn alpha_w_sizes_match_the_construction() {
    use plaquette::cycles::{alpha_star, alpha_w_cardinality, alpha_w_delta_cardinality};
    for ell in 1..=3u32 {
        let g = plus_bc_generators(ell).unwrap();
        let l = 2 * ell as usize + 2;
        let h = l / 2;
        let star = g.parity_set(&alpha_star(ell)).unwrap();
        // rows run bottom to top, columns left to right
        for mask in 0u32..1 << (2 * l) {
            if ell == 3 && mask % 97 != 0 {
                continue;
            }
            let mut w = plaquette::f2::ParitySet::empty(g.universe());
            for (i, gen) in g.generators.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    w.add(gen);
                }
            }
            let bits = |lo: usize, hi: usize| (lo..hi).filter(|&i| mask >> i & 1 == 1).count() as u32;
            let (u, v) = (bits(0, h), bits(h, l));
            let (j, k) = (bits(l, l + h), bits(l + h, 2 * l));
            assert_eq!(w.len() as i64, alpha_w_cardinality(ell, u + v, j + k), "ell {ell} mask {mask:x}");
            assert_eq!(w.sum(&star).len() as i64, alpha_w_delta_cardinality(ell, u, v, j, k), "ell {ell} mask {mask:x}");
        }
    }
}

#[test]
fn finite_plus_correlations_approach_the_infinite_volume_value() {
    use plaquette::correlators::{multispin_infinite, multispin_plus_finite, PlusMethod};
    let a = Model::Spm.plaquette_sites(Site::new(-1, -1)).to_vec();
    for (beta, tol) in [(1.0, 0.05), (3.0, 0.2)] {
        let inf = multispin_infinite(Model::Spm, &a, beta).unwrap().value;
        let mut last = f64::INFINITY;
        for ell in 1..=3 {
            let fin = multispin_plus_finite(Model::Spm, &Region::centered(ell), &a, beta, PlusMethod::CycleExpansion).unwrap().value;
            let gap = (fin - inf).abs();
            assert!(gap <= last + 1e-12, "beta {beta} ell {ell}: {gap} after {last}");
            last = gap;
        }
        assert!(last < tol, "beta {beta}: gap {last}");
    }
}

#[test]
fn free_sampler_statistics() {
    use plaquette::renorm::{q_of_beta, FreeSampler};
    let region = DecimationRegion::spm(2, 2).unwrap();
    let mut s = FreeSampler::new(region, 0.0, 5, 0);
    let n = 20_000;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += s.sample().iter().map(|&x| x as f64).sum::<f64>();
    }
    let sites = region.fine().len() as f64;
    assert!((sum / (n as f64 * sites)).abs() < 4.0 / (n as f64 * sites).sqrt());

    let beta = 1.2;
    let q = q_of_beta(beta);
    let mut s = FreeSampler::new(region, beta, 5, 1);
    let (mut defects, mut total) = (0usize, 0usize);
    for _ in 0..n {
        let p = region.plaquette_values(&s.sample());
        defects += p.iter().filter(|&&x| x < 0).count();
        total += p.len();
    }
    let f = defects as f64 / total as f64;
    assert!((f - q).abs() < 4.0 * (q * (1.0 - q) / total as f64).sqrt(), "{f} vs {q}");
}

#[test]
fn free_sampler_matches_enumeration() {
    let region = DecimationRegion::spm(1, 1).unwrap();
    let fine = region.fine();
    let beta = 0.9;
    let sites: Vec<Site> = fine.sites().to_vec();
    let p = marginal(&GibbsSpec::free(Model::Spm, fine.clone(), beta), &sites).unwrap();
    let mut counts = vec![0u64; p.len()];
    let n = 40_000;
    let mut s = plaquette::renorm::FreeSampler::new(region, beta, 9, 0);
    for _ in 0..n {
        let x = s.sample();
        let idx = x.iter().enumerate().fold(0usize, |acc, (j, &v)| acc | ((v < 0) as usize) << j);
        counts[idx] += 1;
    }
    let chi2: f64 = counts.iter().zip(&p).map(|(&c, &pi)| (c as f64 - n as f64 * pi).powi(2) / (n as f64 * pi)).sum();
    let df = (p.len() - 1) as f64;
    // about the 0.999 quantile
    assert!(chi2 < df + 4.0 * (2.0 * df).sqrt() + 4.0, "chi2 {chi2} with {df} dof");
}

#[test]
fn torus_single_spin_vanishes() {
    use plaquette::mcmc::{estimate_multispin, ChainSpec};
    let spec = ChainSpec::torus(Model::Spm, 8, 8, 1.0, 17).with_sweeps(20_000, 500);
    let e = estimate_multispin(&spec, &[Site::ORIGIN]).unwrap();
    assert!(e.within(0.0, 4.0), "{e:?}");
}
