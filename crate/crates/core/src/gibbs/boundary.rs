use std::collections::HashMap;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Region, Site};

/// Rule producing spins outside a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    AllPlus,
    AllMinus,
    /// No exterior spins; only plaquettes inside the region may be active.
    Free,
    /// Spins given site by site; a site that is needed but absent is an error.
    Explicit { spins: Vec<(Site, i8)> },
    /// `(-1)^(x1 + x2)`.
    Checkerboard,
    /// All plus except the row `x2`.
    Row { x2: i32 },
    /// All plus except the column `x1`.
    Column { x1: i32 },
    /// All plus except the row `x2` and the column `x1` (their crossing is plus).
    Cross { x1: i32, x2: i32 },
    /// Minus on odd rows.
    AlternatingRows,
    /// Independent fair spins from a counter-based stream keyed by the site.
    Random { seed: u64, index: u32 },
}

fn zigzag(v: i32) -> u64 {
    (v.wrapping_shl(1) ^ (v >> 31)) as u32 as u64
}

/// The `index`-th random boundary condition of stream `seed` evaluated at `s`.
/// ChaCha8 with `stream = index` and word position derived from the site, so a
/// given site always reads the same word.
pub fn random_spin(seed: u64, index: u32, s: Site) -> i8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(((zigzag(s.x1) << 32) | zigzag(s.x2)) as u128);
    if rng.next_u32() & 1 == 0 {
        1
    } else {
        -1
    }
}

impl BoundaryCondition {
    pub fn explicit(spins: impl IntoIterator<Item = (Site, i8)>) -> Self {
        BoundaryCondition::Explicit { spins: spins.into_iter().collect() }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, BoundaryCondition::Free)
    }

    /// Spins of the given exterior sites, in order.
    pub fn resolve(&self, sites: &[Site]) -> Result<Vec<i8>> {
        let lookup: HashMap<Site, i8> = match self {
            BoundaryCondition::Explicit { spins } => spins.iter().copied().collect(),
            _ => HashMap::new(),
        };
        sites
            .iter()
            .map(|&s| match self {
                BoundaryCondition::AllPlus => Ok(1),
                BoundaryCondition::AllMinus => Ok(-1),
                BoundaryCondition::Free => Err(Error::FreeNeedsInside),
                BoundaryCondition::Explicit { .. } => lookup.get(&s).copied().ok_or(Error::MissingBoundarySpin(s)),
                BoundaryCondition::Checkerboard => Ok(if (s.x1 + s.x2).rem_euclid(2) == 0 { 1 } else { -1 }),
                BoundaryCondition::Row { x2 } => Ok(if s.x2 == *x2 { -1 } else { 1 }),
                BoundaryCondition::Column { x1 } => Ok(if s.x1 == *x1 { -1 } else { 1 }),
                BoundaryCondition::Cross { x1, x2 } => Ok(if (s.x1 == *x1) != (s.x2 == *x2) { -1 } else { 1 }),
                BoundaryCondition::AlternatingRows => Ok(if s.x2.rem_euclid(2) == 1 { -1 } else { 1 }),
                BoundaryCondition::Random { seed, index } => Ok(random_spin(*seed, *index, s)),
            })
            .collect()
    }

    /// Materializes the condition on `sites` and flips the spin at `x`.
    pub fn flipped_at(&self, sites: &[Site], x: Site) -> Result<BoundaryCondition> {
        let spins = self.resolve(sites)?;
        let mut found = false;
        let out = sites
            .iter()
            .zip(spins)
            .map(|(&s, v)| {
                if s == x {
                    found = true;
                    (s, -v)
                } else {
                    (s, v)
                }
            })
            .collect();
        if !found {
            return Err(Error::MissingBoundarySpin(x));
        }
        Ok(BoundaryCondition::Explicit { spins: out })
    }
}

/// Whether a reported supremum is exact or only a lower bound.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    Exact,
    LowerBound,
}

impl Exactness {
    pub fn and(self, other: Exactness) -> Exactness {
        if self == Exactness::Exact && other == Exactness::Exact {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Exactness::Exact => "exact",
            Exactness::LowerBound => "lower-bound",
        }
    }
}

/// Boundary conditions over which a supremum is taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryFamily {
    /// Every assignment of the exterior support when it has at most
    /// [`EXHAUSTIVE_LIMIT`] sites; otherwise the declared family.
    Exhaustive,
    /// All plus, all minus, checkerboard, four stripe patterns through the
    /// centre of the region, and `random` seeded random conditions.
    Declared { random: u32, seed: u64 },
    List { members: Vec<BoundaryCondition> },
}

pub const EXHAUSTIVE_LIMIT: usize = 20;

impl BoundaryFamily {
    pub fn declared(random: u32, seed: u64) -> Self {
        BoundaryFamily::Declared { random, seed }
    }

    /// Concrete members for a region with the given exterior support, plus
    /// whether they exhaust every assignment of that support.
    pub fn members(&self, region: &Region, support: &[Site]) -> (Vec<BoundaryCondition>, Exactness) {
        match self {
            BoundaryFamily::Exhaustive if support.len() <= EXHAUSTIVE_LIMIT => {
                let members = (0u64..1 << support.len())
                    .map(|bits| {
                        BoundaryCondition::explicit(
                            support
                                .iter()
                                .enumerate()
                                .map(|(i, &s)| (s, if bits >> i & 1 == 1 { -1 } else { 1 })),
                        )
                    })
                    .collect();
                (members, Exactness::Exact)
            }
            BoundaryFamily::Exhaustive => (declared_members(region, 8, 0), Exactness::LowerBound),
            BoundaryFamily::Declared { random, seed } => (declared_members(region, *random, *seed), Exactness::LowerBound),
            BoundaryFamily::List { members } => (members.clone(), Exactness::LowerBound),
        }
    }
}

fn declared_members(region: &Region, random: u32, seed: u64) -> Vec<BoundaryCondition> {
    let (lo, hi) = region.bounding_box().unwrap_or_default();
    let c1 = (lo.x1 + hi.x1).div_euclid(2);
    let c2 = (lo.x2 + hi.x2).div_euclid(2);
    let mut v = vec![
        BoundaryCondition::AllPlus,
        BoundaryCondition::AllMinus,
        BoundaryCondition::Checkerboard,
        BoundaryCondition::Row { x2: c2 },
        BoundaryCondition::Column { x1: c1 },
        BoundaryCondition::Cross { x1: c1, x2: c2 },
        BoundaryCondition::AlternatingRows,
    ];
    v.extend((0..random).map(|index| BoundaryCondition::Random { seed, index }));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_is_site_consistent() {
        let a = random_spin(7, 3, Site::new(-4, 9));
        for _ in 0..3 {
            assert_eq!(random_spin(7, 3, Site::new(-4, 9)), a);
        }
        let n_plus = (0..400).filter(|&i| random_spin(1, 0, Site::new(i, -i)) == 1).count();
        assert!((150..250).contains(&n_plus));
    }

    #[test]
    fn explicit_missing_is_error() {
        let bc = BoundaryCondition::explicit([(Site::new(0, 0), 1)]);
        assert_eq!(bc.resolve(&[Site::new(0, 1)]).unwrap_err(), Error::MissingBoundarySpin(Site::new(0, 1)));
    }

    #[test]
    fn exhaustive_members() {
        let r = Region::square(1);
        let support = vec![Site::new(0, 0), Site::new(0, 1)];
        let (m, ex) = BoundaryFamily::Exhaustive.members(&r, &support);
        assert_eq!(m.len(), 4);
        assert_eq!(ex, Exactness::Exact);
        let (m, ex) = BoundaryFamily::declared(3, 1).members(&r, &support);
        assert_eq!(m.len(), 10);
        assert_eq!(ex, Exactness::LowerBound);
    }
}
