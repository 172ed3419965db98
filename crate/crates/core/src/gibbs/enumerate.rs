//! Full enumeration of spin configurations of a small region.
//!
//! Configurations are bit masks over the sorted sites of the region, bit `i`
//! set meaning `σ_i = -1`. The energy `E(σ) = Σ_B m_B s_B Π_{x ∈ B∩Λ} σ_x` is
//! an integer (`m_B` the multiplicity, `s_B` the product of boundary spins),
//! and the Gibbs weight is `exp(β E / 2)`. Every pass accumulates per-level
//! sums, so results for any `β` follow from one enumeration and integer
//! counts are exact.

use rayon::prelude::*;

use crate::numeric::LogSum;

/// One plaquette term after the boundary has been substituted.
#[derive(Clone, Debug)]
pub struct Term {
    pub mask: u64,
    pub sign: i8,
    pub multiplicity: i32,
}

#[derive(Clone, Debug)]
pub struct Enumerator {
    n: usize,
    terms: Vec<Term>,
    site_terms: Vec<Vec<u32>>,
    max_energy: i64,
}

impl Enumerator {
    pub fn new(n: usize, terms: Vec<Term>) -> Enumerator {
        assert!(n < 64, "at most 63 sites");
        let mut site_terms = vec![Vec::new(); n];
        for (t, term) in terms.iter().enumerate() {
            for (i, st) in site_terms.iter_mut().enumerate() {
                if term.mask >> i & 1 == 1 {
                    st.push(t as u32);
                }
            }
        }
        let max_energy = terms.iter().map(|t| t.multiplicity as i64).sum();
        Enumerator { n, terms, site_terms, max_energy }
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn configurations(&self) -> u64 {
        1 << self.n
    }

    fn term_value(&self, t: &Term, config: u64) -> i8 {
        if (config & t.mask).count_ones() & 1 == 1 {
            -t.sign
        } else {
            t.sign
        }
    }

    pub fn energy(&self, config: u64) -> i64 {
        self.terms
            .iter()
            .map(|t| t.multiplicity as i64 * self.term_value(t, config) as i64)
            .sum()
    }

    /// Number of energy levels, `2 max|E| + 1`.
    pub fn levels(&self) -> usize {
        (2 * self.max_energy + 1) as usize
    }

    fn level(&self, e: i64) -> usize {
        (e + self.max_energy) as usize
    }

    /// Visits every configuration with its energy. Chunks fix the top bits and
    /// walk the rest in Gray-code order; chunk accumulators are merged in
    /// chunk order.
    pub fn fold<A, I, F, M>(&self, init: I, visit: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, u64, i64) + Sync,
        M: Fn(A, A) -> A,
    {
        let top = self.n.min(6);
        let low = self.n - top;
        let chunks: Vec<A> = (0u64..1 << top)
            .into_par_iter()
            .map(|prefix| {
                let mut acc = init();
                let mut config = prefix << low;
                let mut vals: Vec<i8> = self.terms.iter().map(|t| self.term_value(t, config)).collect();
                let mut e: i64 = self
                    .terms
                    .iter()
                    .zip(&vals)
                    .map(|(t, &v)| t.multiplicity as i64 * v as i64)
                    .sum();
                visit(&mut acc, config, e);
                for step in 1u64..1 << low {
                    let i = step.trailing_zeros() as usize;
                    config ^= 1 << i;
                    for &t in &self.site_terms[i] {
                        let t = t as usize;
                        e -= 2 * self.terms[t].multiplicity as i64 * vals[t] as i64;
                        vals[t] = -vals[t];
                    }
                    visit(&mut acc, config, e);
                }
                acc
            })
            .collect();
        let mut it = chunks.into_iter();
        let first = it.next().expect("at least one chunk");
        it.fold(first, merge)
    }

    /// Number of configurations at each energy level.
    pub fn density_of_states(&self) -> Levels {
        let counts = self.fold(
            || vec![0u64; self.levels()],
            |acc, _, e| acc[self.level(e)] += 1,
            add_vec,
        );
        Levels { max_energy: self.max_energy, counts }
    }

    /// Per-level sums of several observables together with the level counts.
    pub fn level_sums<F>(&self, k: usize, obs: F) -> LevelSums
    where
        F: Fn(u64, &mut [f64]) + Sync,
    {
        let levels = self.levels();
        let (counts, sums, _) = self.fold(
            || (vec![0u64; levels], vec![0.0f64; levels * k], vec![0.0f64; k]),
            |acc, c, e| {
                let l = self.level(e);
                acc.0[l] += 1;
                obs(c, &mut acc.2);
                for j in 0..k {
                    acc.1[l * k + j] += acc.2[j];
                }
            },
            |mut a, b| {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    *x += y;
                }
                for (x, y) in a.1.iter_mut().zip(&b.1) {
                    *x += y;
                }
                a
            },
        );
        LevelSums { levels: Levels { max_energy: self.max_energy, counts }, k, sums }
    }

    /// Counts of `(projected state, level)` pairs for a projection onto
    /// `states` classes.
    pub fn marginal_levels<P>(&self, states: usize, project: P) -> MarginalLevels
    where
        P: Fn(u64) -> usize + Sync,
    {
        let levels = self.levels();
        let table = self.fold(
            || vec![0u64; states * levels],
            |acc, c, e| acc[project(c) * levels + self.level(e)] += 1,
            add_vec,
        );
        MarginalLevels { max_energy: self.max_energy, levels, states, table }
    }
}

fn add_vec(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    a
}

fn energy_of(level: usize, max_energy: i64) -> i64 {
    level as i64 - max_energy
}

/// Configuration counts per energy level.
#[derive(Clone, Debug)]
pub struct Levels {
    max_energy: i64,
    counts: Vec<u64>,
}

impl Levels {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `(energy, count)` pairs with nonzero count.
    pub fn occupied(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, &c)| (energy_of(l, self.max_energy), c))
    }

    pub fn log_partition(&self, beta: f64) -> f64 {
        let mut s = LogSum::new();
        for (e, c) in self.occupied() {
            s.push((c as f64).ln() + 0.5 * beta * e as f64);
        }
        s.value()
    }

    fn top(&self) -> i64 {
        self.occupied().map(|(e, _)| e).max().unwrap_or(0)
    }

    /// Normalized weights `exp(β(E - E_top)/2)` per level.
    fn weights(&self, beta: f64) -> Vec<f64> {
        let top = self.top();
        (0..self.counts.len())
            .map(|l| {
                if self.counts[l] == 0 {
                    0.0
                } else {
                    (0.5 * beta * (energy_of(l, self.max_energy) - top) as f64).exp()
                }
            })
            .collect()
    }
}

/// Per-level sums of `k` observables.
#[derive(Clone, Debug)]
pub struct LevelSums {
    pub levels: Levels,
    k: usize,
    sums: Vec<f64>,
}

impl LevelSums {
    pub fn expectations(&self, beta: f64) -> Vec<f64> {
        let w = self.levels.weights(beta);
        let z: f64 = self.levels.counts.iter().zip(&w).map(|(&c, &w)| c as f64 * w).sum();
        (0..self.k)
            .map(|j| {
                let s: f64 = w.iter().enumerate().map(|(l, &w)| self.sums[l * self.k + j] * w).sum();
                s / z
            })
            .collect()
    }
}

/// Counts per `(state, level)`.
#[derive(Clone, Debug)]
pub struct MarginalLevels {
    max_energy: i64,
    levels: usize,
    states: usize,
    table: Vec<u64>,
}

impl MarginalLevels {
    pub fn states(&self) -> usize {
        self.states
    }

    /// Probability of each projected state at inverse temperature `beta`.
    pub fn probabilities(&self, beta: f64) -> Vec<f64> {
        let mut counts = vec![0u64; self.levels];
        for s in 0..self.states {
            for l in 0..self.levels {
                counts[l] += self.table[s * self.levels + l];
            }
        }
        let lv = Levels { max_energy: self.max_energy, counts };
        let w = lv.weights(beta);
        let z: f64 = lv.counts.iter().zip(&w).map(|(&c, &w)| c as f64 * w).sum();
        (0..self.states)
            .map(|s| {
                let row = &self.table[s * self.levels..(s + 1) * self.levels];
                row.iter().zip(&w).map(|(&c, &w)| c as f64 * w).sum::<f64>() / z
            })
            .collect()
    }
}
