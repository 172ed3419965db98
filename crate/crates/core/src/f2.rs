//! Linear algebra over GF(2) on fixed-width bit vectors.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

/// A set of plaquette indices over a fixed universe; addition is symmetric
/// difference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParitySet(FixedBitSet);

impl ParitySet {
    pub fn empty(universe: usize) -> Self {
        ParitySet(FixedBitSet::with_capacity(universe))
    }

    pub fn from_indices(universe: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in idx {
            s.0.toggle(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(i)
    }

    pub fn toggle(&mut self, i: usize) {
        self.0.toggle(i);
    }

    /// `self += other` (symmetric difference).
    pub fn add(&mut self, other: &ParitySet) {
        self.0.symmetric_difference_with(&other.0);
    }

    pub fn sum(&self, other: &ParitySet) -> ParitySet {
        let mut s = self.clone();
        s.add(other);
        s
    }

    pub fn intersection_len(&self, other: &ParitySet) -> usize {
        self.0.intersection_count(&other.0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.0
    }
}

impl From<FixedBitSet> for ParitySet {
    fn from(b: FixedBitSet) -> Self {
        ParitySet(b)
    }
}

/// Row echelon form of a generator list, remembering how each reduced row is
/// built from the original generators.
#[derive(Clone, Debug)]
pub struct Span {
    width: usize,
    generators: usize,
    // (reduced vector, combination of generators, pivot bit)
    rows: Vec<(FixedBitSet, FixedBitSet, usize)>,
    independent: Vec<usize>,
    relations: Vec<FixedBitSet>,
}

impl Span {
    /// Eliminates `vectors` (all of length `width`) in order.
    pub fn new(vectors: &[FixedBitSet], width: usize) -> Span {
        let n = vectors.len();
        let mut span = Span { width, generators: n, rows: Vec::new(), independent: Vec::new(), relations: Vec::new() };
        for (g, v) in vectors.iter().enumerate() {
            assert_eq!(v.len(), width, "vector width mismatch");
            let mut red = v.clone();
            let mut combo = FixedBitSet::with_capacity(n);
            combo.insert(g);
            span.reduce(&mut red, &mut combo);
            match red.minimum() {
                Some(p) => {
                    span.rows.push((red, combo, p));
                    span.independent.push(g);
                }
                None => span.relations.push(combo),
            }
        }
        span
    }

    fn reduce(&self, v: &mut FixedBitSet, combo: &mut FixedBitSet) {
        for (r, c, p) in &self.rows {
            if v.contains(*p) {
                v.symmetric_difference_with(r);
                combo.symmetric_difference_with(c);
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Indices of the generators kept as pivots, in input order.
    pub fn independent(&self) -> &[usize] {
        &self.independent
    }

    /// A basis of the linear relations among the generators.
    pub fn relations(&self) -> &[FixedBitSet] {
        &self.relations
    }

    pub fn contains(&self, target: &FixedBitSet) -> bool {
        self.residual(target).is_clear()
    }

    /// What is left of `target` after reduction; empty iff it lies in the span.
    pub fn residual(&self, target: &FixedBitSet) -> FixedBitSet {
        let mut v = target.clone();
        let mut c = FixedBitSet::with_capacity(self.generators);
        self.reduce(&mut v, &mut c);
        v
    }

    /// A combination of generators summing to `target`, if one exists.
    pub fn solve(&self, target: &FixedBitSet) -> Option<FixedBitSet> {
        let mut v = target.clone();
        let mut c = FixedBitSet::with_capacity(self.generators);
        self.reduce(&mut v, &mut c);
        v.is_clear().then_some(c)
    }
}

/// Sum of the listed vectors.
pub fn combine(vectors: &[FixedBitSet], coeffs: &FixedBitSet, width: usize) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(width);
    for i in coeffs.ones() {
        out.symmetric_difference_with(&vectors[i]);
    }
    out
}

/// Basis of `{x : Σ x_i columns_i = 0}` where every column has length `rows`.
pub fn nullspace(columns: &[FixedBitSet], rows: usize) -> Vec<FixedBitSet> {
    Span::new(columns, rows).relations().to_vec()
}

/// Visits every element of the span of `basis` (assumed independent) in
/// Gray-code order. The work is split into chunks by fixing the top bits of
/// the Gray index; chunk results are merged in chunk order so the outcome is
/// independent of the thread count.
pub fn fold_span<A, I, F, M>(basis: &[FixedBitSet], width: usize, init: I, visit: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &FixedBitSet) + Sync,
    M: Fn(A, A) -> A,
{
    let k = basis.len();
    let top = k.min(6);
    let low = k - top;
    let chunks: Vec<A> = (0u64..1 << top)
        .into_par_iter()
        .map(|prefix| {
            let mut acc = init();
            let start = (prefix << low) ^ ((prefix << low) >> 1);
            let mut cur = FixedBitSet::with_capacity(width);
            for (i, b) in basis.iter().enumerate() {
                if start >> i & 1 == 1 {
                    cur.symmetric_difference_with(b);
                }
            }
            visit(&mut acc, &cur);
            for step in 1u64..1 << low {
                cur.symmetric_difference_with(&basis[step.trailing_zeros() as usize]);
                visit(&mut acc, &cur);
            }
            acc
        })
        .collect();
    let mut it = chunks.into_iter();
    let first = it.next().expect("at least one chunk");
    it.fold(first, merge)
}
