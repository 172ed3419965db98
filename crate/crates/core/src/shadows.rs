//! Shadows on a screen and minimal plaquette decompositions.
//!
//! A set `A` is equivalent to the empty set (`A ∼ ∅`) when it is the vertex
//! sum of finitely many plaquettes. Sliding every vertex of `A` onto a screen
//! through a family of plaquettes turns this into a finite check, and the
//! plaquettes used an odd number of times form the unique minimal
//! decomposition.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::f2::Span;
use crate::geometry::{bounding_box, Model, Region, Site};

/// `1` iff `C(row, col)` is odd, by bitwise domination.
pub fn pascal_parity(row: u64, col: i64) -> bool {
    col >= 0 && (col as u64) <= row && (col as u64) & !row == 0
}

/// `{b : C(row, b) odd}` in increasing order.
pub fn odd_binomials(row: u64) -> Vec<i64> {
    // Submasks of `row`, enumerated downwards then reversed.
    let mut v = Vec::with_capacity(1 << row.count_ones());
    let mut s = row;
    loop {
        v.push(s as i64);
        if s == 0 {
            break;
        }
        s = (s - 1) & row;
    }
    v.reverse();
    v
}

/// Rows `0..rows` of Pascal's triangle mod 2 built by the recurrence
/// `r_{k+1} = r_k ⊕ (r_k << 1)`.
pub fn pascal_rows(rows: usize) -> Vec<FixedBitSet> {
    let mut out = Vec::with_capacity(rows);
    let mut cur = FixedBitSet::with_capacity(rows + 1);
    if rows == 0 {
        return out;
    }
    cur.insert(0);
    for k in 0..rows {
        out.push(cur.clone());
        if k + 1 < rows {
            let mut next = FixedBitSet::with_capacity(rows + 1);
            for b in cur.ones() {
                next.toggle(b);
                next.toggle(b + 1);
            }
            cur = next;
        }
    }
    out
}

/// Where vertices are projected.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Screen {
    /// TPM: the horizontal line `x2 = height`, covering everything on or below it.
    Line { height: i32 },
    /// SPM: the two rays from `apex` bounding a quadrant. A negative corner
    /// covers `x ≤ apex` coordinatewise, a positive one `x ≥ apex`.
    Corner { positive: bool, apex: Site },
}

impl Screen {
    pub fn covers(&self, x: Site) -> bool {
        match *self {
            Screen::Line { height } => x.x2 <= height,
            Screen::Corner { positive: false, apex } => x.x1 <= apex.x1 && x.x2 <= apex.x2,
            Screen::Corner { positive: true, apex } => x.x1 >= apex.x1 && x.x2 >= apex.x2,
        }
    }

    fn check(&self, model: Model, x: Site) -> Result<()> {
        match (model, self) {
            (Model::Tpm, Screen::Line { .. }) | (Model::Spm, Screen::Corner { .. }) => {}
            _ => return Err(Error::Unsupported(format!("screen {self:?} for model {model}"))),
        }
        if !self.covers(x) {
            return Err(Error::ScreenDoesNotCover(x));
        }
        Ok(())
    }
}

/// The screen just beyond the bounding box of `a`: the line one row above it
/// (TPM) or the negative corner at its upper-right corner plus `(1, 1)` (SPM).
pub fn auto_screen(model: Model, a: &[Site]) -> Result<Screen> {
    let hi = bounding_box(a).map(|(_, hi)| hi).unwrap_or(Site::ORIGIN);
    match model {
        Model::Tpm => Ok(Screen::Line { height: hi.x2 + 1 }),
        Model::Spm => Ok(Screen::Corner { positive: false, apex: hi + Site::new(1, 1) }),
        Model::Rect { .. } => Err(Error::Unsupported("shadows exist for spm and tpm only".into())),
    }
}

/// Sites of the screen equivalent to `x`.
pub fn shadow(model: Model, x: Site, screen: &Screen) -> Result<Vec<Site>> {
    screen.check(model, x)?;
    Ok(match *screen {
        Screen::Line { height } => {
            let rows = (height - x.x2) as u64;
            odd_binomials(rows).into_iter().map(|b| Site::new(x.x1 + b as i32, height)).collect()
        }
        Screen::Corner { apex, .. } => {
            if x.x1 == apex.x1 || x.x2 == apex.x2 {
                vec![x]
            } else {
                let mut v = vec![Site::new(apex.x1, x.x2), Site::new(x.x1, apex.x2), apex];
                v.sort();
                v
            }
        }
    })
}

/// Bases of the plaquettes between `x` and the screen; their vertex sum is
/// `{x} + shadow(x)`. TPM rows come from the Pascal recurrence, never from a
/// stored triangle.
pub fn shadow_plaquettes(model: Model, x: Site, screen: &Screen) -> Result<Vec<Site>> {
    screen.check(model, x)?;
    let mut out = Vec::new();
    match *screen {
        Screen::Line { height } => {
            let rows = (height - x.x2) as usize;
            let mut row: Vec<i64> = vec![0];
            for k in 0..rows {
                out.extend(row.iter().map(|&c| Site::new(x.x1 + c as i32, x.x2 + k as i32)));
                // next odd set: symmetric difference of row and row + 1
                let mut next: Vec<i64> = Vec::with_capacity(row.len() * 2);
                let (mut i, mut j) = (0, 0);
                while i < row.len() || j < row.len() {
                    let a = row.get(i).copied();
                    let b = row.get(j).map(|c| c + 1);
                    match (a, b) {
                        (Some(a), Some(b)) if a == b => {
                            i += 1;
                            j += 1;
                        }
                        (Some(a), Some(b)) if a < b => {
                            next.push(a);
                            i += 1;
                        }
                        (Some(_), Some(b)) | (None, Some(b)) => {
                            next.push(b);
                            j += 1;
                        }
                        (Some(a), None) => {
                            next.push(a);
                            i += 1;
                        }
                        (None, None) => unreachable!(),
                    }
                }
                row = next;
            }
        }
        Screen::Corner { positive, apex } => {
            let (x1s, x2s) = if positive { (apex.x1..x.x1, apex.x2..x.x2) } else { (x.x1..apex.x1, x.x2..apex.x2) };
            for b2 in x2s {
                for b1 in x1s.clone() {
                    out.push(Site::new(b1, b2));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Sites covered an odd number of times by the listed plaquettes.
pub fn vertex_sum(model: Model, bases: &[Site]) -> Vec<Site> {
    let mut odd: HashSet<Site> = HashSet::new();
    for &b in bases {
        for s in model.plaquette_sites(b) {
            if !odd.remove(&s) {
                odd.insert(s);
            }
        }
    }
    let mut v: Vec<Site> = odd.into_iter().collect();
    v.sort();
    v
}

fn toggle_all(set: &mut HashSet<Site>, items: impl IntoIterator<Item = Site>) {
    for s in items {
        if !set.remove(&s) {
            set.insert(s);
        }
    }
}

fn normalize(a: &[Site]) -> Vec<Site> {
    let mut odd = HashSet::new();
    toggle_all(&mut odd, a.iter().copied());
    let mut v: Vec<Site> = odd.into_iter().collect();
    v.sort();
    v
}

/// `A ∼ ∅`, decided on the automatically chosen screen.
pub fn is_null_equivalent(model: Model, a: &[Site]) -> Result<bool> {
    match model {
        Model::Rect { .. } => Ok(brute_force_decomposition(model, a).is_ok()),
        _ => is_null_equivalent_with(model, a, &auto_screen(model, a)?),
    }
}

pub fn is_null_equivalent_with(model: Model, a: &[Site], screen: &Screen) -> Result<bool> {
    let mut acc = HashSet::new();
    for &x in &normalize(a) {
        toggle_all(&mut acc, shadow(model, x, screen)?);
    }
    Ok(acc.is_empty())
}

/// The minimal plaquette decomposition of a set and its size `n(A)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub bases: Vec<Site>,
    pub size: usize,
}

impl Decomposition {
    fn new(mut bases: Vec<Site>) -> Self {
        bases.sort();
        let size = bases.len();
        Decomposition { bases, size }
    }
}

/// The minimal decomposition of `a`; sites listed twice cancel.
pub fn minimal_decomposition(model: Model, a: &[Site]) -> Result<Decomposition> {
    match model {
        Model::Rect { .. } => brute_force_decomposition(model, a),
        _ => minimal_decomposition_with(model, a, &auto_screen(model, a)?),
    }
}

pub fn minimal_decomposition_with(model: Model, a: &[Site], screen: &Screen) -> Result<Decomposition> {
    let a = normalize(a);
    if !is_null_equivalent_with(model, &a, screen)? {
        return Err(Error::NotEquivalent);
    }
    let mut odd = HashSet::new();
    for &x in &a {
        toggle_all(&mut odd, shadow_plaquettes(model, x, screen)?);
    }
    let d = Decomposition::new(odd.into_iter().collect());
    if vertex_sum(model, &d.bases) != a {
        return Err(Error::NotEquivalent);
    }
    Ok(d)
}

/// Decomposition by elimination over every plaquette whose bounding box fits
/// in the bounding box of `a`. Any model; the minimal decomposition always
/// lives there.
pub fn brute_force_decomposition(model: Model, a: &[Site]) -> Result<Decomposition> {
    let a = normalize(a);
    let Some((lo, hi)) = bounding_box(&a) else {
        return Ok(Decomposition::new(Vec::new()));
    };
    let (flo, fhi) = bounding_box(&model.fundamental()).expect("nonempty plaquette");
    let bbox = Region::rect(lo, (hi.x1 - lo.x1 + 1) as u32, (hi.x2 - lo.x2 + 1) as u32);
    let width = bbox.len();
    let mut bases = Vec::new();
    let mut vectors = Vec::new();
    for b2 in lo.x2 - flo.x2..=hi.x2 - fhi.x2 {
        for b1 in lo.x1 - flo.x1..=hi.x1 - fhi.x1 {
            let b = Site::new(b1, b2);
            let mut v = FixedBitSet::with_capacity(width);
            for s in model.plaquette_sites(b) {
                v.insert(bbox.index_of(s).expect("plaquette inside bounding box"));
            }
            bases.push(b);
            vectors.push(v);
        }
    }
    let mut target = FixedBitSet::with_capacity(width);
    for s in &a {
        target.insert(bbox.index_of(*s).expect("site in own bounding box"));
    }
    if vectors.is_empty() {
        return Err(Error::NotEquivalent);
    }
    let span = Span::new(&vectors, width);
    let coeffs = span.solve(&target).ok_or(Error::NotEquivalent)?;
    Ok(Decomposition::new(coeffs.ones().map(|i| bases[i]).collect()))
}

/// `A(z) = z1 − S(z2)` with `S(y) = {b : C(y+1, b) odd}`: the indices `j` of
/// the Pascal cycles `P_j` containing the plaquette based at `z`.
pub fn a_of_z(n: u32, z: Site) -> Result<Vec<i32>> {
    check_extended(n, z)?;
    let mut v: Vec<i32> = odd_binomials((z.x2 + 1) as u64).into_iter().map(|b| z.x1 - b as i32).collect();
    v.sort();
    Ok(v)
}

/// `{j : z + B* ∈ P_j}` read off the Pascal cycles row by row.
pub fn a_of_z_direct(n: u32, z: Site) -> Result<Vec<i32>> {
    check_extended(n, z)?;
    let rows = pascal_rows((z.x2 + 2) as usize);
    let row = &rows[(z.x2 + 1) as usize];
    Ok((-1..=n as i32).filter(|&j| z.x1 - j >= 0 && row.contains((z.x1 - j) as usize)).collect())
}

fn check_extended(n: u32, z: Site) -> Result<()> {
    let n = n as i32;
    let inside = (z.x2 == -1 && (-1..=n).contains(&z.x1)) || (0 <= z.x2 && z.x2 <= z.x1 && z.x1 <= n);
    if inside {
        Ok(())
    } else {
        Err(invalid(format!("{z} is not in the extended triangle of size {n}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_rows() {
        assert!(pascal_parity(0, 0));
        let odd: Vec<i64> = (0..=6).filter(|&c| pascal_parity(6, c)).collect();
        assert_eq!(odd, vec![0, 2, 4, 6]);
        assert_eq!(odd_binomials(6), odd);
        for k in 0..6 {
            let r = 1u64 << k;
            assert_eq!(odd_binomials(r), vec![0, r as i64]);
        }
        let rows = pascal_rows(40);
        for (k, row) in rows.iter().enumerate() {
            for c in 0..=40 {
                assert_eq!(row.contains(c), pascal_parity(k as u64, c as i64), "row {k} col {c}");
            }
        }
    }

    #[test]
    fn tpm_shadow_example() {
        let s = shadow(Model::Tpm, Site::new(0, -1), &Screen::Line { height: 5 }).unwrap();
        assert_eq!(s, vec![Site::new(0, 5), Site::new(2, 5), Site::new(4, 5), Site::new(6, 5)]);
        let x = Site::new(3, 5);
        assert_eq!(shadow(Model::Tpm, x, &Screen::Line { height: 5 }).unwrap(), vec![x]);
        assert!(shadow_plaquettes(Model::Tpm, x, &Screen::Line { height: 5 }).unwrap().is_empty());
        assert_eq!(
            shadow(Model::Tpm, Site::new(0, 6), &Screen::Line { height: 5 }).unwrap_err(),
            Error::ScreenDoesNotCover(Site::new(0, 6))
        );
    }

    #[test]
    fn spm_shadow_example() {
        let screen = Screen::Corner { positive: false, apex: Site::new(5, 5) };
        let s = shadow(Model::Spm, Site::new(2, 3), &screen).unwrap();
        assert_eq!(s, vec![Site::new(5, 3), Site::new(2, 5), Site::new(5, 5)]);
        let b = shadow_plaquettes(Model::Spm, Site::new(2, 3), &screen).unwrap();
        let mut expect = s.clone();
        expect.push(Site::new(2, 3));
        expect.sort();
        assert_eq!(vertex_sum(Model::Spm, &b), expect);
        let ell = 4;
        let b = shadow_plaquettes(Model::Spm, Site::ORIGIN, &Screen::Corner { positive: false, apex: Site::new(ell, ell) })
            .unwrap();
        assert_eq!(b.len(), 16);
    }

    #[test]
    fn shadow_families_sum_to_shadow() {
        for screen in [Screen::Line { height: 9 }] {
            for x in [Site::new(0, -1), Site::new(3, 2), Site::new(-2, 8)] {
                let mut expect = shadow(Model::Tpm, x, &screen).unwrap();
                if !expect.contains(&x) {
                    expect.push(x);
                }
                expect.sort();
                let got = vertex_sum(Model::Tpm, &shadow_plaquettes(Model::Tpm, x, &screen).unwrap());
                assert_eq!(got, expect);
            }
        }
        let screen = Screen::Corner { positive: true, apex: Site::new(-3, -1) };
        let x = Site::new(2, 2);
        let mut expect = shadow(Model::Spm, x, &screen).unwrap();
        expect.push(x);
        expect.sort();
        assert_eq!(vertex_sum(Model::Spm, &shadow_plaquettes(Model::Spm, x, &screen).unwrap()), expect);
    }

    #[test]
    fn paper_examples() {
        assert!(!is_null_equivalent(Model::Spm, &[Site::new(0, 0), Site::new(0, 1)]).unwrap());
        assert!(is_null_equivalent(Model::Spm, &[]).unwrap());
        for ell in 1..=4 {
            let a = [Site::new(0, 0), Site::new(ell, 0), Site::new(0, ell), Site::new(ell, ell)];
            assert_eq!(minimal_decomposition(Model::Spm, &a).unwrap().size, (ell * ell) as usize);
        }
        for k in 0..=3 {
            let s = 1 << k;
            let a = [Site::new(0, 0), Site::new(0, s), Site::new(s, s)];
            assert_eq!(minimal_decomposition(Model::Tpm, &a).unwrap().size, 3usize.pow(k));
        }
        let one = minimal_decomposition(Model::Tpm, &Model::Tpm.plaquette_sites(Site::new(4, -2))).unwrap();
        assert_eq!(one.bases, vec![Site::new(4, -2)]);
        assert_eq!(minimal_decomposition(Model::Spm, &[Site::ORIGIN]).unwrap_err(), Error::NotEquivalent);
    }

    #[test]
    fn brute_force_agrees() {
        for ell in 1..=3 {
            let a = [Site::new(0, 0), Site::new(ell, 0), Site::new(0, ell), Site::new(ell, ell)];
            assert_eq!(brute_force_decomposition(Model::Spm, &a).unwrap(), minimal_decomposition(Model::Spm, &a).unwrap());
        }
        let a = [Site::new(0, 0), Site::new(0, 4), Site::new(4, 4)];
        assert_eq!(brute_force_decomposition(Model::Tpm, &a).unwrap(), minimal_decomposition(Model::Tpm, &a).unwrap());
        let r = Model::rect(3, 2).unwrap();
        let a = vertex_sum(r, &[Site::new(0, 0), Site::new(2, 1)]);
        assert_eq!(minimal_decomposition(r, &a).unwrap().size, 2);
    }

    #[test]
    fn staircase_sets() {
        assert_eq!(a_of_z(8, Site::new(4, -1)).unwrap(), vec![4]);
        let a = a_of_z(8, Site::new(7, 5)).unwrap();
        assert_eq!(a, vec![1, 3, 5, 7]);
        assert_eq!(a_of_z_direct(8, Site::new(7, 5)).unwrap(), a);
        assert!(a_of_z(8, Site::new(2, 5)).is_err());
    }
}
