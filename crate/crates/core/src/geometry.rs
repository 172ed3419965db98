//! Lattice geometry: sites, models, regions and plaquette families.
//!
//! Both models live on `Z²`. The triangular lattice of the TPM is drawn with
//! basis vectors `e1` and `e1 + e2`, so its nearest neighbours of the origin
//! are `±e1`, `±e2` and `±(e1 + e2)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point of `Z²`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Site {
    pub x1: i32,
    pub x2: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { x1: 0, x2: 0 };

    pub const fn new(x1: i32, x2: i32) -> Self {
        Site { x1, x2 }
    }

    /// The `ℓ1` distance.
    pub fn l1(self, other: Site) -> u32 {
        self.x1.abs_diff(other.x1) + self.x2.abs_diff(other.x2)
    }

    /// Graph distance on the triangular lattice drawn on `Z²`.
    pub fn tri_distance(self, other: Site) -> u32 {
        let d1 = other.x1 - self.x1;
        let d2 = other.x2 - self.x2;
        if (d1 >= 0) == (d2 >= 0) {
            d1.unsigned_abs().max(d2.unsigned_abs())
        } else {
            d1.unsigned_abs() + d2.unsigned_abs()
        }
    }

    pub fn scale(self, k: i32) -> Site {
        Site::new(self.x1 * k, self.x2 * k)
    }
}

// Row-major order: rows bottom to top, left to right inside a row.
impl Ord for Site {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.x2, self.x1).cmp(&(other.x2, other.x1))
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.x1, -self.x2)
    }
}

impl From<[i32; 2]> for Site {
    fn from(a: [i32; 2]) -> Self {
        Site::new(a[0], a[1])
    }
}

impl From<Site> for [i32; 2] {
    fn from(s: Site) -> Self {
        [s.x1, s.x2]
    }
}

impl From<(i32, i32)> for Site {
    fn from((x1, x2): (i32, i32)) -> Self {
        Site::new(x1, x2)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Which fundamental plaquette generates the interaction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Square plaquette model, `B* = {0,1}²`.
    Spm,
    /// Triangular plaquette model, `B* = {(0,0), (0,1), (1,1)}`.
    Tpm,
    /// Rectangle `{0..a-1} × {0..b-1}` with `a, b ≥ 2`.
    Rect { a: u32, b: u32 },
}

impl Model {
    pub fn rect(a: u32, b: u32) -> Result<Model> {
        if a < 2 || b < 2 {
            return Err(invalid(format!("rectangle plaquette needs a, b >= 2, got {a}x{b}")));
        }
        Ok(Model::Rect { a, b })
    }

    /// Sites of `B*`, sorted.
    pub fn fundamental(&self) -> Vec<Site> {
        let mut v = match *self {
            Model::Spm => vec![Site::new(0, 0), Site::new(1, 0), Site::new(0, 1), Site::new(1, 1)],
            Model::Tpm => vec![Site::new(0, 0), Site::new(0, 1), Site::new(1, 1)],
            Model::Rect { a, b } => {
                let mut v = Vec::with_capacity((a * b) as usize);
                for x2 in 0..b as i32 {
                    for x1 in 0..a as i32 {
                        v.push(Site::new(x1, x2));
                    }
                }
                v
            }
        };
        v.sort();
        v
    }

    pub fn plaquette_size(&self) -> usize {
        match *self {
            Model::Spm => 4,
            Model::Tpm => 3,
            Model::Rect { a, b } => (a * b) as usize,
        }
    }

    /// `‖H‖ = |B*| / 2`.
    pub fn half_norm(&self) -> f64 {
        self.plaquette_size() as f64 / 2.0
    }

    /// The sites of `B* + base`.
    pub fn plaquette_sites(&self, base: Site) -> Vec<Site> {
        self.fundamental().into_iter().map(|s| s + base).collect()
    }

    /// Bases of all plaquettes containing `x`.
    pub fn plaquettes_through(&self, x: Site) -> Vec<Site> {
        self.fundamental().into_iter().map(|s| x - s).collect()
    }

    /// Graph distance used for separation conditions: `ℓ1` on the square
    /// lattice, the triangular graph distance for the TPM.
    pub fn distance(&self, x: Site, y: Site) -> u32 {
        match self {
            Model::Tpm => x.tri_distance(y),
            _ => x.l1(y),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Model::Spm => "spm".into(),
            Model::Tpm => "tpm".into(),
            Model::Rect { a, b } => format!("rect:{a}x{b}"),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "spm" => Ok(Model::Spm),
            "tpm" => Ok(Model::Tpm),
            _ => {
                let dims = s
                    .strip_prefix("rect:")
                    .ok_or_else(|| invalid(format!("unknown model '{s}' (expected spm, tpm or rect:AxB)")))?;
                let (a, b) = dims
                    .split_once('x')
                    .ok_or_else(|| invalid(format!("bad rectangle '{dims}', expected AxB")))?;
                let a = a.parse().map_err(|_| invalid(format!("bad width '{a}'")))?;
                let b = b.parse().map_err(|_| invalid(format!("bad height '{b}'")))?;
                Model::rect(a, b)
            }
        }
    }
}

/// A finite subset of `Z²`, stored sorted with a hash index.
#[derive(Clone, Debug)]
pub struct Region {
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites
    }
}

impl Eq for Region {}

impl Region {
    pub fn new(sites: impl IntoIterator<Item = Site>) -> Region {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort();
        sites.dedup();
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Region { sites, index }
    }

    /// `w × h` box with lower-left corner `corner`.
    pub fn rect(corner: Site, w: u32, h: u32) -> Region {
        let mut v = Vec::with_capacity((w * h) as usize);
        for x2 in 0..h as i32 {
            for x1 in 0..w as i32 {
                v.push(corner + Site::new(x1, x2));
            }
        }
        Region::new(v)
    }

    /// `Q_ℓ = {1, …, ℓ}²`.
    pub fn square(ell: u32) -> Region {
        Region::rect(Site::new(1, 1), ell, ell)
    }

    /// `[-ℓ, ℓ]²`.
    pub fn centered(ell: u32) -> Region {
        let e = ell as i32;
        Region::rect(Site::new(-e, -e), 2 * ell + 1, 2 * ell + 1)
    }

    /// Triangle with vertices `0`, `n e1`, `n (e1 + e2)`.
    pub fn triangle(n: u32) -> Region {
        let n = n as i32;
        Region::new((0..=n).flat_map(|x1| (0..=x1).map(move |x2| Site::new(x1, x2))))
    }

    /// The triangle together with the row below it, `{(i, -1) : -1 ≤ i ≤ n}`.
    pub fn extended_triangle(n: u32) -> Region {
        let t = Region::triangle(n);
        let row = (-1..=n as i32).map(|i| Site::new(i, -1));
        Region::new(t.sites.into_iter().chain(row))
    }

    /// Triangle with vertices `0`, `2^(n+N) e2`, `2^(n+N) (e1 + e2)`.
    pub fn decimation_triangle(n: u32, big_n: u32) -> Region {
        let m = 1i32 << (n + big_n);
        Region::new((0..=m).flat_map(|x2| (0..=x2).map(move |x1| Site::new(x1, x2))))
    }

    /// The square `{0, …, ℓN}²`.
    pub fn decimation_box(ell: u32, big_n: u32) -> Region {
        Region::rect(Site::ORIGIN, ell * big_n + 1, ell * big_n + 1)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, s: Site) -> bool {
        self.index.contains_key(&s)
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        self.index.get(&s).copied()
    }

    pub fn translate(&self, v: Site) -> Region {
        Region::new(self.sites.iter().map(|&s| s + v))
    }

    /// Lower-left and upper-right corners of the bounding box.
    pub fn bounding_box(&self) -> Option<(Site, Site)> {
        bounding_box(&self.sites)
    }

    /// Sites outside the region that belong to some plaquette meeting it.
    pub fn exterior_support(&self, model: Model) -> Vec<Site> {
        let mut out = Vec::new();
        for base in meeting_bases(model, self) {
            for s in model.plaquette_sites(base) {
                if !self.contains(s) {
                    out.push(s);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

pub(crate) fn bounding_box(sites: &[Site]) -> Option<(Site, Site)> {
    let first = *sites.first()?;
    let mut lo = first;
    let mut hi = first;
    for s in sites {
        lo.x1 = lo.x1.min(s.x1);
        lo.x2 = lo.x2.min(s.x2);
        hi.x1 = hi.x1.max(s.x1);
        hi.x2 = hi.x2.max(s.x2);
    }
    Some((lo, hi))
}

/// JSON description of a region, `{"kind": ..., params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionDesc {
    Box { corner: Site, w: u32, h: u32 },
    Square { ell: u32 },
    Centered { ell: u32 },
    Triangle { n: u32 },
    ExtendedTriangle { n: u32 },
    DecimationTriangle { n: u32, big_n: u32 },
    DecimationBox { ell: u32, big_n: u32 },
    Sites { sites: Vec<Site> },
}

impl RegionDesc {
    pub fn build(&self) -> Region {
        match self {
            RegionDesc::Box { corner, w, h } => Region::rect(*corner, *w, *h),
            RegionDesc::Square { ell } => Region::square(*ell),
            RegionDesc::Centered { ell } => Region::centered(*ell),
            RegionDesc::Triangle { n } => Region::triangle(*n),
            RegionDesc::ExtendedTriangle { n } => Region::extended_triangle(*n),
            RegionDesc::DecimationTriangle { n, big_n } => Region::decimation_triangle(*n, *big_n),
            RegionDesc::DecimationBox { ell, big_n } => Region::decimation_box(*ell, *big_n),
            RegionDesc::Sites { sites } => Region::new(sites.iter().copied()),
        }
    }
}

/// Which plaquettes are attached to a region.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyMode {
    /// `B(Λ)`: plaquettes meeting the region.
    Meeting,
    /// `B^f(Λ)`: plaquettes contained in the region.
    Inside,
    /// `B^+(Λ)`: plaquettes meeting the region, cut down to it.
    Clipped,
}

/// One member of a plaquette family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaquette {
    /// Base of the plaquette; for merged clipped plaquettes the smallest base.
    pub base: Site,
    /// Sites carried by the plaquette (clipped to the region in clipped mode).
    pub sites: Vec<Site>,
    /// Number of full plaquettes merged into this one (1 except for clipped
    /// plaquettes whose cut-down site sets coincide).
    pub multiplicity: u32,
}

/// A densely indexed plaquette family relative to a region.
#[derive(Clone, Debug)]
pub struct PlaquetteFamily {
    pub model: Model,
    pub mode: FamilyMode,
    plaquettes: Vec<Plaquette>,
    by_base: HashMap<Site, usize>,
}

fn meeting_bases(model: Model, region: &Region) -> Vec<Site> {
    let mut bases: Vec<Site> = region
        .sites()
        .iter()
        .flat_map(|&x| model.plaquettes_through(x))
        .collect();
    bases.sort();
    bases.dedup();
    bases
}

/// The plaquettes attached to `region` in the given mode.
pub fn plaquette_family(model: Model, region: &Region, mode: FamilyMode) -> Result<PlaquetteFamily> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let bases = meeting_bases(model, region);
    let mut plaquettes = Vec::new();
    let mut by_base = HashMap::new();
    match mode {
        FamilyMode::Meeting | FamilyMode::Inside => {
            for b in bases {
                let sites = model.plaquette_sites(b);
                if mode == FamilyMode::Inside && !sites.iter().all(|&s| region.contains(s)) {
                    continue;
                }
                by_base.insert(b, plaquettes.len());
                plaquettes.push(Plaquette { base: b, sites, multiplicity: 1 });
            }
        }
        FamilyMode::Clipped => {
            let mut by_set: HashMap<Vec<Site>, usize> = HashMap::new();
            for b in bases {
                let sites: Vec<Site> = model
                    .plaquette_sites(b)
                    .into_iter()
                    .filter(|&s| region.contains(s))
                    .collect();
                let idx = *by_set.entry(sites.clone()).or_insert_with(|| {
                    plaquettes.push(Plaquette { base: b, sites, multiplicity: 0 });
                    plaquettes.len() - 1
                });
                plaquettes[idx].multiplicity += 1;
                by_base.insert(b, idx);
            }
        }
    }
    Ok(PlaquetteFamily { model, mode, plaquettes, by_base })
}

impl PlaquetteFamily {
    pub fn len(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plaquettes.is_empty()
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    pub fn get(&self, i: usize) -> &Plaquette {
        &self.plaquettes[i]
    }

    /// Index of the plaquette with the given base (any merged base works).
    pub fn index_of(&self, base: Site) -> Option<usize> {
        self.by_base.get(&base).copied()
    }

    pub fn bases(&self) -> Vec<Site> {
        self.plaquettes.iter().map(|p| p.base).collect()
    }

    pub fn has_duplicates(&self) -> bool {
        self.plaquettes.iter().any(|p| p.multiplicity > 1)
    }
}

/// `Γ(j)` for `-1 ≤ j ≤ n`, listed in the order `z^(1), …, z^(n+2)`: first the
/// column `(j, -1), …, (j, j)`, then the diagonal `(j+1, 0), …, (n, n-j-1)`.
pub fn gamma_set(n: u32, j: i32) -> Result<Vec<Site>> {
    let n = n as i32;
    if j < -1 || j > n {
        return Err(invalid(format!("gamma_set: j = {j} outside [-1, {n}]")));
    }
    let column = (-1..=j).map(|i| Site::new(j, i));
    let diagonal = (1..=n - j).map(|i| Site::new(j + i, i - 1));
    Ok(column.chain(diagonal).collect())
}
