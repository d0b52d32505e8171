//! Boxes in `Z^d`, diagonal sublattices `m·Z^d`, and modulus schedules.
//!
//! A [`GridBox`] is an axis-aligned product of half-open intervals
//! `[corner_i, corner_i + side_i)`. Stage supports are always cubes (all
//! sides equal); general boxes appear in density scans and window queries.
//! Cells are enumerated row-major with the last coordinate varying fastest.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[c_1, c_1+s_1) x ... x [c_d, c_d+s_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridBox {
    corner: Vec<i64>,
    sides: Vec<u64>,
}

impl GridBox {
    /// General box with per-axis sides. All sides must be positive.
    pub fn new(corner: Vec<i64>, sides: Vec<u64>) -> Result<Self> {
        if corner.len() != sides.len() {
            return Err(Error::DimensionMismatch {
                left: corner.len(),
                right: sides.len(),
            });
        }
        if corner.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional box".into()));
        }
        if sides.iter().any(|&s| s == 0) {
            return Err(Error::EmptySupport);
        }
        for (c, s) in corner.iter().zip(&sides) {
            c.checked_add(i64::try_from(*s).map_err(|_| Error::Overflow("box side"))?)
                .ok_or(Error::Overflow("box corner + side"))?;
        }
        Ok(GridBox { corner, sides })
    }

    /// Cube `[g, g+n)^d`.
    pub fn cube(corner: Vec<i64>, side: u64) -> Result<Self> {
        let sides = vec![side; corner.len()];
        GridBox::new(corner, sides)
    }

    /// Cube cornered at the origin.
    pub fn origin_cube(dim: usize, side: u64) -> Result<Self> {
        GridBox::cube(vec![0; dim], side)
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner
    }

    pub fn sides(&self) -> &[u64] {
        &self.sides
    }

    /// Side length when the box is a cube.
    pub fn cube_side(&self) -> Option<u64> {
        let s = self.sides[0];
        self.sides.iter().all(|&t| t == s).then_some(s)
    }

    pub fn is_cube(&self) -> bool {
        self.cube_side().is_some()
    }

    /// Number of cells, `prod sides`.
    pub fn cells(&self) -> usize {
        self.sides.iter().product::<u64>() as usize
    }

    /// Exclusive upper corner per axis.
    pub fn upper(&self) -> Vec<i64> {
        self.corner
            .iter()
            .zip(&self.sides)
            .map(|(c, s)| c + *s as i64)
            .collect()
    }

    pub fn contains_point(&self, g: &[i64]) -> bool {
        g.len() == self.dim()
            && g.iter()
                .zip(self.corner.iter().zip(&self.sides))
                .all(|(x, (c, s))| *x >= *c && *x < c + *s as i64)
    }

    pub fn contains_box(&self, other: &GridBox) -> bool {
        other.dim() == self.dim()
            && self.contains_point(&other.corner)
            && other
                .upper()
                .iter()
                .zip(self.upper())
                .all(|(ou, su)| *ou <= su)
    }

    /// Translate by `g`.
    pub fn translate(&self, g: &[i64]) -> Result<GridBox> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: g.len(),
            });
        }
        let corner = self
            .corner
            .iter()
            .zip(g)
            .map(|(c, t)| c.checked_add(*t).ok_or(Error::Overflow("translate")))
            .collect::<Result<Vec<_>>>()?;
        GridBox::new(corner, self.sides.clone())
    }

    /// Intersection, or `None` when disjoint.
    pub fn intersect(&self, other: &GridBox) -> Option<GridBox> {
        if other.dim() != self.dim() {
            return None;
        }
        let mut corner = Vec::with_capacity(self.dim());
        let mut sides = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let lo = self.corner[i].max(other.corner[i]);
            let hi = self.upper()[i].min(other.upper()[i]);
            if lo >= hi {
                return None;
            }
            corner.push(lo);
            sides.push((hi - lo) as u64);
        }
        Some(GridBox { corner, sides })
    }

    /// Row-major cell index of `g` (last coordinate fastest).
    ///
    /// `g` must lie in the box.
    pub fn offset_of(&self, g: &[i64]) -> usize {
        debug_assert!(self.contains_point(g));
        let mut idx = 0usize;
        for i in 0..self.dim() {
            idx = idx * self.sides[i] as usize + (g[i] - self.corner[i]) as usize;
        }
        idx
    }

    /// Cell at row-major index `idx`.
    pub fn point_at(&self, mut idx: usize) -> Vec<i64> {
        debug_assert!(idx < self.cells());
        let mut g = vec![0i64; self.dim()];
        for i in (0..self.dim()).rev() {
            let s = self.sides[i] as usize;
            g[i] = self.corner[i] + (idx % s) as i64;
            idx /= s;
        }
        g
    }

    /// Iterate cells in row-major order (last coordinate fastest).
    pub fn iter_points(&self) -> PointIter<'_> {
        PointIter {
            bx: self,
            next: Some(self.corner.clone()),
        }
    }
}

pub struct PointIter<'a> {
    bx: &'a GridBox,
    next: Option<Vec<i64>>,
}

impl Iterator for PointIter<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..self.bx.dim()).rev() {
            succ[i] += 1;
            if succ[i] < self.bx.corner[i] + self.bx.sides[i] as i64 {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = self.bx.corner[i];
        }
        // wrapped past the last cell
        Some(current)
    }
}

/// Diagonal sublattice `F = m·Z^d` of index `m^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sublattice {
    dim: usize,
    modulus: u64,
}

impl Sublattice {
    pub fn new(dim: usize, modulus: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional lattice".into()));
        }
        if modulus == 0 {
            return Err(Error::InvalidArgument("zero modulus".into()));
        }
        Ok(Sublattice { dim, modulus })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Index of the sublattice in `Z^d`, `m^d`.
    pub fn index(&self) -> u64 {
        self.modulus.pow(self.dim as u32)
    }

    /// Whether `a` and `b` differ by an element of the sublattice.
    pub fn congruent(&self, a: &[i64], b: &[i64]) -> Result<bool> {
        if a.len() != self.dim || b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let m = self.modulus as i64;
        Ok(a.iter().zip(b).all(|(x, y)| (x - y).rem_euclid(m) == 0))
    }

    /// Componentwise residue of `g` in `[0, m)^d`.
    pub fn residue_of(&self, g: &[i64]) -> Result<Vec<i64>> {
        if g.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: g.len(),
                right: self.dim,
            });
        }
        let m = self.modulus as i64;
        Ok(g.iter().map(|x| x.rem_euclid(m)).collect())
    }

    /// All residues `[0, m)^d` in lexicographic order.
    pub fn residues(&self) -> Vec<Vec<i64>> {
        let bx = GridBox::origin_cube(self.dim, self.modulus).expect("modulus > 0");
        bx.iter_points().collect()
    }
}

/// Strictly increasing moduli, each dividing the next.
///
/// The divisibility chain makes the corresponding sublattices nested, and
/// cofinality is witnessed finitely: every modulus up to a bound divides
/// some entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupSchedule {
    moduli: Vec<u64>,
}

impl SubgroupSchedule {
    pub fn new(moduli: Vec<u64>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidArgument("empty schedule".into()));
        }
        if moduli[0] == 0 {
            return Err(Error::InvalidArgument("zero modulus".into()));
        }
        for w in moduli.windows(2) {
            if w[1] <= w[0] || w[1] % w[0] != 0 {
                return Err(Error::InvalidArgument(format!(
                    "schedule entries must be strictly increasing and divide the next: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SubgroupSchedule { moduli })
    }

    /// Default schedule `m_k = k!`, which is cofinal in the divisibility
    /// order: every positive integer divides some entry.
    pub fn factorial(count: usize) -> Result<Self> {
        let mut moduli = Vec::with_capacity(count);
        let mut acc: u64 = 1;
        for k in 1..=count as u64 {
            acc = acc.checked_mul(k).ok_or(Error::Overflow("factorial schedule"))?;
            moduli.push(acc);
        }
        SubgroupSchedule::new(moduli)
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    /// Finite cofinality proxy: every `1 <= m <= bound` divides some entry.
    pub fn is_cofinal_up_to(&self, bound: u64) -> bool {
        (1..=bound).all(|m| self.moduli.iter().any(|&e| e % m == 0))
    }
}

/// Greatest common divisor.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
