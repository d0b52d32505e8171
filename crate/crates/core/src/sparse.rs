//! Sparse point sets in Z^d: explicit lists and polynomial orbits, set
//! plumbing for union constructions, and a finite scanned estimate of
//! upper density over rectangles.

use crate::error::{Error, Result};
use crate::lattice::GridBox;
use crate::Rational;
use num_bigint::BigInt;
use serde::Deserialize;
use std::collections::BTreeSet;

/// A finite set of integer points with a fixed dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseSet {
    d: usize,
    points: BTreeSet<Vec<i64>>,
}

impl SparseSet {
    /// Empty set in dimension `d`.
    pub fn empty(d: usize) -> Result<SparseSet> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(SparseSet {
            d,
            points: BTreeSet::new(),
        })
    }

    /// Set from an explicit point list; duplicates collapse.
    pub fn explicit(d: usize, points: Vec<Vec<i64>>) -> Result<SparseSet> {
        let mut set = SparseSet::empty(d)?;
        for p in points {
            set.insert(p)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, point: Vec<i64>) -> Result<bool> {
        if point.len() != self.d {
            return Err(Error::DimensionMismatch {
                left: point.len(),
                right: self.d,
            });
        }
        Ok(self.points.insert(point))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        self.points.contains(point)
    }

    /// Points in ascending lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.points.iter()
    }

    /// Points lying inside a box, in ascending lexicographic order.
    pub fn in_box(&self, bx: &GridBox) -> Vec<Vec<i64>> {
        self.points
            .iter()
            .filter(|p| bx.contains_point(p))
            .cloned()
            .collect()
    }

    pub fn union(&self, other: &SparseSet) -> Result<SparseSet> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                left: self.d,
                right: other.d,
            });
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ok(SparseSet { d: self.d, points })
    }

    /// Parse either whitespace-separated integer lines (one point per
    /// line) or a JSON polynomial description
    /// `{ "polynomial": [[c0,c1,...],...], "range": [a,b] }`.
    pub fn parse(text: &str) -> Result<SparseSet> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            #[derive(Deserialize)]
            struct PolyFile {
                polynomial: Vec<Vec<i64>>,
                range: [i64; 2],
            }
            let file: PolyFile = serde_json::from_str(trimmed)?;
            return polynomial_orbit(&file.polynomial, file.range[0], file.range[1]);
        }
        let mut d = None;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let coords = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<i64>()
                        .map_err(|_| Error::Format(format!("line {}: bad integer {t:?}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            match d {
                None => d = Some(coords.len()),
                Some(d) if d != coords.len() => {
                    return Err(Error::Format(format!(
                        "line {}: expected {d} coordinates",
                        i + 1
                    )))
                }
                _ => {}
            }
            points.push(coords);
        }
        let d = d.ok_or_else(|| Error::Format("no points in sparse set file".into()))?;
        SparseSet::explicit(d, points)
    }

    pub fn read_file(path: &std::path::Path) -> Result<SparseSet> {
        SparseSet::parse(&std::fs::read_to_string(path)?)
    }
}

fn eval_poly(coeffs: &[i64], x: i64) -> Result<i64> {
    let mut acc: i128 = 0;
    for &c in coeffs.iter().rev() {
        acc = acc
            .checked_mul(x as i128)
            .and_then(|v| v.checked_add(c as i128))
            .ok_or(Error::Overflow("polynomial evaluation"))?;
    }
    i64::try_from(acc).map_err(|_| Error::Overflow("polynomial evaluation"))
}

/// The set `{ (p_1(n), ..., p_d(n)) : n in [a, b) }` evaluated exactly;
/// duplicates collapse.
pub fn polynomial_orbit(coeffs: &[Vec<i64>], a: i64, b: i64) -> Result<SparseSet> {
    if coeffs.is_empty() || coeffs.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidArgument(
            "polynomial orbit needs one non-empty coefficient list per axis".into(),
        ));
    }
    let mut set = SparseSet::empty(coeffs.len())?;
    let mut n = a;
    while n < b {
        let point = coeffs
            .iter()
            .map(|c| eval_poly(c, n))
            .collect::<Result<Vec<_>>>()?;
        set.insert(point)?;
        n += 1;
    }
    Ok(set)
}

/// Rectangle scan parameters: corners advance on a step grid and sides run
/// a doubling ladder from the lower cut-off up to the window side.
#[derive(Debug, Clone)]
pub struct DensityScan {
    pub corner_step: u64,
    pub min_side: u64,
}

/// The densest scanned rectangle.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub value: Rational,
    pub rectangle: GridBox,
}

/// Maximum of `|P ∩ R| / |R|` over scanned axis-aligned rectangles inside
/// the window: a finite lower estimate of the upper density of `P`.
pub fn banach_density(
    p: &SparseSet,
    window: &GridBox,
    scan: &DensityScan,
) -> Result<DensityEstimate> {
    if p.dim() != window.dim() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: window.dim(),
        });
    }
    if scan.corner_step == 0 || scan.min_side == 0 {
        return Err(Error::InvalidArgument("scan step and cut-off must be positive".into()));
    }
    if window.sides().iter().any(|&s| s < scan.min_side) {
        return Err(Error::InvalidArgument(
            "side cut-off exceeds the window".into(),
        ));
    }
    let d = window.dim();
    let ladders: Vec<Vec<u64>> = window
        .sides()
        .iter()
        .map(|&side| {
            let mut ladder = Vec::new();
            let mut s = scan.min_side;
            while s < side {
                ladder.push(s);
                s = s.saturating_mul(2);
            }
            ladder.push(side);
            ladder
        })
        .collect();
    let local = p.in_box(window);

    // last-axis-fastest odometer over mixed radices
    fn advance(idx: &mut [usize], radix: &[usize]) -> bool {
        for axis in (0..idx.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < radix[axis] {
                return true;
            }
            idx[axis] = 0;
        }
        false
    }

    let mut best: Option<DensityEstimate> = None;
    let side_radix: Vec<usize> = ladders.iter().map(Vec::len).collect();
    let mut side_idx = vec![0usize; d];
    loop {
        let sides: Vec<u64> = (0..d).map(|i| ladders[i][side_idx[i]]).collect();
        // all corner offsets on the step grid keeping the rectangle inside
        let offset_radix: Vec<usize> = (0..d)
            .map(|i| ((window.sides()[i] - sides[i]) / scan.corner_step + 1) as usize)
            .collect();
        let mut offsets = vec![0usize; d];
        loop {
            let corner: Vec<i64> = (0..d)
                .map(|i| window.corner()[i] + (offsets[i] as u64 * scan.corner_step) as i64)
                .collect();
            let rect = GridBox::new(corner, sides.clone())?;
            let count = local.iter().filter(|pt| rect.contains_point(pt)).count();
            let value = Rational::new(BigInt::from(count), BigInt::from(rect.cells()));
            let better = match &best {
                None => true,
                Some(b) => value > b.value,
            };
            if better {
                best = Some(DensityEstimate {
                    value,
                    rectangle: rect,
                });
            }
            if !advance(&mut offsets, &offset_radix) {
                break;
            }
        }
        if !advance(&mut side_idx, &side_radix) {
            break;
        }
    }
    Ok(best.expect("window admits at least one rectangle"))
}
