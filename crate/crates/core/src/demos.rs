//! Finite demonstrators built on the embedding machinery: averages of a
//! pattern along a sparse point set, a pair of windows showing those
//! averages driven apart while agreeing near the origin, and a window
//! whose shifts along the sparse set all differ from it at the origin.

use crate::construction::Stage;
use crate::embedding::{
    density_certificate, embed, embed_except, tilde_region, Assignment, EmbedReport,
};
use crate::error::{Error, Result};
use crate::lattice::GridBox;
use crate::patterns::Pattern;
use crate::sparse::SparseSet;
use crate::Rational;
use num_bigint::BigInt;
use num_traits::One;
use std::collections::BTreeMap;

/// Exact averages indexed by window radius, strictly increasing in `n`.
pub type AverageSeries = Vec<(u64, Rational)>;

/// Cells of the open cube `(-n, n)^d`: corner `-(n-1)`, side `2n - 1`.
fn radius_box(d: usize, n: u64) -> Result<GridBox> {
    if n == 0 {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    GridBox::cube(vec![-(n as i64 - 1); d], 2 * n - 1)
}

/// Fraction of points of `P` inside `(-n, n)^d` where the pattern reads 1.
pub fn sparse_average(x: &Pattern, p: &SparseSet, n: u64) -> Result<Rational> {
    let bx = radius_box(x.support().dim(), n)?;
    if !x.support().contains_box(&bx) {
        return Err(Error::NotContained(format!(
            "radius {n} window exceeds the pattern support {:?}",
            x.support()
        )));
    }
    let points = p.in_box(&bx);
    if points.is_empty() {
        return Err(Error::EmptyIntersection(format!(
            "no sparse points inside radius {n} window"
        )));
    }
    let ones = points.iter().filter(|h| x.get(h) == 1).count();
    Ok(Rational::new(BigInt::from(ones), BigInt::from(points.len())))
}

/// Largest radius `n` with `(-n, n)^d` inside `base + [0, side)^d`.
fn fitting_radius(base: &[i64], side: u64) -> u64 {
    base.iter()
        .map(|&b| (1 - b).min(b + side as i64))
        .min()
        .unwrap_or(0)
        .max(0) as u64
}

/// Outcome of the average-divergence demonstration.
#[derive(Debug, Clone)]
pub struct DivergenceOutcome {
    /// Averages of the window carrying zeros on the sparse set.
    pub series0: AverageSeries,
    /// Averages of the window carrying ones on the sparse set.
    pub series1: AverageSeries,
    /// Radius of the central window both patterns share.
    pub preserved_radius: u64,
    /// Corner of the placed pattern support.
    pub base: Vec<i64>,
    /// Corner of the untouched sub-block containing the shared window.
    pub preserve_corner: Vec<i64>,
    /// Sparse points inside the untouched sub-block (take template values).
    pub preserve_points: usize,
    /// Largest usable average radius for this placement.
    pub fitting_radius: u64,
    /// Whether the two patterns agree cell-wise on the shared window.
    pub certificate_ok: bool,
    pub template_used: usize,
    pub y0: Pattern,
    pub y1: Pattern,
}

/// Choose a placement: the top-stage sub-block that will be preserved must
/// contain `(-k0, k0)^d`, hold as few sparse points as possible, and leave
/// the largest average radius; ties resolve lexicographically.
fn scan_placement(
    stages: &[&Stage],
    p: &SparseSet,
    k0: u64,
) -> Result<(Vec<i64>, Vec<i64>, u64, usize)> {
    let top = stages[stages.len() - 1];
    let prev = stages[stages.len() - 2];
    let d = top.dim();
    let n = top.side();
    let n_prev = prev.side();
    if n_prev < 2 * k0 - 1 {
        return Err(Error::WindowTooLarge(format!(
            "shared window of radius {k0} needs sub-block side at least {}, have {n_prev}",
            2 * k0 - 1
        )));
    }
    let lm = top.l_schedule().last().unwrap() * top.m_schedule().last().unwrap();
    let span = n_prev - (2 * k0 - 1);
    let grid = GridBox::origin_cube(d, lm)?;
    let offsets = GridBox::origin_cube(d, span + 1)?;
    let mut best: Option<(usize, u64, Vec<i64>, Vec<i64>)> = None;
    for gb in grid.iter_points() {
        let corner_rel: Vec<i64> = gb
            .iter()
            .map(|&x| x * n_prev as i64 + i64::from(x == lm as i64 - 1))
            .collect();
        for o in offsets.iter_points() {
            let corner_abs: Vec<i64> =
                o.iter().map(|&oi| -(k0 as i64 - 1 + oi)).collect();
            let base: Vec<i64> = corner_abs
                .iter()
                .zip(&corner_rel)
                .map(|(a, c)| a - c)
                .collect();
            let block = GridBox::cube(corner_abs.clone(), n_prev)?;
            let hits = p.in_box(&block).len();
            let fit = fitting_radius(&base, n);
            let better = match &best {
                None => true,
                Some((bh, bf, _, _)) => hits < *bh || (hits == *bh && fit > *bf),
            };
            if better {
                best = Some((hits, fit, base, corner_abs));
            }
        }
    }
    let (hits, fit, base, corner) = best.expect("non-empty grid");
    Ok((base, corner, fit, hits))
}

/// Build two top-stage windows around the origin that agree on
/// `(-k0, k0)^d` while one carries zeros and the other ones on the sparse
/// set outside, and compute both average series over growing radii.
pub fn demo_divergence(
    stages: &[&Stage],
    p: &SparseSet,
    k0: u64,
    radii: Option<&[u64]>,
) -> Result<DivergenceOutcome> {
    if stages.len() < 2 {
        return Err(Error::InvalidArgument(
            "the divergence demonstration needs at least two stages".into(),
        ));
    }
    if k0 == 0 {
        return Err(Error::InvalidArgument("preserve radius must be positive".into()));
    }
    let top = stages[stages.len() - 1];
    let d = top.dim();
    if p.dim() != d {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: d,
        });
    }
    let (base, preserve_corner, fit, preserve_points) = scan_placement(stages, p, k0)?;
    let prev_side = stages[stages.len() - 2].side();
    let preserve = GridBox::cube(preserve_corner.clone(), prev_side)?;
    let support = GridBox::cube(base.clone(), top.side())?;
    let domain = p.in_box(&support);
    let assign = |bit: u16| -> Result<Assignment> {
        Assignment::new(
            base.clone(),
            domain.iter().map(|h| (h.clone(), bit)).collect(),
        )
    };
    let k = stages.len();
    let (y0, rep0) = embed_except(stages, k, Some(&preserve), &assign(0)?, p, None)?;
    let template_used = rep0.embed.template_used;
    let (y1, _rep1) = embed_except(
        stages,
        k,
        Some(&preserve),
        &assign(1)?,
        p,
        Some(template_used),
    )?;

    let window = radius_box(d, k0)?;
    let certificate_ok = y0.restrict(&window)? == y1.restrict(&window)?;

    let ladder: Vec<u64> = match radii {
        Some(rs) => {
            let mut rs: Vec<u64> = rs.to_vec();
            rs.sort_unstable();
            rs.dedup();
            if let Some(&big) = rs.iter().find(|&&r| r > fit) {
                return Err(Error::WindowTooLarge(format!(
                    "requested radius {big} exceeds the fitting radius {fit}"
                )));
            }
            rs
        }
        None => {
            let mut rs = Vec::new();
            let mut r = k0;
            while r < fit {
                rs.push(r);
                r = r.saturating_mul(2);
            }
            rs.push(fit);
            rs
        }
    };
    let mut series0 = Vec::new();
    let mut series1 = Vec::new();
    for &r in &ladder {
        match sparse_average(&y0, p, r) {
            Ok(v) => {
                series0.push((r, v));
                series1.push((r, sparse_average(&y1, p, r)?));
            }
            Err(Error::EmptyIntersection(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if series0.is_empty() {
        return Err(Error::EmptyIntersection(
            "no radius captures any sparse point; nothing to average".into(),
        ));
    }
    Ok(DivergenceOutcome {
        series0,
        series1,
        preserved_radius: k0,
        base,
        preserve_corner,
        preserve_points,
        fitting_radius: fit,
        certificate_ok,
        template_used,
        y0,
        y1,
    })
}

/// One verified point of the escape demonstration.
#[derive(Debug, Clone)]
pub struct EscapeCheck {
    pub point: Vec<i64>,
    /// Value of the window at the point; the shift by the point reads this
    /// value at the origin.
    pub value: u16,
    pub escapes: bool,
}

/// Exhaustive comparison of the window against its shifts along the
/// sparse set.
#[derive(Debug, Clone)]
pub struct EscapeReport {
    pub radius: u64,
    pub origin_value: u16,
    pub points: Vec<EscapeCheck>,
    pub verified: bool,
}

/// Outcome of the escape demonstration.
#[derive(Debug, Clone)]
pub struct EscapeOutcome {
    pub report: EscapeReport,
    /// Window with ones on every free point.
    pub window_a: Pattern,
    /// Same window with the distinguished free point flipped to zero.
    pub window_b: Pattern,
    /// The flipped free point, when the free set meets the support.
    pub flipped: Option<Vec<i64>>,
    pub base: Vec<i64>,
    pub template_used: usize,
    /// Fraction of covered skeleton cells hit by the combined point set,
    /// against the reserved-width allowance. Informational: feasibility is
    /// decided by the admissibility gate inside the embedding.
    pub certificate: Rational,
    pub certificate_bound: Rational,
    pub certificate_ok: bool,
    pub embed_report: EmbedReport,
}

/// Build a top-stage window reading 0 at the origin and 1 on every point
/// of `P` inside it, verify exhaustively that each shift along `P` differs
/// from the window at the origin, and produce a second window differing
/// from the first in the value at one point of the auxiliary free set `G`.
pub fn demo_escape(
    stages: &[&Stage],
    p: &SparseSet,
    g: &SparseSet,
    radius: Option<u64>,
    base: Option<Vec<i64>>,
) -> Result<EscapeOutcome> {
    if stages.is_empty() {
        return Err(Error::InvalidArgument("empty stage list".into()));
    }
    let k = stages.len();
    let top = stages[k - 1];
    let d = top.dim();
    if p.dim() != d || g.dim() != d {
        return Err(Error::DimensionMismatch {
            left: p.dim().max(g.dim()),
            right: d,
        });
    }
    let n = top.side();
    let base = base.unwrap_or_else(|| vec![-(n as i64 / 2); d]);
    if base.len() != d {
        return Err(Error::DimensionMismatch {
            left: base.len(),
            right: d,
        });
    }
    let support = GridBox::cube(base.clone(), n)?;
    let origin = vec![0i64; d];
    if !support.contains_point(&origin) {
        return Err(Error::InvalidArgument(format!(
            "support placed at {base:?} misses the origin"
        )));
    }
    let p_points = p.in_box(&support);
    let g_points = g.in_box(&support);
    for h in &g_points {
        if p.contains(h) {
            return Err(Error::InvalidArgument(format!(
                "free set meets the sparse set at {h:?}"
            )));
        }
    }
    if p.contains(&origin) || g.contains(&origin) {
        return Err(Error::InvalidArgument(
            "the origin must lie outside both point sets".into(),
        ));
    }

    // combined set: sparse points, free points, and the origin
    let mut combined = SparseSet::explicit(d, p_points.clone())?;
    combined = combined.union(&SparseSet::explicit(d, g_points.clone())?)?;
    combined = combined.union(&SparseSet::explicit(d, vec![origin.clone()])?)?;

    let skeleton = tilde_region(stages, k)?;
    let (certificate, _) = density_certificate(&combined, &skeleton, &[base.clone()])?;
    let certificate_bound = (Rational::one() - top.slack())
        * top
            .d_tolerances()
            .last()
            .expect("stage above 1 carries a tolerance")
            .clone();
    let certificate_ok = certificate <= certificate_bound;

    let mut values: BTreeMap<Vec<i64>, u16> = BTreeMap::new();
    values.insert(origin.clone(), 0);
    for h in &p_points {
        values.insert(h.clone(), 1);
    }
    for h in &g_points {
        values.insert(h.clone(), 1);
    }
    let a_full = Assignment::new(base.clone(), values.clone())?;
    let (window_a, report_a) = embed(stages, k, &a_full, &combined, None)?;
    let template_used = report_a.template_used;

    let flipped = g_points.last().cloned();
    let window_b = match &flipped {
        Some(h) => {
            let mut flipped_values = values;
            flipped_values.insert(h.clone(), 0);
            let a_flip = Assignment::new(base.clone(), flipped_values)?;
            embed(stages, k, &a_flip, &combined, Some(template_used))?.0
        }
        None => window_a.clone(),
    };

    let max_fit = fitting_radius(&base, n);
    let radius = radius.unwrap_or(max_fit);
    if radius == 0 || radius > max_fit {
        return Err(Error::WindowTooLarge(format!(
            "verification radius {radius} outside (0, {max_fit}]"
        )));
    }
    let bx = radius_box(d, radius)?;
    let origin_value = window_a.get(&origin);
    let mut points = Vec::new();
    let mut verified = origin_value == 0;
    for h in p.in_box(&bx) {
        let value = window_a.get(&h);
        let escapes = value != origin_value;
        verified &= escapes && value == 1;
        points.push(EscapeCheck {
            point: h,
            value,
            escapes,
        });
    }
    Ok(EscapeOutcome {
        report: EscapeReport {
            radius,
            origin_value,
            points,
            verified,
        },
        window_a,
        window_b,
        flipped,
        base,
        template_used,
        certificate,
        certificate_bound,
        certificate_ok,
        embed_report: report_a,
    })
}
