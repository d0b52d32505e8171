//! Writing prescribed values on a sparse set of cells inside a stage
//! pattern. The skeleton recursion tracks which cells are covered by
//! concatenated lower-stage blocks; embedding recurses into the touched
//! blocks, copies untouched blocks from a template, writes free cells
//! directly, and accepts a result only when it passes the admissibility
//! conditions at full window width.

use crate::construction::{check_expanded, phi, Stage, StepGeometry};
use crate::error::{Error, Result};
use crate::lattice::GridBox;
use crate::patterns::Pattern;
use crate::sparse::SparseSet;
use crate::Rational;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use std::collections::{BTreeMap, BTreeSet};

/// The cells of `[0, n_k)^d` covered by recursively concatenated blocks;
/// the complement is free.
#[derive(Debug, Clone)]
pub struct Skeleton {
    k: usize,
    side: u64,
    cells: BTreeSet<Vec<i64>>,
}

impl Skeleton {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        self.cells.contains(point)
    }

    /// Covered cells in ascending lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.cells.iter()
    }

    /// Cells of the stage support not covered by the skeleton.
    pub fn free_cells(&self, d: usize) -> Result<Vec<Vec<i64>>> {
        let bx = GridBox::origin_cube(d, self.side)?;
        Ok(bx
            .iter_points()
            .filter(|p| !self.cells.contains(p))
            .collect())
    }
}

fn validate_chain(stages: &[&Stage]) -> Result<usize> {
    if stages.is_empty() {
        return Err(Error::InvalidArgument("empty stage list".into()));
    }
    let d = stages[0].dim();
    for (i, s) in stages.iter().enumerate() {
        if s.k() != i + 1 {
            return Err(Error::InvalidArgument(format!(
                "stage chain must start at 1 and be consecutive; position {} holds stage {}",
                i + 1,
                s.k()
            )));
        }
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                left: s.dim(),
                right: d,
            });
        }
    }
    Ok(d)
}

/// Grid side `l * m` of the step arriving at this stage.
fn arriving_grid(stage: &Stage) -> u64 {
    stage.l_schedule().last().expect("stage above 1") * stage.m_schedule().last().expect("schedule")
}

/// Block layout of a stage: given a cell with no coordinate on the
/// inserted hyperplanes, the grid position of its block.
fn block_of(h: &[i64], n_prev: u64, lm: u64, cut: i64) -> Option<Vec<i64>> {
    let mut g = Vec::with_capacity(h.len());
    for &x in h {
        if x == cut {
            return None;
        }
        if x < cut {
            g.push(x / n_prev as i64);
        } else {
            g.push(lm as i64 - 1);
        }
    }
    Some(g)
}

/// Corner of the block at grid position `g`: the last block along each
/// axis sits one past the inserted hyperplane.
fn block_corner(g: &[i64], n_prev: u64, lm: u64) -> Vec<i64> {
    g.iter()
        .map(|&x| x * n_prev as i64 + i64::from(x == lm as i64 - 1))
        .collect()
}

/// The recursively covered cell set of stage `k`.
pub fn tilde_region(stages: &[&Stage], k: usize) -> Result<Skeleton> {
    let d = validate_chain(stages)?;
    if k == 0 || k > stages.len() {
        return Err(Error::InvalidArgument(format!(
            "skeleton level {k} outside the built chain of {}",
            stages.len()
        )));
    }
    let mut cells: BTreeSet<Vec<i64>> = BTreeSet::new();
    cells.insert(vec![0; d]);
    for level in 1..k {
        let prev = stages[level - 1];
        let cur = stages[level];
        let lm = arriving_grid(cur);
        let grid = GridBox::origin_cube(d, lm)?;
        let mut next = BTreeSet::new();
        for g in grid.iter_points() {
            let corner = block_corner(&g, prev.side(), lm);
            for c in &cells {
                next.insert(c.iter().zip(&corner).map(|(a, b)| a + b).collect());
            }
        }
        cells = next;
    }
    Ok(Skeleton {
        k,
        side: stages[k - 1].side(),
        cells,
    })
}

/// Largest fraction of skeleton cells hit by `P` over the given
/// placements, with the attaining placement.
pub fn density_certificate(
    p: &SparseSet,
    skeleton: &Skeleton,
    placements: &[Vec<i64>],
) -> Result<(Rational, Vec<i64>)> {
    if placements.is_empty() {
        return Err(Error::InvalidArgument("no placements given".into()));
    }
    let mut best: Option<(Rational, Vec<i64>)> = None;
    for g in placements {
        let hits = skeleton
            .cells()
            .filter(|c| {
                let abs: Vec<i64> = c.iter().zip(g).map(|(a, b)| a + b).collect();
                p.contains(&abs)
            })
            .count();
        let value = Rational::new(BigInt::from(hits), BigInt::from(skeleton.len()));
        match &best {
            Some((v, _)) if *v >= value => {}
            _ => best = Some((value, g.clone())),
        }
    }
    Ok(best.expect("non-empty placements"))
}

/// Values prescribed on the points of `P` inside a placed stage support.
#[derive(Debug, Clone)]
pub struct Assignment {
    base: Vec<i64>,
    values: BTreeMap<Vec<i64>, u16>,
}

impl Assignment {
    pub fn new(base: Vec<i64>, values: BTreeMap<Vec<i64>, u16>) -> Result<Assignment> {
        for (h, &v) in &values {
            if h.len() != base.len() {
                return Err(Error::DimensionMismatch {
                    left: h.len(),
                    right: base.len(),
                });
            }
            if v > 1 {
                return Err(Error::InvalidArgument(format!(
                    "assignment value {v} at {h:?} is not a bit"
                )));
            }
        }
        Ok(Assignment { base, values })
    }

    pub fn base(&self) -> &[i64] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, point: &[i64]) -> Option<u16> {
        self.values.get(point).copied()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.values.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, u16)> {
        self.values.iter().map(|(h, &v)| (h, v))
    }

    /// Parse lines of `x1 ... xd v` with `v` a bit.
    pub fn parse(text: &str, base: Vec<i64>) -> Result<Assignment> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<i64>()
                        .map_err(|_| Error::Format(format!("line {}: bad integer {t:?}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != base.len() + 1 {
                return Err(Error::Format(format!(
                    "line {}: expected {} coordinates and a bit",
                    i + 1,
                    base.len()
                )));
            }
            let v = nums[base.len()];
            if v != 0 && v != 1 {
                return Err(Error::Format(format!("line {}: value must be 0 or 1", i + 1)));
            }
            values.insert(nums[..base.len()].to_vec(), v as u16);
        }
        Assignment::new(base, values)
    }

    pub fn read_file(path: &std::path::Path, base: Vec<i64>) -> Result<Assignment> {
        Assignment::parse(&std::fs::read_to_string(path)?, base)
    }
}

/// Per-level usage gathered along the successful construction path.
#[derive(Debug, Clone, Default)]
pub struct LevelUse {
    /// Parents at this level that performed a block layout.
    pub parents: usize,
    /// Largest number of touched blocks in any single parent.
    pub max_touched: usize,
    /// Template candidates tried across parents at this level.
    pub templates_tried: usize,
}

/// Outcome data of an embedding run.
#[derive(Debug, Clone)]
pub struct EmbedReport {
    pub k: usize,
    /// Template index used at the top level.
    pub template_used: usize,
    pub assignment_points: usize,
    /// Usage per level (levels `2..=k`), in level order.
    pub levels: Vec<(usize, LevelUse)>,
    /// Touched-block allowance per level from the reserved window width:
    /// `floor((1 - slack) * d_tol * (l m)^d)`.
    pub budgets: Vec<(usize, usize)>,
    /// Whether every parent stayed within the allowance. Informational:
    /// acceptance is decided by the full-width admissibility gate.
    pub within_budget: bool,
}

#[derive(Default)]
struct Stats {
    levels: BTreeMap<usize, LevelUse>,
}

impl Stats {
    fn merge(&mut self, other: Stats) {
        for (level, usage) in other.levels {
            let e = self.levels.entry(level).or_default();
            e.parents += usage.parents;
            e.max_touched = e.max_touched.max(usage.max_touched);
            e.templates_tried += usage.templates_tried;
        }
    }

    fn record(&mut self, level: usize, touched: usize, tried: usize) {
        let e = self.levels.entry(level).or_default();
        e.parents += 1;
        e.max_touched = e.max_touched.max(touched);
        e.templates_tried += tried;
    }
}

fn embed_level(
    stages: &[&Stage],
    level: usize,
    rel: &BTreeMap<Vec<i64>, u16>,
    preferred: Option<usize>,
) -> Result<(Pattern, usize, Stats)> {
    let stage = stages[level - 1];
    let set = stage.patterns();
    let lex = set.lex_order();
    let default_template = *lex.first().expect("non-empty stage");

    if level == 1 {
        let idx = match rel.iter().next() {
            Some((_, &v)) => set
                .position_of(&[v])
                .expect("first stage holds both symbols"),
            None => preferred.unwrap_or(default_template),
        };
        return Ok((set.get(idx).clone(), idx, Stats::default()));
    }

    let prev = stages[level - 2];
    let n_prev = prev.side();
    let n = stage.side();
    let lm = arriving_grid(stage);
    let cut = (n - 1 - n_prev) as i64;
    let geom = StepGeometry {
        d: stage.dim(),
        n: n_prev,
        modulus: prev.modulus(),
        count: prev.patterns().len(),
        l: *stage.l_schedule().last().expect("grid history"),
        m_next: *stage.m_schedule().last().expect("schedule"),
        d_tol: stage.d_tolerances().last().expect("tolerance history").clone(),
        slack: Rational::one(),
    };

    // split the prescribed cells into free (inserted-layer) cells and
    // per-block sub-assignments
    let mut free: Vec<(Vec<i64>, u16)> = Vec::new();
    let mut blocks: BTreeMap<Vec<i64>, BTreeMap<Vec<i64>, u16>> = BTreeMap::new();
    for (h, &v) in rel {
        match block_of(h, n_prev, lm, cut) {
            None => free.push((h.clone(), v)),
            Some(g) => {
                let corner = block_corner(&g, n_prev, lm);
                let sub: Vec<i64> = h.iter().zip(&corner).map(|(a, b)| a - b).collect();
                blocks.entry(g).or_default().insert(sub, v);
            }
        }
    }
    let touched = blocks.len();

    let candidates: Vec<usize> = preferred
        .into_iter()
        .chain(lex.iter().copied().filter(|i| Some(*i) != preferred))
        .collect();
    let mut tried = 0usize;
    let mut last_reason = String::new();
    for t_idx in candidates {
        tried += 1;
        let template = set.get(t_idx);
        let mut values = template.values().to_vec();
        let support = template.support().clone();
        for (h, v) in &free {
            values[support.offset_of(h)] = *v;
        }
        let mut child_stats = Stats::default();
        let mut failed = None;
        for (g, sub_rel) in &blocks {
            let corner = block_corner(g, n_prev, lm);
            let block_box = GridBox::cube(corner.clone(), n_prev)?;
            let shift: Vec<i64> = corner.iter().map(|c| -c).collect();
            let template_block = template.restrict(&block_box)?.translate(&shift)?;
            let t_block_idx = prev
                .patterns()
                .position_of(template_block.values())
                .ok_or_else(|| {
                    Error::VerificationFailed(format!(
                        "template block at {corner:?} is not a stored pattern"
                    ))
                })?;
            match embed_level(stages, level - 1, sub_rel, Some(t_block_idx)) {
                Ok((sub, _, stats)) => {
                    child_stats.merge(stats);
                    for q in sub.support().iter_points() {
                        let target: Vec<i64> = q.iter().zip(&corner).map(|(a, b)| a + b).collect();
                        values[support.offset_of(&target)] =
                            sub.get(&q);
                    }
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            // sub-embeds exhaust their own templates; retrying the parent
            // template cannot help a sub-level refusal
            if matches!(e, Error::NoFeasibleTemplate(_)) {
                return Err(e);
            }
            return Err(e);
        }
        let candidate = Pattern::new(support, template.alphabet(), values)?;
        let stripped = phi(&candidate, n_prev)?;
        let check = check_expanded(&stripped, prev, &geom)?;
        if check.pass {
            let mut stats = child_stats;
            stats.record(level, touched, tried);
            return Ok((candidate, t_idx, stats));
        }
        last_reason = check.reason.unwrap_or_default();
    }
    Err(Error::NoFeasibleTemplate(format!(
        "level {level}: no stored template absorbs {touched} touched blocks and {} free cells at full width; last failure: {last_reason}",
        free.len()
    )))
}

fn budget_table(stages: &[&Stage], k: usize) -> Vec<(usize, usize)> {
    (2..=k)
        .map(|level| {
            let stage = stages[level - 1];
            let lm = arriving_grid(stage);
            let width = (Rational::one() - stage.slack())
                * stage.d_tolerances().last().expect("tolerance history")
                * Rational::from(BigInt::from(lm).pow(stage.dim() as u32));
            let budget = width.floor().to_integer().to_usize().unwrap_or(0);
            (level, budget)
        })
        .collect()
}

/// Check that the assignment's domain is exactly `P` intersected with the
/// placed support, and return the prescription relative to the corner.
fn relative_assignment(
    support: &GridBox,
    a: &Assignment,
    p: &SparseSet,
) -> Result<BTreeMap<Vec<i64>, u16>> {
    let expected: BTreeSet<Vec<i64>> = p.in_box(support).into_iter().collect();
    let got: BTreeSet<Vec<i64>> = a.domain().cloned().collect();
    if expected != got {
        let missing: Vec<_> = expected.difference(&got).take(3).collect();
        let extra: Vec<_> = got.difference(&expected).take(3).collect();
        return Err(Error::AssignmentDomainMismatch(format!(
            "domain must be exactly the sparse points inside {support:?}; missing {missing:?}, extra {extra:?}"
        )));
    }
    Ok(a.iter()
        .map(|(h, v)| {
            (
                h.iter().zip(a.base()).map(|(x, b)| x - b).collect(),
                v,
            )
        })
        .collect())
}

/// Build a stage-`k` pattern reproducing the assignment on every point of
/// `P` inside the placed support `base + [0, n_k)^d`.
///
/// Untouched blocks copy a template (lexicographically least stored
/// pattern unless overridden); touched blocks recurse; free cells take
/// prescribed values or template values. The result must pass the
/// admissibility conditions at full window width at every level, template
/// candidates being tried in lexicographic order until one absorbs the
/// perturbation.
pub fn embed(
    stages: &[&Stage],
    k: usize,
    a: &Assignment,
    p: &SparseSet,
    template: Option<usize>,
) -> Result<(Pattern, EmbedReport)> {
    let d = validate_chain(stages)?;
    if k == 0 || k > stages.len() {
        return Err(Error::InvalidArgument(format!(
            "embedding level {k} outside the built chain of {}",
            stages.len()
        )));
    }
    if a.base().len() != d || p.dim() != d {
        return Err(Error::DimensionMismatch {
            left: a.base().len(),
            right: d,
        });
    }
    if let Some(t) = template {
        if t >= stages[k - 1].patterns().len() {
            return Err(Error::InvalidArgument(format!(
                "template index {t} outside the stored {} patterns",
                stages[k - 1].patterns().len()
            )));
        }
    }
    let support = GridBox::cube(a.base().to_vec(), stages[k - 1].side())?;
    let rel = relative_assignment(&support, a, p)?;
    let (pattern, template_used, stats) = embed_level(&stages[..k], k, &rel, template)?;
    let budgets = budget_table(stages, k);
    let within_budget = budgets.iter().all(|(level, budget)| {
        stats
            .levels
            .get(level)
            .map(|u| u.max_touched <= *budget)
            .unwrap_or(true)
    });
    let report = EmbedReport {
        k,
        template_used,
        assignment_points: rel.len(),
        levels: stats.levels.into_iter().collect(),
        budgets,
        within_budget,
    };
    let placed = pattern.translate(a.base())?;
    debug_assert!(a.iter().all(|(h, v)| placed.get(h) == v));
    Ok((placed, report))
}

/// Report of a window-preserving embedding.
#[derive(Debug, Clone)]
pub struct ExceptReport {
    /// Absolute corner and side of the sub-block left untouched, when one
    /// was carved out.
    pub preserved_corner: Option<Vec<i64>>,
    pub preserved_side: Option<u64>,
    /// Radius `n` such that the preserved sub-block lies inside
    /// `(-n, n)^d`: outside that cube the assignment is reproduced.
    pub radius: u64,
    /// Assignment points inside the preserved sub-block, skipped.
    pub skipped: Vec<Vec<i64>>,
    pub embed: EmbedReport,
}

/// Like [`embed`], but the previous-stage sub-block containing `preserve`
/// keeps its template values; assignment points inside it are skipped and
/// reported. With no preserve box this is exactly [`embed`].
pub fn embed_except(
    stages: &[&Stage],
    k: usize,
    preserve: Option<&GridBox>,
    a: &Assignment,
    p: &SparseSet,
    template: Option<usize>,
) -> Result<(Pattern, ExceptReport)> {
    validate_chain(stages)?;
    if k == 0 || k > stages.len() {
        return Err(Error::InvalidArgument(format!(
            "embedding level {k} outside the built chain of {}",
            stages.len()
        )));
    }
    let stage = stages[k - 1];
    let support = GridBox::cube(a.base().to_vec(), stage.side())?;
    let Some(preserve) = preserve else {
        let (pattern, report) = embed(stages, k, a, p, template)?;
        let radius = cover_radius(&support);
        return Ok((
            pattern,
            ExceptReport {
                preserved_corner: None,
                preserved_side: None,
                radius,
                skipped: Vec::new(),
                embed: report,
            },
        ));
    };
    if !support.contains_box(preserve) {
        return Err(Error::NotContained(format!(
            "preserve box {preserve:?} outside the placed support {support:?}"
        )));
    }
    if preserve == &support {
        // nothing substituted: the template itself, placed
        let lex_least = *stage.patterns().lex_order().first().expect("non-empty stage");
        let idx = template.unwrap_or(lex_least);
        if idx >= stage.patterns().len() {
            return Err(Error::InvalidArgument(format!(
                "template index {idx} outside the stored {} patterns",
                stage.patterns().len()
            )));
        }
        let pattern = stage.patterns().get(idx).translate(a.base())?;
        return Ok((
            pattern,
            ExceptReport {
                preserved_corner: Some(support.corner().to_vec()),
                preserved_side: support.cube_side(),
                radius: cover_radius(&support),
                skipped: a.domain().cloned().collect(),
                embed: EmbedReport {
                    k,
                    template_used: idx,
                    assignment_points: a.len(),
                    levels: Vec::new(),
                    budgets: budget_table(stages, k),
                    within_budget: true,
                },
            },
        ));
    }
    if k == 1 {
        return Err(Error::InvalidArgument(
            "the first stage has no sub-blocks to preserve".into(),
        ));
    }
    let prev = stages[k - 2];
    let n_prev = prev.side();
    let lm = arriving_grid(stage);
    let cut = (stage.side() - 1 - n_prev) as i64;
    // locate the sub-block containing the whole preserve box
    let lo: Vec<i64> = preserve
        .corner()
        .iter()
        .zip(a.base())
        .map(|(c, b)| c - b)
        .collect();
    let hi: Vec<i64> = preserve
        .upper()
        .iter()
        .zip(a.base())
        .map(|(u, b)| u - 1 - b)
        .collect();
    let (Some(g_lo), Some(g_hi)) = (
        block_of(&lo, n_prev, lm, cut),
        block_of(&hi, n_prev, lm, cut),
    ) else {
        return Err(Error::PreserveStraddlesBlocks(format!(
            "preserve box {preserve:?} meets the inserted layer; shrink or re-center it"
        )));
    };
    if g_lo != g_hi {
        return Err(Error::PreserveStraddlesBlocks(format!(
            "preserve box {preserve:?} spans blocks {g_lo:?} and {g_hi:?}; shrink or re-center it"
        )));
    }
    let corner_rel = block_corner(&g_lo, n_prev, lm);
    let corner_abs: Vec<i64> = corner_rel.iter().zip(a.base()).map(|(c, b)| c + b).collect();
    let block_abs = GridBox::cube(corner_abs.clone(), n_prev)?;
    // drop assignment points inside the preserved sub-block
    let mut kept = BTreeMap::new();
    let mut skipped = Vec::new();
    for (h, v) in a.iter() {
        if block_abs.contains_point(h) {
            skipped.push(h.clone());
        } else {
            kept.insert(h.clone(), v);
        }
    }
    let rel: BTreeMap<Vec<i64>, u16> = kept
        .iter()
        .map(|(h, v)| {
            (
                h.iter().zip(a.base()).map(|(x, b)| x - b).collect(),
                *v,
            )
        })
        .collect();
    // domain check against the full sparse intersection happens on the
    // original assignment
    relative_assignment(&support, a, p)?;
    let (pattern, template_used, stats) = embed_level(&stages[..k], k, &rel, template)?;
    let budgets = budget_table(stages, k);
    let within_budget = budgets.iter().all(|(level, budget)| {
        stats
            .levels
            .get(level)
            .map(|u| u.max_touched <= *budget)
            .unwrap_or(true)
    });
    let placed = pattern.translate(a.base())?;
    let radius = cover_radius(&block_abs);
    Ok((
        placed,
        ExceptReport {
            preserved_corner: Some(corner_abs),
            preserved_side: Some(n_prev),
            radius,
            skipped,
            embed: EmbedReport {
                k,
                template_used,
                assignment_points: rel.len(),
                levels: stats.levels.into_iter().collect(),
                budgets,
                within_budget,
            },
        },
    ))
}

/// Smallest `n` with the box inside `(-n, n)^d`.
fn cover_radius(bx: &GridBox) -> u64 {
    let mut r = 1i64;
    for i in 0..bx.dim() {
        r = r.max(bx.corner()[i].abs() + 1);
        r = r.max((bx.upper()[i] - 1).abs() + 1);
    }
    r as u64
}
