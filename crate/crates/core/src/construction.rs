//! Stages of the hierarchical construction: candidate sampling,
//! admissibility filtering, the coprimality insertion map and its sections,
//! building the next stage, verifying consecutive stages, and stage-file
//! serialization.
//!
//! Stage k holds `|C_k|` distinct binary patterns of side `n_k`. A stage
//! k+1 candidate starts as a word over the alphabet `C_k` on the grid
//! `[0, l_k * m_{k+1})^d`, is filtered by residue-coverage and frequency
//! windows on the restriction that drops the last grid layer, is expanded
//! to a binary pattern by block concatenation, and finally passes through
//! the insertion map section so that `n_{k+1} = l_k * m_{k+1} * n_k + 1` is
//! coprime to `m_{k+1}`.
//!
//! Admissibility granularity: the filter conditions quantify over block
//! symbols and residue classes of the current stage lattice. When the block
//! grid is too small to carry them (more symbol-class slots than grid
//! cells, or a frequency window containing no integer count), the same
//! conditions are imposed one level down, on the binary letters of the
//! expanded word. The choice is a pure function of the stage geometry, so
//! building and verification always agree on it.

use crate::error::{Error, Result};
use crate::lattice::{gcd, GridBox, Sublattice};
use crate::patterns::{flatten, Pattern, PatternSet};
use crate::{ratio, Rational};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Values written on the inserted hyperplane cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FillRule {
    AllZero,
    AllOne,
    /// Deterministic per-candidate pseudo-random bits.
    Random,
    /// Caller-provided values, consumed in row-major order of the inserted
    /// cells.
    Explicit(Vec<u16>),
}

impl FillRule {
    pub fn as_string(&self) -> String {
        match self {
            FillRule::AllZero => "all_zero".into(),
            FillRule::AllOne => "all_one".into(),
            FillRule::Random => "random".into(),
            FillRule::Explicit(bits) => {
                let mut s = String::from("explicit:");
                for &b in bits {
                    s.push(char::from_digit(u32::from(b), 10).unwrap_or('?'));
                }
                s
            }
        }
    }

    pub fn parse(text: &str) -> Result<FillRule> {
        match text {
            "all_zero" => Ok(FillRule::AllZero),
            "all_one" => Ok(FillRule::AllOne),
            "random" => Ok(FillRule::Random),
            other => {
                if let Some(bits) = other.strip_prefix("explicit:") {
                    let values = bits
                        .chars()
                        .map(|c| {
                            c.to_digit(10)
                                .map(|v| v as u16)
                                .ok_or_else(|| Error::Format(format!("bad fill digit {c:?}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(FillRule::Explicit(values))
                } else {
                    Err(Error::Format(format!("unknown fill rule {other:?}")))
                }
            }
        }
    }
}

/// Parameters for building the next stage.
#[derive(Debug, Clone)]
pub struct StageParams {
    /// Grid side multiplier `l_k`.
    pub l: u64,
    /// Next-stage modulus `m_{k+1}`; must be a proper multiple of the
    /// current modulus.
    pub m_next: u64,
    /// Frequency tolerance `d_k` in `(0, 1]`.
    pub d_tol: Rational,
    /// Entropy-loss target for the schedule ledger, in `(0, 1)`.
    pub nu: Rational,
    /// Build-time tightening factor in `(0, 1]`: candidates are filtered at
    /// width `d_k * slack` so later perturbations stay inside full width.
    pub slack: Rational,
    /// Number of distinct patterns to accept.
    pub target: usize,
    /// Maximum number of candidate draws.
    pub budget: usize,
    /// Root seed for candidate sampling and random fill.
    pub seed: u64,
    pub fill: FillRule,
}

/// One stage of the construction with its full parameter history.
#[derive(Debug, Clone)]
pub struct Stage {
    d: usize,
    k: usize,
    n: u64,
    m_schedule: Vec<u64>,
    l_schedule: Vec<u64>,
    d_tolerances: Vec<Rational>,
    nu_schedule: Vec<Rational>,
    slack: Rational,
    seed: u64,
    fill_rule: FillRule,
    counts: Vec<u64>,
    patterns: PatternSet,
}

impl Stage {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Pattern side `n_k`.
    pub fn side(&self) -> u64 {
        self.n
    }

    /// Current modulus `m_k`.
    pub fn modulus(&self) -> u64 {
        *self.m_schedule.last().unwrap()
    }

    pub fn m_schedule(&self) -> &[u64] {
        &self.m_schedule
    }

    pub fn l_schedule(&self) -> &[u64] {
        &self.l_schedule
    }

    pub fn d_tolerances(&self) -> &[Rational] {
        &self.d_tolerances
    }

    pub fn nu_schedule(&self) -> &[Rational] {
        &self.nu_schedule
    }

    pub fn slack(&self) -> &Rational {
        &self.slack
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fill_rule(&self) -> &FillRule {
        &self.fill_rule
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn patterns(&self) -> &PatternSet {
        &self.patterns
    }
}

/// First stage: side 1, trivial lattice, patterns `{0, 1}`.
pub fn init_stage(d: usize) -> Result<Stage> {
    let support = GridBox::origin_cube(d, 1)?;
    let mut patterns = PatternSet::new(support.clone(), 2);
    patterns.insert(Pattern::new(support.clone(), 2, vec![0])?)?;
    patterns.insert(Pattern::new(support, 2, vec![1])?)?;
    Ok(Stage {
        d,
        k: 1,
        n: 1,
        m_schedule: vec![1],
        l_schedule: vec![],
        d_tolerances: vec![],
        nu_schedule: vec![],
        slack: ratio(1, 2),
        seed: 0,
        fill_rule: FillRule::AllZero,
        counts: vec![2],
        patterns,
    })
}

/// Granularity at which the filter conditions are imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionLevel {
    /// Over block symbols of the current stage alphabet.
    Block,
    /// Over binary letters of the expanded word.
    Letter,
}

/// Geometry of one build step, shared by filtering, verification, and
/// embedding checks.
#[derive(Debug, Clone)]
pub struct StepGeometry {
    pub d: usize,
    /// Side of the current stage patterns.
    pub n: u64,
    /// Current stage modulus `m_k`.
    pub modulus: u64,
    /// Current stage pattern count `|C_k|`.
    pub count: usize,
    pub l: u64,
    pub m_next: u64,
    pub d_tol: Rational,
    pub slack: Rational,
}

impl StepGeometry {
    pub fn from_params(stage: &Stage, params: &StageParams) -> StepGeometry {
        StepGeometry {
            d: stage.d,
            n: stage.n,
            modulus: stage.modulus(),
            count: stage.patterns.len(),
            l: params.l,
            m_next: params.m_next,
            d_tol: params.d_tol.clone(),
            slack: params.slack.clone(),
        }
    }

    /// Grid side `l_k * m_{k+1}` of the candidate word.
    pub fn grid_side(&self) -> u64 {
        self.l * self.m_next
    }

    /// Next pattern side `l_k * m_{k+1} * n_k + 1`.
    pub fn next_side(&self) -> u64 {
        self.grid_side() * self.n + 1
    }

    /// Frequency window at width `d_k * slack` around `1/(m_k^d * classes)`.
    fn window(&self, alphabet_classes: u64) -> (Rational, Rational) {
        let center_den = BigInt::from(self.modulus.pow(self.d as u32)) * BigInt::from(alphabet_classes);
        let width = &self.d_tol * &self.slack;
        let one = Rational::one();
        let lo = (one.clone() - width.clone()) / Rational::from(center_den.clone());
        let hi = (one + width) / Rational::from(center_den);
        (lo, hi)
    }

    /// Whether an integer count can satisfy the window over `cells` cells
    /// and the coverage demand fits.
    fn feasible(&self, alphabet_classes: u64, cells: u64) -> bool {
        let demand = self.modulus.pow(self.d as u32).saturating_mul(alphabet_classes);
        if demand > cells {
            return false;
        }
        let (lo, hi) = self.window(alphabet_classes);
        let lo_count = (lo * BigInt::from(cells)).ceil().to_integer();
        let hi_count = (hi * BigInt::from(cells)).floor().to_integer();
        lo_count <= hi_count && hi_count >= BigInt::one()
    }

    /// Granularity for this step: block level when the block grid can carry
    /// the conditions, letter level otherwise.
    pub fn level(&self) -> ConditionLevel {
        let block_cells = (self.grid_side() - 1).pow(self.d as u32);
        if self.feasible(self.count as u64, block_cells) {
            ConditionLevel::Block
        } else {
            ConditionLevel::Letter
        }
    }
}

/// Outcome of the admissibility filter.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub pass: bool,
    pub level: ConditionLevel,
    /// First violated condition, when failing.
    pub reason: Option<String>,
}

/// Count symbols per residue class over a box and check coverage plus the
/// frequency window. `class_count` is the number of symbols quantified
/// over; `value` maps a cell to its symbol.
fn check_counts(
    geom: &StepGeometry,
    level: ConditionLevel,
    classes: u64,
    bx: &GridBox,
    value: impl Fn(&[i64]) -> u16,
) -> ConditionCheck {
    let m = geom.modulus;
    let lattice = Sublattice::new(geom.d, m).expect("modulus > 0");
    let residue_count = lattice.index() as usize;
    let mut counts = vec![0u64; classes as usize * residue_count];
    let residue_rank = |g: &[i64]| -> usize {
        let mut idx = 0usize;
        for x in g {
            idx = idx * m as usize + x.rem_euclid(m as i64) as usize;
        }
        idx
    };
    for g in bx.iter_points() {
        let v = value(&g) as usize;
        debug_assert!((v as u64) < classes);
        counts[v * residue_count + residue_rank(&g)] += 1;
    }
    let cells = BigInt::from(bx.cells());
    let (lo, hi) = geom.window(classes);
    let lo_count = lo * cells.clone();
    let hi_count = hi * cells;
    // coverage for every pair first, then the windows
    for symbol in 0..classes as usize {
        for r in 0..residue_count {
            if counts[symbol * residue_count + r] == 0 {
                return ConditionCheck {
                    pass: false,
                    level,
                    reason: Some(format!(
                        "coverage: symbol {symbol} missing in residue class {r}"
                    )),
                };
            }
        }
    }
    for symbol in 0..classes as usize {
        for r in 0..residue_count {
            let c = Rational::from(BigInt::from(counts[symbol * residue_count + r]));
            if c < lo_count || c > hi_count {
                return ConditionCheck {
                    pass: false,
                    level,
                    reason: Some(format!(
                        "window: symbol {symbol} in residue class {r} has count outside [{lo_count}, {hi_count}]"
                    )),
                };
            }
        }
    }
    ConditionCheck {
        pass: true,
        level,
        reason: None,
    }
}

/// Admissibility of a block word: residue coverage and frequency windows on
/// the restriction that drops the last grid layer, imposed at the step's
/// granularity.
pub fn admissible(word: &Pattern, stage: &Stage, params: &StageParams) -> Result<ConditionCheck> {
    let geom = StepGeometry::from_params(stage, params);
    let expected = GridBox::origin_cube(geom.d, geom.grid_side())?;
    if word.support() != &expected {
        return Err(Error::GeometryMismatch(format!(
            "candidate word must live on {expected:?}"
        )));
    }
    Ok(check_word(word, stage, &geom))
}

fn check_word(word: &Pattern, stage: &Stage, geom: &StepGeometry) -> ConditionCheck {
    match geom.level() {
        ConditionLevel::Block => {
            let restricted = GridBox::origin_cube(geom.d, geom.grid_side() - 1).expect("side > 1");
            check_counts(geom, ConditionLevel::Block, geom.count as u64, &restricted, |g| {
                word.get(g)
            })
        }
        ConditionLevel::Letter => {
            let flat = flatten(word, &stage.patterns).expect("word symbols are stage indices");
            check_flat_letters(&flat, geom)
        }
    }
}

/// Letter-level conditions on an expanded (binary) pattern covering
/// `[0, grid_side * n)^d`, restricted to drop the last block layer.
fn check_flat_letters(flat: &Pattern, geom: &StepGeometry) -> ConditionCheck {
    let restricted =
        GridBox::origin_cube(geom.d, (geom.grid_side() - 1) * geom.n).expect("side > 0");
    check_counts(geom, ConditionLevel::Letter, 2, &restricted, |g| flat.get(g))
}

/// Conditions for an already-expanded pattern on `[0, grid_side * n)^d`
/// (no inserted layer), at the step's granularity and the given geometry.
/// Block-level checking requires every block to be a stored stage pattern.
pub fn check_expanded(flat: &Pattern, stage: &Stage, geom: &StepGeometry) -> Result<ConditionCheck> {
    let expected = GridBox::origin_cube(geom.d, geom.grid_side() * geom.n)?;
    if flat.support() != &expected {
        return Err(Error::GeometryMismatch(format!(
            "expanded pattern must live on {expected:?}"
        )));
    }
    match geom.level() {
        ConditionLevel::Block => {
            let word = match decompose(flat, stage, geom) {
                Ok(word) => word,
                Err(e) => {
                    return Ok(ConditionCheck {
                        pass: false,
                        level: ConditionLevel::Block,
                        reason: Some(format!("block decomposition failed: {e}")),
                    })
                }
            };
            Ok(check_word(&word, stage, geom))
        }
        ConditionLevel::Letter => Ok(check_flat_letters(flat, geom)),
    }
}

/// Recover the block word of an expanded pattern; every block must be a
/// stored stage pattern.
pub fn decompose(flat: &Pattern, stage: &Stage, geom: &StepGeometry) -> Result<Pattern> {
    let side = geom.grid_side();
    let grid = GridBox::origin_cube(geom.d, side)?;
    let mut values = Vec::with_capacity(grid.cells());
    for g in grid.iter_points() {
        let corner: Vec<i64> = g.iter().map(|x| x * geom.n as i64).collect();
        let bx = GridBox::cube(corner.clone(), geom.n)?;
        let block = flat.restrict(&bx)?.translate(
            &corner.iter().map(|c| -c).collect::<Vec<_>>(),
        )?;
        let idx = stage.patterns.position_of(block.values()).ok_or_else(|| {
            Error::VerificationFailed(format!("block at {corner:?} is not a stored stage pattern"))
        })?;
        values.push(idx as u16);
    }
    Pattern::new(grid, (stage.patterns.len() as u32).max(2), values)
}

const STREAM_CANDIDATE: u64 = 0;
const STREAM_FILL: u64 = 1;

/// Deterministic per-draw generator: the stream is keyed by the root seed,
/// the current stage index, the draw index, and a stream tag.
pub(crate) fn derive_rng(seed: u64, k: u64, draw: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&k.to_le_bytes());
    key[16..24].copy_from_slice(&draw.to_le_bytes());
    key[24..32].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Unbiased uniform draw below `bound`.
pub(crate) fn uniform_below(rng: &mut impl RngCore, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    let zone = u32::MAX - u32::MAX % bound;
    loop {
        let v = rng.next_u32();
        if v < zone {
            return v % bound;
        }
    }
}

/// Uniform candidate word over the stage alphabet on the step grid.
pub fn sample_candidate(stage: &Stage, params: &StageParams, draw: usize) -> Result<Pattern> {
    let geom = StepGeometry::from_params(stage, params);
    let grid = GridBox::origin_cube(geom.d, geom.grid_side())?;
    let mut rng = derive_rng(params.seed, stage.k as u64, draw as u64, STREAM_CANDIDATE);
    let count = stage.patterns.len() as u32;
    let values: Vec<u16> = (0..grid.cells())
        .map(|_| uniform_below(&mut rng, count) as u16)
        .collect();
    Pattern::new(grid, count.max(2), values)
}

/// Insertion map: drop the hyperplanes `{ g : g_i = N - 1 - n_prev }` from
/// a side-`N` cube, mapping the result onto the side-`N-1` cube.
pub fn phi(w: &Pattern, n_prev: u64) -> Result<Pattern> {
    let support = w.support();
    let n = support
        .cube_side()
        .filter(|_| support.corner().iter().all(|&c| c == 0))
        .ok_or_else(|| Error::GeometryMismatch("insertion map needs an origin cube".into()))?;
    if n < n_prev + 2 || (n - 1) % n_prev != 0 {
        return Err(Error::GeometryMismatch(format!(
            "side {n} is not a block multiple of {n_prev} plus one"
        )));
    }
    let cut = (n - 1 - n_prev) as i64;
    let d = support.dim();
    let out_box = GridBox::origin_cube(d, n - 1)?;
    let mut values = Vec::with_capacity(out_box.cells());
    for g in out_box.iter_points() {
        let src: Vec<i64> = g.iter().map(|&x| if x < cut { x } else { x + 1 }).collect();
        values.push(w.get(&src));
    }
    Pattern::new(out_box, w.alphabet(), values)
}

/// Section of the insertion map: re-insert the dropped hyperplanes, writing
/// fill values on them. The result agrees with the input on
/// `[0, N - n_prev - 1)^d` and maps back to it under [`phi`].
pub fn phi_inverse(
    wt: &Pattern,
    n_prev: u64,
    fill: &FillRule,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Pattern> {
    let support = wt.support();
    let n1 = support
        .cube_side()
        .filter(|_| support.corner().iter().all(|&c| c == 0))
        .ok_or_else(|| Error::GeometryMismatch("insertion section needs an origin cube".into()))?;
    if n1 < n_prev + 1 || n1 % n_prev != 0 {
        return Err(Error::GeometryMismatch(format!(
            "side {n1} is not a block multiple of {n_prev}"
        )));
    }
    let n = n1 + 1;
    let cut = (n - 1 - n_prev) as i64;
    let d = support.dim();
    let out_box = GridBox::origin_cube(d, n)?;
    let inserted_cells = (n.pow(d as u32) - n1.pow(d as u32)) as usize;
    if let FillRule::Explicit(bits) = fill {
        if bits.len() != inserted_cells {
            return Err(Error::GeometryMismatch(format!(
                "explicit fill needs {inserted_cells} values, got {}",
                bits.len()
            )));
        }
    }
    let mut values = Vec::with_capacity(out_box.cells());
    let mut explicit_idx = 0usize;
    for g in out_box.iter_points() {
        if g.iter().any(|&x| x == cut) {
            let v = match fill {
                FillRule::AllZero => 0,
                FillRule::AllOne => 1,
                FillRule::Random => {
                    let rng = rng
                        .as_deref_mut()
                        .ok_or_else(|| Error::InvalidArgument("random fill needs a generator".into()))?;
                    uniform_below(rng, wt.alphabet()) as u16
                }
                FillRule::Explicit(bits) => {
                    let v = bits[explicit_idx];
                    explicit_idx += 1;
                    v
                }
            };
            values.push(v);
        } else {
            let src: Vec<i64> = g.iter().map(|&x| if x < cut { x } else { x - 1 }).collect();
            values.push(wt.get(&src));
        }
    }
    Pattern::new(out_box, wt.alphabet(), values)
}

/// Build statistics for one stage step.
#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    /// Draw indices scanned (in draw order) before stopping.
    pub draws: usize,
    /// Scanned candidates passing the filter (duplicates included).
    pub passed: usize,
    /// Distinct accepted patterns.
    pub accepted: usize,
    /// Whether the target count was reached within budget.
    pub complete: bool,
    pub level: ConditionLevel,
}

impl BuildReport {
    /// Passing fraction among scanned draws.
    pub fn acceptance_ratio(&self) -> Rational {
        if self.draws == 0 {
            Rational::zero()
        } else {
            ratio(self.passed as i64, self.draws as i64)
        }
    }
}

fn validate_params(stage: &Stage, params: &StageParams) -> Result<()> {
    if params.l == 0 {
        return Err(Error::InvalidArgument("grid multiplier must be positive".into()));
    }
    let m_k = stage.modulus();
    if params.m_next <= m_k || params.m_next % m_k != 0 {
        return Err(Error::InvalidArgument(format!(
            "next modulus must properly extend the schedule: {} after {m_k}",
            params.m_next
        )));
    }
    let zero = Rational::zero();
    let one = Rational::one();
    if params.d_tol <= zero || params.d_tol > one {
        return Err(Error::InvalidArgument("tolerance must lie in (0, 1]".into()));
    }
    if params.slack <= zero || params.slack > one {
        return Err(Error::InvalidArgument("slack must lie in (0, 1]".into()));
    }
    if params.nu <= zero || params.nu >= one {
        return Err(Error::InvalidArgument("entropy-loss target must lie in (0, 1)".into()));
    }
    if params.target == 0 {
        return Err(Error::InvalidArgument("target count must be positive".into()));
    }
    if params.budget < params.target {
        return Err(Error::InvalidArgument("budget cannot be below target".into()));
    }
    Ok(())
}

/// Expand a filtered word into the next-stage pattern: block concatenation,
/// then the insertion section with the step's fill rule.
fn expand_candidate(
    word: &Pattern,
    stage: &Stage,
    params: &StageParams,
    draw: usize,
) -> Result<Pattern> {
    let flat = flatten(word, &stage.patterns)?;
    let mut rng;
    let rng_opt = match params.fill {
        FillRule::Random => {
            rng = derive_rng(params.seed, stage.k as u64, draw as u64, STREAM_FILL);
            Some(&mut rng)
        }
        _ => None,
    };
    phi_inverse(&flat, stage.n, &params.fill, rng_opt)
}

/// Draw, filter, expand, and deduplicate candidates until the target count
/// of distinct next-stage patterns is reached or the budget is exhausted.
///
/// The accepted set depends only on the parameters (candidates are keyed by
/// draw index and scanned in draw order), never on thread count.
pub fn build_next(stage: &Stage, params: &StageParams) -> Result<(Stage, BuildReport)> {
    validate_params(stage, params)?;
    let geom = StepGeometry::from_params(stage, params);
    let level = geom.level();
    let n_next = geom.next_side();
    debug_assert_eq!(gcd(n_next, params.m_next), 1);

    let support = GridBox::origin_cube(stage.d, n_next)?;
    let mut accepted = PatternSet::new(support.clone(), 2);
    let mut draws = 0usize;
    let mut passed = 0usize;

    const CHUNK: usize = 64;
    let mut start = 0usize;
    'outer: while start < params.budget {
        let end = (start + CHUNK).min(params.budget);
        let chunk: Vec<(bool, Option<Pattern>)> = (start..end)
            .into_par_iter()
            .map(|draw| {
                let word = sample_candidate(stage, params, draw)?;
                let check = check_word(&word, stage, &geom);
                if check.pass {
                    let expanded = expand_candidate(&word, stage, params, draw)?;
                    Ok((true, Some(expanded)))
                } else {
                    Ok((false, None))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for (pass, expanded) in chunk {
            draws += 1;
            if pass {
                passed += 1;
                accepted.insert(expanded.expect("passing draw carries a pattern"))?;
                if accepted.len() == params.target {
                    break 'outer;
                }
            }
        }
        start = end;
    }

    if accepted.is_empty() {
        let (lo, hi) = geom.window(if level == ConditionLevel::Block {
            geom.count as u64
        } else {
            2
        });
        return Err(Error::Unsatisfiable {
            draws,
            detail: format!(
                "no candidate passed at {:?} level; window [{lo}, {hi}] over {} grid cells",
                level,
                (geom.grid_side() - 1).pow(geom.d as u32)
            ),
        });
    }

    let complete = accepted.len() == params.target;
    let report = BuildReport {
        draws,
        passed,
        accepted: accepted.len(),
        complete,
        level,
    };
    let mut m_schedule = stage.m_schedule.clone();
    m_schedule.push(params.m_next);
    let mut l_schedule = stage.l_schedule.clone();
    l_schedule.push(params.l);
    let mut d_tolerances = stage.d_tolerances.clone();
    d_tolerances.push(params.d_tol.clone());
    let mut nu_schedule = stage.nu_schedule.clone();
    nu_schedule.push(params.nu.clone());
    let mut counts = stage.counts.clone();
    counts.push(accepted.len() as u64);
    let next = Stage {
        d: stage.d,
        k: stage.k + 1,
        n: n_next,
        m_schedule,
        l_schedule,
        d_tolerances,
        nu_schedule,
        slack: params.slack.clone(),
        seed: params.seed,
        fill_rule: params.fill.clone(),
        counts,
        patterns: accepted,
    };
    Ok((next, report))
}

/// Verification report for a consecutive stage pair.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub pass: bool,
    /// Index of the earlier stage.
    pub k: usize,
    pub level: ConditionLevel,
    /// Side recursion and schedule consistency.
    pub structure_ok: bool,
    /// Both sides coprime to their moduli.
    pub gcd_ok: bool,
    /// Every pattern decomposes into stored blocks of the earlier stage.
    pub concatenation_ok: bool,
    /// Residue coverage of every symbol at the step granularity.
    pub coverage_ok: bool,
    /// Frequency windows at the step granularity.
    pub window_ok: bool,
    /// Patterns agree with their stripped image away from the inserted
    /// layer.
    pub coincidence_ok: bool,
    pub counterexamples: Vec<String>,
}

/// Re-derive and check the filter conditions, the concatenation structure,
/// the coprimality, and the insertion coincidence for a consecutive pair.
pub fn verify_stage_pair(a: &Stage, b: &Stage) -> Result<StageReport> {
    if b.k != a.k + 1 {
        return Err(Error::InvalidArgument(format!(
            "stages are not consecutive: {} then {}",
            a.k, b.k
        )));
    }
    if a.d != b.d {
        return Err(Error::DimensionMismatch { left: a.d, right: b.d });
    }
    if b.m_schedule[..a.m_schedule.len()] != a.m_schedule[..]
        || b.l_schedule[..a.l_schedule.len()] != a.l_schedule[..]
        || b.counts[..a.counts.len()] != a.counts[..]
    {
        return Err(Error::InvalidArgument(
            "stage histories disagree on their common prefix".into(),
        ));
    }
    let l = *b.l_schedule.last().expect("stage above 1 has grid history");
    let m_next = *b.m_schedule.last().expect("schedule non-empty");
    let d_tol = b.d_tolerances.last().expect("tolerance history").clone();
    let geom = StepGeometry {
        d: a.d,
        n: a.n,
        modulus: a.modulus(),
        count: a.patterns.len(),
        l,
        m_next,
        d_tol,
        slack: b.slack.clone(),
    };
    let level = geom.level();
    let mut counterexamples = Vec::new();

    let structure_ok = b.n == geom.next_side()
        && b.counts.last().copied() == Some(b.patterns.len() as u64)
        && a.counts.last().copied() == Some(a.patterns.len() as u64);
    if !structure_ok {
        counterexamples.push(format!(
            "side or count mismatch: expected side {}, stored {}",
            geom.next_side(),
            b.n
        ));
    }
    let gcd_ok = gcd(a.n, a.modulus()) == 1 && gcd(b.n, m_next) == 1;
    if !gcd_ok {
        counterexamples.push("pattern side shares a factor with the modulus".into());
    }

    let mut concatenation_ok = true;
    let mut coverage_ok = true;
    let mut window_ok = true;
    let mut coincidence_ok = true;

    let coincide_side = b.n - a.n - 1;
    for (i, w) in b.patterns.iter().enumerate() {
        let stripped = phi(w, a.n)?;
        if coincide_side > 0 {
            let bx = GridBox::origin_cube(a.d, coincide_side)?;
            if stripped.restrict(&bx)? != w.restrict(&bx)? {
                coincidence_ok = false;
                counterexamples.push(format!(
                    "pattern {i}: differs from its stripped image near the origin"
                ));
            }
        }
        match decompose(&stripped, a, &geom) {
            Ok(word) => {
                let check = check_word(&word, a, &geom);
                if !check.pass {
                    let reason = check.reason.unwrap_or_default();
                    if reason.starts_with("coverage") {
                        coverage_ok = false;
                    } else {
                        window_ok = false;
                    }
                    counterexamples.push(format!("pattern {i}: {reason}"));
                }
            }
            Err(e) => {
                concatenation_ok = false;
                counterexamples.push(format!("pattern {i}: {e}"));
            }
        }
    }

    let pass = structure_ok
        && gcd_ok
        && concatenation_ok
        && coverage_ok
        && window_ok
        && coincidence_ok;
    Ok(StageReport {
        pass,
        k: a.k,
        level,
        structure_ok,
        gcd_ok,
        concatenation_ok,
        coverage_ok,
        window_ok,
        coincidence_ok,
        counterexamples,
    })
}

/// Restriction of a chosen stage pattern to a window, with the pattern
/// translated so the window sits centered inside its support.
pub fn window_of_point(stage: &Stage, choice: usize, window: &GridBox) -> Result<Pattern> {
    if choice >= stage.patterns.len() {
        return Err(Error::InvalidArgument(format!(
            "stage holds {} patterns, asked for {choice}",
            stage.patterns.len()
        )));
    }
    if window.dim() != stage.d {
        return Err(Error::DimensionMismatch {
            left: window.dim(),
            right: stage.d,
        });
    }
    if window.sides().iter().any(|&s| s > stage.n) {
        return Err(Error::WindowTooLarge(format!(
            "window sides {:?} exceed stage side {}",
            window.sides(),
            stage.n
        )));
    }
    let t: Vec<i64> = (0..stage.d)
        .map(|i| window.corner()[i] - ((stage.n - window.sides()[i]) / 2) as i64)
        .collect();
    stage.patterns.get(choice).translate(&t)?.restrict(window)
}

// --- stage file serialization ---

#[derive(Serialize, Deserialize)]
struct StageFile {
    format: u32,
    d: usize,
    k: usize,
    n: u64,
    m_schedule: Vec<u64>,
    l_schedule: Vec<u64>,
    d_tolerances: Vec<String>,
    nu_schedule: Vec<String>,
    slack: String,
    seed: u64,
    fill_rule: String,
    counts: Vec<u64>,
    patterns: Vec<String>,
}

/// Render a rational as `num/den`.
pub fn rational_to_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parse `num/den` or a bare integer.
pub fn rational_from_string(s: &str) -> Result<Rational> {
    let parse_int = |t: &str| -> Result<BigInt> {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::Format(format!("bad rational component {t:?}")))
    };
    match s.split_once('/') {
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den.is_zero() {
                return Err(Error::Format("zero denominator".into()));
            }
            Ok(Rational::new(parse_int(num)?, den))
        }
        None => Ok(Rational::from(parse_int(s)?)),
    }
}

impl Stage {
    /// Serialize to the stage-file JSON form (pretty, trailing newline).
    pub fn to_json(&self) -> String {
        let patterns = self
            .patterns
            .iter()
            .map(|p| {
                p.values()
                    .iter()
                    .map(|&v| char::from_digit(u32::from(v), 10).expect("binary symbol"))
                    .collect::<String>()
            })
            .collect();
        let file = StageFile {
            format: 1,
            d: self.d,
            k: self.k,
            n: self.n,
            m_schedule: self.m_schedule.clone(),
            l_schedule: self.l_schedule.clone(),
            d_tolerances: self.d_tolerances.iter().map(rational_to_string).collect(),
            nu_schedule: self.nu_schedule.iter().map(rational_to_string).collect(),
            slack: rational_to_string(&self.slack),
            seed: self.seed,
            fill_rule: self.fill_rule.as_string(),
            counts: self.counts.clone(),
            patterns,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("stage serializes");
        out.push('\n');
        out
    }

    /// Parse and validate a stage file.
    pub fn from_json(text: &str) -> Result<Stage> {
        let file: StageFile = serde_json::from_str(text)?;
        if file.format != 1 {
            return Err(Error::Format(format!(
                "unsupported stage file format {}",
                file.format
            )));
        }
        if file.k == 0
            || file.m_schedule.len() != file.k
            || file.l_schedule.len() != file.k - 1
            || file.d_tolerances.len() != file.k - 1
            || file.nu_schedule.len() != file.k - 1
            || file.counts.len() != file.k
        {
            return Err(Error::Format("schedule lengths disagree with stage index".into()));
        }
        crate::lattice::SubgroupSchedule::new(file.m_schedule.clone())?;
        let mut n = 1u64;
        for i in 0..file.k - 1 {
            n = file.l_schedule[i] * file.m_schedule[i + 1] * n + 1;
        }
        if n != file.n {
            return Err(Error::Format(format!(
                "side {} disagrees with schedule-derived {}",
                file.n, n
            )));
        }
        if file.counts.last().copied() != Some(file.patterns.len() as u64) {
            return Err(Error::Format("pattern count disagrees with counts entry".into()));
        }
        let support = GridBox::origin_cube(file.d, file.n)?;
        let mut patterns = PatternSet::new(support.clone(), 2);
        for (i, text) in file.patterns.iter().enumerate() {
            let values = text
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u16),
                    '1' => Ok(1u16),
                    _ => Err(Error::Format(format!("pattern {i}: bad symbol {c:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let p = Pattern::new(support.clone(), 2, values)?;
            if !patterns.insert(p)? {
                return Err(Error::Format(format!("pattern {i} is a duplicate")));
            }
        }
        Ok(Stage {
            d: file.d,
            k: file.k,
            n: file.n,
            m_schedule: file.m_schedule,
            l_schedule: file.l_schedule,
            d_tolerances: file
                .d_tolerances
                .iter()
                .map(|s| rational_from_string(s))
                .collect::<Result<Vec<_>>>()?,
            nu_schedule: file
                .nu_schedule
                .iter()
                .map(|s| rational_from_string(s))
                .collect::<Result<Vec<_>>>()?,
            slack: rational_from_string(&file.slack)?,
            seed: file.seed,
            fill_rule: FillRule::parse(&file.fill_rule)?,
            counts: file.counts,
            patterns,
        })
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Stage> {
        Stage::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Reference parameter sets used across tests and documentation examples.
pub mod reference {
    use super::*;

    /// 1-D build, first step: moduli 1 then 2, grid multiplier 8.
    pub fn params_1d_step1(seed: u64) -> StageParams {
        StageParams {
            l: 8,
            m_next: 2,
            d_tol: ratio(1, 2),
            nu: ratio(1, 10),
            slack: ratio(1, 2),
            target: 40,
            budget: 4000,
            seed,
            fill: FillRule::AllZero,
        }
    }

    /// 1-D build, second step: modulus 6, grid multiplier 6.
    pub fn params_1d_step2(seed: u64) -> StageParams {
        StageParams {
            l: 6,
            m_next: 6,
            d_tol: ratio(3, 10),
            nu: ratio(1, 10),
            slack: ratio(1, 2),
            target: 60,
            budget: 6000,
            seed,
            fill: FillRule::AllZero,
        }
    }

    /// 2-D build, single step: modulus 2, grid multiplier 4.
    pub fn params_2d_step1(seed: u64) -> StageParams {
        StageParams {
            l: 4,
            m_next: 2,
            d_tol: ratio(1, 2),
            nu: ratio(1, 10),
            slack: ratio(1, 2),
            target: 25,
            budget: 2500,
            seed,
            fill: FillRule::AllZero,
        }
    }
}
