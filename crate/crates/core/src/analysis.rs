//! Quantitative reports over built stages: entropy ledger with rigorous
//! logarithm brackets, schedule viability checks, exact frequency extremes
//! per residue class, the gap series with measured boundary corrections,
//! and the exhaustive counting-law fraction for words with near-uniform
//! symbol statistics.

use crate::construction::Stage;
use crate::error::{Error, Result};
use crate::lattice::{GridBox, Sublattice};
use crate::patterns::{Pattern, PatternSet};
use crate::Rational;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Exact rational bracket `lo <= ln(m) <= hi` via the inverse hyperbolic
/// tangent series at `z = (m-1)/(m+1)`, which converges geometrically with
/// ratio `z^2 <= 1/9` for `m <= 2`.
fn ln_series(m: &Rational, terms: usize) -> (Rational, Rational) {
    let one = Rational::one();
    let z = (m - &one) / (m + &one);
    if z.is_zero() {
        return (Rational::zero(), Rational::zero());
    }
    let z2 = &z * &z;
    let mut sum = Rational::zero();
    let mut zpow = z.clone();
    for j in 0..terms {
        sum += &zpow / Rational::from(BigInt::from(2 * j as u64 + 1));
        zpow *= &z2;
    }
    let lo = Rational::from(BigInt::from(2)) * sum;
    // remaining terms are bounded by a geometric series with ratio z^2
    let tail = Rational::from(BigInt::from(2)) * zpow
        / (Rational::from(BigInt::from(2 * terms as u64 + 1)) * (one - z2));
    let hi = &lo + tail;
    (lo, hi)
}

const LN_TERMS: usize = 24;

/// Exact rational bracket for the natural logarithm of a positive integer:
/// split `x = m * 2^e` with `m` in `[1, 2)` and combine the series brackets
/// for `ln m` and `ln 2`.
pub fn ln_bounds(x: &BigUint) -> Result<(Rational, Rational)> {
    if x.is_zero() {
        return Err(Error::InvalidArgument("logarithm of zero".into()));
    }
    let bits = x.bits();
    let e = bits - 1;
    let m = Rational::new(BigInt::from(x.clone()), BigInt::from(BigUint::one() << e));
    let (m_lo, m_hi) = ln_series(&m, LN_TERMS);
    let (two_lo, two_hi) = ln_2_bounds();
    let e = Rational::from(BigInt::from(e));
    Ok((m_lo + &e * two_lo, m_hi + e * two_hi))
}

/// Exact rational bracket for `ln 2`.
pub fn ln_2_bounds() -> (Rational, Rational) {
    ln_series(&Rational::from(BigInt::from(2)), LN_TERMS)
}

pub fn midpoint_f64(lo: &Rational, hi: &Rational) -> f64 {
    ((lo + hi) / Rational::from(BigInt::from(2)))
        .to_f64()
        .unwrap_or(f64::NAN)
}

/// Count data for one stage, decoupled from stored patterns so synthetic
/// count lists can be analyzed alongside real builds.
#[derive(Debug, Clone)]
pub struct StageCounts {
    /// Pattern side `n_k`.
    pub n: u64,
    /// Pattern count `|C_k|`.
    pub count: BigUint,
    /// Parameters of the step from this stage to the next, absent on the
    /// last stage.
    pub step: Option<StepCounts>,
}

/// Step parameters relevant to the entropy and schedule ledgers.
#[derive(Debug, Clone)]
pub struct StepCounts {
    pub l: u64,
    pub m_next: u64,
    pub nu: Rational,
}

/// Extract count data from a consecutive chain of built stages.
pub fn stage_counts(stages: &[&Stage]) -> Result<Vec<StageCounts>> {
    if stages.is_empty() {
        return Err(Error::InvalidArgument("empty stage list".into()));
    }
    for w in stages.windows(2) {
        if w[1].k() != w[0].k() + 1 {
            return Err(Error::InvalidArgument(format!(
                "stages are not consecutive: {} then {}",
                w[0].k(),
                w[1].k()
            )));
        }
        if w[1].dim() != w[0].dim() {
            return Err(Error::DimensionMismatch {
                left: w[0].dim(),
                right: w[1].dim(),
            });
        }
    }
    Ok(stages
        .iter()
        .enumerate()
        .map(|(i, s)| StageCounts {
            n: s.side(),
            count: BigUint::from(s.patterns().len()),
            step: stages.get(i + 1).map(|next| StepCounts {
                l: *next.l_schedule().last().expect("stage above 1"),
                m_next: *next.m_schedule().last().expect("non-empty schedule"),
                nu: next.nu_schedule().last().expect("stage above 1").clone(),
            }),
        })
        .collect())
}

/// One row of the entropy ledger.
#[derive(Debug, Clone)]
pub struct EntropyEntry {
    pub k: usize,
    pub n: u64,
    pub count_decimal: String,
    /// Rational bracket of `ln|C_k| / n_k^d`.
    pub value_lo: Rational,
    pub value_hi: Rational,
    pub value: f64,
    /// Rational bracket of the scheduled target
    /// `prod_{i<k} (1 - nu_i)^{d+1} * ln 2`.
    pub target_lo: Rational,
    pub target_hi: Rational,
    pub target: f64,
    /// Loss parameter of the step leaving this stage.
    pub nu: Option<Rational>,
    /// Loss actually achieved by the step leaving this stage: the value
    /// `nu'` solving `|C_{k+1}| = |C_k|^{(l m)^d (1 - nu')}`.
    pub effective_nu: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EntropyLedger {
    pub d: usize,
    pub entries: Vec<EntropyEntry>,
}

/// Per-stage pattern-count growth rates with rigorous logarithm brackets,
/// scheduled targets, and achieved loss exponents.
pub fn entropy_bounds(d: usize, stages: &[StageCounts]) -> Result<EntropyLedger> {
    if stages.is_empty() {
        return Err(Error::InvalidArgument("empty stage list".into()));
    }
    let (two_lo, two_hi) = ln_2_bounds();
    let one = Rational::one();
    let mut target_factor = Rational::one();
    let mut entries = Vec::with_capacity(stages.len());
    let lns: Vec<(Rational, Rational)> = stages
        .iter()
        .map(|s| ln_bounds(&s.count))
        .collect::<Result<Vec<_>>>()?;
    for (i, s) in stages.iter().enumerate() {
        let cells = Rational::from(BigInt::from(s.n).pow(d as u32));
        let (ln_lo, ln_hi) = &lns[i];
        let value_lo = ln_lo / &cells;
        let value_hi = ln_hi / &cells;
        let target_lo = &target_factor * &two_lo;
        let target_hi = &target_factor * &two_hi;
        let effective_nu = s.step.as_ref().and_then(|step| {
            let next = &lns.get(i + 1)?.0;
            if ln_lo.is_zero() {
                return None;
            }
            let grid = Rational::from(BigInt::from(step.l * step.m_next).pow(d as u32));
            let next_hi = &lns[i + 1].1;
            let mid_next = midpoint_f64(next, next_hi);
            let mid_this = midpoint_f64(ln_lo, ln_hi);
            let grid = grid.to_f64()?;
            Some(1.0 - mid_next / (grid * mid_this))
        });
        entries.push(EntropyEntry {
            k: i + 1,
            n: s.n,
            count_decimal: s.count.to_string(),
            value: midpoint_f64(&value_lo, &value_hi),
            value_lo,
            value_hi,
            target: midpoint_f64(&target_lo, &target_hi),
            target_lo,
            target_hi,
            nu: s.step.as_ref().map(|st| st.nu.clone()),
            effective_nu,
        });
        if let Some(step) = &s.step {
            let factor = (&one - &step.nu).pow((d + 1) as i32);
            target_factor *= factor;
        }
    }
    Ok(EntropyLedger { d, entries })
}

/// One row of the schedule viability report, covering the step from stage
/// `k` to `k+1`.
#[derive(Debug, Clone)]
pub struct ScheduleEntry {
    pub k: usize,
    pub nu: Rational,
    pub n_next: u64,
    /// Whether `nu_k * n_{k+1} >= 1` holds exactly.
    pub cofinality_ok: bool,
    /// Whether `|C_{k+1}| >= |C_k|^{(l m)^d (1 - nu_k)}` holds exactly.
    pub count_ok: bool,
    /// Base-2 logarithm of the required next-stage count.
    pub required_bits: f64,
    pub achieved_bits: f64,
}

/// Exact per-step checks of the two schedule inequalities: the cofinality
/// condition on `nu_k * n_{k+1}` and the count growth demand, the latter
/// decided by integer power comparison.
pub fn schedule_check(d: usize, stages: &[StageCounts]) -> Result<Vec<ScheduleEntry>> {
    let mut out = Vec::new();
    for (i, s) in stages.iter().enumerate() {
        let Some(step) = &s.step else { continue };
        let Some(next) = stages.get(i + 1) else { continue };
        let n_next = step.l * step.m_next * s.n + 1;
        let nu = &step.nu;
        let cofinality_ok = nu.numer() * BigInt::from(n_next) >= BigInt::from(nu.denom().clone());
        let grid = BigUint::from(step.l * step.m_next).pow(d as u32);
        // |C_{k+1}|^q >= |C_k|^{(l m)^d (q - p)} for nu = p/q
        let p = nu.numer().to_biguint().ok_or_else(|| {
            Error::InvalidArgument("loss parameter must be non-negative".into())
        })?;
        let q = nu.denom().to_biguint().expect("reduced denominator positive");
        let count_ok = if p > q {
            true
        } else {
            let lhs_exp = u32::try_from(&q)
                .map_err(|_| Error::Overflow("schedule exponent"))?;
            let rhs_exp_big = &grid * (&q - &p);
            let rhs_exp = u32::try_from(&rhs_exp_big)
                .map_err(|_| Error::Overflow("schedule exponent"))?;
            next.count.pow(lhs_exp) >= s.count.pow(rhs_exp)
        };
        let (b_lo, b_hi) = ln_bounds(&s.count)?;
        let (n_lo, n_hi) = ln_bounds(&next.count)?;
        let (t_lo, t_hi) = ln_2_bounds();
        let ln2 = midpoint_f64(&t_lo, &t_hi);
        let one = Rational::one();
        let factor = (&one - nu) * Rational::from(BigInt::from(step.l * step.m_next).pow(d as u32));
        let required_bits = factor.to_f64().unwrap_or(f64::NAN) * midpoint_f64(&b_lo, &b_hi) / ln2;
        let achieved_bits = midpoint_f64(&n_lo, &n_hi) / ln2;
        out.push(ScheduleEntry {
            k: i + 1,
            nu: nu.clone(),
            n_next,
            cofinality_ok,
            count_ok,
            required_bits,
            achieved_bits,
        });
    }
    Ok(out)
}

/// Exact extremes of a pattern's frequency over stored patterns and
/// residue classes.
#[derive(Debug, Clone)]
pub struct AlphaBeta {
    pub alpha: Rational,
    pub beta: Rational,
    /// Pattern index and residue representative attaining the minimum.
    pub alpha_witness: (usize, Vec<i64>),
    pub beta_witness: (usize, Vec<i64>),
}

/// Minimum and maximum of `frequency(b, W, class)` over all stored
/// patterns `W` and all residue classes of the lattice.
pub fn alpha_beta(
    patterns: &PatternSet,
    b: &Pattern,
    lattice: &Sublattice,
) -> Result<AlphaBeta> {
    if patterns.is_empty() {
        return Err(Error::EmptySupport);
    }
    let support = patterns.support();
    if b.support().dim() != support.dim() {
        return Err(Error::DimensionMismatch {
            left: b.support().dim(),
            right: support.dim(),
        });
    }
    if b
        .support()
        .sides()
        .iter()
        .zip(support.sides())
        .any(|(a, b)| a > b)
    {
        return Err(Error::NotContained(
            "probe pattern is larger than the stage support".into(),
        ));
    }
    let mut best: Option<AlphaBeta> = None;
    for (i, w) in patterns.iter().enumerate() {
        for rep in lattice.residues() {
            let query = crate::patterns::OccurrenceQuery::in_class(rep.clone(), lattice.clone())?;
            let fr = crate::patterns::frequency(b, w, &query)?;
            match &mut best {
                None => {
                    best = Some(AlphaBeta {
                        alpha: fr.clone(),
                        beta: fr,
                        alpha_witness: (i, rep.clone()),
                        beta_witness: (i, rep),
                    });
                }
                Some(ab) => {
                    if fr < ab.alpha {
                        ab.alpha = fr.clone();
                        ab.alpha_witness = (i, rep.clone());
                    }
                    if fr > ab.beta {
                        ab.beta = fr;
                        ab.beta_witness = (i, rep);
                    }
                }
            }
        }
    }
    Ok(best.expect("non-empty pattern set"))
}

/// One row of the gap report.
#[derive(Debug, Clone)]
pub struct GapEntry {
    pub k: usize,
    pub alpha: Rational,
    pub beta: Rational,
    pub gap: Rational,
    /// Reference bound `2 d_{k-1}`, absent on the first stage.
    pub bound: Option<Rational>,
    /// Exact frequency mass of occurrence positions not contained in a
    /// single previous-stage block, plus the inserted-layer mass.
    pub correction: Option<Rational>,
    /// Whether the gap exceeds the bound plus the correction.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub entries: Vec<GapEntry>,
    /// Whether the gap never increases along the stage chain.
    pub non_increasing: bool,
}

/// Frequency extremes per stage with the per-step reference bound and an
/// exactly measured boundary correction.
pub fn gap_series(
    stages: &[&Stage],
    b: &Pattern,
    lattice: &Sublattice,
) -> Result<GapReport> {
    if stages.len() < 2 {
        return Err(Error::InvalidArgument("gap series needs at least two stages".into()));
    }
    stage_counts(stages)?;
    let d = stages[0].dim();
    let mut entries = Vec::new();
    for (i, s) in stages.iter().enumerate() {
        let ab = alpha_beta(s.patterns(), b, lattice)?;
        let gap = &ab.beta - &ab.alpha;
        let (bound, correction) = if i == 0 {
            (None, None)
        } else {
            let prev = stages[i - 1];
            let d_tol = s
                .d_tolerances()
                .last()
                .expect("stage above 1 has tolerance history");
            let bound = Rational::from(BigInt::from(2)) * d_tol;
            let lm = *s.l_schedule().last().expect("grid history")
                * *s.m_schedule().last().expect("schedule");
            let total_positions: BigInt = b
                .support()
                .sides()
                .iter()
                .map(|&side| BigInt::from(s.side() as i64 - side as i64 + 1))
                .product();
            let interior_per_block: BigInt = b
                .support()
                .sides()
                .iter()
                .map(|&side| {
                    if side > prev.side() {
                        BigInt::zero()
                    } else {
                        BigInt::from(prev.side() - side + 1)
                    }
                })
                .product();
            if total_positions <= BigInt::zero() {
                return Err(Error::NotContained(
                    "probe pattern is larger than the stage support".into(),
                ));
            }
            let blocks = BigInt::from(lm).pow(d as u32);
            let straddle = &total_positions - &blocks * interior_per_block;
            let cells = BigInt::from(s.side()).pow(d as u32);
            let inserted = &cells - BigInt::from(lm * prev.side()).pow(d as u32);
            let correction = Rational::new(straddle + inserted, cells);
            (Some(bound), Some(correction))
        };
        let flagged = match (&bound, &correction) {
            (Some(b), Some(c)) => gap > b + c,
            _ => false,
        };
        entries.push(GapEntry {
            k: s.k(),
            alpha: ab.alpha,
            beta: ab.beta,
            gap,
            bound,
            correction,
            flagged,
        });
    }
    let non_increasing = entries.windows(2).all(|w| w[1].gap <= w[0].gap);
    Ok(GapReport {
        entries,
        non_increasing,
    })
}

/// Enumeration mode for the counting-law fraction.
#[derive(Debug, Clone, Copy)]
pub enum LlnMode {
    Exhaustive,
    MonteCarlo { trials: u64, seed: u64 },
}

const EXHAUSTIVE_CAP: u64 = 1 << 24;

/// Fraction of words on `[0, n)^d` over `alphabet` symbols whose per-symbol
/// per-residue-class frequencies all lie strictly within `epsilon` of the
/// uniform value `1 / (alphabet * index)`.
///
/// Exhaustive mode enumerates every word (capped at 2^24 words) and returns
/// the exact fraction; Monte Carlo mode returns the passing fraction of a
/// deterministic uniform sample.
pub fn lln_fraction(
    n: u64,
    epsilon: &Rational,
    lattice: &Sublattice,
    alphabet: u32,
    mode: LlnMode,
) -> Result<Rational> {
    if alphabet < 2 {
        return Err(Error::InvalidArgument("alphabet needs at least two symbols".into()));
    }
    if epsilon < &Rational::zero() {
        return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
    }
    let d = lattice.dim();
    let grid = GridBox::origin_cube(d, n)?;
    let cells = grid.cells();
    let ranks: Vec<usize> = grid
        .iter_points()
        .map(|g| {
            let m = lattice.modulus();
            g.iter().fold(0usize, |acc, &x| {
                acc * m as usize + x.rem_euclid(m as i64) as usize
            })
        })
        .collect();
    let index = lattice.index() as usize;
    // per-class position counts differ only when the modulus does not
    // divide the side; the acceptance window is on absolute counts
    let slots = alphabet as usize * index;

    // valid[c] = whether a per-(symbol, class) count of c passes the window
    let total_cells = BigInt::from(cells);
    let scale = BigInt::from(slots);
    let valid: Vec<bool> = (0..=cells)
        .map(|c| {
            let lhs = (BigInt::from(c) * &scale - &total_cells).abs() * BigInt::from(epsilon.denom().clone());
            let rhs = BigInt::from(epsilon.numer().clone()) * &total_cells * &scale;
            lhs < rhs
        })
        .collect();

    let check = |counts: &[u32]| -> bool {
        counts.iter().all(|&c| valid[c as usize])
    };

    match mode {
        LlnMode::Exhaustive => {
            let total = (alphabet as u64)
                .checked_pow(u32::try_from(cells).map_err(|_| Error::Overflow("cell count"))?)
                .filter(|&t| t <= EXHAUSTIVE_CAP)
                .ok_or(Error::Overflow("exhaustive word count exceeds the cap"))?;
            const CHUNK: u64 = 1 << 14;
            let starts: Vec<u64> = (0..total).step_by(CHUNK as usize).collect();
            let passing: u64 = starts
                .into_par_iter()
                .map(|start| {
                    let end = (start + CHUNK).min(total);
                    let mut counts = vec![0u32; slots];
                    let mut local = 0u64;
                    for word in start..end {
                        counts.iter_mut().for_each(|c| *c = 0);
                        let mut t = word;
                        for rank in &ranks {
                            let digit = (t % alphabet as u64) as usize;
                            t /= alphabet as u64;
                            counts[digit * index + rank] += 1;
                        }
                        if check(&counts) {
                            local += 1;
                        }
                    }
                    local
                })
                .sum();
            Ok(Rational::new(BigInt::from(passing), BigInt::from(total)))
        }
        LlnMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidArgument("zero trials".into()));
            }
            let mut key = [0u8; 32];
            key[0..8].copy_from_slice(&seed.to_le_bytes());
            let mut rng = ChaCha8Rng::from_seed(key);
            let mut counts = vec![0u32; slots];
            let mut passing = 0u64;
            for _ in 0..trials {
                counts.iter_mut().for_each(|c| *c = 0);
                for rank in &ranks {
                    let digit = crate::construction::uniform_below(&mut rng, alphabet) as usize;
                    counts[digit * index + rank] += 1;
                }
                if check(&counts) {
                    passing += 1;
                }
            }
            Ok(Rational::new(BigInt::from(passing), BigInt::from(trials)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_next, init_stage, reference};
    use crate::ratio;

    fn big_ratio(num: BigUint, den: BigUint) -> Rational {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn binomial(n: u64, k: u64) -> BigUint {
        let mut acc = BigUint::one();
        for i in 0..k.min(n - k) {
            acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        if k > n {
            BigUint::zero()
        } else {
            acc
        }
    }

    #[test]
    fn logarithm_brackets_are_tight_and_ordered() {
        for x in [2u64, 3, 40, 1000, 1 << 40] {
            let (lo, hi) = ln_bounds(&BigUint::from(x)).unwrap();
            let truth = (x as f64).ln();
            assert!(lo.to_f64().unwrap() <= truth + 1e-15);
            assert!(hi.to_f64().unwrap() >= truth - 1e-15);
            let width = (&hi - &lo).to_f64().unwrap();
            assert!(width < 1e-15, "width {width} for {x}");
        }
        let (lo, hi) = ln_bounds(&BigUint::one()).unwrap();
        assert!(lo.is_zero() && hi.is_zero());
    }

    #[test]
    fn full_shift_counts_give_log_two_at_every_side() {
        for n in [1u64, 5, 20] {
            let stages = vec![StageCounts {
                n,
                count: BigUint::from(2u32).pow(n as u32),
                step: None,
            }];
            let ledger = entropy_bounds(1, &stages).unwrap();
            let v = ledger.entries[0].value;
            assert!((v - std::f64::consts::LN_2).abs() < 1e-13, "side {n}: {v}");
        }
    }

    #[test]
    fn lossless_synthetic_chain_is_flat_at_log_two() {
        // counts grow by the full grid exponent, sides by pure concatenation
        let mut stages = Vec::new();
        let mut n = 1u64;
        let mut count = BigUint::from(2u32);
        let steps = [(8u64, 2u64), (6, 6)];
        for &(l, m) in &steps {
            stages.push(StageCounts {
                n,
                count: count.clone(),
                step: Some(StepCounts {
                    l,
                    m_next: m,
                    nu: ratio(1, 10),
                }),
            });
            count = count.pow((l * m) as u32);
            n *= l * m;
        }
        stages.push(StageCounts { n, count, step: None });
        let ledger = entropy_bounds(1, &stages).unwrap();
        for e in &ledger.entries {
            assert!(
                (e.value - std::f64::consts::LN_2).abs() < 1e-12,
                "stage {}: {}",
                e.k,
                e.value
            );
        }
        // lossless growth means zero effective loss
        for e in &ledger.entries[..2] {
            let nu = e.effective_nu.unwrap();
            assert!(nu.abs() < 1e-12, "stage {}: {nu}", e.k);
        }
    }

    #[test]
    fn reference_build_ledger_matches_closed_form() {
        let s1 = init_stage(1).unwrap();
        let (s2, _) = build_next(&s1, &reference::params_1d_step1(1)).unwrap();
        let counts = stage_counts(&[&s1, &s2]).unwrap();
        let ledger = entropy_bounds(1, &counts).unwrap();
        assert_eq!(ledger.entries.len(), 2);
        let v = ledger.entries[1].value;
        assert!((v - (40f64).ln() / 17.0).abs() < 1e-13, "{v}");
        // achieved loss: 1 - ln 40 / (16 ln 2)
        let nu = ledger.entries[0].effective_nu.unwrap();
        let expect = 1.0 - (40f64).ln() / (16.0 * std::f64::consts::LN_2);
        assert!((nu - expect).abs() < 1e-12, "{nu} vs {expect}");
        // first-stage target is ln 2 itself
        assert!((ledger.entries[0].target - std::f64::consts::LN_2).abs() < 1e-13);
    }

    #[test]
    fn schedule_report_checks_both_inequalities() {
        let stages = vec![
            StageCounts {
                n: 1,
                count: BigUint::from(2u32),
                step: Some(StepCounts {
                    l: 8,
                    m_next: 2,
                    nu: ratio(1, 10),
                }),
            },
            StageCounts {
                n: 17,
                count: BigUint::from(40u32),
                step: None,
            },
        ];
        let report = schedule_check(1, &stages).unwrap();
        assert_eq!(report.len(), 1);
        let e = &report[0];
        // 17/10 >= 1
        assert!(e.cofinality_ok);
        // 40 falls far short of 2^(16 * 9/10)
        assert!(!e.count_ok);
        assert!(e.required_bits > e.achieved_bits);
        assert!((e.required_bits - 14.4).abs() < 1e-9);

        let mut zero_nu = stages.clone();
        zero_nu[0].step.as_mut().unwrap().nu = Rational::zero();
        let report = schedule_check(1, &zero_nu).unwrap();
        assert!(!report[0].cofinality_ok);

        // a lossless synthetic step satisfies the count demand
        let lossless = vec![
            StageCounts {
                n: 1,
                count: BigUint::from(2u32),
                step: Some(StepCounts {
                    l: 8,
                    m_next: 2,
                    nu: ratio(1, 10),
                }),
            },
            StageCounts {
                n: 16,
                count: BigUint::from(2u32).pow(16),
                step: None,
            },
        ];
        assert!(schedule_check(1, &lossless).unwrap()[0].count_ok);
    }

    #[test]
    fn frequency_extremes_on_the_first_stage() {
        let s = init_stage(1).unwrap();
        let probe = Pattern::from_bits("1").unwrap();
        let ab = alpha_beta(s.patterns(), &probe, &Sublattice::new(1, 1).unwrap()).unwrap();
        assert_eq!(ab.alpha, Rational::zero());
        assert_eq!(ab.beta, Rational::one());
    }

    #[test]
    fn frequency_extremes_on_a_singleton_set() {
        let support = GridBox::origin_cube(1, 4).unwrap();
        let mut set = PatternSet::new(support.clone(), 2);
        set.insert(Pattern::from_bits("0110").unwrap()).unwrap();
        let probe = Pattern::from_bits("0110").unwrap();
        let ab = alpha_beta(&set, &probe, &Sublattice::new(1, 1).unwrap()).unwrap();
        // the whole pattern occurs exactly once over 4 cells
        assert_eq!(ab.alpha, ratio(1, 4));
        assert_eq!(ab.beta, ratio(1, 4));
    }

    #[test]
    fn gap_report_on_the_reference_first_step() {
        let s1 = init_stage(1).unwrap();
        let (s2, _) = build_next(&s1, &reference::params_1d_step1(1)).unwrap();
        let probe = Pattern::from_bits("1").unwrap();
        let report = gap_series(&[&s1, &s2], &probe, &Sublattice::new(1, 1).unwrap()).unwrap();
        assert_eq!(report.entries.len(), 2);
        let e = &report.entries[1];
        assert!(e.alpha <= e.beta);
        // bound 2 * (1/2) = 1 with the correction never flags
        assert_eq!(e.bound.clone().unwrap(), ratio(1, 1));
        assert!(!e.flagged);
        // single-cell probe: one straddle position plus one inserted cell
        assert_eq!(e.correction.clone().unwrap(), ratio(2, 17));
    }

    #[test]
    fn counting_fraction_matches_the_binomial_oracle() {
        let lattice = Sublattice::new(1, 1).unwrap();
        // strict window |k/20 - 1/2| < 1/10 admits counts 9, 10, 11
        let got = lln_fraction(20, &ratio(1, 10), &lattice, 2, LlnMode::Exhaustive).unwrap();
        let num = binomial(20, 9) + binomial(20, 10) + binomial(20, 11);
        assert_eq!(got, big_ratio(num, BigUint::from(2u32).pow(20)));
    }

    #[test]
    fn counting_fraction_two_dimensional_oracle() {
        let lattice = Sublattice::new(2, 1).unwrap();
        // |k/9 - 1/2| < 1/6 admits counts 4 and 5
        let got = lln_fraction(3, &ratio(1, 6), &lattice, 2, LlnMode::Exhaustive).unwrap();
        let num = binomial(9, 4) + binomial(9, 5);
        assert_eq!(got, big_ratio(num, BigUint::from(2u32).pow(9)));
    }

    #[test]
    fn counting_fraction_edge_tolerances() {
        let lattice = Sublattice::new(1, 1).unwrap();
        let one = lln_fraction(6, &ratio(1, 1), &lattice, 2, LlnMode::Exhaustive).unwrap();
        assert_eq!(one, Rational::one());
        let zero = lln_fraction(5, &Rational::zero(), &lattice, 2, LlnMode::Exhaustive).unwrap();
        assert_eq!(zero, Rational::zero());
    }

    #[test]
    fn counting_fraction_is_monotone_in_the_tolerance() {
        let lattice = Sublattice::new(1, 1).unwrap();
        let mut prev = Rational::zero();
        for eps in [ratio(1, 20), ratio(1, 10), ratio(1, 5), ratio(1, 2)] {
            let f = lln_fraction(8, &eps, &lattice, 2, LlnMode::Exhaustive).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn counting_fraction_respects_residue_classes() {
        // side 4, modulus 2: two cells per class; strict 1/4-window around
        // 1/4 demands exactly one of each symbol in each class
        let lattice = Sublattice::new(1, 2).unwrap();
        let got = lln_fraction(4, &ratio(1, 4), &lattice, 2, LlnMode::Exhaustive).unwrap();
        assert_eq!(got, ratio(4, 16));
    }

    #[test]
    fn exhaustive_cap_is_enforced() {
        let lattice = Sublattice::new(1, 1).unwrap();
        assert!(matches!(
            lln_fraction(25, &ratio(1, 10), &lattice, 2, LlnMode::Exhaustive),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn monte_carlo_tracks_the_exact_fraction() {
        let lattice = Sublattice::new(1, 1).unwrap();
        let exact = lln_fraction(12, &ratio(1, 10), &lattice, 2, LlnMode::Exhaustive).unwrap();
        let est = lln_fraction(
            12,
            &ratio(1, 10),
            &lattice,
            2,
            LlnMode::MonteCarlo {
                trials: 20000,
                seed: 11,
            },
        )
        .unwrap();
        let diff = (est - exact).to_f64().unwrap().abs();
        assert!(diff < 0.02, "difference {diff}");
    }
}
