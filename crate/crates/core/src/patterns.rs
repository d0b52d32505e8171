//! Patterns on boxes, occurrence sets, and exact occurrence frequencies.
//!
//! A [`Pattern`] assigns a symbol below a fixed alphabet size to every cell
//! of a [`GridBox`]. Values are stored row-major with the last coordinate
//! fastest. Occurrence positions of one pattern inside another are reported
//! as translations `g` with `A_1 + g` contained in the host support; the
//! residue-filtered variant keeps positions whose translated corner lies in
//! a prescribed class of a diagonal sublattice. All frequencies are exact
//! rationals with denominator the host cell count.

use crate::error::{Error, Result};
use crate::lattice::{GridBox, Sublattice};
use crate::Rational;
use num_bigint::BigInt;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Pattern on a box over alphabet `{0, ..., alphabet-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    support: GridBox,
    alphabet: u32,
    values: Vec<u16>,
}

impl Pattern {
    /// Pattern from row-major values (last coordinate fastest).
    pub fn new(support: GridBox, alphabet: u32, values: Vec<u16>) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidArgument(format!(
                "alphabet size must be at least 2, got {alphabet}"
            )));
        }
        if values.len() != support.cells() {
            return Err(Error::GeometryMismatch(format!(
                "expected {} values for support, got {}",
                support.cells(),
                values.len()
            )));
        }
        if values.iter().any(|&v| u32::from(v) >= alphabet) {
            return Err(Error::InvalidArgument(format!(
                "value out of alphabet range 0..{alphabet}"
            )));
        }
        Ok(Pattern {
            support,
            alphabet,
            values,
        })
    }

    /// Constant pattern.
    pub fn constant(support: GridBox, alphabet: u32, value: u16) -> Result<Self> {
        let values = vec![value; support.cells()];
        Pattern::new(support, alphabet, values)
    }

    /// 1-D binary pattern from a string of `0`/`1`, cornered at 0.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let values = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0u16),
                '1' => Ok(1u16),
                _ => Err(Error::Format(format!("expected 0/1, got {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let support = GridBox::origin_cube(1, values.len() as u64)?;
        Pattern::new(support, 2, values)
    }

    pub fn support(&self) -> &GridBox {
        &self.support
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    /// Symbol at cell `g`, which must lie in the support.
    pub fn get(&self, g: &[i64]) -> u16 {
        self.values[self.support.offset_of(g)]
    }

    /// Restriction to a sub-box of the support.
    pub fn restrict(&self, to: &GridBox) -> Result<Pattern> {
        if !self.support.contains_box(to) {
            return Err(Error::NotContained(format!(
                "restriction target {to:?} not inside support {:?}",
                self.support
            )));
        }
        let mut values = Vec::with_capacity(to.cells());
        // copy row by row: contiguous runs along the last axis
        let d = to.dim();
        let run = to.sides()[d - 1] as usize;
        let rows = to.cells() / run;
        let row_box = GridBox::new(
            to.corner().to_vec(),
            to.sides()
                .iter()
                .enumerate()
                .map(|(i, &s)| if i == d - 1 { 1 } else { s })
                .collect(),
        )?;
        for row_start in row_box.iter_points() {
            let src = self.support.offset_of(&row_start);
            values.extend_from_slice(&self.values[src..src + run]);
            debug_assert_eq!(rows * run, to.cells());
        }
        Pattern::new(to.clone(), self.alphabet, values)
    }

    /// Translate the support by `g`; values are unchanged.
    pub fn translate(&self, g: &[i64]) -> Result<Pattern> {
        Ok(Pattern {
            support: self.support.translate(g)?,
            alphabet: self.alphabet,
            values: self.values.clone(),
        })
    }

    /// Render in the fixture text form: a header line `d n c corner...`
    /// followed by `n^(d-1)` lines of `n` digits. Cubic supports and
    /// alphabets up to 10 only.
    pub fn to_text(&self) -> Result<String> {
        let n = self
            .support
            .cube_side()
            .ok_or_else(|| Error::Format("text form requires a cubic support".into()))?;
        if self.alphabet > 10 {
            return Err(Error::Format(
                "text form supports alphabets up to 10".into(),
            ));
        }
        let mut out = String::new();
        write!(out, "{} {} {}", self.support.dim(), n, self.alphabet).unwrap();
        for c in self.support.corner() {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
        for row in self.values.chunks(n as usize) {
            for &v in row {
                out.push(char::from_digit(u32::from(v), 10).unwrap());
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse the fixture text form produced by [`Pattern::to_text`].
    pub fn from_text(text: &str) -> Result<Pattern> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty pattern text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Format("pattern header needs `d n c corner...`".into()));
        }
        let d: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format("bad dimension".into()))?;
        let n: u64 = fields[1]
            .parse()
            .map_err(|_| Error::Format("bad side".into()))?;
        let c: u32 = fields[2]
            .parse()
            .map_err(|_| Error::Format("bad alphabet".into()))?;
        if fields.len() != 3 + d {
            return Err(Error::Format(format!(
                "pattern header corner needs {d} coordinates"
            )));
        }
        let corner = fields[3..]
            .iter()
            .map(|f| f.parse().map_err(|_| Error::Format("bad corner".into())))
            .collect::<Result<Vec<i64>>>()?;
        let support = GridBox::cube(corner, n)?;
        let mut values = Vec::with_capacity(support.cells());
        for line in lines {
            for ch in line.trim().chars() {
                let v = ch
                    .to_digit(10)
                    .ok_or_else(|| Error::Format(format!("bad symbol {ch:?}")))?;
                values.push(v as u16);
            }
        }
        Pattern::new(support, c, values)
    }
}

/// Residue class `(rep, m·Z^d)` used to filter occurrence positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueClass {
    rep: Vec<i64>,
    lattice: Sublattice,
}

impl ResidueClass {
    pub fn new(rep: Vec<i64>, lattice: Sublattice) -> Result<Self> {
        if rep.len() != lattice.dim() {
            return Err(Error::DimensionMismatch {
                left: rep.len(),
                right: lattice.dim(),
            });
        }
        Ok(ResidueClass { rep, lattice })
    }

    pub fn rep(&self) -> &[i64] {
        &self.rep
    }

    pub fn lattice(&self) -> &Sublattice {
        &self.lattice
    }
}

/// Occurrence filter: all positions, or positions whose translated corner
/// lies in one residue class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OccurrenceQuery {
    class: Option<ResidueClass>,
}

impl OccurrenceQuery {
    /// No residue filtering.
    pub fn all() -> Self {
        OccurrenceQuery { class: None }
    }

    /// Keep positions `g` with `corner(A_1) + g` congruent to `rep` mod `F`.
    pub fn in_class(rep: Vec<i64>, lattice: Sublattice) -> Result<Self> {
        Ok(OccurrenceQuery {
            class: Some(ResidueClass::new(rep, lattice)?),
        })
    }

    pub fn class(&self) -> Option<&ResidueClass> {
        self.class.as_ref()
    }
}

fn check_compatible(needle: &Pattern, host: &Pattern, query: &OccurrenceQuery) -> Result<()> {
    if needle.support.dim() != host.support.dim() {
        return Err(Error::DimensionMismatch {
            left: needle.support.dim(),
            right: host.support.dim(),
        });
    }
    if needle.alphabet != host.alphabet {
        return Err(Error::AlphabetMismatch {
            left: needle.alphabet,
            right: host.alphabet,
        });
    }
    if let Some(class) = query.class() {
        if class.lattice().dim() != needle.support.dim() {
            return Err(Error::DimensionMismatch {
                left: class.lattice().dim(),
                right: needle.support.dim(),
            });
        }
    }
    Ok(())
}

/// Shared scan over all valid translations; calls `emit` for each match,
/// in lexicographic order of the translation.
fn scan_occurrences(
    needle: &Pattern,
    host: &Pattern,
    query: &OccurrenceQuery,
    mut emit: impl FnMut(&[i64]),
) -> Result<()> {
    check_compatible(needle, host, query)?;
    let d = needle.support.dim();
    let s1 = needle.support.sides();
    let s2 = host.support.sides();
    if (0..d).any(|i| s1[i] > s2[i]) {
        return Ok(());
    }
    // translation range per axis: A_1 + g inside A_2
    let lo: Vec<i64> = (0..d)
        .map(|i| host.support.corner()[i] - needle.support.corner()[i])
        .collect();
    let range = GridBox::new(
        lo,
        (0..d).map(|i| s2[i] - s1[i] + 1).collect(),
    )?;

    // strides of the host value array
    let mut stride2 = vec![1usize; d];
    for i in (0..d - 1).rev() {
        stride2[i] = stride2[i + 1] * s2[i + 1] as usize;
    }
    let run = s1[d - 1] as usize;
    // row starts of the needle: multi-index over the leading axes
    let row_box = GridBox::new(
        needle.support.corner().to_vec(),
        (0..d)
            .map(|i| if i == d - 1 { 1 } else { s1[i] })
            .collect(),
    )?;
    let needle_rows: Vec<(usize, Vec<i64>)> = row_box
        .iter_points()
        .map(|p| (needle.support.offset_of(&p), p))
        .collect();

    'outer: for g in range.iter_points() {
        if let Some(class) = query.class() {
            let m = class.lattice().modulus() as i64;
            for i in 0..d {
                let corner = needle.support.corner()[i] + g[i];
                if (corner - class.rep()[i]).rem_euclid(m) != 0 {
                    continue 'outer;
                }
            }
        }
        for (off1, row_start) in &needle_rows {
            let mut off2 = 0usize;
            for i in 0..d {
                off2 += (row_start[i] + g[i] - host.support.corner()[i]) as usize * stride2[i];
            }
            if needle.values[*off1..off1 + run] != host.values[off2..off2 + run] {
                continue 'outer;
            }
        }
        emit(&g);
    }
    Ok(())
}

/// Occurrence positions of `needle` in `host`, in lexicographic order.
pub fn occurrences(
    needle: &Pattern,
    host: &Pattern,
    query: &OccurrenceQuery,
) -> Result<Vec<Vec<i64>>> {
    let mut out = Vec::new();
    scan_occurrences(needle, host, query, |g| out.push(g.to_vec()))?;
    Ok(out)
}

/// Number of occurrence positions.
pub fn count_occurrences(
    needle: &Pattern,
    host: &Pattern,
    query: &OccurrenceQuery,
) -> Result<usize> {
    let mut count = 0usize;
    scan_occurrences(needle, host, query, |_| count += 1)?;
    Ok(count)
}

/// Exact occurrence frequency: occurrence count over host cell count.
pub fn frequency(needle: &Pattern, host: &Pattern, query: &OccurrenceQuery) -> Result<Rational> {
    let count = count_occurrences(needle, host, query)?;
    Ok(Rational::new(
        BigInt::from(count),
        BigInt::from(host.support.cells()),
    ))
}

/// Expand a word over a block alphabet into the concatenated pattern.
///
/// `blocks[word(g)]` is written at `n·g + [0, n)^d`, where `n` is the common
/// cubic side of the blocks (all cornered at the origin). The result has
/// support `n·support(word)` and the blocks' alphabet.
pub fn flatten(word: &Pattern, blocks: &PatternSet) -> Result<Pattern> {
    let d = word.support.dim();
    if blocks.support().dim() != d {
        return Err(Error::DimensionMismatch {
            left: blocks.support().dim(),
            right: d,
        });
    }
    let n = blocks
        .support()
        .cube_side()
        .filter(|_| blocks.support().corner().iter().all(|&c| c == 0))
        .ok_or_else(|| {
            Error::GeometryMismatch("blocks must share a cubic support cornered at 0".into())
        })?;
    if u32::from(*word.values.iter().max().unwrap_or(&0)) >= blocks.len() as u32 {
        return Err(Error::InvalidArgument(
            "word uses a symbol with no block".into(),
        ));
    }
    let corner: Vec<i64> = word
        .support
        .corner()
        .iter()
        .map(|c| c * n as i64)
        .collect();
    let sides: Vec<u64> = word.support.sides().iter().map(|s| s * n).collect();
    let support = GridBox::new(corner, sides)?;
    let mut values = vec![0u16; support.cells()];

    let mut stride = vec![1usize; d];
    for i in (0..d - 1).rev() {
        stride[i] = stride[i + 1] * support.sides()[i + 1] as usize;
    }
    let block_run = n as usize;
    for g in word.support.iter_points() {
        let block = blocks.get(word.get(&g) as usize);
        // base offset of the block's corner cell inside the output
        let mut base = 0usize;
        for i in 0..d {
            base += ((g[i] - word.support.corner()[i]) as usize * block_run) * stride[i];
        }
        for (row_idx, row) in block.values.chunks(block_run).enumerate() {
            // decode the row's leading multi-index within the block
            let mut rem = row_idx;
            let mut off = base;
            for i in (0..d - 1).rev() {
                let s = n as usize;
                off += (rem % s) * stride[i];
                rem /= s;
            }
            let _ = rem;
            values[off..off + block_run].copy_from_slice(row);
        }
    }
    Pattern::new(support, blocks.alphabet(), values)
}

/// Set of distinct patterns sharing one support and alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    support: GridBox,
    alphabet: u32,
    patterns: Vec<Pattern>,
    index: HashMap<Vec<u16>, usize>,
}

impl PatternSet {
    pub fn new(support: GridBox, alphabet: u32) -> Self {
        PatternSet {
            support,
            alphabet,
            patterns: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn support(&self) -> &GridBox {
        &self.support
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Insert a pattern; returns false when an equal pattern is present.
    pub fn insert(&mut self, p: Pattern) -> Result<bool> {
        if p.support != self.support {
            return Err(Error::GeometryMismatch(
                "pattern support differs from set support".into(),
            ));
        }
        if p.alphabet != self.alphabet {
            return Err(Error::AlphabetMismatch {
                left: p.alphabet,
                right: self.alphabet,
            });
        }
        if self.index.contains_key(&p.values) {
            return Ok(false);
        }
        self.index.insert(p.values.clone(), self.patterns.len());
        self.patterns.push(p);
        Ok(true)
    }

    pub fn get(&self, i: usize) -> &Pattern {
        &self.patterns[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter()
    }

    /// Index of the pattern with these values, if present.
    pub fn position_of(&self, values: &[u16]) -> Option<usize> {
        self.index.get(values).copied()
    }

    /// Indices sorted by lexicographic order of the value arrays.
    pub fn lex_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.patterns.len()).collect();
        idx.sort_by(|&a, &b| self.patterns[a].values.cmp(&self.patterns[b].values));
        idx
    }
}
