//! Command-line surface: build and verify stage files, run the analysis
//! reports, embed assignments, and drive the two demonstrations. All
//! reports are JSON with a leading format tag; exit code 0 means pass,
//! 1 means a check failed (report still emitted), 2 means invalid input.

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;
use subshift::analysis::{
    alpha_beta, entropy_bounds, gap_series, lln_fraction, schedule_check, stage_counts, LlnMode,
};
use subshift::construction::{
    build_next, init_stage, rational_from_string, rational_to_string, verify_stage_pair, FillRule,
    Stage, StageParams,
};
use subshift::demos::{demo_divergence, demo_escape};
use subshift::embedding::{embed, Assignment};
use subshift::error::{Error, Result};
use subshift::lattice::{GridBox, Sublattice};
use subshift::patterns::Pattern;
use subshift::sparse::{banach_density, DensityScan, SparseSet};
use subshift::Rational;

#[derive(Parser)]
#[command(name = "subshift", version, about = "hierarchical binary configurations: build, verify, analyze, embed, demonstrate")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the initial stage, or read a stage file and build the next.
    Build {
        /// Current stage file; absent means emit the initial stage.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Dimension of the initial stage (used only without --in).
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Next lattice modulus multiplier.
        #[arg(long)]
        m: Option<u64>,
        /// Concatenation factor.
        #[arg(long)]
        l: Option<u64>,
        /// Frequency tolerance of the step, e.g. 3/10.
        #[arg(long)]
        dk: Option<String>,
        /// Scheduled loss parameter, e.g. 1/10.
        #[arg(long, default_value = "1/10")]
        nu: String,
        /// Window-narrowing factor kept in reserve, e.g. 1/2.
        #[arg(long, default_value = "1/2")]
        slack: String,
        /// Distinct patterns to collect.
        #[arg(long)]
        target: Option<usize>,
        /// Maximum candidate draws.
        #[arg(long)]
        budget: Option<usize>,
        /// Inserted-layer fill: all_zero, all_one, random, explicit:BITS.
        #[arg(long, default_value = "random")]
        fill: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output stage file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a consecutive stage pair and emit the report.
    Verify {
        earlier: PathBuf,
        later: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Growth-rate ledger and schedule checks over a stage chain.
    Entropy {
        stages: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fraction of words whose symbol frequencies all sit within epsilon.
    Lln {
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Word side.
        #[arg(long)]
        n: u64,
        /// Alphabet size.
        #[arg(long, default_value_t = 2)]
        c: u32,
        #[arg(long)]
        epsilon: String,
        /// Lattice modulus; 1 means the full lattice.
        #[arg(long, default_value_t = 1)]
        m: u64,
        /// Monte Carlo trials; absent means exhaustive.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extreme residue-class frequencies of a needle over stage patterns.
    Alphabeta {
        stages: Vec<PathBuf>,
        /// Needle bits, row-major over a cube.
        #[arg(long, default_value = "1")]
        pattern: String,
        /// Lattice modulus for the residue classes.
        #[arg(long)]
        m: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Densest scanned rectangle of a sparse set inside a window.
    Density {
        /// Sparse set file: integer rows or a polynomial description.
        #[arg(long)]
        p: PathBuf,
        /// Window side.
        #[arg(long)]
        window: u64,
        /// Window corner, comma-separated; default the origin.
        #[arg(long)]
        corner: Option<String>,
        /// Smallest rectangle side scanned.
        #[arg(long, default_value_t = 2)]
        min_side: u64,
        /// Corner step of the scan.
        #[arg(long, default_value_t = 1)]
        step: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write prescribed values on sparse points into a top-stage pattern.
    Embed {
        #[arg(long, num_args = 1.., required = true)]
        stages: Vec<PathBuf>,
        #[arg(long)]
        p: PathBuf,
        /// Assignment file: one `x1 .. xd bit` row per point.
        #[arg(long)]
        assign: PathBuf,
        /// Support corner, comma-separated.
        #[arg(long)]
        base: String,
        /// Template index override.
        #[arg(long)]
        template: Option<usize>,
        /// Output pattern file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two windows agreeing near the origin whose sparse averages split.
    DemoAverages {
        #[arg(long, num_args = 1.., required = true)]
        stages: Vec<PathBuf>,
        #[arg(long)]
        p: PathBuf,
        /// Shared-window radius.
        #[arg(long, default_value_t = 8)]
        radius: u64,
        /// Explicit average radii, comma-separated.
        #[arg(long)]
        radii: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A window whose shifts along the sparse set all differ at the origin.
    DemoEscape {
        #[arg(long, num_args = 1.., required = true)]
        stages: Vec<PathBuf>,
        #[arg(long)]
        p: PathBuf,
        /// Auxiliary free point set.
        #[arg(long)]
        g: PathBuf,
        /// Verification radius; default the largest fitting the support.
        #[arg(long)]
        radius: Option<u64>,
        /// Support corner, comma-separated; default centers the support.
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
                | Error::AlphabetMismatch { .. }
                | Error::NotContained(_)
                | Error::EmptySupport
                | Error::GeometryMismatch(_)
                | Error::WindowTooLarge(_)
                | Error::Overflow(_) => 2,
                _ => 1,
            }
        }
    });
}

fn parse_point(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidArgument(format!("bad coordinate {t:?}")))
        })
        .collect()
}

fn parse_bits(s: &str) -> Result<Vec<u16>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidArgument(format!("bad bit {c:?}"))),
        })
        .collect()
}

/// Infer the cube side of a row-major bit string in dimension `d`.
fn cube_side_of_len(len: usize, d: usize) -> Result<u64> {
    let mut side = 1u64;
    while (side as usize).pow(d as u32) < len {
        side += 1;
    }
    if (side as usize).pow(d as u32) != len {
        return Err(Error::InvalidArgument(format!(
            "{len} bits do not fill a cube in dimension {d}"
        )));
    }
    Ok(side)
}

fn read_stages(paths: &[PathBuf]) -> Result<Vec<Stage>> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no stage files given".into()));
    }
    paths.iter().map(|p| Stage::read_file(p)).collect()
}

fn emit(report: &Value, out: Option<&PathBuf>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(report)?);
    if let Some(path) = out {
        std::fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn rational_json(r: &Rational) -> Value {
    json!(rational_to_string(r))
}

fn write_pattern(path: &PathBuf, w: &Pattern) -> Result<()> {
    let bits: String = w
        .values()
        .iter()
        .map(|&v| char::from(b'0' + v as u8))
        .collect();
    let doc = json!({
        "format": 1,
        "d": w.support().dim(),
        "corner": w.support().corner(),
        "sides": w.support().sides(),
        "alphabet": w.alphabet(),
        "values": bits,
    });
    std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Build {
            input,
            d,
            m,
            l,
            dk,
            nu,
            slack,
            target,
            budget,
            fill,
            seed,
            out,
        } => {
            let Some(input) = input else {
                let stage = init_stage(d)?;
                stage.write_file(&out)?;
                emit(
                    &json!({
                        "format": 1,
                        "k": stage.k(),
                        "d": stage.dim(),
                        "side": stage.side(),
                        "modulus": stage.modulus(),
                        "count": stage.patterns().len(),
                        "out": out,
                    }),
                    None,
                )?;
                return Ok(0);
            };
            let stage = Stage::read_file(&input)?;
            let (Some(m), Some(l), Some(dk), Some(target)) = (m, l, dk.as_deref(), target) else {
                return Err(Error::InvalidArgument(
                    "building a next stage needs --m, --l, --dk, and --target".into(),
                ));
            };
            let params = StageParams {
                l,
                m_next: m,
                d_tol: rational_from_string(dk)?,
                nu: rational_from_string(&nu)?,
                slack: rational_from_string(&slack)?,
                target,
                budget: budget.unwrap_or(target.saturating_mul(100)),
                seed,
                fill: FillRule::parse(&fill)?,
            };
            let (next, report) = build_next(&stage, &params)?;
            next.write_file(&out)?;
            emit(
                &json!({
                    "format": 1,
                    "k": next.k(),
                    "d": next.dim(),
                    "side": next.side(),
                    "modulus": next.modulus(),
                    "count": next.patterns().len(),
                    "draws": report.draws,
                    "passed": report.passed,
                    "accepted": report.accepted,
                    "complete": report.complete,
                    "level": report.level,
                    "out": out,
                }),
                None,
            )?;
            Ok(if report.complete { 0 } else { 1 })
        }
        Cmd::Verify { earlier, later, out } => {
            let a = Stage::read_file(&earlier)?;
            let b = Stage::read_file(&later)?;
            let report = verify_stage_pair(&a, &b)?;
            emit(
                &json!({
                    "format": 1,
                    "pass": report.pass,
                    "k": report.k,
                    "level": report.level,
                    "structure_ok": report.structure_ok,
                    "gcd_ok": report.gcd_ok,
                    "concatenation_ok": report.concatenation_ok,
                    "coverage_ok": report.coverage_ok,
                    "window_ok": report.window_ok,
                    "coincidence_ok": report.coincidence_ok,
                    "counterexamples": report.counterexamples,
                }),
                out.as_ref(),
            )?;
            Ok(if report.pass { 0 } else { 1 })
        }
        Cmd::Entropy { stages, out } => {
            let stages = read_stages(&stages)?;
            let refs: Vec<&Stage> = stages.iter().collect();
            let d = refs[0].dim();
            let counts = stage_counts(&refs)?;
            let ledger = entropy_bounds(d, &counts)?;
            let schedule = schedule_check(d, &counts)?;
            let entries: Vec<Value> = ledger
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "k": e.k,
                        "n": e.n,
                        "count": e.count_decimal,
                        "value": e.value,
                        "value_lo": rational_json(&e.value_lo),
                        "value_hi": rational_json(&e.value_hi),
                        "target": e.target,
                        "target_lo": rational_json(&e.target_lo),
                        "target_hi": rational_json(&e.target_hi),
                        "nu": e.nu.as_ref().map(rational_to_string),
                        "effective_nu": e.effective_nu,
                    })
                })
                .collect();
            let schedule_rows: Vec<Value> = schedule
                .iter()
                .map(|s| {
                    json!({
                        "k": s.k,
                        "nu": rational_json(&s.nu),
                        "n_next": s.n_next,
                        "cofinality_ok": s.cofinality_ok,
                        "count_ok": s.count_ok,
                        "required_bits": s.required_bits,
                        "achieved_bits": s.achieved_bits,
                    })
                })
                .collect();
            emit(
                &json!({
                    "format": 1,
                    "d": d,
                    "entries": entries,
                    "schedule": schedule_rows,
                }),
                out.as_ref(),
            )?;
            Ok(0)
        }
        Cmd::Lln {
            d,
            n,
            c,
            epsilon,
            m,
            trials,
            seed,
            out,
        } => {
            let eps = rational_from_string(&epsilon)?;
            let lattice = Sublattice::new(d, m)?;
            let mode = match trials {
                Some(trials) => LlnMode::MonteCarlo { trials, seed },
                None => LlnMode::Exhaustive,
            };
            let value = lln_fraction(n, &eps, &lattice, c, mode)?;
            emit(
                &json!({
                    "format": 1,
                    "d": d,
                    "n": n,
                    "alphabet": c,
                    "epsilon": rational_json(&eps),
                    "modulus": m,
                    "mode": if trials.is_some() { "monte_carlo" } else { "exhaustive" },
                    "value": rational_json(&value),
                    "value_float": subshift::analysis::midpoint_f64(&value, &value),
                }),
                out.as_ref(),
            )?;
            Ok(0)
        }
        Cmd::Alphabeta {
            stages,
            pattern,
            m,
            out,
        } => {
            let stages = read_stages(&stages)?;
            let refs: Vec<&Stage> = stages.iter().collect();
            let d = refs[0].dim();
            let bits = parse_bits(&pattern)?;
            let side = cube_side_of_len(bits.len(), d)?;
            let needle = Pattern::new(GridBox::origin_cube(d, side)?, 2, bits)?;
            let lattice = Sublattice::new(d, m)?;
            if refs.len() == 1 {
                let ab = alpha_beta(refs[0].patterns(), &needle, &lattice)?;
                emit(
                    &json!({
                        "format": 1,
                        "k": refs[0].k(),
                        "alpha": rational_json(&ab.alpha),
                        "beta": rational_json(&ab.beta),
                        "alpha_witness": {"pattern": ab.alpha_witness.0, "residue": ab.alpha_witness.1},
                        "beta_witness": {"pattern": ab.beta_witness.0, "residue": ab.beta_witness.1},
                    }),
                    out.as_ref(),
                )?;
                return Ok(0);
            }
            let gaps = gap_series(&refs, &needle, &lattice)?;
            let entries: Vec<Value> = gaps
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "k": e.k,
                        "alpha": rational_json(&e.alpha),
                        "beta": rational_json(&e.beta),
                        "gap": rational_json(&e.gap),
                        "bound": e.bound.as_ref().map(rational_to_string),
                        "correction": e.correction.as_ref().map(rational_to_string),
                        "flagged": e.flagged,
                    })
                })
                .collect();
            emit(
                &json!({
                    "format": 1,
                    "entries": entries,
                    "non_increasing": gaps.non_increasing,
                }),
                out.as_ref(),
            )?;
            Ok(if gaps.entries.iter().any(|e| e.flagged) { 1 } else { 0 })
        }
        Cmd::Density {
            p,
            window,
            corner,
            min_side,
            step,
            out,
        } => {
            let p = SparseSet::read_file(&p)?;
            let corner = match corner {
                Some(s) => parse_point(&s)?,
                None => vec![0; p.dim()],
            };
            let bx = GridBox::cube(corner, window)?;
            let est = banach_density(
                &p,
                &bx,
                &DensityScan {
                    corner_step: step,
                    min_side,
                },
            )?;
            emit(
                &json!({
                    "format": 1,
                    "value": rational_json(&est.value),
                    "value_float": subshift::analysis::midpoint_f64(&est.value, &est.value),
                    "rectangle": {"corner": est.rectangle.corner(), "sides": est.rectangle.sides()},
                }),
                out.as_ref(),
            )?;
            Ok(0)
        }
        Cmd::Embed {
            stages,
            p,
            assign,
            base,
            template,
            out,
        } => {
            let stages = read_stages(&stages)?;
            let refs: Vec<&Stage> = stages.iter().collect();
            let p = SparseSet::read_file(&p)?;
            let base = parse_point(&base)?;
            let a = Assignment::read_file(&assign, base)?;
            let k = refs.len();
            let (w, report) = embed(&refs, k, &a, &p, template)?;
            if let Some(path) = &out {
                write_pattern(path, &w)?;
            }
            let levels: Vec<Value> = report
                .levels
                .iter()
                .map(|(level, u)| {
                    let budget = report
                        .budgets
                        .iter()
                        .find(|(l, _)| l == level)
                        .map(|(_, b)| *b);
                    json!({
                        "level": level,
                        "parents": u.parents,
                        "max_touched": u.max_touched,
                        "templates_tried": u.templates_tried,
                        "budget": budget,
                    })
                })
                .collect();
            emit(
                &json!({
                    "format": 1,
                    "k": report.k,
                    "template_used": report.template_used,
                    "assignment_points": report.assignment_points,
                    "levels": levels,
                    "within_budget": report.within_budget,
                    "out": out,
                }),
                None,
            )?;
            Ok(0)
        }
        Cmd::DemoAverages {
            stages,
            p,
            radius,
            radii,
            out,
        } => {
            let stages = read_stages(&stages)?;
            let refs: Vec<&Stage> = stages.iter().collect();
            let p = SparseSet::read_file(&p)?;
            let radii = radii
                .map(|s| {
                    s.split(',')
                        .map(|t| {
                            t.trim().parse::<u64>().map_err(|_| {
                                Error::InvalidArgument(format!("bad radius {t:?}"))
                            })
                        })
                        .collect::<Result<Vec<u64>>>()
                })
                .transpose()?;
            let outcome = demo_divergence(&refs, &p, radius, radii.as_deref())?;
            let series = |s: &[(u64, Rational)]| -> Vec<Value> {
                s.iter()
                    .map(|(n, v)| json!([n, rational_to_string(v)]))
                    .collect()
            };
            emit(
                &json!({
                    "format": 1,
                    "series0": series(&outcome.series0),
                    "series1": series(&outcome.series1),
                    "preserved_radius": outcome.preserved_radius,
                    "verified": outcome.certificate_ok,
                    "base": outcome.base,
                    "preserve_corner": outcome.preserve_corner,
                    "preserve_points": outcome.preserve_points,
                    "fitting_radius": outcome.fitting_radius,
                    "template_used": outcome.template_used,
                }),
                out.as_ref(),
            )?;
            Ok(if outcome.certificate_ok { 0 } else { 1 })
        }
        Cmd::DemoEscape {
            stages,
            p,
            g,
            radius,
            base,
            out,
        } => {
            let stages = read_stages(&stages)?;
            let refs: Vec<&Stage> = stages.iter().collect();
            let p = SparseSet::read_file(&p)?;
            let g = SparseSet::read_file(&g)?;
            let base = base.map(|s| parse_point(&s)).transpose()?;
            let outcome = demo_escape(&refs, &p, &g, radius, base)?;
            let points: Vec<Value> = outcome
                .report
                .points
                .iter()
                .map(|c| json!({"point": c.point, "value": c.value, "escapes": c.escapes}))
                .collect();
            emit(
                &json!({
                    "format": 1,
                    "radius": outcome.report.radius,
                    "origin_value": outcome.report.origin_value,
                    "points": points,
                    "verified": outcome.report.verified,
                    "flipped": outcome.flipped,
                    "base": outcome.base,
                    "template_used": outcome.template_used,
                    "certificate": rational_json(&outcome.certificate),
                    "certificate_bound": rational_json(&outcome.certificate_bound),
                    "certificate_ok": outcome.certificate_ok,
                }),
                out.as_ref(),
            )?;
            Ok(if outcome.report.verified { 0 } else { 1 })
        }
    }
}
