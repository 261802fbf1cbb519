//! `klcells` command line: Hecke products, Kazhdan-Lusztig polynomials,
//! a-values, strata, cells, the decomposition check, dihedral closed forms
//! and the P1 to P15 checker.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 on usage or
//! configuration errors, 3 when a computation leaves the configured ball or
//! a word enumeration overflows.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use klcells::conjectures::{self, check_all, compute_cells, dn_involutions_check, ConjectureResult, Property, Scope};
use klcells::dihedral::Dihedral;
use klcells::hecke::{mul_t, Basis, HeckeElement};
use klcells::{CoxeterSystem, Element, Error, Int, KlTable, QuotientContext, Stratification};

#[derive(Parser, Debug)]
#[command(name = "klcells", version, about = "Hecke algebras with unequal parameters: KL bases, a-function, cells")]
struct Cli {
    /// System configuration (JSON with generators, m, weights, family).
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Ball radius for searches and checks.
    #[arg(long, global = true, default_value_t = 4)]
    radius: u32,
    /// Kazhdan-Lusztig table cache, loaded if present and saved afterwards.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for `verify`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Product T_w1 T_w2 ... in the standard basis.
    Mul {
        #[arg(required = true, num_args = 1..)]
        words: Vec<String>,
    },
    /// p_{y,w}, or every p_{y,w} for y <= w when y is omitted.
    Klpoly {
        #[arg(required = true, num_args = 1..=2)]
        words: Vec<String>,
    },
    /// a-value from the stratification; with --oracle also by exhaustive search.
    Afn {
        word: String,
        #[arg(long)]
        oracle: bool,
    },
    /// Distinguished elements, N_0 and the level sizes inside the ball.
    Strata,
    /// Cells inside the ball.
    Cells {
        /// Write the DOT graph here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Checks NC_{bdy} = E_b NC_d F_y for b in B_d, y in U_d inside the ball.
    Decomp {
        #[arg(long)]
        level: Option<u32>,
        /// Longest element the quotient rewriting may touch
        /// (default 3 * radius + 2 * max l(d)).
        #[arg(long)]
        quotient_radius: Option<u32>,
    },
    /// Closed forms for the dihedral group of order 2m with L(s) = a, L(t) = b.
    Dihedral { m: u32, a: u32, b: u32 },
    /// Runs the property checks over the ball (or the whole group if finite).
    Verify {
        /// Comma separated, e.g. P1,P6,P15.
        #[arg(long, value_delimiter = ',', default_value = "P1,P2,P3,P4,P5,P6,P7,P8,P9,P10,P11,P12,P13,P14,P15")]
        props: Vec<String>,
        /// Restrict to elements of this a-value.
        #[arg(long = "N")]
        level: Option<u32>,
    },
}

/// Parses `argv` (program name first), runs, and returns the exit status.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfBall { .. } | Error::Overflow { .. } => 3,
        Error::InvariantViolation(_) => 1,
        _ => 2,
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Input(format!("i/o: {e}"))
}

fn load_system(path: Option<&Path>) -> Result<CoxeterSystem, Error> {
    let path = path.ok_or_else(|| Error::Config { field: "--system".into(), message: "missing system file".into() })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config { field: path.display().to_string(), message: e.to_string() })?;
    CoxeterSystem::from_json(&text)
}

fn load_table(sys: &CoxeterSystem, cache: Option<&Path>) -> Result<KlTable<Int>, Error> {
    match cache {
        Some(p) if p.exists() => KlTable::load(sys, p),
        _ => Ok(KlTable::new(sys)),
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool, Error> {
    if let Command::Dihedral { m, a, b } = cli.command {
        return dihedral(&Dihedral::new(m, a, b)?, cli.format, out);
    }
    let sys = load_system(cli.system.as_deref())?;
    let strat = Stratification::build(&sys);
    let mut table = load_table(&sys, cli.cache.as_deref())?;
    let ok = match &cli.command {
        Command::Mul { words } => mul(&sys, words, cli.format, out)?,
        Command::Klpoly { words } => klpoly(&sys, &mut table, words, cli.format, out)?,
        Command::Afn { word, oracle } => afn(&sys, &strat, &mut table, word, *oracle, cli, out)?,
        Command::Strata => strata(&sys, &strat, cli, out)?,
        Command::Cells { dot } => cells(&sys, &strat, &mut table, dot.as_deref(), cli, out)?,
        Command::Decomp { level, quotient_radius } => decomp(&sys, &strat, &mut table, *level, *quotient_radius, cli, out)?,
        Command::Verify { props, level } => verify(&sys, &strat, &mut table, props, *level, cli, out, err)?,
        Command::Dihedral { .. } => unreachable!(),
    };
    if let Some(path) = &cli.cache {
        if table.is_dirty() {
            table.save(&sys, path)?;
        }
    }
    Ok(ok)
}

fn print_json(out: &mut dyn Write, v: &Value) -> Result<(), Error> {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json")).map_err(io)
}

fn terms_json(sys: &CoxeterSystem, h: &HeckeElement<Int>) -> Value {
    h.sorted_terms(sys).into_iter().map(|(w, c)| json!({"w": sys.format_word(w), "coeff": c.to_string()})).collect()
}

fn mul(sys: &CoxeterSystem, words: &[String], format: Format, out: &mut dyn Write) -> Result<bool, Error> {
    let mut acc = HeckeElement::<Int>::basis_element(Basis::T, sys.identity());
    for w in words {
        acc = mul_t(sys, &acc, &HeckeElement::basis_element(Basis::T, sys.parse_word(w)?))?;
    }
    match format {
        Format::Json => print_json(out, &json!({"product": words, "terms": terms_json(sys, &acc)}))?,
        _ => writeln!(out, "{}", acc.format(sys)).map_err(io)?,
    }
    Ok(true)
}

fn klpoly(sys: &CoxeterSystem, table: &mut KlTable<Int>, words: &[String], format: Format, out: &mut dyn Write) -> Result<bool, Error> {
    let w = sys.parse_word(words.last().expect("clap enforces one word"))?;
    let ys: Vec<Element> = match words.len() {
        2 => vec![sys.parse_word(&words[0])?],
        _ => sys.lower_interval(w).as_ref().clone(),
    };
    let mut rows = Vec::new();
    for y in ys {
        rows.push((y, table.p(sys, y, w)?));
    }
    match format {
        Format::Json => print_json(
            out,
            &json!({
                "w": sys.format_word(w),
                "p": rows.iter().map(|(y, p)| json!({"y": sys.format_word(*y), "p": p.to_string()})).collect::<Vec<_>>(),
            }),
        )?,
        _ => {
            for (y, p) in rows {
                writeln!(out, "p[{}, {}] = {p}", sys.format_word(y), sys.format_word(w)).map_err(io)?;
            }
        }
    }
    Ok(true)
}

fn afn(
    sys: &CoxeterSystem,
    strat: &Stratification,
    table: &mut KlTable<Int>,
    word: &str,
    oracle: bool,
    cli: &Cli,
    out: &mut dyn Write,
) -> Result<bool, Error> {
    let w = sys.parse_word(word)?;
    let witness = strat.level_witness(sys, w);
    let mut report = json!({"w": sys.format_word(w), "a": witness.a_prime, "witness": sys.format_word(witness.d)});
    let mut agree = true;
    if oracle {
        let reach = strat.distinguished().iter().map(|d| d.d.length()).max().unwrap_or(0);
        let radius = cli.radius.max(w.length() + reach);
        let rec = table.a_oracle(sys, w, radius)?;
        agree = rec.a == witness.a_prime;
        report["oracle"] = json!({
            "a": rec.a,
            "radius": radius,
            "pair": rec.witness.map(|(x, y)| [sys.format_word(x), sys.format_word(y)]),
        });
    }
    match cli.format {
        Format::Json => print_json(out, &report)?,
        _ => {
            writeln!(
                out,
                "a({}) = {} (distinguished factor {})",
                report["w"].as_str().unwrap(),
                witness.a_prime,
                sys.format_word(witness.d)
            )
            .map_err(io)?;
            if oracle {
                writeln!(out, "oracle: a = {} within radius {}", report["oracle"]["a"], report["oracle"]["radius"]).map_err(io)?;
            }
        }
    }
    Ok(agree)
}

fn strata(sys: &CoxeterSystem, strat: &Stratification, cli: &Cli, out: &mut dyn Write) -> Result<bool, Error> {
    let mut counts: std::collections::BTreeMap<u32, usize> = Default::default();
    for w in sys.ball(cli.radius) {
        *counts.entry(strat.omega_level(sys, w)).or_default() += 1;
    }
    let ds: Vec<Value> = strat
        .distinguished()
        .iter()
        .map(|d| json!({"d": sys.format_word(d.d), "a_prime": d.a_prime, "kind": format!("{:?}", d.kind)}))
        .collect();
    match cli.format {
        Format::Json => print_json(
            out,
            &json!({
                "n0": strat.n0(),
                "distinguished": ds,
                "radius": cli.radius,
                "levels": counts.iter().map(|(n, c)| json!({"level": n, "count": c})).collect::<Vec<_>>(),
            }),
        )?,
        _ => {
            writeln!(out, "N0 = {}", strat.n0()).map_err(io)?;
            for d in strat.distinguished() {
                writeln!(out, "a'({}) = {}", sys.format_word(d.d), d.a_prime).map_err(io)?;
            }
            for (n, c) in counts {
                writeln!(out, "level {n}: {c} elements of length <= {}", cli.radius).map_err(io)?;
            }
        }
    }
    Ok(true)
}

fn cells(
    sys: &CoxeterSystem,
    strat: &Stratification,
    table: &mut KlTable<Int>,
    dot: Option<&Path>,
    cli: &Cli,
    out: &mut dyn Write,
) -> Result<bool, Error> {
    let report = compute_cells(sys, strat, table, cli.radius)?;
    if let Some(path) = dot {
        std::fs::write(path, report.to_dot(sys)).map_err(io)?;
    }
    match cli.format {
        Format::Json => print_json(out, &report.to_json(sys))?,
        Format::Dot => write!(out, "{}", report.to_dot(sys)).map_err(io)?,
        Format::Text => {
            writeln!(out, "{} two-sided levels inside radius {}", report.two_sided_count(), cli.radius).map_err(io)?;
            for (n, els) in &report.two_sided {
                writeln!(out, "level {n}: {} elements", els.len()).map_err(io)?;
            }
            writeln!(out, "{} right cells, {} preorder edges", report.right_cells.len(), report.empirical_edges.len()).map_err(io)?;
            for d in &report.discrepancies {
                writeln!(out, "discrepancy: {d}").map_err(io)?;
            }
        }
    }
    Ok(report.discrepancies.is_empty())
}

fn decomp(
    sys: &CoxeterSystem,
    strat: &Stratification,
    table: &mut KlTable<Int>,
    level: Option<u32>,
    quotient_radius: Option<u32>,
    cli: &Cli,
    out: &mut dyn Write,
) -> Result<bool, Error> {
    let reach = strat.distinguished().iter().map(|d| d.d.length()).max().unwrap_or(0);
    let ctx_radius = quotient_radius.unwrap_or(3 * cli.radius + 2 * reach);
    let levels: Vec<u32> = match level {
        Some(n) => vec![n],
        None => strat.levels(),
    };
    let (mut checked, mut failures) = (0usize, Vec::new());
    for n in levels {
        let mut ctx = QuotientContext::<Int>::new(sys, strat, n, ctx_radius);
        for d in strat.stratum(n) {
            let (bs, ys) = ctx.extensions(d, cli.radius);
            for &b in &bs.elements {
                for &y in &ys.elements {
                    let report = ctx.verify_decomposition(table, d, b, y)?;
                    checked += 1;
                    if !(report.holds && report.eta_degree_ok) {
                        failures.push(json!({
                            "level": n,
                            "b": sys.format_word(b),
                            "d": sys.format_word(d.d),
                            "y": sys.format_word(y),
                            "mismatch": report.mismatch.map(|m| format!("{} at {}: {} vs {}", m.identity, sys.format_word(m.at), m.lhs, m.rhs)),
                        }));
                    }
                }
            }
        }
    }
    let report = json!({"checked": checked, "failed": failures.len(), "failures": failures});
    match cli.format {
        Format::Json => print_json(out, &report)?,
        _ => {
            writeln!(out, "decomposition: {checked} checked, {} failed", report["failed"]).map_err(io)?;
            for f in report["failures"].as_array().unwrap() {
                writeln!(out, "{f}").map_err(io)?;
            }
        }
    }
    Ok(report["failed"] == 0)
}

fn dihedral(dih: &Dihedral, format: Format, out: &mut dyn Write) -> Result<bool, Error> {
    let sys = dih.system();
    let cells: Vec<Value> = dih
        .cells()
        .into_iter()
        .map(|(els, a)| json!({"a": a, "elements": els.iter().map(|&w| sys.format_word(w)).collect::<Vec<_>>()}))
        .collect();
    let mut report = json!({"order": 2 * dih.order(), "cells": cells});
    if let Some(d) = dih.subregular() {
        let lower: Vec<Value> = sys
            .lower_interval(d)
            .iter()
            .map(|&v| json!({"v": sys.format_word(v), "deg": dih.deg_p_to_subregular(v).expect("v <= d_I")}))
            .collect();
        report["subregular"] = json!({"d": sys.format_word(d), "l_prime": dih.l_prime(d), "deg_p": lower});
    }
    match format {
        Format::Json => print_json(out, &report)?,
        _ => {
            for c in report["cells"].as_array().unwrap() {
                let els: Vec<&str> = c["elements"].as_array().unwrap().iter().map(|e| e.as_str().unwrap()).collect();
                writeln!(out, "a = {}: {}", c["a"], els.join(", ")).map_err(io)?;
            }
            if let Some(s) = report.get("subregular") {
                writeln!(out, "d_I = {}, L'(d_I) = {}", s["d"].as_str().unwrap(), s["l_prime"]).map_err(io)?;
                for row in s["deg_p"].as_array().unwrap() {
                    writeln!(out, "deg p[{}, d_I] = {}", row["v"].as_str().unwrap(), row["deg"]).map_err(io)?;
                }
            }
        }
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn verify(
    sys: &CoxeterSystem,
    strat: &Stratification,
    table: &mut KlTable<Int>,
    props: &[String],
    level: Option<u32>,
    cli: &Cli,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, Error> {
    let props: Vec<Property> = props.iter().map(|p| p.parse()).collect::<Result<_, _>>()?;
    let mut scope = if sys.sphere(cli.radius + 1).is_empty() { Scope::finite_group(sys)? } else { Scope::ball(cli.radius) };
    if let Some(n) = level {
        scope = scope.with_levels(n, n);
    }
    let mut results = run_checks(sys, strat, table, &props, &scope, cli.jobs.max(1))?;
    if props.contains(&Property::P6) {
        results.push(dn_involutions_check(sys, strat, table, scope.radius)?);
    }
    let ok = results.iter().all(|r| r.status != conjectures::Status::Fail);
    match cli.format {
        Format::Json => print_json(out, &Value::Array(results.iter().map(|r| r.to_json()).collect()))?,
        _ => {
            for r in &results {
                let status = match &r.status {
                    conjectures::Status::Pass => "pass".to_string(),
                    conjectures::Status::Fail => "FAIL".to_string(),
                    conjectures::Status::Skipped(why) => format!("skipped ({why})"),
                };
                writeln!(
                    out,
                    "{:<14} {:<8} checked {:>6}  skipped {:>4}  failed {:>4}",
                    r.check.to_string(),
                    status,
                    r.checked,
                    r.skipped,
                    r.failed
                )
                .map_err(io)?;
            }
            for r in results.iter().filter(|r| r.status == conjectures::Status::Fail) {
                writeln!(err, "{}", r.to_json()).map_err(io)?;
            }
        }
    }
    Ok(ok)
}

/// Splits the properties over `jobs` threads, each with its own table.
fn run_checks(
    sys: &CoxeterSystem,
    strat: &Stratification,
    table: &mut KlTable<Int>,
    props: &[Property],
    scope: &Scope,
    jobs: usize,
) -> Result<Vec<ConjectureResult>, Error> {
    if jobs == 1 || props.len() < 2 {
        return check_all(sys, strat, table, props, scope.clone());
    }
    let chunk = props.len().div_ceil(jobs);
    let parts: Vec<Result<Vec<ConjectureResult>, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = props
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    let mut local = KlTable::<Int>::new(sys);
                    check_all(sys, strat, &mut local, part, scope.clone())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
