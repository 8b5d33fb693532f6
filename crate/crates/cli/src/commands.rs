//! Subcommands and their dispatch.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gfperiod_core::graphfn::{
    classify_phi4_word, construct_graphical_function, period_of_graph, sequential_function, sequential_period,
    zigzag_closed_form, zigzag_word, GfGraph, Label, PeriodResult,
};
use gfperiod_core::mzv::set_weight_cap;
use gfperiod_core::numeric::{eval_a, eval_b, eval_sv, mzv_numeric, parse_complex, NumericContext};
use gfperiod_core::svmp::{p_basis, Point, Var};
use gfperiod_core::{Error, SeqWord, Word};
use serde_json::json;

use crate::expr::{parse_expression, print_b, Value};

#[derive(Parser, Debug)]
#[command(name = "gfperiod", version, about = "Single-valued polylogarithms, graphical functions and Feynman periods")]
pub struct Cli {
    /// Maximal MZV weight reduced by double shuffle.
    #[arg(long, global = true, default_value_t = 12)]
    pub weight_cap: usize,
    /// Numeric precision in decimal digits.
    #[arg(long, global = true, default_value_t = 40)]
    pub prec: u32,
    /// Emit one JSON object (schema 1).
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Multiple zeta values.
    #[command(subcommand)]
    Mzv(MzvCmd),
    /// Single-valued multiple polylogarithms.
    #[command(subcommand)]
    Svmp(SvmpCmd),
    /// Graphical functions.
    #[command(subcommand)]
    Gf(GfCmd),
    /// Periods of graphs.
    #[command(subcommand)]
    Period(PeriodCmd),
    /// Laurent-log expansion at 0, 1 or inf.
    Expand {
        expr: String,
        #[arg(long, value_parser = parse_point)]
        at: Point,
        #[arg(long, default_value_t = 4)]
        order: i32,
    },
    /// (1/π)∫ f d²z over the complex plane.
    IntegratePlane { expr: String },
    /// Convergence and completion of a graph.
    #[command(subcommand)]
    Check(CheckCmd),
}

#[derive(Subcommand, Debug)]
pub enum MzvCmd {
    /// Reduce to the double-shuffle basis.
    Reduce { expr: String },
    /// Evaluate numerically.
    Eval { expr: String },
}

#[derive(Args, Debug)]
pub struct VarArg {
    /// `z` or `zb`.
    #[arg(long, default_value = "z", value_parser = parse_var)]
    pub var: Var,
}

#[derive(Subcommand, Debug)]
pub enum SvmpCmd {
    /// P_w written in L_u(zb)L_v(z).
    Basis { word: String },
    /// Derivative of an expression.
    Diff {
        expr: String,
        #[command(flatten)]
        var: VarArg,
    },
    /// Single-valued primitive.
    Int {
        expr: String,
        #[command(flatten)]
        var: VarArg,
        /// Base point `0`, `1` or `inf`.
        #[arg(long, default_value = "0", value_parser = parse_point)]
        base: Point,
    },
    /// Numeric values at points `a+bi`.
    Eval {
        expr: String,
        #[arg(long, required = true)]
        at: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GfCmd {
    /// The sequential function f_w.
    Seq { word: String },
    /// Graphical function of a graph JSON file (`-` for stdin).
    Graph { file: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum PeriodCmd {
    /// Period of the sequential graph G_w.
    Seq { word: String },
    /// Period of a graph JSON file (`-` for stdin).
    Graph {
        file: PathBuf,
        /// Labels as `0=a,1=b,z=c,inf=d`.
        #[arg(long)]
        labels: Option<String>,
    },
    /// Zig-zag period P(Z_n).
    Zigzag { n: usize },
}

#[derive(Subcommand, Debug)]
pub enum CheckCmd {
    /// Power counting and completion.
    Graph { file: PathBuf },
}

fn parse_point(s: &str) -> Result<Point, String> {
    match s {
        "0" => Ok(Point::Zero),
        "1" => Ok(Point::One),
        "inf" | "∞" => Ok(Point::Infinity),
        _ => Err(format!("expected 0, 1 or inf, got {s:?}")),
    }
}

fn parse_var(s: &str) -> Result<Var, String> {
    match s {
        "z" => Ok(Var::Hol),
        "zb" => Ok(Var::Antihol),
        _ => Err(format!("expected z or zb, got {s:?}")),
    }
}

/// Result of a successful command.
#[derive(Default)]
struct Report {
    input: String,
    value: String,
    reduced: Option<String>,
    numeric: Option<String>,
    provenance: Vec<String>,
}

impl Report {
    fn new(input: &str, value: String) -> Report {
        Report { input: input.to_string(), value, ..Report::default() }
    }

    fn from_period(input: &str, r: &PeriodResult, ctx: &NumericContext) -> Report {
        let numeric = mzv_numeric(&r.reduced, ctx);
        Report {
            input: input.to_string(),
            value: r.reduced.to_report_string(),
            reduced: Some(r.reduced.to_report_string()),
            numeric: Some(numeric.to_string()),
            provenance: r.provenance.clone(),
        }
    }
}

/// Exit code for an error: 1 for usage and input problems, 2 for mathematical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) | Error::Invalid(_) => 1,
        _ => 2,
    }
}

/// Runs a parsed command line, writing results to `out` and the `error:` line to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    set_weight_cap(cli.weight_cap);
    let ctx = NumericContext::new(cli.prec);
    match dispatch(&cli.command, &ctx) {
        Ok(r) => {
            let text = if cli.json {
                json!({
                    "schema": 1,
                    "input": r.input,
                    "value": r.value,
                    "reduced": r.reduced,
                    "numeric": r.numeric,
                    "provenance": r.provenance,
                })
                .to_string()
            } else {
                r.value
            };
            let _ = writeln!(out, "{text}");
            0
        }
        Err(e) => {
            if cli.json {
                let _ = writeln!(out, "{}", json!({"schema": 1, "error": e.to_string()}));
            }
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn read_graph(path: &Path) -> Result<GfGraph, Error> {
    let mut s = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Io(e.to_string()))?;
    } else {
        s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    GfGraph::from_json(&s)
}

fn seq_word(s: &str) -> Result<SeqWord, Error> {
    s.parse()
}

fn numeric_string(v: &Value, z: &str, ctx: &NumericContext) -> Result<String, Error> {
    Ok(match v {
        Value::Mzv(m) => mzv_numeric(m, ctx).to_string(),
        Value::Sv(s) => eval_sv(s, &parse_complex(z, ctx)?, ctx)?.to_string(),
        Value::A(a) => eval_a(a, &parse_complex(z, ctx)?, ctx)?.to_string(),
        Value::B(b) => eval_b(b, &parse_complex(z, ctx)?, ctx)?.to_string(),
    })
}

fn dispatch(cmd: &Command, ctx: &NumericContext) -> Result<Report, Error> {
    match cmd {
        Command::Mzv(MzvCmd::Reduce { expr }) => {
            let m = parse_expression(expr)?.into_mzv()?.reduce_checked(usize::MAX)?;
            let mut r = Report::new(expr, m.to_report_string());
            r.reduced = Some(r.value.clone());
            r.numeric = Some(mzv_numeric(&m, ctx).to_string());
            Ok(r)
        }
        Command::Mzv(MzvCmd::Eval { expr }) => {
            let m = parse_expression(expr)?.into_mzv()?;
            let x = mzv_numeric(&m, ctx);
            let mut r = Report::new(expr, x.to_string());
            r.numeric = Some(r.value.clone());
            r.provenance.push(format!("error bound {:e}", ctx.bound(x.to_f64().abs())));
            Ok(r)
        }
        Command::Svmp(SvmpCmd::Basis { word }) => {
            let w: Word = word.parse()?;
            Ok(Report::new(word, p_basis(w).to_string()))
        }
        Command::Svmp(SvmpCmd::Diff { expr, var }) => {
            let a = parse_expression(expr)?.into_a()?;
            Ok(Report::new(expr, Value::A(a.derive(var.var)).normalize().to_string()))
        }
        Command::Svmp(SvmpCmd::Int { expr, var, base }) => {
            let a = parse_expression(expr)?.into_a()?;
            Ok(Report::new(expr, Value::A(a.integrate(var.var, *base)?).normalize().to_string()))
        }
        Command::Svmp(SvmpCmd::Eval { expr, at }) => {
            let v = parse_expression(expr)?;
            let mut lines = Vec::new();
            for z in at {
                lines.push(format!("{z}, {}", numeric_string(&v, z, ctx)?));
            }
            let mut r = Report::new(expr, lines.join("\n"));
            r.provenance.push(format!("error bound {:e}", ctx.bound(1.0)));
            Ok(r)
        }
        Command::Gf(GfCmd::Seq { word }) => {
            let f = sequential_function(&seq_word(word)?)?;
            Ok(Report::new(word, print_b(&f)))
        }
        Command::Gf(GfCmd::Graph { file }) => {
            let g = read_graph(file)?;
            let f = construct_graphical_function(&g)?;
            Ok(Report::new(&g.to_json(), print_b(&f)))
        }
        Command::Period(PeriodCmd::Seq { word }) => {
            let w = seq_word(word)?;
            let mut r = Report::from_period(word, &sequential_period(&w)?, ctx);
            r.provenance.push(format!("class {}", classify_phi4_word(&w)));
            Ok(r)
        }
        Command::Period(PeriodCmd::Zigzag { n }) => {
            let w = zigzag_word(*n)?;
            let p = sequential_period(&w)?;
            let closed = zigzag_closed_form(*n)?;
            let mut r = Report::from_period(&n.to_string(), &p, ctx);
            r.provenance.push(format!("word {w}"));
            r.provenance.push(format!("closed form {}", if closed == p.reduced { "agrees" } else { "DIFFERS" }));
            Ok(r)
        }
        Command::Period(PeriodCmd::Graph { file, labels }) => {
            let g = period_graph(read_graph(file)?)?;
            let chosen = match labels {
                Some(s) => Some(parse_labels(&g, s)?),
                None if g.labels.iter().all(Option::is_some) => Some(g.labels.map(Option::unwrap)),
                None => None,
            };
            let p = period_of_graph(&g, chosen)?;
            Ok(Report::from_period(&g.to_json(), &p, ctx))
        }
        Command::Expand { expr, at, order } => {
            let a = parse_expression(expr)?.into_a()?;
            let b = a.expand_at(*at, *order)?;
            Ok(Report::new(expr, b.to_csv().trim_end().to_string()))
        }
        Command::IntegratePlane { expr } => {
            let a = parse_expression(expr)?.into_a()?;
            let p = a.integrate_plane()?;
            let v = p.value.reduce();
            let mut r = Report::new(expr, v.to_report_string());
            r.reduced = Some(r.value.clone());
            r.numeric = Some(mzv_numeric(&v, ctx).to_string());
            r.provenance.push(format!("convergent {}", p.convergent));
            if !p.convergent {
                r.value.push_str("\nconvergent: false");
            }
            Ok(r)
        }
        Command::Check(CheckCmd::Graph { file }) => check_graph(&read_graph(file)?),
    }
}

/// Completes a period graph given with labels `0`, `1` only or without labels.
fn period_graph(g: GfGraph) -> Result<GfGraph, Error> {
    let all4 = (0..g.vertices.len()).all(|v| g.valency(v) == 4);
    let zero3 = (0..g.vertices.len()).filter(|v| g.valency(*v) == 0).count() == 3;
    if all4 || (zero3 && (0..g.vertices.len()).all(|v| matches!(g.valency(v), 0 | 4))) {
        return Ok(g);
    }
    if g.label(Label::Zero).is_some() && g.label(Label::One).is_some() && g.label(Label::Z).is_none() {
        return g.complete_period_graph();
    }
    g.complete_vacuum()
}

fn parse_labels(g: &GfGraph, s: &str) -> Result<[usize; 4], Error> {
    let mut out = [None; 4];
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse(format!("label {part:?} is not key=vertex")))?;
        let l = match k.trim() {
            "0" => Label::Zero,
            "1" => Label::One,
            "z" => Label::Z,
            "inf" => Label::Inf,
            other => return Err(Error::Parse(format!("unknown label {other:?}"))),
        };
        out[l.index()] = Some(g.vertex(v.trim()).ok_or_else(|| Error::Invalid(format!("unknown vertex {v:?}")))?);
    }
    if out.iter().any(Option::is_none) {
        return Err(Error::Parse("labels need 0, 1, z and inf".into()));
    }
    Ok(out.map(Option::unwrap))
}

fn check_graph(g: &GfGraph) -> Result<Report, Error> {
    let input = g.to_json();
    if g.label(Label::Z).is_some() {
        let conv = g.check_convergence();
        if !conv.is_convergent() {
            return Err(Error::Divergent(conv.to_string()));
        }
        let c = g.complete()?;
        let mut r = Report::new(&input, format!("convergent\ncompletion: {}", c.to_json()));
        r.provenance.push("graphical function".into());
        return Ok(r);
    }
    let c = period_graph(g.clone())?;
    let prim = gfperiod_core::graphfn::check_primitive(&c);
    if !prim.is_convergent() {
        return Err(Error::Divergent(prim.to_string()));
    }
    let mut r = Report::new(&input, format!("primitive\ncompletion: {}", c.to_json()));
    r.provenance.push("period graph".into());
    Ok(r)
}
