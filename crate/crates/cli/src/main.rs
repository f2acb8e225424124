use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use patmatch_core::bench::bench_chain;
use patmatch_core::eval::{fuzz_entry, Evaluator, FuzzConfig, RunOutcome};
use patmatch_core::infer::{check_program, CheckOptions, RestrictMode, SafetyReport, Verdict};
use patmatch_core::program::{CoreProgram, Item};
use patmatch_core::solver::DEFAULT_MAX_CONSTRAINTS;
use patmatch_core::surface::{load, SurfaceSyntaxError};

const SAFE: u8 = 0;
const WARNINGS: u8 = 1;
const INPUT_ERROR: u8 = 2;
const INTERNAL_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "patmatch-refine", version, about = "Checks that pattern matches in idr0 programs cannot fail")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check files for pattern matches that may fail.
    Check(CheckArgs),
    /// Evaluate a definition.
    Run(RunArgs),
    /// Check synthetic chain programs of growing size.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Restrict {
    Node,
    Module,
}

#[derive(Args, Clone)]
struct CheckFlags {
    /// When to saturate and restrict constraint sets.
    #[arg(long, value_enum, default_value = "node")]
    restrict: Restrict,
    /// Never refine a single-constructor datatype to the empty type.
    #[arg(long)]
    no_empty_single: bool,
    /// Abort a definition whose constraint set grows past this size.
    #[arg(long, default_value_t = DEFAULT_MAX_CONSTRAINTS)]
    max_constraints: usize,
}

impl CheckFlags {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            restrict: match self.restrict {
                Restrict::Node => RestrictMode::Node,
                Restrict::Module => RestrictMode::Module,
            },
            no_empty_single: self.no_empty_single,
            max_constraints: self.max_constraints,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Source files; `-` reads standard input.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print one JSON document per file.
    #[arg(long)]
    json: bool,
    /// Print per-definition summary sizes.
    #[arg(long)]
    stats: bool,
    /// Print the summary constraints of a definition.
    #[arg(long, value_name = "DEF")]
    dump_constraints: Option<String>,
    #[command(flatten)]
    flags: CheckFlags,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    /// The definition to evaluate.
    #[arg(long, default_value = "main")]
    entry: String,
    #[arg(long, default_value_t = 1_000_000)]
    fuel: u64,
    /// Apply a function entry to every input up to this depth.
    #[arg(long, value_name = "DEPTH")]
    fuzz: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Chain lengths to check.
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200])]
    sizes: Vec<usize>,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    flags: CheckFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check(a) => check(&a),
        Command::Run(a) => run(&a),
        Command::Bench(a) => bench(&a),
    };
    ExitCode::from(code)
}

fn display_name(path: &Path) -> String {
    if path.as_os_str() == "-" {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

fn read_source(path: &Path) -> io::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

#[derive(Serialize)]
struct JsonWarning {
    def: String,
    line: u32,
    col: u32,
    message: String,
    missing_constructors: Vec<String>,
}

#[derive(Serialize)]
struct JsonStats {
    n: usize,
    k: usize,
    v: usize,
    d: usize,
    i: usize,
    time_ms: f64,
}

#[derive(Serialize)]
struct JsonError {
    line: u32,
    col: u32,
    message: String,
}

#[derive(Serialize)]
struct JsonReport {
    file: String,
    safe: bool,
    warnings: Vec<JsonWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<JsonStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<JsonError>,
}

/// The rendered result of checking one file.
struct FileOutput {
    code: u8,
    stdout: String,
    stderr: String,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn warnings_of(report: &SafetyReport) -> Vec<JsonWarning> {
    report
        .unsafe_defs()
        .map(|(d, b)| JsonWarning {
            def: d.name.clone(),
            line: b.span.line,
            col: b.span.col,
            message: b.message(),
            missing_constructors: b.missing.clone(),
        })
        .collect()
}

fn stats_line(report: &SafetyReport) -> String {
    let s = &report.stats;
    format!(
        "N={} K={} V={} D={} I={} warnings={} time={:.2}ms",
        s.n,
        s.k,
        s.v,
        s.d,
        s.i,
        s.warnings,
        ms(s.elapsed)
    )
}

fn dump(p: &CoreProgram, report: &SafetyReport, def: &str) -> Result<String, String> {
    let d = report.def(def).ok_or_else(|| format!("no definition named `{def}`"))?;
    let mut s = format!("-- {} : {}\n", d.name, d.scheme.body.display(&p.env));
    s.push_str(&d.scheme.constraints.render(&p.env));
    Ok(s)
}

fn check_file(path: &Path, args: &CheckArgs) -> FileOutput {
    let name = display_name(path);
    let mut out = FileOutput { code: SAFE, stdout: String::new(), stderr: String::new() };
    let text = match read_source(path) {
        Ok(t) => t,
        Err(e) => {
            out.code = INPUT_ERROR;
            let message = format!("cannot read file: {e}");
            if args.json {
                out.stdout = json_error(&name, 0, 0, message);
            } else {
                out.stderr = format!("{name}: error: {message}\n");
            }
            return out;
        }
    };
    let p = match load(&text) {
        Ok(p) => p,
        Err(SurfaceSyntaxError { span, message, kind }) => {
            out.code = INPUT_ERROR;
            if args.json {
                out.stdout = json_error(&name, span.line, span.col, format!("{kind}: {message}"));
            } else {
                out.stderr = format!("{name}:{span}: error: {kind}: {message}\n");
            }
            return out;
        }
    };
    for (span, w) in &p.warnings {
        out.stderr.push_str(&format!("{name}:{span}: note: {w}\n"));
    }
    let report = match check_program(&p, &args.flags.options()) {
        Ok(r) => r,
        Err(e) => {
            out.code = INTERNAL_ERROR;
            if args.json {
                out.stdout = json_error(&name, 0, 0, e.to_string());
            } else {
                out.stderr.push_str(&format!("{name}: error: {e}\n"));
            }
            return out;
        }
    };
    if let Some(def) = &args.dump_constraints {
        match dump(&p, &report, def) {
            // Keep stdout a pure JSON stream.
            Ok(s) if args.json => out.stderr.push_str(&s),
            Ok(s) => out.stdout.push_str(&s),
            Err(e) => {
                out.stderr.push_str(&format!("{name}: error: {e}\n"));
                out.code = INPUT_ERROR;
            }
        }
    }
    let warnings = warnings_of(&report);
    if !warnings.is_empty() {
        out.code = out.code.max(WARNINGS);
    }
    if args.json {
        let s = &report.stats;
        let doc = JsonReport {
            file: name,
            safe: report.is_safe(),
            warnings,
            stats: Some(JsonStats { n: s.n, k: s.k, v: s.v, d: s.d, i: s.i, time_ms: ms(s.elapsed) }),
            error: None,
        };
        out.stdout.push_str(&serde_json::to_string(&doc).expect("report serializes"));
        out.stdout.push('\n');
        return out;
    }
    for w in &warnings {
        out.stdout.push_str(&format!("{name}:{}:{}: warning: {} (in `{}`)\n", w.line, w.col, w.message, w.def));
    }
    if args.stats {
        for d in &report.defs {
            let verdict = match d.verdict {
                Verdict::Safe => "safe",
                Verdict::Unsafe(_) => "unsafe",
            };
            out.stdout.push_str(&format!(
                "  {:<20} {:<6} vars={} constraints={}\n",
                d.name,
                verdict,
                d.scheme.vars.len(),
                d.scheme.constraints.len()
            ));
        }
    }
    let verdict = if report.is_safe() { "safe" } else { "unsafe" };
    out.stdout.push_str(&format!("{name}: {verdict}; {}\n", stats_line(&report)));
    out
}

fn json_error(file: &str, line: u32, col: u32, message: String) -> String {
    let doc = JsonReport {
        file: file.to_string(),
        safe: false,
        warnings: Vec::new(),
        stats: None,
        error: Some(JsonError { line, col, message }),
    };
    serde_json::to_string(&doc).expect("report serializes") + "\n"
}

fn check(args: &CheckArgs) -> u8 {
    let outputs: Vec<FileOutput> = std::thread::scope(|s| {
        let handles: Vec<_> = args.files.iter().map(|f| s.spawn(move || check_file(f, args))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| FileOutput {
                    code: INTERNAL_ERROR,
                    stdout: String::new(),
                    stderr: "error: checker panicked\n".into(),
                })
            })
            .collect()
    });
    let (mut stdout, mut stderr) = (io::stdout().lock(), io::stderr().lock());
    let mut code = SAFE;
    for o in outputs {
        let _ = stdout.write_all(o.stdout.as_bytes());
        let _ = stderr.write_all(o.stderr.as_bytes());
        code = code.max(o.code);
    }
    code
}

fn run(args: &RunArgs) -> u8 {
    let name = display_name(&args.file);
    let text = match read_source(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{name}: error: cannot read file: {e}");
            return INPUT_ERROR;
        }
    };
    let p = match load(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{name}:{e}");
            return INPUT_ERROR;
        }
    };
    let Some(item) = p.lookup_item(&args.entry) else {
        eprintln!("{name}: error: no definition named `{}`", args.entry);
        return INPUT_ERROR;
    };
    if let Some(depth) = args.fuzz {
        let cfg = FuzzConfig { depth, fuel: args.fuel, ..FuzzConfig::default() };
        return match fuzz_entry(&p, item, &cfg) {
            Ok(r) => {
                for (input, what) in &r.failures {
                    println!("{}: {input}: {what}", args.entry);
                }
                println!(
                    "{} runs ({}), {} normal, {} inconclusive, {} failures",
                    r.runs,
                    if r.exhaustive { "exhaustive" } else { "sampled" },
                    r.normal,
                    r.inconclusive,
                    r.failures.len()
                );
                if r.failures.is_empty() {
                    SAFE
                } else {
                    WARNINGS
                }
            }
            Err(e) => {
                eprintln!("{name}: error: {e}");
                INPUT_ERROR
            }
        };
    }
    let Item::Let { body, .. } = &p.items[item] else {
        eprintln!("{name}: error: `{}` is an extern and has no body", args.entry);
        return INPUT_ERROR;
    };
    match Evaluator::new(&p).eval(body, args.fuel) {
        RunOutcome::Normal(v) => {
            println!("{}", v.display(&p.env));
            SAFE
        }
        RunOutcome::PatternMatchFailure { span, def, ctor, .. } => {
            println!("{name}:{span}: pattern match failure in `{def}`: no arm for {ctor}");
            WARNINGS
        }
        RunOutcome::FuelExhausted => {
            eprintln!("{name}: error: evaluation ran out of fuel");
            INTERNAL_ERROR
        }
        RunOutcome::ExternReached(x) => {
            eprintln!("{name}: error: evaluation reached extern `{x}`");
            INTERNAL_ERROR
        }
    }
}

#[derive(Serialize)]
struct JsonBench {
    n: usize,
    safe: bool,
    max_constraints: usize,
    interface: usize,
    vars: usize,
    time_ms: f64,
}

fn bench(args: &BenchArgs) -> u8 {
    let opts = args.flags.options();
    let mut rows = Vec::new();
    for &n in &args.sizes {
        match bench_chain(n, &opts) {
            Ok(r) => rows.push(r),
            Err(e) => {
                eprintln!("error: chain of {n}: {e}");
                return INTERNAL_ERROR;
            }
        }
    }
    if args.json {
        let docs: Vec<JsonBench> = rows
            .iter()
            .map(|r| JsonBench {
                n: r.n,
                safe: r.safe,
                max_constraints: r.max_size(),
                interface: r.stats.i,
                vars: r.stats.v,
                time_ms: ms(r.elapsed),
            })
            .collect();
        println!("{}", serde_json::to_string(&docs).expect("bench rows serialize"));
    } else {
        println!("{:>6} {:>6} {:>10} {:>6} {:>8} {:>10}", "N", "safe", "max size", "I", "V", "time ms");
        for r in &rows {
            println!(
                "{:>6} {:>6} {:>10} {:>6} {:>8} {:>10.2}",
                r.n,
                r.safe,
                r.max_size(),
                r.stats.i,
                r.stats.v,
                ms(r.elapsed)
            );
        }
    }
    if rows.iter().all(|r| r.safe) {
        SAFE
    } else {
        WARNINGS
    }
}
