//! `aspax` — abstraction of answer set programs by over-approximation.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use aspax_core::check::{check_coverage, CheckOptions};
use aspax_core::domain::{plan, DomainOptions};
use aspax_core::gen::{random_interval_mapping, random_program, rng};
use aspax_core::omit::{omit_literals_with, OmitOptions};
use aspax_core::policy::grid::{self, Grid};
use aspax_core::policy::{parse_goal, parse_pattern, policy_check, AbstractionMode, PolicyCheckOptions, Verdict};
use aspax_core::solve::answer_sets;
use aspax_core::{
    parse_mapping, parse_program, parse_program_in, print_mapping, print_program, DomainMapping, Error, Interpretation,
    Limits, Program, SourceProgram,
};

const EXIT_VIOLATED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "aspax", version, about = "Over-approximating abstraction of answer set programs")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Maximum number of ground rule instances.
    #[arg(long, global = true)]
    max_ground: Option<usize>,
    /// Maximum number of search nodes per solver call.
    #[arg(long, global = true)]
    max_nodes: Option<u64>,
    /// Print at most this many answer sets.
    #[arg(long, global = true)]
    max_models: Option<usize>,
    /// Increase log output (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// A program given positionally or with `--program`.
#[derive(Args, Debug)]
struct ProgramArg {
    #[arg(value_name = "PROGRAM", required_unless_present = "program")]
    path: Option<PathBuf>,
    #[arg(long = "program", value_name = "FILE", conflicts_with = "path")]
    program: Option<PathBuf>,
    /// Extra facts: a file, or inline text such as "c(1). b(2)."
    #[arg(long)]
    facts: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse and pretty-print a program (and optionally a mapping).
    Parse {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Enumerate answer sets.
    Solve {
        #[command(flatten)]
        program: ProgramArg,
    },
    /// Omit the predicates listed in the mapping's `omit` statement.
    Omit {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Domain abstraction (with any omission in the mapping applied first).
    Abstract {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        domain: DomainFlags,
        /// List the emitted rules per source rule, with their step tags.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every concrete answer set maps onto an abstract one.
    Check {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        domain: DomainFlags,
        /// Keep shrunk constraints when omitting (unsound; for demonstration).
        #[arg(long)]
        shrink_constraints: bool,
    },
    /// Search an abstract counterexample to "eventually goal" and check it.
    PolicyCheck {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// Goal formula, or a bare predicate name.
        #[arg(long)]
        goal: String,
        #[arg(long)]
        bound: usize,
        /// Abstract transitions are the images of concrete ones.
        #[arg(long, conflicts_with = "overapprox")]
        exact: bool,
        /// Abstract transitions come from the abstract program (default).
        #[arg(long)]
        overapprox: bool,
        /// Restrict the search to trajectories matching `s ; a ; s ; …`.
        #[arg(long)]
        pattern: Option<String>,
        #[command(flatten)]
        flags: DomainFlags,
    },
    /// Write the bundled grid-search scenario.
    Grid {
        #[arg(long, default_value_t = 4)]
        n: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a random program and interval mapping.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct DomainFlags {
    /// Emit relation-type fact tables instead of evaluated comparisons.
    #[arg(long)]
    symbolic_types: bool,
    /// Shift each ambiguous negative literal separately.
    #[arg(long)]
    per_literal_shift: bool,
    /// Also shift positive literals.
    #[arg(long)]
    positive_shift: bool,
}

impl From<DomainFlags> for DomainOptions {
    fn from(f: DomainFlags) -> Self {
        DomainOptions {
            symbolic_types: f.symbolic_types,
            per_literal_shift: f.per_literal_shift,
            positive_shift: f.positive_shift,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_resource() => EXIT_RESOURCE,
            _ => EXIT_USAGE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Ctx {
    format: Format,
    limits: Limits,
    max_models: Option<usize>,
    verbose: u8,
}

/// `ground=N,nodes=N,models=N`, any subset.
fn env_limits(text: &str, limits: &mut Limits, models: &mut Option<usize>) -> Result<()> {
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) =
            part.split_once('=').ok_or_else(|| CliError::Usage(format!("ASPAX_LIMITS: bad entry `{part}`")))?;
        let n: u64 = v.trim().parse().map_err(|_| CliError::Usage(format!("ASPAX_LIMITS: bad number `{v}`")))?;
        match k.trim() {
            "ground" => limits.max_ground_rules = n as usize,
            "nodes" => limits.max_nodes = n,
            "models" => *models = Some(n as usize),
            _ => return Err(CliError::Usage(format!("ASPAX_LIMITS: unknown key `{k}`"))),
        }
    }
    Ok(())
}

impl Ctx {
    fn new(run: &RunArgs) -> Result<Self> {
        let mut limits = Limits::default();
        let mut max_models = None;
        if let Ok(text) = std::env::var("ASPAX_LIMITS") {
            env_limits(&text, &mut limits, &mut max_models)?;
        }
        limits.max_ground_rules = run.max_ground.unwrap_or(limits.max_ground_rules);
        limits.max_nodes = run.max_nodes.unwrap_or(limits.max_nodes);
        max_models = run.max_models.or(max_models);
        if limits.max_ground_rules == 0 || limits.max_nodes == 0 || max_models == Some(0) {
            return Err(CliError::Usage("limits must be positive".into()));
        }
        Ok(Ctx { format: run.format, limits, max_models, verbose: run.verbose })
    }

    fn emit(&self, text: impl FnOnce() -> String, data: impl FnOnce() -> Json) {
        let out = match self.format {
            Format::Text => text(),
            Format::Json => serde_json::to_string_pretty(&data()).expect("json") + "\n",
        };
        // a closed pipe (`| head`) is not an error worth reporting
        let _ = std::io::stdout().lock().write_all(out.as_bytes());
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn load_program(path: &Path) -> Result<Program> {
    Ok(parse_program(&SourceProgram::new(read(path)?, path.display().to_string()))?)
}

fn load_mapping(path: &Path) -> Result<DomainMapping> {
    Ok(parse_mapping(&read(path)?, &path.display().to_string())?)
}

impl ProgramArg {
    fn load(&self) -> Result<Program> {
        let path = self.path.as_ref().or(self.program.as_ref()).expect("clap requires one");
        let mut p = load_program(path)?;
        if let Some(f) = &self.facts {
            let path = Path::new(f);
            let src = if path.is_file() {
                SourceProgram::new(read(path)?, f.clone())
            } else {
                SourceProgram::new(f.clone(), "<facts>")
            };
            p.extend(&parse_program_in(&src, &p)?);
        }
        Ok(p)
    }
}

fn sets_json(sets: &[Interpretation]) -> Json {
    Json::Array(sets.iter().map(|s| Json::Array(s.iter().map(|a| Json::String(a.to_string())).collect())).collect())
}

fn output_program(ctx: &Ctx, p: &Program, out: Option<&Path>) -> Result<()> {
    let text = print_program(p);
    match out {
        Some(path) => write(path, &text),
        None => {
            ctx.emit(|| text.clone(), || json!({ "program": text }));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let ctx = Ctx::new(&cli.run)?;
    match cli.cmd {
        Cmd::Parse { program, map } => {
            let p = program.load()?;
            let m = map.as_deref().map(load_mapping).transpose()?;
            if let Some(m) = &m {
                m.validate(&p)?;
            }
            let text = print_program(&p);
            let mtext = m.as_ref().map(print_mapping);
            ctx.emit(
                || match &mtext {
                    Some(mt) => format!("{text}% mapping\n{mt}"),
                    None => text.clone(),
                },
                || json!({ "program": text, "mapping": mtext }),
            );
            Ok(0)
        }
        Cmd::Solve { program } => {
            let p = program.load()?;
            let sets = answer_sets(&p, &ctx.limits)?;
            let total = sets.len();
            let shown = &sets[..ctx.max_models.map_or(total, |n| n.min(total))];
            ctx.emit(
                || {
                    let mut s = String::new();
                    for (i, a) in shown.iter().enumerate() {
                        s += &format!("Answer {}: {a}\n", i + 1);
                    }
                    if total == 0 {
                        s += "UNSATISFIABLE\n";
                    } else if shown.len() < total {
                        s += &format!("... {} more\n", total - shown.len());
                    }
                    s
                },
                || json!({ "count": total, "answer_sets": sets_json(shown) }),
            );
            Ok(0)
        }
        Cmd::Omit { program, map, out } => {
            let p = program.load()?;
            let m = load_mapping(&map)?;
            let r = omit_literals_with(&p, &m.omitted, OmitOptions::default())?;
            output_program(&ctx, &r.program, out.as_deref())?;
            Ok(0)
        }
        Cmd::Abstract { program, map, domain, explain, out } => {
            let p = program.load()?;
            let m = load_mapping(&map)?;
            let pl = plan(&p, &m, &domain.into())?;
            if explain {
                ctx.emit(
                    || pl.to_string(),
                    || json!({ "plan": pl.to_string(), "program": print_program(&pl.program) }),
                );
                if let Some(path) = out {
                    write(&path, &print_program(&pl.program))?;
                }
                return Ok(0);
            }
            output_program(&ctx, &pl.program, out.as_deref())?;
            Ok(0)
        }
        Cmd::Check { program, map, domain, shrink_constraints } => {
            let p = program.load()?;
            let m = load_mapping(&map)?;
            let a = if m.sorts.is_empty() {
                omit_literals_with(&p, &m.omitted, OmitOptions { shrink_constraints })?.program
            } else {
                if shrink_constraints {
                    return Err(CliError::Usage("--shrink-constraints applies to omission-only mappings".into()));
                }
                plan(&p, &m, &domain.into())?.program
            };
            let r = check_coverage(&p, &a, &m, &ctx.limits, CheckOptions::default())?;
            let timed = ctx.verbose > 0;
            ctx.emit(
                || {
                    let mut s = format!("{r}\n");
                    if timed {
                        s += &format!(
                            "time: concrete {} ms, abstract {} ms\n",
                            r.timings.concrete_ms, r.timings.abstract_ms
                        );
                    }
                    s
                },
                || {
                    let mut v = json!({
                        "sound": r.is_sound(),
                        "concrete": r.concrete_count,
                        "abstract": r.abstract_count,
                        "covered": sets_json(&r.covered),
                        "uncovered": sets_json(&r.uncovered),
                        "spurious": r.spurious.as_deref().map(sets_json),
                    });
                    if timed {
                        v["timings_ms"] =
                            json!({ "concrete": r.timings.concrete_ms, "abstract": r.timings.abstract_ms });
                    }
                    v
                },
            );
            Ok(if r.is_sound() { 0 } else { EXIT_VIOLATED })
        }
        Cmd::PolicyCheck { domain, policy, map, goal, bound, exact, overapprox: _, pattern, flags } => {
            let d = load_program(&domain)?;
            let pol = parse_program_in(&SourceProgram::new(read(&policy)?, policy.display().to_string()), &d)?;
            let m = load_mapping(&map)?;
            let opts = PolicyCheckOptions {
                bound,
                mode: if exact { AbstractionMode::Exact } else { AbstractionMode::OverApprox },
                pattern: pattern.as_deref().map(parse_pattern).transpose()?,
                domain: flags.into(),
            };
            let r = policy_check(&d, &pol, &m, &parse_goal(&goal)?, &opts, &ctx.limits)?;
            ctx.emit(
                || format!("{r}\n"),
                || {
                    let mut v = serde_json::to_value(&r).expect("json");
                    v["counterexample_text"] = json!(r.counterexample.as_ref().map(ToString::to_string));
                    if let Some(Verdict::Concrete(t)) = &r.verdict {
                        v["concrete_text"] = json!(t.to_string());
                    }
                    v
                },
            );
            Ok(if r.violated() { EXIT_VIOLATED } else { 0 })
        }
        Cmd::Grid { n, out } => {
            let g = Grid::new(n)?;
            fs::create_dir_all(&out).map_err(|source| CliError::Io { path: out.clone(), source })?;
            write(&out.join("domain.lp"), &grid::domain_text(n)?)?;
            write(&out.join("policy.lp"), grid::POLICY)?;
            write(&out.join("coarse.map"), &grid::coarse_mapping_text(n)?)?;
            write(&out.join("refined.map"), &print_mapping(&g.refined))?;
            write(&out.join("pattern.txt"), &format!("{}\n", g.northwest_east_pattern()))?;
            ctx.emit(|| format!("wrote grid scenario to {}\n", out.display()), || json!({ "dir": out }));
            Ok(0)
        }
        Cmd::Gen { seed } => {
            let mut r = rng(seed);
            let p = random_program(&mut r);
            let m = random_interval_mapping(&mut r, &p);
            let (pt, mt) = (print_program(&p), print_mapping(&m));
            ctx.emit(|| format!("{pt}% mapping\n{mt}"), || json!({ "program": pt, "mapping": mt }));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.run.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("aspax: {e}");
            ExitCode::from(e.code())
        }
    }
}
