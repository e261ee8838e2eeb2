use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rolegraph_core::hbakd::{distribute_keys_with, KeyTable};
use rolegraph_core::lattice::role_lattice_with;
use rolegraph_core::optimizer::DEFAULT_NODE_BUDGET;
use rolegraph_core::policy::locate;
use rolegraph_core::risk::{decimal, leakage_risks_with};
use rolegraph_core::{
    can_access, derive_keys, hierarchy_flags, optimize, parse_policy, product_dominates, run_scenario,
    serialize_policy, verify, AccessMode, Algorithm, DocumentErrorKind, Error, Key, MacLattice, ObjectHierarchy,
    OptimizeOptions, PolicyDocument, ProductLabel, RbacModel, Scenario, SharingMode, SubjectKnowledge,
};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "rolegraph", version, about = "Role-graph conversions, leakage risk, hierarchical keys")]
struct Cli {
    /// Seed for every random choice (generalized keys, simulations).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Upper bound on roles or objects produced by unfolding.
    #[arg(long, global = true, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sharing {
    AnyPath,
    AllPaths,
}

#[derive(clap::Args)]
struct KeyArgs {
    /// Object hierarchy document.
    hierarchy: PathBuf,
    /// Root key as 64 hex digits.
    #[arg(long, env = "ROLEGRAPH_K0", hide_env_values = true)]
    k0: String,
    /// Accept DAGs by distributing keys over the ID-equivalent tree.
    #[arg(long)]
    generalized: bool,
    #[arg(long, value_enum, default_value_t = Sharing::AnyPath)]
    sharing: Sharing,
}

#[derive(Subcommand)]
enum Command {
    /// Check a policy document.
    Validate { policy: PathBuf },
    /// Convert a policy and verify the result.
    Optimize {
        policy: PathBuf,
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: Algorithm,
        /// Write the converted policy here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the conversion report here instead of standard error.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the structural flags of a policy.
    Flags { policy: PathBuf },
    /// Permission-leakage risk, highest first.
    Risk { policy: PathBuf },
    /// Derive object keys.
    Keys(KeyArgs),
    /// Answer access queries against derived keys.
    Access {
        #[command(flatten)]
        keys: KeyArgs,
        #[arg(long)]
        queries: PathBuf,
    },
    /// Run the key-change protocol.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Dominance queries on MAC labels combined with roles.
    Combine {
        policy: PathBuf,
        #[arg(long)]
        mac: PathBuf,
        #[arg(long)]
        queries: PathBuf,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Io(PathBuf, std::io::Error),
    Usage(String),
    Core(Error),
    /// Validation diagnostics, already rendered with line context.
    Invalid(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(..) => 1,
            Failure::Usage(_) => 2,
            Failure::Invalid(_) => 4,
            Failure::Core(e) => match e {
                Error::Document { kind: DocumentErrorKind::Syntax, .. } => 2,
                Error::Document { kind: DocumentErrorKind::Schema, .. } => 3,
                Error::NodeBudgetExceeded { .. } | Error::Verification(_) | Error::EmptyPipeline => 5,
                _ => 4,
            },
        }
    }

    fn report(&self) {
        match self {
            Failure::Io(path, e) => eprintln!("error: {}: {e}", path.display()),
            Failure::Usage(msg) => eprintln!("error: {msg}"),
            Failure::Core(e) => eprintln!("error: {e}"),
            Failure::Invalid(lines) => {
                for l in lines {
                    eprintln!("error: {l}");
                }
            }
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Core(e.into()))
}

fn diagnostics(model: &RbacModel, text: &str) -> Vec<(Option<usize>, String)> {
    model
        .validate()
        .errors
        .iter()
        .map(|d| {
            let line = d.ids.iter().find_map(|id| locate(text, id));
            let msg = format!("{}: {} [{}]", d.code.as_str(), d.message, d.ids.join(", "));
            (line, msg)
        })
        .collect()
}

fn render(diags: &[(Option<usize>, String)]) -> Vec<String> {
    diags
        .iter()
        .map(|(line, msg)| match line {
            Some(l) => format!("line {l}: {msg}"),
            None => msg.clone(),
        })
        .collect()
}

/// Parses and validates a policy document.
fn load_policy(path: &Path) -> CliResult<RbacModel> {
    let text = read(path)?;
    let model = parse_policy(&text)?;
    let diags = diagnostics(&model, &text);
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(Failure::Invalid(render(&diags)))
    }
}

fn emit_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s
}

struct Ctx {
    seed: Option<u64>,
    format: Format,
    opts: OptimizeOptions,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        seed: cli.seed,
        format: cli.format,
        opts: OptimizeOptions {
            node_budget: cli.node_budget,
        },
    };
    match run(&ctx, cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            f.report();
            ExitCode::from(f.exit_code())
        }
    }
}

/// Runs one command and returns what goes to standard output.
fn run(ctx: &Ctx, command: Command) -> CliResult<String> {
    match command {
        Command::Validate { policy } => validate(ctx, &policy),
        Command::Optimize {
            policy,
            algorithm,
            output,
            report,
        } => optimize_cmd(ctx, &policy, algorithm, output.as_deref(), report.as_deref()),
        Command::Flags { policy } => {
            let flags = hierarchy_flags(&load_policy(&policy)?);
            Ok(match ctx.format {
                Format::Json => emit_json(&json!(flags)),
                Format::Text => flags.names().iter().map(|n| format!("{n}\n")).collect(),
            })
        }
        Command::Risk { policy } => risk(ctx, &policy),
        Command::Keys(args) => {
            let (_, table) = key_table(ctx, &args)?;
            Ok(match ctx.format {
                Format::Json => emit_json(&json!(table)),
                Format::Text => table.keys.iter().map(|(o, k)| format!("{o}\t{k}\n")).collect(),
            })
        }
        Command::Access { keys, queries } => access(ctx, &keys, &queries),
        Command::Simulate { scenario } => {
            let mut s: Scenario = parse_json(&scenario)?;
            if let Some(seed) = ctx.seed {
                s.seed = seed;
            }
            let t = run_scenario(&s)?;
            Ok(match ctx.format {
                Format::Json => emit_json(&json!(t)),
                Format::Text => t.to_string(),
            })
        }
        Command::Combine { policy, mac, queries } => combine(ctx, &policy, &mac, &queries),
    }
}

fn validate(ctx: &Ctx, path: &Path) -> CliResult<String> {
    let text = read(path)?;
    let model = parse_policy(&text)?;
    let diags = diagnostics(&model, &text);
    if ctx.format == Format::Json {
        let errors: Vec<Value> = model
            .validate()
            .errors
            .iter()
            .zip(&diags)
            .map(|(d, (line, _))| json!({"code": d.code.as_str(), "message": d.message, "ids": d.ids, "line": line}))
            .collect();
        print!("{}", emit_json(&json!({"valid": diags.is_empty(), "errors": errors})));
    }
    if !diags.is_empty() {
        return Err(Failure::Invalid(render(&diags)));
    }
    Ok(match ctx.format {
        Format::Json => String::new(),
        Format::Text => format!(
            "ok\t{} users\t{} permissions\t{} roles\t{} arcs\n",
            model.users.len(),
            model.permissions.len(),
            model.roles.len(),
            model.rr_arcs.len()
        ),
    })
}

fn optimize_cmd(
    ctx: &Ctx,
    path: &Path,
    algorithm: Algorithm,
    output: Option<&Path>,
    report_path: Option<&Path>,
) -> CliResult<String> {
    let model = load_policy(path)?;
    let (out, report) = optimize(&model, algorithm, &ctx.opts)?;
    verify(&model, &out, &report)?;
    let policy = serialize_policy(&out);
    let report_text = match ctx.format {
        Format::Json => emit_json(&json!(report)),
        Format::Text => report.to_string(),
    };
    if let Some(p) = report_path {
        write(p, &report_text)?;
    }
    match (output, ctx.format) {
        (Some(p), _) => {
            write(p, &policy)?;
            Ok(if report_path.is_some() { String::new() } else { report_text })
        }
        (None, Format::Json) => Ok(emit_json(&json!({
            "policy": PolicyDocument::from(&out),
            "report": report,
        }))),
        (None, Format::Text) => {
            if report_path.is_none() {
                eprint!("{report_text}");
            }
            Ok(policy)
        }
    }
}

fn risk(ctx: &Ctx, path: &Path) -> CliResult<String> {
    let model = load_policy(path)?;
    let report = leakage_risks_with(&model, &ctx.opts)?;
    let rows = report.ranking.iter().map(|p| (p, &report.risks[p]));
    Ok(match ctx.format {
        Format::Json => {
            let rows: Vec<Value> = rows
                .map(|(p, r)| json!({"permission": p, "risk": r.to_string(), "decimal": decimal(r, 6)}))
                .collect();
            emit_json(&Value::Array(rows))
        }
        Format::Text => rows.fold(String::new(), |mut s, (p, r)| {
            let _ = writeln!(s, "{p}\t{r}\t{}", decimal(r, 6));
            s
        }),
    })
}

fn key_table(ctx: &Ctx, args: &KeyArgs) -> CliResult<(ObjectHierarchy, KeyTable)> {
    let h: ObjectHierarchy = parse_json(&args.hierarchy)?;
    let k0: Key = args
        .k0
        .parse()
        .map_err(|e: rolegraph_core::hbakd::KeyParseError| Failure::Usage(format!("--k0: {}", e.0)))?;
    let table = if args.generalized {
        let mode = match args.sharing {
            Sharing::AnyPath => SharingMode::AnyPath,
            Sharing::AllPaths => SharingMode::AllPaths,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed.unwrap_or(0));
        distribute_keys_with(&h, &k0, mode, &mut rng, ctx.opts.node_budget)?
    } else {
        derive_keys(&h, &k0)?
    };
    Ok((h, table))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AccessQueries {
    subjects: BTreeMap<String, SubjectKnowledge>,
    queries: Vec<AccessQuery>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AccessQuery {
    subject: String,
    object: String,
    mode: AccessMode,
}

fn access(ctx: &Ctx, args: &KeyArgs, path: &Path) -> CliResult<String> {
    let (h, table) = key_table(ctx, args)?;
    let doc: AccessQueries = parse_json(path)?;
    let mut rows = Vec::new();
    for q in &doc.queries {
        let s = doc
            .subjects
            .get(&q.subject)
            .ok_or_else(|| Failure::Usage(format!("query names unknown subject `{}`", q.subject)))?;
        rows.push((q, can_access(&h, &table, s, &q.object, q.mode)?));
    }
    Ok(match ctx.format {
        Format::Json => emit_json(&Value::Array(
            rows.iter()
                .map(|(q, ok)| json!({"subject": q.subject, "object": q.object, "mode": q.mode, "granted": ok}))
                .collect(),
        )),
        Format::Text => rows.iter().fold(String::new(), |mut s, (q, ok)| {
            let mode = json!(q.mode);
            let verdict = if *ok { "granted" } else { "denied" };
            let _ = writeln!(s, "{}\t{}\t{}\t{verdict}", q.subject, q.object, mode.as_str().unwrap_or_default());
            s
        }),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelSpec {
    level: String,
    #[serde(default)]
    categories: Vec<String>,
    role: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DominanceQuery {
    a: LabelSpec,
    b: LabelSpec,
}

fn combine(ctx: &Ctx, policy: &Path, mac_path: &Path, queries: &Path) -> CliResult<String> {
    let model = load_policy(policy)?;
    let mac: MacLattice = parse_json(mac_path)?;
    mac.check()?;
    let roles = role_lattice_with(&model, &ctx.opts)?;
    let queries: Vec<DominanceQuery> = parse_json(queries)?;
    let label = |l: &LabelSpec| -> CliResult<ProductLabel> {
        let cats: Vec<&str> = l.categories.iter().map(String::as_str).collect();
        Ok(ProductLabel {
            mac: mac.label(&l.level, &cats)?,
            role: roles.element(&l.role)?,
        })
    };
    let mut answers = Vec::new();
    for q in &queries {
        answers.push(product_dominates(&mac, &roles, &label(&q.a)?, &label(&q.b)?)?);
    }
    Ok(match ctx.format {
        Format::Json => emit_json(&json!(answers)),
        Format::Text => answers
            .iter()
            .enumerate()
            .map(|(i, d)| format!("{i}\t{}\n", if *d { "dominates" } else { "does-not-dominate" }))
            .collect(),
    })
}
