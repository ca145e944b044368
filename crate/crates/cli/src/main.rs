//! Command-line front end: `solve`, `oracle`, `validate` and `abstract`.
//!
//! Exit status is 0 for sat/true, 1 for unsat/false and 2 for usage or
//! engine errors. Results go to stdout as JSON, diagnostics to stderr.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use nnmdl::corpus::{CorpusConfig, Generator};
use nnmdl::extraction::model_validates;
use nnmdl::fragment::{check_g_fragment, prop_abstraction, solve_fragment};
use nnmdl::oracle::{brute_force_sat, DomainMode, OracleBounds, OracleVerdict};
use nnmdl::tableau::DEFAULT_CAP_STEPS;
use nnmdl::{
    parse_formula, Formula, FrameClass, LogicRegistry, NeighbourhoodModel, SolveOptions, Tableau,
    Verdict,
};

#[derive(Parser)]
#[command(
    name = "nnmdl",
    version,
    about = "Satisfiability for non-normal modal description logics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide satisfiability with the tableau or the fragment procedure.
    Solve(SolveArgs),
    /// Search small models exhaustively.
    Oracle(OracleArgs),
    /// Check a formula against a model given as JSON.
    Validate(ValidateArgs),
    /// Print the propositional abstraction of a formula.
    Abstract(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Formula text.
    #[arg(short = 'e', long = "expr", conflicts_with_all = ["file", "seed"])]
    expr: Option<String>,
    /// File holding the formula.
    #[arg(long, conflicts_with = "seed")]
    file: Option<PathBuf>,
    /// Generate the input formula from this seed instead of reading one.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LogicArgs {
    #[arg(long, default_value = "E")]
    logic: String,
    #[arg(long, default_value = "varying")]
    domain: DomainMode,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    logic: LogicArgs,
    /// Restrict to formulas without modalised concepts.
    #[arg(long)]
    fragment: bool,
    /// Write the extracted model here on SAT.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Stream rule applications as JSON lines.
    #[arg(long)]
    trace: bool,
    /// Skip checking the extracted model.
    #[arg(long)]
    no_validate: bool,
    #[arg(long, env = "NNMDL_CAP_STEPS", default_value_t = DEFAULT_CAP_STEPS)]
    cap_steps: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    logic: LogicArgs,
    #[arg(long, default_value_t = 2)]
    max_worlds: usize,
    #[arg(long, default_value_t = 2)]
    max_domain: usize,
    /// Write the witness model here on SAT.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "E")]
    logic: String,
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// World to evaluate at; the first world by default.
    #[arg(long)]
    world: Option<String>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn read_formula(input: &InputArgs) -> Result<(Formula, bool), Failure> {
    if let Some(seed) = input.seed {
        return Ok((
            Generator::new(seed, CorpusConfig::default()).normalized(),
            true,
        ));
    }
    let text = match (&input.expr, &input.file) {
        (Some(e), _) => e.clone(),
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Failure("no formula given: use -e, --file or --seed".into())),
    };
    Ok((parse_formula(&text)?, false))
}

fn logic(name: &str) -> Result<FrameClass, Failure> {
    let registry = LogicRegistry::with_defaults();
    Ok(registry.get(name)?.class())
}

fn print(value: &Value) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}")
}

fn write_model(path: &PathBuf, model: &NeighbourhoodModel) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(&model.to_json())?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn with_formula(mut out: Value, phi: &Formula, generated: bool) -> Value {
    if generated {
        out["formula"] = Value::String(phi.to_string());
    }
    out
}

fn solve(args: &SolveArgs) -> Outcome {
    let class = logic(&args.logic.logic)?;
    let (phi, generated) = read_formula(&args.input)?;
    if args.fragment && !check_g_fragment(&phi) {
        return Err(Failure(
            "--fragment: the formula has a modalised concept".into(),
        ));
    }
    if args.logic.domain == DomainMode::Constant {
        if !args.fragment || !matches!(class, FrameClass::C | FrameClass::N) {
            return Err(Failure(
                "constant domains are decided only for the fragment without modalised concepts under C or N; \
                 the full language on constant domains is an open problem"
                    .into(),
            ));
        }
        if args.model_out.is_some() {
            return Err(Failure(
                "--model-out is not available for the constant-domain fragment procedure".into(),
            ));
        }
        let out = solve_fragment(&phi, class)?;
        let value = json!({"verdict": out.verdict, "stats": out.stats});
        print(&with_formula(value, &phi, generated))?;
        return Ok(out.verdict == Verdict::Sat);
    }
    let registry = LogicRegistry::with_defaults();
    let tableau = Tableau::new(&phi, registry.get(&args.logic.logic)?);
    let opts = SolveOptions {
        cap_steps: args.cap_steps,
        record_trace: false,
        extract_model: args.model_out.is_some() || !args.no_validate,
        validate: !args.no_validate,
        ..SolveOptions::default()
    };
    let mut trace_error = None;
    let result = if args.trace {
        let mut out = io::stdout().lock();
        tableau.solve_streaming(&opts, &mut |event| {
            let line = serde_json::to_string(event).expect("trace events serialize");
            if let Err(e) = writeln!(out, "{line}") {
                trace_error.get_or_insert(e);
            }
        })
    } else {
        tableau.solve(&opts)
    }?;
    if let Some(e) = trace_error {
        return Err(e.into());
    }
    if let (Some(path), Some(model)) = (&args.model_out, &result.model) {
        write_model(path, model)?;
    }
    let value = json!({"verdict": result.verdict, "stats": result.stats});
    print(&with_formula(value, &phi, generated))?;
    Ok(result.verdict == Verdict::Sat)
}

fn oracle(args: &OracleArgs) -> Outcome {
    let class = logic(&args.logic.logic)?;
    let (phi, generated) = read_formula(&args.input)?;
    let bounds = OracleBounds {
        max_worlds: args.max_worlds,
        max_domain: args.max_domain,
        domain_mode: args.logic.domain,
    };
    let out = brute_force_sat(&phi, class, bounds)?;
    let mut value = json!({
        "verdict": out.verdict,
        "stats": {
            "nodes": out.nodes,
            "max_worlds": bounds.max_worlds,
            "max_domain": bounds.max_domain,
            "domain": bounds.domain_mode,
        },
    });
    if let Some(model) = &out.model {
        value["model"] = model.to_json();
        if let Some(path) = &args.model_out {
            write_model(path, model)?;
        }
    }
    print(&with_formula(value, &phi, generated))?;
    Ok(out.verdict == OracleVerdict::Sat)
}

fn validate(args: &ValidateArgs) -> Outcome {
    let class = logic(&args.logic)?;
    let (phi, _) = read_formula(&args.input)?;
    let text = fs::read_to_string(&args.model)
        .map_err(|e| Failure(format!("{}: {e}", args.model.display())))?;
    let model = NeighbourhoodModel::from_json_str(&text)?;
    let valid = match &args.world {
        None => model_validates(&model, &phi, class),
        Some(id) => {
            let w = model.world_index(id)?;
            model.check_frame_class(class) && model.satisfies(w, &phi)?
        }
    };
    print(&Value::Bool(valid))?;
    Ok(valid)
}

fn abstraction(args: &InputArgs) -> Outcome {
    let (phi, _) = read_formula(args)?;
    print(&prop_abstraction(&phi)?.to_json())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Oracle(a) => oracle(a),
        Command::Validate(a) => validate(a),
        Command::Abstract(a) => abstraction(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
