//! Command-line harness: instance loading, seeded sweeps, resolvent runs,
//! and report emission.
//!
//! Exit codes: 0 all checks pass, 1 violations (or a negative control that
//! failed to fire), 2 configuration or IO error, 3 only expected violations
//! on negative controls.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nldf::contraction::build_dn;
use nldf::criteria::{
    compatibility_residual, fuzz_sweep, identity_sweep, FamilyKind, IdentityKind, Tolerance,
};
use nldf::exec::ExecMode;
use nldf::harness::{
    canonical_instance, canonical_names, find_midpoint_violation, generate_instance,
    negative_control, render_outcome, run_suite, InstanceEntry, InstanceSpec, OutputFormat,
    SuiteConfig,
};
use nldf::instance::InstanceDoc;
use nldf::resolvent::{evolve, resolvent, SolverConfig, SolverStrategy};
use nldf::{L2Fn, MeasureSpace};

#[derive(Parser)]
#[command(
    name = "nldf",
    version,
    about = "Verification harness for nonlinear Dirichlet forms on finite measure spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the contraction-compatibility and inequality families over instances
    Verify(VerifyArgs),
    /// Check the exact pointwise identities behind the inequality rewrites
    Identities(IdentitiesArgs),
    /// Apply the proximal resolvent to one function
    Resolve(ResolveArgs),
    /// Iterate the resolvent along a uniform time grid
    Evolve(EvolveArgs),
    /// Run negative controls: crafted and randomly found violations
    Fuzz(FuzzArgs),
    /// Print worked examples with their expected values
    Demo,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format: json or csv
    #[arg(long, default_value = "json")]
    format: String,
}

impl OutputArgs {
    fn format(&self) -> anyhow::Result<OutputFormat> {
        Ok(self.format.parse::<OutputFormat>()?)
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("writing report to {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Samples per check family per instance
    #[arg(long, default_value_t = 200)]
    samples: u64,
    /// Absolute slack tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Instance: document path, canonical name, or generator spec
    /// like "nodes=5,kinds=power:huber,wmin=0.5,wmax=2" (repeatable)
    #[arg(long = "instance", value_name = "PATH|NAME|SPEC")]
    instances: Vec<String>,
    /// Comma-separated family labels (default: all)
    #[arg(long, value_name = "LIST")]
    checks: Option<String>,
    /// Run samples on one thread
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct IdentitiesArgs {
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Random input draws per identity kind
    #[arg(long, default_value_t = 100)]
    samples: u64,
    /// Maximum allowed deviation
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Comma-separated identity names (default: all)
    #[arg(long, value_name = "LIST")]
    checks: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SolverArgs {
    /// Target first-order optimality residual
    #[arg(long, default_value_t = 1e-8)]
    solver_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iterations: u32,
    /// proximal_gradient_backtracking, subgradient_diminishing, or
    /// projected_exact_for_indicators (default: pick by smoothness)
    #[arg(long)]
    strategy: Option<String>,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let strategy = self
            .strategy
            .as_ref()
            .map(|s| {
                serde_json::from_value::<SolverStrategy>(json!(s))
                    .map_err(|e| anyhow!("bad --strategy: {e}"))
            })
            .transpose()?;
        Ok(SolverConfig {
            tolerance: self.solver_tol,
            max_iterations: self.max_iterations,
            strategy,
        })
    }
}

#[derive(Args)]
struct ResolveArgs {
    /// Instance: document path, canonical name, or generator spec
    #[arg(long, default_value = "two_node_quadratic", value_name = "PATH|NAME|SPEC")]
    instance: String,
    /// Resolvent scale (must be positive)
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Stored function name or comma-separated values
    /// (default: the document's "f", else a seeded sample)
    #[arg(long)]
    input: Option<String>,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvolveArgs {
    /// Instance: document path, canonical name, or generator spec
    #[arg(long, default_value = "two_node_quadratic", value_name = "PATH|NAME|SPEC")]
    instance: String,
    /// Total evolution time
    #[arg(long, default_value_t = 0.25)]
    t: f64,
    /// Number of resolvent steps
    #[arg(long, default_value_t = 100)]
    steps: u32,
    /// Stored function name or comma-separated values
    /// (default: the document's "f", else a seeded sample)
    #[arg(long)]
    input: Option<String>,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Samples per check family and midpoint-search budget
    #[arg(long, default_value_t = 500)]
    samples: u64,
    /// Absolute slack tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Instance to attack (default: the crafted negative control; repeatable)
    #[arg(long = "instance", value_name = "PATH|NAME|SPEC")]
    instances: Vec<String>,
    /// Comma-separated family labels (default: all)
    #[arg(long, value_name = "LIST")]
    checks: Option<String>,
    /// Run samples on one thread
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Verify(args) => run_verify(args),
        Command::Identities(args) => run_identities(args),
        Command::Resolve(args) => run_resolve(args),
        Command::Evolve(args) => run_evolve(args),
        Command::Fuzz(args) => run_fuzz(args),
        Command::Demo => run_demo(),
    }
}

/// Paths (existing or *.json) load documents; known names pick canonical
/// instances; everything else must parse as a generator spec.
fn parse_instance_entry(raw: &str) -> anyhow::Result<InstanceEntry> {
    let path = Path::new(raw);
    if raw.ends_with(".json") || path.is_file() {
        return Ok(InstanceEntry::File { path: path.to_path_buf() });
    }
    if canonical_names().contains(&raw) {
        return Ok(InstanceEntry::Canonical { name: raw.to_string() });
    }
    let spec: InstanceSpec = raw.parse().map_err(|e| {
        anyhow!("--instance {raw:?} is not a file, a canonical name {:?}, or a generator spec: {e}",
            canonical_names())
    })?;
    Ok(InstanceEntry::Generated { spec })
}

fn parse_families(list: Option<&str>) -> anyhow::Result<Vec<FamilyKind>> {
    let Some(list) = list else {
        return Ok(FamilyKind::ALL.to_vec());
    };
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            FamilyKind::ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| {
                anyhow!(
                    "unknown check family {s:?}; known: {}",
                    FamilyKind::ALL.map(|k| k.label()).join(", ")
                )
            })
        })
        .collect()
}

fn mode_for(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    }
}

fn run_verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let format = args.output.format()?;
    let instances = if args.instances.is_empty() {
        SuiteConfig::default().instances
    } else {
        args.instances.iter().map(|s| parse_instance_entry(s)).collect::<anyhow::Result<_>>()?
    };
    let config = SuiteConfig {
        seed: args.seed,
        n_samples: args.samples,
        tolerance: Tolerance { atol: args.tol, ..Tolerance::default() },
        families: parse_families(args.checks.as_deref())?,
        instances,
        mode: mode_for(args.sequential),
    };
    let outcome = run_suite(&config)?;
    args.output.emit(&render_outcome(&outcome, format)?)?;
    Ok(outcome.exit_code() as u8)
}

fn run_identities(args: IdentitiesArgs) -> anyhow::Result<u8> {
    let format = args.output.format()?;
    let kinds: Vec<IdentityKind> = match args.checks.as_deref() {
        None => IdentityKind::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<IdentityKind>().map_err(anyhow::Error::from))
            .collect::<anyhow::Result<_>>()?,
    };

    let mut rows = Vec::with_capacity(kinds.len());
    let mut failures = 0u32;
    for kind in kinds {
        let max_deviation = identity_sweep(kind, args.seed, args.samples)?;
        let pass = max_deviation <= args.tol;
        failures += u32::from(!pass);
        rows.push(json!({
            "identity": kind.name(),
            "inputs": args.samples,
            "max_deviation": max_deviation,
            "pass": pass,
        }));
    }

    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&rows)? + "\n",
        OutputFormat::Csv => {
            let mut out = String::from("identity,inputs,max_deviation,pass\n");
            for row in &rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row["identity"].as_str().unwrap(),
                    row["inputs"],
                    row["max_deviation"],
                    row["pass"]
                ));
            }
            out
        }
    };
    args.output.emit(&text)?;
    Ok(u8::from(failures > 0))
}

/// Loads one instance for a single-function run, keeping the document (when
/// there is one) so `--input` can name stored functions.
fn load_single(raw: &str, seed: u64) -> anyhow::Result<(String, nldf::functional::EnergyFunctional, Option<InstanceDoc>)> {
    match parse_instance_entry(raw)? {
        InstanceEntry::Canonical { name } => Ok((name.clone(), canonical_instance(&name)?, None)),
        InstanceEntry::File { path } => {
            let doc = InstanceDoc::load(&path)
                .with_context(|| format!("loading instance {}", path.display()))?;
            Ok((path.display().to_string(), doc.build()?, Some(doc)))
        }
        InstanceEntry::Generated { spec } => {
            Ok((spec.to_string(), generate_instance(&spec, seed)?, None))
        }
    }
}

fn pick_input(
    raw: Option<&str>,
    doc: Option<&InstanceDoc>,
    space: &MeasureSpace,
    seed: u64,
) -> anyhow::Result<L2Fn> {
    if let Some(raw) = raw {
        if let Some(doc) = doc {
            if let Ok(f) = doc.function(raw) {
                return Ok(f);
            }
        }
        let values: Result<Vec<f64>, _> =
            raw.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match values {
            Ok(v) => Ok(L2Fn::new(space.clone(), v)?),
            Err(_) => bail!(
                "--input {raw:?} is neither a stored function name nor a comma-separated value list"
            ),
        }
    } else if let Some(f) = doc.and_then(|d| d.function("f").ok()) {
        Ok(f)
    } else {
        Ok(nldf::criteria::sweep::sample_fn(
            &mut nldf::rng::stream(seed, "cli_input", 0),
            space,
        ))
    }
}

fn values_csv(header: &str, input: &L2Fn, result: &L2Fn) -> String {
    let mut out = format!("node,{header}\n");
    for (i, (a, b)) in input.values().iter().zip(result.values()).enumerate() {
        out.push_str(&format!("{i},{a},{b}\n"));
    }
    out
}

fn run_resolve(args: ResolveArgs) -> anyhow::Result<u8> {
    let format = args.output.format()?;
    let (label, energy, doc) = load_single(&args.instance, args.seed)?;
    let input = pick_input(args.input.as_deref(), doc.as_ref(), energy.space(), args.seed)?;
    let result = resolvent(&energy, args.lambda, &input, &args.solver.config()?)?;

    let text = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&json!({
                "instance": label,
                "lambda": args.lambda,
                "input": input.values(),
                "minimizer": result.minimizer.values(),
                "objective": result.objective,
                "optimality_residual": result.optimality_residual,
                "iterations": result.iterations,
                "converged": result.converged,
            }))? + "\n"
        }
        OutputFormat::Csv => values_csv("input,minimizer", &input, &result.minimizer),
    };
    args.output.emit(&text)?;
    if !result.converged {
        eprintln!(
            "warning: solver stopped at residual {} after {} iterations",
            result.optimality_residual, result.iterations
        );
    }
    Ok(0)
}

fn run_evolve(args: EvolveArgs) -> anyhow::Result<u8> {
    let format = args.output.format()?;
    let (label, energy, doc) = load_single(&args.instance, args.seed)?;
    let input = pick_input(args.input.as_deref(), doc.as_ref(), energy.space(), args.seed)?;
    let result = evolve(&energy, args.t, args.steps, &input, &args.solver.config()?)?;

    let text = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&json!({
                "instance": label,
                "t": args.t,
                "steps": args.steps,
                "input": input.values(),
                "result": result.result.values(),
                "objectives": result.objectives,
                "iterations": result.iterations,
                "converged": result.converged,
            }))? + "\n"
        }
        OutputFormat::Csv => values_csv("input,result", &input, &result.result),
    };
    args.output.emit(&text)?;
    if !result.converged {
        eprintln!("warning: at least one evolution step did not converge");
    }
    Ok(0)
}

fn run_fuzz(args: FuzzArgs) -> anyhow::Result<u8> {
    let format = args.output.format()?;
    let instances: Vec<InstanceEntry> = if args.instances.is_empty() {
        vec![InstanceEntry::Canonical { name: "negative_control".into() }]
    } else {
        args.instances.iter().map(|s| parse_instance_entry(s)).collect::<anyhow::Result<_>>()?
    };
    let config = SuiteConfig {
        seed: args.seed,
        n_samples: args.samples,
        tolerance: Tolerance { atol: args.tol, ..Tolerance::default() },
        families: parse_families(args.checks.as_deref())?,
        instances,
        mode: mode_for(args.sequential),
    };
    let outcome = run_suite(&config)?;

    // Independent witness search: midpoint convexity failures on each
    // nonconvex instance, with the sample budget as the search cap.
    let mut witnesses = Vec::new();
    for (index, entry) in config.instances.iter().enumerate() {
        let (label, energy) = match entry {
            InstanceEntry::Canonical { name } => (name.clone(), canonical_instance(name)?),
            InstanceEntry::File { path } => {
                (path.display().to_string(), InstanceDoc::load(path)?.build()?)
            }
            InstanceEntry::Generated { spec } => (
                spec.to_string(),
                generate_instance(spec, config.seed.wrapping_add(index as u64))?,
            ),
        };
        if energy.is_convex() {
            continue;
        }
        let witness = find_midpoint_violation(&energy, args.seed, args.samples.max(1000))?;
        witnesses.push(match witness {
            Some((a, b, slack)) => json!({
                "instance": label,
                "a": a.values(),
                "b": b.values(),
                "slack": slack,
            }),
            None => json!({ "instance": label, "not_found_within": args.samples.max(1000) }),
        });
    }

    let text = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&json!({
                "outcome": outcome,
                "midpoint_witnesses": witnesses,
            }))? + "\n"
        }
        OutputFormat::Csv => render_outcome(&outcome, OutputFormat::Csv)?,
    };
    args.output.emit(&text)?;
    Ok(outcome.exit_code() as u8)
}

fn run_demo() -> anyhow::Result<u8> {
    let cfg = SolverConfig::default();

    println!("two-node quadratic, resolvent at lambda = 1");
    let e = canonical_instance("two_node_quadratic")?;
    let f = L2Fn::new(e.space().clone(), vec![1.0, -1.0])?;
    let r = resolvent(&e, 1.0, &f, &cfg)?;
    let diff = r.minimizer.values()[0] - r.minimizer.values()[1];
    println!("  input (1, -1), difference 2 shrinks by 1/(1+4*lambda) = 0.2");
    println!("  minimizer ({:.6}, {:.6}), difference {diff:.6}, expected 0.400000",
        r.minimizer.values()[0], r.minimizer.values()[1]);

    println!("semigroup limit, t = 0.25 in 100 steps");
    let ev = evolve(&e, 0.25, 100, &f, &cfg)?;
    let final_diff = ev.result.values()[0] - ev.result.values()[1];
    println!(
        "  final difference {final_diff:.6}; the step count sends it toward 2/e = {:.6}",
        2.0 * (-1.0_f64).exp()
    );

    println!("crafted negative control");
    let nc = negative_control();
    let r = compatibility_residual(&nc.energy, &nc.contraction, &nc.f, &nc.g, Tolerance::default())?;
    println!("  capped edge, halving map: slack {} (exactly -0.5)", r.slack_value());

    println!("iterated tent maps shrink geometrically");
    for n in 0..=4u32 {
        let dn = build_dn(n);
        let bound = 3.0_f64.powi(-(n as i32));
        let reach = 3.0_f64.powi(n as i32 + 1);
        let worst = (0..=2000)
            .map(|i| -reach + 2.0 * reach * i as f64 / 2000.0)
            .fold(0.0_f64, |m, x| m.max(dn.eval(x).abs()));
        println!("  n = {n}: sup |D_n| = {worst:.6} <= 3^-{n} = {bound:.6} on [{}, {}]", -reach, reach);
    }

    println!("sweep on the mixed smooth instance (100 samples per family)");
    let mixed = canonical_instance("mixed_smooth")?;
    let report = fuzz_sweep(
        &mixed,
        &FamilyKind::ALL,
        17,
        100,
        Tolerance::default(),
        ExecMode::default(),
    )?;
    println!(
        "  {} checks, {} samples, {} violations",
        report.checks.len(),
        report.total_samples(),
        report.violations
    );
    Ok(0)
}
