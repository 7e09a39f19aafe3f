use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use psm_core::engine::write_trace;
use psm_core::experiments::{
    diffnet_stop, diffnet_violation, evaluate_dantzig, evaluate_diffnet, feasibility_violation, gen_dantzig,
    gen_diffnet, run_dantzig_bench, run_diffnet_bench, write_records_csv, Amplitude, BenchRecord, BenchSummary,
    DantzigGenConfig, DiffNetGenConfig, StopRule,
};
use psm_core::io::{read_matrix_file, read_vector_file, write_matrix_csv, write_vector_csv};
use psm_core::reductions::diffnet::unvec;
use psm_core::reductions::{solve_svm, DiffNetInstance, PathInOriginalCoords, SvmInstance};
use psm_core::{solve_path, ParametricProgram, PivotEvent, PsmError, SolutionPath, SolveOptions, Termination};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ITERATION_CAP: u8 = 4;
const EXIT_USAGE: u8 = 64;

/// Parametric simplex solution paths for sparse-learning linear programs.
#[derive(Parser, Debug)]
#[command(name = "psm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a program file (JSON or COO) along λ.
    Solve(SolveArgs),
    /// Dantzig selector path from a design and response.
    Dantzig(DantzigArgs),
    /// ℓ1-constrained hinge-loss SVM path.
    Svm(SvmArgs),
    /// Differential network path from two sample covariances.
    Diffnet(DiffnetArgs),
    /// Write a synthetic instance.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Generate and solve a batch of synthetic instances.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long)]
    max_pivots: Option<usize>,
    /// Write one line per pivot to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl SolverFlags {
    fn options(&self, target: f64) -> SolveOptions {
        SolveOptions {
            lambda_target: target,
            max_pivots: self.max_pivots,
            ..SolveOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    program: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda_target: f64,
    /// Comma-separated starting basis (required for equality programs).
    #[arg(long, value_delimiter = ',')]
    basis: Option<Vec<usize>>,
    /// Path CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct DantzigArgs {
    x: PathBuf,
    y: PathBuf,
    #[arg(long, default_value = "path-demo")]
    stop_rule: StopRule,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// True coefficients, for support scoring.
    #[arg(long)]
    theta0: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct SvmArgs {
    x: PathBuf,
    labels: PathBuf,
    #[arg(long, default_value = "value:0")]
    stop_rule: StopRule,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct DiffnetArgs {
    sx: PathBuf,
    sy: PathBuf,
    #[arg(long)]
    stop_rule: StopRule,
    /// Generating difference of precision matrices, for support scoring.
    #[arg(long)]
    delta0: Option<PathBuf>,
    /// Samples behind each covariance; only recorded.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug, Clone)]
struct DantzigGenFlags {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 250)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value = "signed-one-plus-gaussian")]
    amplitude: Amplitude,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DantzigGenFlags {
    fn config(&self) -> DantzigGenConfig {
        DantzigGenConfig {
            n: self.n,
            d: self.d,
            s: self.s,
            sigma: self.sigma,
            amplitude: self.amplitude,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct DiffnetGenFlags {
    #[arg(long, default_value_t = 25)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.02)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DiffnetGenFlags {
    fn config(&self) -> DiffNetGenConfig {
        DiffNetGenConfig {
            d: self.d,
            n: self.n,
            sparsity: self.sparsity,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Writes X.csv, y.csv, theta0.csv and config.json.
    Dantzig {
        #[command(flatten)]
        cfg: DantzigGenFlags,
        /// Instance number within the seeded batch.
        #[arg(long, default_value_t = 0)]
        id: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Writes SX.csv, SY.csv, delta0.csv and config.json.
    Diffnet {
        #[command(flatten)]
        cfg: DiffnetGenFlags,
        #[arg(long, default_value_t = 0)]
        id: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    Dantzig {
        #[command(flatten)]
        cfg: DantzigGenFlags,
        #[arg(long, default_value = "path-demo")]
        stop_rule: StopRule,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Records CSV; the summary goes to stdout.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_pivots: Option<usize>,
    },
    Diffnet {
        #[command(flatten)]
        cfg: DiffnetGenFlags,
        #[arg(long, default_value = "true-support")]
        stop_rule: StopRule,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_pivots: Option<usize>,
    },
}

fn exit_code(t: Termination) -> u8 {
    match t {
        Termination::ReachedTarget | Termination::LambdaNonpositive => EXIT_OK,
        Termination::Unbounded | Termination::Infeasible => EXIT_INFEASIBLE,
        Termination::NumericalFailure => EXIT_NUMERICAL,
        Termination::IterationCap => EXIT_ITERATION_CAP,
    }
}

fn error_code(e: &PsmError) -> u8 {
    match e {
        PsmError::InfeasibleAtLargeLambda(_) => EXIT_INFEASIBLE,
        PsmError::Linalg(_) => EXIT_NUMERICAL,
        PsmError::InvalidOptions(_) | PsmError::MissingBasis => EXIT_USAGE,
        _ => EXIT_INPUT,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, PsmError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_json(v: &serde_json::Value) -> Result<(), PsmError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_trace_file(path: Option<&Path>, pivots: &[PivotEvent]) -> Result<(), PsmError> {
    if let Some(p) = path {
        let mut w = create(p)?;
        write_trace(pivots, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// `<out>` with its extension replaced by `suffix`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn path_summary(path: &SolutionPath) -> serde_json::Value {
    json!({
        "termination": path.termination,
        "pivots": path.pivots.len(),
        "segments": path.segments.len(),
        "terminal_lambda": path.terminal_lambda,
        "breakpoints": path.breakpoints().into_iter().filter(|l| l.is_finite()).collect::<Vec<_>>(),
    })
}

/// Breakpoint table: λ, the constraint violation there, and the support size.
fn write_breakpoints(
    out: &Path,
    coords: &PathInOriginalCoords,
    violation: impl Fn(&[f64], f64) -> f64,
) -> Result<PathBuf, PsmError> {
    let file = sibling(out, "_breakpoints.csv");
    let mut w = create(&file)?;
    writeln!(w, "breakpoint,lambda,violation,support_size")?;
    for (k, bp) in coords.breakpoints.iter().enumerate() {
        writeln!(w, "{k},{},{},{}", bp.lambda, violation(&bp.values, bp.lambda), bp.support.len())?;
    }
    w.flush()?;
    Ok(file)
}

fn cmd_solve(a: SolveArgs) -> Result<u8, PsmError> {
    let program = ParametricProgram::read_file(&a.program)?;
    let opts = a.solver.options(a.lambda_target);
    let path = solve_path(&program, &opts, a.basis.as_deref())?;
    path.write_csv(create(&a.out)?)?;
    write_trace_file(a.solver.trace.as_deref(), &path.pivots)?;
    print_json(&path_summary(&path))?;
    Ok(exit_code(path.termination))
}

fn record_json(rec: &BenchRecord, path_csv: &Path, breakpoints: &Path) -> serde_json::Value {
    json!({
        "record": rec,
        "path_csv": path_csv,
        "breakpoints_csv": breakpoints,
    })
}

fn cmd_dantzig(a: DantzigArgs) -> Result<u8, PsmError> {
    let x = read_matrix_file(&a.x)?;
    let y = read_vector_file(&a.y)?;
    let theta0 = a.theta0.as_deref().map(read_vector_file).transpose()?;
    let (n, d) = x.shape();
    let lambda = a.stop_rule.lambda(n, d, a.sigma).ok_or_else(|| {
        PsmError::InvalidOptions(format!("stop rule {} names no lambda for the Dantzig selector", a.stop_rule))
    })?;
    let opts = a.solver.options(0.0);
    let (rec, coords) = evaluate_dantzig(0, &x, &y, theta0.as_ref(), lambda, &opts);
    let Some((path, coords)) = coords else {
        return Err(PsmError::Solver(rec.error.unwrap_or_default()));
    };
    coords.write_csv(create(&a.out)?)?;
    let bps = write_breakpoints(&a.out, &coords, |t, l| feasibility_violation(&x, &y, t, l))?;
    write_trace_file(a.solver.trace.as_deref(), &path.pivots)?;
    print_json(&record_json(&rec, &a.out, &bps))?;
    Ok(exit_code(coords.termination))
}

fn cmd_svm(a: SvmArgs) -> Result<u8, PsmError> {
    let x = read_matrix_file(&a.x)?;
    let labels = read_vector_file(&a.labels)?;
    let target = match a.stop_rule {
        StopRule::Value(l) => l,
        other => return Err(PsmError::InvalidOptions(format!("svm takes value:<lambda>, not {other}"))),
    };
    let inst = SvmInstance::new(x, labels.iter().copied().collect())?;
    let (path, coords) = solve_svm(&inst, &a.solver.options(target))?;
    coords.write_csv(create(&a.out)?)?;
    write_trace_file(a.solver.trace.as_deref(), &path.pivots)?;
    let mut summary = path_summary(&path);
    summary["model"] = json!(coords.terminal().map(|b| b.values.clone()));
    print_json(&summary)?;
    Ok(exit_code(path.termination))
}

fn cmd_diffnet(a: DiffnetArgs) -> Result<u8, PsmError> {
    let sx = read_matrix_file(&a.sx)?;
    let sy = read_matrix_file(&a.sy)?;
    let delta0 = a.delta0.as_deref().map(read_matrix_file).transpose()?;
    let stop = diffnet_stop(a.stop_rule, delta0.as_ref())?;
    let (rec, coords) = evaluate_diffnet(0, &sx, &sy, delta0.as_ref(), stop, &a.solver.options(0.0), a.samples);
    let Some((path, coords)) = coords else {
        return Err(PsmError::Solver(rec.error.unwrap_or_default()));
    };
    coords.write_csv(create(&a.out)?)?;
    write_trace_file(a.solver.trace.as_deref(), &path.pivots)?;
    let inst = DiffNetInstance::from_covariances(sx, sy)?;
    let layout = inst.layout();
    let bps = write_breakpoints(&a.out, &coords, |v, l| diffnet_violation(&inst, &unvec(v, layout), l))?;
    print_json(&record_json(&rec, &a.out, &bps))?;
    Ok(exit_code(coords.termination))
}

fn write_config(dir: &Path, cfg: &impl serde::Serialize, id: u64) -> Result<(), PsmError> {
    let mut w = create(&dir.join("config.json"))?;
    serde_json::to_writer_pretty(&mut w, &json!({ "config": cfg, "id": id }))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_gen(g: GenCommand) -> Result<u8, PsmError> {
    match g {
        GenCommand::Dantzig { cfg, id, out_dir } => {
            let cfg = cfg.config();
            let data = gen_dantzig(&cfg, id)?;
            std::fs::create_dir_all(&out_dir)?;
            write_matrix_csv(&data.x, create(&out_dir.join("X.csv"))?)?;
            write_vector_csv(&data.y, create(&out_dir.join("y.csv"))?)?;
            write_vector_csv(&data.theta0, create(&out_dir.join("theta0.csv"))?)?;
            write_config(&out_dir, &cfg, id)?;
        }
        GenCommand::Diffnet { cfg, id, out_dir } => {
            let cfg = cfg.config();
            let data = gen_diffnet(&cfg, id)?;
            std::fs::create_dir_all(&out_dir)?;
            write_matrix_csv(&data.sx, create(&out_dir.join("SX.csv"))?)?;
            write_matrix_csv(&data.sy, create(&out_dir.join("SY.csv"))?)?;
            write_matrix_csv(&data.delta0, create(&out_dir.join("delta0.csv"))?)?;
            write_config(&out_dir, &cfg, id)?;
        }
    }
    Ok(EXIT_OK)
}

fn bench_options(max_pivots: Option<usize>) -> SolveOptions {
    SolveOptions {
        max_pivots,
        ..SolveOptions::default()
    }
}

fn cmd_bench(b: BenchCommand) -> Result<u8, PsmError> {
    let (records, out, config, rule) = match b {
        BenchCommand::Dantzig { cfg, stop_rule, reps, out, max_pivots } => {
            let cfg = cfg.config();
            let recs = run_dantzig_bench(&cfg, stop_rule, reps, &bench_options(max_pivots))?;
            (recs, out, json!(cfg), stop_rule)
        }
        BenchCommand::Diffnet { cfg, stop_rule, reps, out, max_pivots } => {
            let cfg = cfg.config();
            let recs = run_diffnet_bench(&cfg, stop_rule, reps, &bench_options(max_pivots))?;
            (recs, out, json!(cfg), stop_rule)
        }
    };
    write_records_csv(&records, create(&out)?)?;
    let summary = BenchSummary::of(&records);
    print_json(&json!({
        "config": config,
        "stop_rule": rule.to_string(),
        "summary": summary,
        "records": records,
    }))?;
    Ok(EXIT_OK)
}

fn init_logging() {
    let filter = match std::env::var("PSM_LOG") {
        Ok(v) if !v.is_empty() => v,
        _ => "warn".to_string(),
    };
    env_logger::Builder::new()
        .parse_filters(&filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> Result<u8, PsmError> {
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Dantzig(a) => cmd_dantzig(a),
        Command::Svm(a) => cmd_svm(a),
        Command::Diffnet(a) => cmd_diffnet(a),
        Command::Gen(g) => cmd_gen(g),
        Command::Bench(b) => cmd_bench(b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
