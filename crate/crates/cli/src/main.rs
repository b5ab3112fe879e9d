//! `bnsl`: fit, benchmark, decompose, simulate and plot broken neural
//! scaling laws from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use bnsl::benchmark::{self, ExtrapolationReport, Manifest, Summary, DEFAULT_MAX_BREAKS};
use bnsl::fitting::{fit, select_break_count, FitConfig, FitResult};
use bnsl::forms::{BnslParams, FormKind, FunctionalForm};
use bnsl::plot::{render_svg, PlotSpec};
use bnsl::series::{self, DataSeries};
use bnsl::simulate::{run_sweep, SweepSpec};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Fit(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

impl From<bnsl::Error> for CliError {
    fn from(e: bnsl::Error) -> Self {
        use bnsl::Error::*;
        match e {
            NonFiniteLoss | AllCandidatesFailed(_) | NoSolution { .. } | Overflow(_) => CliError::Fit(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "bnsl", version, about = "Broken neural scaling law toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one functional form to a series and print the result as JSON.
    Fit(FitArgs),
    /// Fit every form on every task in a manifest and write reports.
    Bench(BenchArgs),
    /// Print the power law segments of a broken power law.
    Decompose(DecomposeArgs),
    /// Run a noiseless extrapolation sweep.
    Simulate(SimulateArgs),
    /// Render data and an optional fitted curve as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SeedArgs {
    /// Fitting config JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, env = "BNSL_SEED")]
    seed: Option<u64>,
}

impl SeedArgs {
    fn load(&self) -> CliResult<FitConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => FitConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    form: FormKind,
    /// Break count for the broken power law.
    #[arg(long, conflicts_with = "auto_breaks")]
    breaks: Option<usize>,
    /// Choose the break count up to MAXN on held-out train points.
    #[arg(long, value_name = "MAXN")]
    auto_breaks: Option<usize>,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma separated forms, e.g. m1,m2,bnsl.
    #[arg(long, value_delimiter = ',', default_values_t = FormKind::ALL.to_vec())]
    forms: Vec<FormKind>,
    #[arg(long, default_value_t = DEFAULT_MAX_BREAKS)]
    max_breaks: usize,
    /// Tasks evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Parameters as a JSON file or inline JSON; accepts bare parameters, a
    /// tagged form or a fit result.
    #[arg(long)]
    params: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    data: PathBuf,
    /// Fitted form or fit result JSON.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    linear_x: bool,
    #[arg(long)]
    linear_y: bool,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long, default_value_t = 50)]
    samples_per_decade: usize,
}

/// Failed task in a bench run.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TaskFailure {
    task_name: String,
    error: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BenchSummary {
    #[serde(flatten)]
    summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    failed_tasks: Vec<TaskFailure>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> CliResult<String> {
    Ok(bnsl::json::to_string(value)?)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

fn load_points(path: &Path) -> CliResult<DataSeries> {
    let series = series::parse_points(&read(path)?, &file_stem(path), "other")?;
    series.validate_values()?;
    Ok(series)
}

fn cmd_fit(args: &FitArgs) -> CliResult<String> {
    let cfg = args.seed.load()?;
    let series = load_points(&args.data)?;
    let train = series.train();
    if args.form != FormKind::Bnsl && (args.breaks.is_some_and(|n| n > 0) || args.auto_breaks.is_some()) {
        return Err(CliError::Usage(format!("{} takes no breaks", args.form)));
    }
    let result: FitResult = match (args.form, args.auto_breaks) {
        (FormKind::Bnsl, Some(max_n)) => {
            let holdout = benchmark::holdout_count(train.len());
            let selection = select_break_count(&train, max_n, holdout, &cfg)?;
            eprintln!("selected {} break(s) on {holdout} held-out points", selection.best);
            fit(&train, FormKind::Bnsl, selection.best, &cfg)?
        }
        (kind, _) => fit(&train, kind, args.breaks.unwrap_or(0), &cfg)?,
    };
    to_json(&result)
}

fn task_file_name(name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}.json")
}

fn cmd_bench(args: &BenchArgs) -> CliResult<String> {
    let cfg = args.seed.load()?;
    if args.forms.is_empty() {
        return Err(CliError::Usage("--forms must name at least one form".into()));
    }
    let manifest = Manifest::load(&args.manifest)?;
    let all_series = manifest.load_series()?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let outcomes: Vec<(String, bnsl::Result<ExtrapolationReport>)> = pool.install(|| {
        all_series
            .par_iter()
            .map(|s| {
                eprintln!("fitting {}", s.task_name);
                (
                    s.task_name.clone(),
                    benchmark::evaluate_task(s, &args.forms, &cfg, args.max_breaks),
                )
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failed_tasks = Vec::new();
    for (name, outcome) in outcomes {
        match outcome {
            Ok(report) => {
                write(&args.out.join(task_file_name(&name)), &to_json(&report)?)?;
                reports.push(report);
            }
            Err(e) => {
                eprintln!("task {name} failed: {e}");
                failed_tasks.push(TaskFailure {
                    task_name: name,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = benchmark::summarize(&reports)?;
    let mut table = benchmark::markdown_table(&reports);
    for f in &failed_tasks {
        table.push_str(&format!("\nTask {} failed: {}\n", f.task_name, f.error));
    }
    write(&args.out.join("table.md"), &table)?;
    write(&args.out.join("summary.md"), &benchmark::summary_markdown(&summary))?;
    let bench_summary = BenchSummary { summary, failed_tasks };
    let text = to_json(&bench_summary)?;
    write(&args.out.join("summary.json"), &text)?;
    Ok(text)
}

fn params_from_value(value: Value) -> CliResult<BnslParams> {
    let bad = |e: serde_json::Error| CliError::Data(format!("bad parameters: {e}"));
    let form_value = match &value {
        Value::Object(map) if map.contains_key("form") => map["form"].clone(),
        _ => value,
    };
    let params = if form_value.get("kind").is_some() {
        match serde_json::from_value::<FunctionalForm>(form_value).map_err(bad)? {
            FunctionalForm::Bnsl(p) => p,
            other => {
                return Err(CliError::Data(format!("{} has no power law segments", other.kind())));
            }
        }
    } else {
        serde_json::from_value::<BnslParams>(form_value).map_err(bad)?
    };
    params.validate()?;
    Ok(params)
}

fn read_json_arg(arg: &str) -> CliResult<Value> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        read(Path::new(arg))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("bad JSON: {e}")))
}

fn cmd_decompose(args: &DecomposeArgs) -> CliResult<String> {
    let params = params_from_value(read_json_arg(&args.params)?)?;
    to_json(&params.decompose())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<String> {
    let cfg = args.seed.load()?;
    let spec: SweepSpec =
        serde_json::from_str(&read(&args.spec)?).map_err(|e| CliError::Data(format!("bad sweep spec: {e}")))?;
    let result = run_sweep(&spec, &cfg)?;
    match result.minimal_successful_t {
        Some(t) => eprintln!("minimal successful threshold {t}"),
        None => eprintln!("no threshold reached RMSLE {}", spec.success_rmsle),
    }
    let text = to_json(&result)?;
    write(&args.out, &text)?;
    Ok(text)
}

fn form_from_value(value: Value) -> CliResult<FunctionalForm> {
    let form_value = match &value {
        Value::Object(map) if map.contains_key("form") => map["form"].clone(),
        _ => value,
    };
    let form: FunctionalForm =
        serde_json::from_value(form_value).map_err(|e| CliError::Data(format!("bad fit JSON: {e}")))?;
    form.validate()?;
    Ok(form)
}

fn cmd_plot(args: &PlotArgs) -> CliResult<()> {
    let spec = PlotSpec {
        log_x: !args.linear_x,
        log_y: !args.linear_y,
        width: args.width,
        height: args.height,
        samples_per_decade: args.samples_per_decade,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let series = load_points(&args.data)?;
    let form = match &args.fit {
        Some(path) => Some(form_from_value(read_json_arg(&path.to_string_lossy())?)?),
        None => None,
    };
    let svg = render_svg(&spec, &series.points, form.as_ref())?;
    write(&args.out, &svg)
}

fn run(cli: Cli) -> CliResult<Option<String>> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a).map(Some),
        Command::Bench(a) => cmd_bench(&a).map(Some),
        Command::Decompose(a) => cmd_decompose(&a).map(Some),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| None),
        Command::Plot(a) => cmd_plot(&a).map(|_| None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
