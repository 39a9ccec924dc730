use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use frechet_anova::dist::ALGORITHM_ID;
use frechet_anova::power::{run_power_study, run_power_study_to, StudyConfig};
use frechet_anova::spaces::io::{
    matrix_files, read_adjacency_as_laplacian, read_matrices, read_quantile_grid_csv, read_raw_sample_csv,
    read_vector_csv, write_matrix, write_quantile_grid_csv,
};
use frechet_anova::spaces::MatrixKind;
use frechet_anova::{
    bootstrap_variance_interval, frechet_summary, stddev_interval, variance_interval, Error, GroupedSample,
    KSampleTest, MetricSample, ObjectSample, TestMethod,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "frechet-anova",
    version,
    about = "Fréchet ANOVA for samples of metric-space objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test equality of the group distributions.
    Test(TestArgs),
    /// Confidence intervals for the Fréchet variance and standard deviation.
    Ci(CiArgs),
    /// Run a power study described by a JSON configuration.
    Simulate(SimulateArgs),
    /// Convert raw samples to quantile grids, or adjacency matrices to Laplacians.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Wasserstein,
    FrobeniusLaplacian,
    FrobeniusCorrelation,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Asymptotic,
    Permutation,
    Bootstrap,
}

impl From<MethodArg> for TestMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Asymptotic => TestMethod::Asymptotic,
            MethodArg::Permutation => TestMethod::Permutation,
            MethodArg::Bootstrap => TestMethod::Bootstrap,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Object space of the input files.
    #[arg(long, value_enum)]
    space: SpaceArg,
    /// Quantile grid size used when reading raw samples.
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    /// Wasserstein input rows are raw samples rather than quantile grids.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "permutation")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 999)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One group label per line, one line per object of the single input.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// One input per group, or a single input together with --labels.
    /// Matrix inputs may be files or directories of files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Intervals have level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 999)]
    replicates: usize,
    /// Bootstrap resample size; defaults to the sample size.
    #[arg(long)]
    resample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    input_path: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output; without either the CSV goes to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConvertFrom {
    RawSample,
    Adjacency,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: ConvertFrom,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    /// Output file, or output directory when converting a directory of adjacency files.
    #[arg(long)]
    output: Option<PathBuf>,
    input_path: PathBuf,
}

enum Failure {
    Usage(String),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |source| {
        Failure::Library(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn load_sample(input: &InputArgs, path: &Path) -> Result<ObjectSample, Error> {
    match input.space {
        SpaceArg::Wasserstein if input.raw => ObjectSample::from_quantiles(read_raw_sample_csv(path, input.grid_size)?),
        SpaceArg::Wasserstein => ObjectSample::from_quantiles(read_quantile_grid_csv(path)?),
        SpaceArg::FrobeniusLaplacian => ObjectSample::from_matrices(read_matrices(path, MatrixKind::Laplacian)?),
        SpaceArg::FrobeniusCorrelation => ObjectSample::from_matrices(read_matrices(path, MatrixKind::Correlation)?),
        SpaceArg::Euclidean => ObjectSample::from_points(read_vector_csv(path)?),
    }
    .map_err(|e| match e {
        Error::Data { .. } | Error::Io { .. } => e,
        other => Error::Data {
            path: path.to_path_buf(),
            row: None,
            message: other.to_string(),
        },
    })
}

/// Group labels in order of first appearance and the 0-based label of each line.
fn read_labels(path: &Path) -> Result<(Vec<String>, Vec<usize>), Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let g = match names.iter().position(|n| n == line) {
            Some(g) => g,
            None => {
                names.push(line.to_string());
                names.len() - 1
            }
        };
        labels.push(g);
    }
    Ok((names, labels))
}

/// Adds the group's name to errors that only carry its index.
fn name_group(e: Error, names: &[String]) -> Error {
    let group = match e {
        Error::GroupSize { group, .. } | Error::DegenerateGroup { group } => group,
        e => return e,
    };
    match names.get(group) {
        Some(name) => match e {
            Error::DegenerateGroup { .. } => Error::Degenerate(format!("{e} ({name})")),
            _ => Error::Input(format!("{e} ({name})")),
        },
        None => e,
    }
}

fn load_groups(args: &TestArgs) -> Result<(GroupedSample<ObjectSample>, Vec<String>), Failure> {
    match &args.labels {
        Some(label_path) => {
            let [input] = args.inputs.as_slice() else {
                return Err(Failure::Usage("--labels takes exactly one input".into()));
            };
            let sample = load_sample(&args.input, input)?;
            let (names, labels) = read_labels(label_path)?;
            if labels.len() != sample.len() {
                return Err(Error::Data {
                    path: label_path.clone(),
                    row: None,
                    message: format!(
                        "{} labels for {} objects in {}",
                        labels.len(),
                        sample.len(),
                        input.display()
                    ),
                }
                .into());
            }
            let data = GroupedSample::new(sample, labels).map_err(|e| name_group(e, &names))?;
            Ok((data, names))
        }
        None => {
            let samples = args
                .inputs
                .iter()
                .map(|p| load_sample(&args.input, p))
                .collect::<Result<Vec<_>, _>>()?;
            let names: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
            let data = GroupedSample::from_samples(&samples).map_err(|e| name_group(e, &names))?;
            Ok((data, names))
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(write_err(path)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_test(args: &TestArgs) -> Result<(), Failure> {
    let (data, names) = load_groups(args)?;
    let method = TestMethod::from(args.method);
    let report = KSampleTest::new()
        .alpha(args.alpha)
        .replicates(args.replicates)
        .seed(args.seed)
        .run(&data, method)
        .map_err(|e| name_group(e, &names))?
        .with_labels(names);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(args.output.as_deref(), &json)?;
    let verdict = if report.reject { "reject" } else { "do not reject" };
    print!(
        "{verdict} equal distributions at alpha = {}: T_n = {:.6}, p = {:.6} ({}",
        args.alpha,
        report.t_n,
        report.p_value(),
        method.as_str()
    );
    match report.seed {
        Some(seed) => println!(
            ", B = {}, seed = {seed}, algorithm_id = {ALGORITHM_ID})",
            report.replicates
        ),
        None => println!(")"),
    }
    Ok(())
}

fn run_ci(args: &CiArgs) -> Result<(), Failure> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Failure::Usage(format!(
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let level = 1.0 - args.alpha;
    let sample = load_sample(&args.input, &args.input_path)?;
    let summary = frechet_summary(&sample)?;
    let var = variance_interval(&summary, level)?;
    let sd = stddev_interval(&summary, level)?;
    let boot = bootstrap_variance_interval(&sample, level, args.replicates, args.resample_size, args.seed)?;
    let pct = 100.0 * level;
    println!(
        "n = {}, variance = {:.6}, stddev = {:.6}, sigma_sq = {:.6}",
        summary.n,
        summary.variance,
        summary.variance.sqrt(),
        summary.sigma_sq
    );
    if summary.approximate_mean {
        println!("note: the mean is the sample medoid");
    }
    println!("variance {pct}% (asymptotic): [{:.6}, {:.6}]", var.lower, var.upper);
    println!("stddev {pct}% (asymptotic): [{:.6}, {:.6}]", sd.lower, sd.upper);
    println!(
        "variance {pct}% (bootstrap, B = {}, m = {}): [{:.6}, {:.6}]",
        boot.replicates, boot.resample_size, boot.interval.lower, boot.interval.upper
    );
    println!("seed = {}, algorithm_id = {ALGORITHM_ID}", args.seed);
    if let Some(path) = &args.output {
        let doc = json!({
            "n": summary.n,
            "variance": summary.variance,
            "sigma_sq": summary.sigma_sq,
            "approximate_mean": summary.approximate_mean,
            "variance_interval": var,
            "stddev_interval": sd,
            "bootstrap": boot,
            "algorithm_id": ALGORITHM_ID,
        });
        emit(
            Some(path),
            &serde_json::to_string_pretty(&doc).expect("intervals serialize"),
        )?;
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut config = StudyConfig::from_json_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.output.is_some() {
        config.output = args.output.clone();
    }
    eprintln!("seed = {}, algorithm_id = {ALGORITHM_ID}", config.seed);
    match &config.output {
        Some(path) => {
            run_power_study(&config)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            run_power_study_to(&config, io::stdout().lock())?;
        }
    }
    Ok(())
}

fn write_laplacian(input: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let l = read_adjacency_as_laplacian(input)?;
    match output {
        Some(path) => {
            let mut f = fs::File::create(path).map_err(write_err(path))?;
            write_matrix(&mut f, &l).map_err(write_err(path))
        }
        None => write_matrix(io::stdout().lock(), &l).map_err(write_err(Path::new("<stdout>"))),
    }
}

fn run_convert(args: &ConvertArgs) -> Result<(), Failure> {
    match args.from {
        ConvertFrom::RawSample => {
            let grids = read_raw_sample_csv(&args.input_path, args.grid_size)?;
            match &args.output {
                Some(path) => {
                    let f = fs::File::create(path).map_err(write_err(path))?;
                    write_quantile_grid_csv(f, &grids)?;
                }
                None => write_quantile_grid_csv(io::stdout().lock(), &grids)?,
            }
        }
        ConvertFrom::Adjacency if args.input_path.is_dir() => {
            let Some(out_dir) = &args.output else {
                return Err(Failure::Usage("converting a directory needs --output <dir>".into()));
            };
            fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
            for file in matrix_files(&args.input_path)? {
                let name = file.file_name().expect("directory entries have names");
                write_laplacian(&file, Some(&out_dir.join(name)))?;
            }
        }
        ConvertFrom::Adjacency => write_laplacian(&args.input_path, args.output.as_deref())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Test(a) => run_test(a),
        Command::Ci(a) => run_ci(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Convert(a) => run_convert(a),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_degenerate() { 3 } else { 2 })
        }
    }
}
