use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locality::cohesion::ForceParams;
use locality::localization::{locate_features, Strategy};
use locality::regularizer::{NormExponent, RegSpec};
use locality::stats::{derive_schedule, locality_table, parse_schedule, write_schedule, LayerSubset, ProfileRow};
use locality::tinycnn::{synthetic_shapes, train, Dataset, RegMode, TinyNet, TinyNetConfig, TrainConfig};
use locality::{io, Error};

mod verify;

/// Seed used by every subcommand when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "locality", version, about = "Locality analysis of convolution kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the center-dominance or noisy-localization results numerically
    Verify(VerifyArgs),
    /// Locality statistics of a kernel set
    Analyze(AnalyzeArgs),
    /// Derive per-layer LOCO-REG factors from one or more kernel sets
    Schedule(ScheduleArgs),
    /// Find features in a 2-D map
    Locate(LocateArgs),
    /// Train the small CNN with uniform L2 or LOCO-REG
    TrainDemo(TrainArgs),
    /// Write every kernel of a kernel set as a PGM image
    EmitFilters(EmitArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    theorem: u8,
    /// Perturbation width for the vertex enumeration
    #[arg(long, default_value_t = 0.6)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Monte-Carlo trials per row
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    /// Layer subsets to report; all three when omitted
    #[arg(long, value_parser = parse_subset)]
    subset: Vec<LayerSubset>,
    /// Use signed weights instead of magnitudes
    #[arg(long)]
    signed: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.5)]
    c: f64,
    #[arg(long)]
    signed: bool,
    /// Write the schedule here as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LocateArgs {
    /// CSV or PGM feature map
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, value_parser = parse_strategy, default_value = "cohesion")]
    strategy: Strategy,
    /// Allow windows to overlap
    #[arg(long)]
    overlap: bool,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reg {
    Uniform,
    Loco,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = Reg::Uniform)]
    reg: Reg,
    /// Per-layer factors from `locality schedule`
    #[arg(long, conflicts_with_all = ["gamma", "eta", "reg_spec"])]
    schedule: Option<PathBuf>,
    /// Shared `lambda`, `gamma`, `eta` as a key = value file
    #[arg(long, conflicts_with_all = ["gamma", "eta", "lambda"])]
    reg_spec: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Dataset file or `synthetic`
    #[arg(long, default_value = "synthetic")]
    data: String,
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    /// Final kernels as a kernel set file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    file: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write raw values clamped to [0, 1] instead of stretching each kernel
    #[arg(long)]
    raw: bool,
}

fn parse_subset(s: &str) -> Result<LayerSubset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Usage = 1,
    Input = 2,
    Failed = 3,
}

fn status_of(e: &Error) -> Status {
    match e {
        e if e.is_input_format() => Status::Input,
        Error::NoEligibleLayers
        | Error::ZeroVariance
        | Error::NonPositiveDenominator { .. }
        | Error::MissingClassFactor(_)
        | Error::EmptyDataset => Status::Input,
        Error::NonFiniteLoss { .. } => Status::Failed,
        _ => Status::Usage,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { Status::Ok as u8 });
        }
    };
    let result = match cli.command {
        Command::Verify(a) => verify::run(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Schedule(a) => schedule(&a),
        Command::Locate(a) => locate(&a),
        Command::TrainDemo(a) => train_demo(&a),
        Command::EmitFilters(a) => emit_filters(&a),
    };
    match result {
        Ok((out, status)) => {
            print!("{out}");
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status_of(&e) as u8)
        }
    }
}

type Outcome = locality::Result<(String, Status)>;

fn analyze(a: &AnalyzeArgs) -> Outcome {
    let set = io::read_kernelset(&a.file)?;
    let subsets = if a.subset.is_empty() {
        LayerSubset::ALL.to_vec()
    } else {
        a.subset.clone()
    };
    let rows = locality_table(&set, !a.signed, &subsets)?;
    let out = match a.format {
        Format::Csv => {
            let mut s = format!("{}\n", ProfileRow::CSV_HEADER);
            for r in &rows {
                s.push_str(&r.to_csv());
                s.push('\n');
            }
            s
        }
        Format::Text => profile_text(&set.model, &rows),
    };
    Ok((out, Status::Ok))
}

fn profile_text(model: &str, rows: &[ProfileRow]) -> String {
    let mut lines = vec![
        format!("model {model}"),
        format!(
            "{:<12} {:<10} {:>10} {:>6} {:>9} {:>10}",
            "comparison", "subset", "mean", "n", "t", "p"
        ),
    ];
    for r in rows {
        let mut line = format!(
            "{:<12} {:<10} {:>10.4} {:>6} {:>9.3} {:>10.3e} {:<3}",
            format!("{}-{}", r.class_a, r.class_b),
            r.subset.name(),
            r.mean,
            r.n,
            r.t,
            r.p,
            r.stars
        );
        if !r.degenerate_layers.is_empty() {
            let _ = write!(line, " skipped: {}", r.degenerate_layers.join(" "));
        }
        lines.push(line.trim_end().to_string());
    }
    lines.join("\n") + "\n"
}

fn schedule(a: &ScheduleArgs) -> Outcome {
    let models = a.files.iter().map(io::read_kernelset).collect::<locality::Result<Vec<_>>>()?;
    let text = write_schedule(&derive_schedule(&models, a.c, !a.signed)?);
    if let Some(path) = &a.out {
        write_file(path, text.as_bytes())?;
    }
    Ok((text, Status::Ok))
}

fn locate(a: &LocateArgs) -> Outcome {
    let map = io::read_feature_map(&a.map)?;
    let params = ForceParams::new(a.c0, a.q)?;
    let found = locate_features(&map, a.k, a.n, a.strategy, &params, a.overlap)?;
    let mut s = String::from("center_row,center_col,score,strategy\n");
    for p in found {
        let _ = writeln!(s, "{},{},{},{}", p.center.0, p.center.1, p.score, p.strategy);
    }
    Ok((s, Status::Ok))
}

fn read_text(path: &Path) -> locality::Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> locality::Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn train_demo(a: &TrainArgs) -> Outcome {
    let dataset = if a.data == "synthetic" {
        synthetic_shapes(a.train_size, a.test_size, 16, a.seed)?
    } else {
        Dataset::parse(&read_text(Path::new(&a.data))?)?
    };
    let net_config = TinyNetConfig::desk(dataset.channels, dataset.height, dataset.width, dataset.classes, a.seed);
    let conv_names = TinyNet::new(&net_config)?.conv_names();

    let mut config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(lr) = a.lr {
        config.learning_rate = lr;
    }
    let mut shared = (a.gamma.unwrap_or(0.7), a.eta.unwrap_or(0.77));
    if let Some(path) = &a.reg_spec {
        let spec: RegSpec = read_text(path)?.parse()?;
        if spec.p() != NormExponent::L2 {
            return Err(Error::Parse("the trainer supports p = 2 only".into()));
        }
        config.lambda = spec.lambda();
        shared = (spec.gamma(), spec.eta());
    }
    if let Some(lambda) = a.lambda {
        config.lambda = lambda;
    }
    config.reg = match (a.reg, &a.schedule) {
        (Reg::Uniform, None) if a.reg_spec.is_none() && a.gamma.is_none() && a.eta.is_none() => RegMode::Uniform,
        (Reg::Uniform, _) => {
            return Err(Error::InvalidParameter(
                "--schedule, --reg-spec, --gamma and --eta need --reg loco".into(),
            ))
        }
        (Reg::Loco, Some(path)) => RegMode::from_schedule(&parse_schedule(&read_text(path)?)?, &conv_names)?,
        (Reg::Loco, None) => RegMode::loco_shared(shared.0, shared.1, conv_names.len()),
    };

    let report = train(&net_config, &config, &dataset)?;
    if let Some(path) = &a.out {
        io::write_kernelset(&report.kernels, path)?;
    }
    Ok((report.to_csv(), Status::Ok))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn emit_filters(a: &EmitArgs) -> Outcome {
    let set = io::read_kernelset(&a.file)?;
    fs::create_dir_all(&a.out).map_err(|source| Error::Io {
        path: a.out.clone(),
        source,
    })?;
    let mut written = 0;
    for layer in &set.layers {
        let k = layer.kernel_size();
        let stem = file_stem(&layer.name);
        for f in 0..layer.out_channels {
            for c in 0..layer.in_channels {
                let path = a.out.join(format!("{stem}_f{f}_c{c}.pgm"));
                io::emit_pgm(layer.kernel(c, f).weights(), k, k, &path, !a.raw)?;
                written += 1;
            }
        }
    }
    Ok((
        format!("wrote {written} images to {}\n", a.out.display()),
        Status::Ok,
    ))
}
