use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polyrank::cli::{self, CliError, Format, RankerKind};
use polyrank::dnnrank::{parse_dataset, train, DnnError, TrainConfig};
use polyrank::variants::Recipe;

#[derive(Parser)]
#[command(name = "polyrank", version, about = "Working-set analysis and ranking of loop-nest variants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct NestArgs {
    /// Nest-description file.
    #[arg(long)]
    nest: Option<PathBuf>,
    /// Built-in nest, e.g. `conv:2,32,32,4,4,3,3,1,1,16`
    /// (nImg,nOfm,nIfm,ofh,ofw,kh,kw,stride_h,stride_w,gemm_block).
    #[arg(long)]
    preset: Option<String>,
    /// Machine description; the built-in default when omitted.
    #[arg(long)]
    machine: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankerArg {
    Cost,
    Dnn,
}

#[derive(Subcommand)]
enum Command {
    /// Dependences, working sets, cache placement and cost of a nest.
    Analyze {
        #[command(flatten)]
        nest: NestArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Generate variants, rank them and emit the best ones.
    Rank {
        #[command(flatten)]
        nest: NestArgs,
        /// Variant configuration file.
        #[arg(long)]
        variants: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cost")]
        ranker: RankerArg,
        /// Pairwise-ranker weights (required with `--ranker dnn`).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        top_k: usize,
        /// Directory for the report and the emitted sources.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Train the pairwise ranker on a dataset of labelled variant pairs.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Where to write the weights.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = TrainConfig::default().batch_size)]
        batch_size: usize,
        /// Fraction of rows used for training.
        #[arg(long, default_value_t = TrainConfig::default().split)]
        split: f64,
        #[arg(long, default_value_t = TrainConfig::default().seed)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Print the source of a nest after a transformation recipe.
    Emit {
        #[command(flatten)]
        nest: NestArgs,
        /// e.g. `perm=k,j,i;tile=j:4`, or `identity`.
        #[arg(long, default_value = "identity")]
        recipe: String,
        /// Write the source here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analysis against direct execution of the nest.
    OracleCheck {
        #[command(flatten)]
        nest: NestArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
}

fn format(f: FormatArg) -> Format {
    match f {
        FormatArg::Text => Format::Text,
        FormatArg::Rows => Format::Rows,
    }
}

fn load(n: &NestArgs) -> Result<(cli::NestInput, polyrank::cachefit::MachineDescriptor), CliError> {
    let input = cli::load_nest(n.nest.as_deref(), n.preset.as_deref())?;
    let machine = cli::load_machine(n.machine.as_deref())?;
    Ok((input, machine))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Analyze { nest, format: f } => {
            let (input, m) = load(&nest)?;
            let a = cli::analyze_variant("identity", &input.nest, &m)?;
            print!("{}", cli::analysis_report(&a, &m, format(f)));
        }
        Command::Rank { nest, variants, ranker, weights, top_k, out, format: f } => {
            if top_k == 0 {
                return Err(CliError::Usage("--top-k must be at least 1".into()));
            }
            let dnn = match ranker {
                RankerArg::Cost => None,
                RankerArg::Dnn => Some(cli::load_weights(weights.as_deref())?),
            };
            let (input, m) = load(&nest)?;
            let cfg = cli::load_variants(variants.as_deref(), &input)?;
            let ranking = cli::rank_variants(&input.nest, &cfg, &m, dnn.as_ref())?;
            debug_assert_eq!(ranking.ranker, if dnn.is_some() { RankerKind::Dnn } else { RankerKind::Cost });
            let report = cli::rank_report(&ranking, top_k, format(f));
            print!("{report}");
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                let name = match f {
                    FormatArg::Text => "report.txt",
                    FormatArg::Rows => "report.tsv",
                };
                cli::write_file(&dir.join(name), &report)?;
                for (file, _, src) in cli::top_sources(&ranking, top_k) {
                    cli::write_file(&dir.join(file), &src)?;
                }
            }
        }
        Command::Train { dataset, weights, epochs, learning_rate, batch_size, split, seed, format: f } => {
            if !(0.0..=1.0).contains(&split) {
                return Err(CliError::Usage(format!("--split must be within [0, 1], got {split}")));
            }
            let text = cli::read_file(&dataset)?;
            let path = dataset.display().to_string();
            let rows = parse_dataset(&text).map_err(|source| CliError::Dnn { path: path.clone(), source })?;
            let cfg = TrainConfig { epochs, learning_rate, batch_size, split, seed };
            let (ranker, rep) = train(&rows, &cfg).map_err(|source: DnnError| CliError::Dnn { path, source })?;
            cli::write_file(&weights, &ranker.to_text())?;
            print!("{}", cli::train_report(&rep, format(f)));
        }
        Command::Emit { nest, recipe, out } => {
            let (input, _) = load(&nest)?;
            let recipe: Recipe = recipe.parse()?;
            let src = cli::emit_variant(&input.nest, &recipe)?;
            match out {
                Some(p) => cli::write_file(&p, &src)?,
                None => print!("{src}"),
            }
        }
        Command::OracleCheck { nest, format: f } => {
            let (input, m) = load(&nest)?;
            let check = cli::oracle_check(&input.nest, &m)?;
            print!("{}", cli::oracle_report(&check, format(f)));
            if check.mismatches() > 0 {
                return Err(CliError::OracleMismatch(check.mismatches()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyrank: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
