use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use symkernel::compiler::{self, CoreProgram};
use symkernel::kernels::{count_family, StrengthFunction, SymmetricKernelSpec};
use symkernel::projection::{frobenius_distance, project_alternating, project_exact};
use symkernel::toeplitz::{build_block_toeplitz, conv2d_valid, nonzero_mask};
use symkernel::trainer::{self, Network, NetworkSpec, Stage, TrainConfig};
use symkernel::{enumerate_commuting_pairs, Error, Kernel, Matrix, Result};

#[derive(Parser, Serialize)]
#[command(name = "symkernelc", version, about = "Symmetric kernel compiler and trainer")]
struct Cli {
    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// List commuting permutation pairs or count the kernel family.
    Enumerate(EnumerateArgs),
    /// Test kernel membership or core constraints of a program.
    Check(CheckArgs),
    /// Lower a kernel spec onto a core.
    Compile {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Recover a spec from a kernel.
    Decompile {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Run a compiled core on an input image.
    Simulate {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Valid 2-D correlation of an integer image with a kernel.
    Conv {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Block Toeplitz convolution matrix of a kernel.
    Toeplitz {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        n: usize,
        /// Print the 0/1 structural mask instead of values.
        #[arg(long)]
        mask: bool,
    },
    /// Nearest symmetric kernel to a real kernel.
    Project(ProjectArgs),
    /// Run the staged training pipeline.
    Train(TrainArgs),
    /// Accuracy of a checkpoint on the configured data.
    Eval(DataArgs),
    /// Fraction of active neurons of a threshold-mode checkpoint.
    Sparsity {
        #[command(flatten)]
        data: DataArgs,
        /// Write per-layer activation traces here.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Core-count estimate for a frozen network.
    EstimateCores {
        /// Checkpoint or network spec JSON.
        #[arg(long)]
        network: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct EnumerateArgs {
    #[arg(long, conflicts_with = "count")]
    pairs: bool,
    #[arg(long, requires_all = ["l", "m"])]
    count: bool,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    /// Count over the full [-255, 255] strength range.
    #[arg(long)]
    general: bool,
}

#[derive(Args, Serialize)]
struct CheckArgs {
    #[arg(long, conflicts_with = "program", required_unless_present = "program")]
    kernel: Option<PathBuf>,
    #[arg(long)]
    program: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProjectMode {
    Exact,
    Alternating,
}

#[derive(Args, Serialize)]
struct ProjectArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, value_enum, default_value_t = ProjectMode::Exact)]
    mode: ProjectMode,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the spec with B snapped at this threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of unconstrained epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Last stage to run.
    #[arg(long)]
    stage: Option<String>,
    /// JSON-lines metrics file; stdout when absent.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DataArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Training config whose data source is used.
    #[arg(long)]
    config: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network> {
    Network::from_json(&read(path)?).map_err(|e| match e {
        Error::Json(j) => Error::Parse(format!("{}: {j}", path.display())),
        other => other,
    })
}

fn run(cli: &Cli) -> Result<Value> {
    Ok(match &cli.command {
        Command::Enumerate(a) => {
            if a.count {
                let (l, m) = (a.l.unwrap_or(0), a.m.unwrap_or(0));
                json!({"l": l, "m": m, "ternary": !a.general, "count": count_family(l, m, !a.general).to_string()})
            } else {
                let pairs = enumerate_commuting_pairs();
                json!({"count": pairs.len(), "pairs": pairs})
            }
        }
        Command::Check(a) => match (&a.kernel, &a.program) {
            (Some(k), _) => {
                let kernel: Kernel<i32> = read_json(k)?;
                json!({"symmetric": true, "spec": compiler::check_kernel(&kernel)?})
            }
            (None, Some(p)) => {
                let program: CoreProgram = read_json(p)?;
                let diagnostics = compiler::check_core_constraints(&program);
                if !diagnostics.is_empty() {
                    return Err(Error::Constraints(diagnostics));
                }
                json!({"ok": true, "diagnostics": diagnostics})
            }
            (None, None) => unreachable!("clap requires one of --kernel, --program"),
        },
        Command::Compile { spec, n } => {
            let spec: SymmetricKernelSpec = read_json(spec)?;
            serde_json::to_value(compiler::compile(&spec, *n)?)?
        }
        Command::Decompile { kernel, n } => {
            let kernel: Kernel<i32> = read_json(kernel)?;
            serde_json::to_value(compiler::decompile(&kernel, *n)?)?
        }
        Command::Simulate { program, input } => {
            let program: CoreProgram = read_json(program)?;
            let outputs = if program.m == 1 {
                let x: Matrix<i64> = read_json(input)?;
                compiler::simulate_core(&program, &x)?
            } else {
                let xs: Vec<Matrix<i64>> = read_json(input)?;
                compiler::simulate_core_slices(&program, &xs)?
            };
            json!({"output": compiler::outputs_as_matrix(&program, &outputs)?})
        }
        Command::Conv { kernel, input, stride } => {
            let kernel: Kernel<i64> = read_json(kernel)?;
            let x: Matrix<i64> = read_json(input)?;
            json!({"output": conv2d_valid(&x, &kernel, *stride)?})
        }
        Command::Toeplitz { kernel, n, mask } => {
            let kernel: Kernel<i32> = read_json(kernel)?;
            let w = build_block_toeplitz(&kernel, *n)?;
            if *mask {
                json!({"n": w.n, "l": w.l, "mask": nonzero_mask(&w)})
            } else {
                serde_json::to_value(w)?
            }
        }
        Command::Project(a) => {
            let kernel: Kernel<f64> = read_json(&a.kernel)?;
            let choices = StrengthFunction::ternary_choices();
            let result = match a.mode {
                ProjectMode::Exact => project_exact(&kernel, &choices)?,
                ProjectMode::Alternating => project_alternating(&kernel, &choices, a.iters, a.seed)?,
            };
            let mut out = serde_json::to_value(&result)?;
            if let Some(t) = a.threshold {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Config("threshold must lie in [0, 1]".into()));
                }
                let snapped = result.spec.binarize(t);
                let k = symkernel::materialize(&snapped)?.to_f64();
                out["binarized"] = serde_json::to_value(&snapped)?;
                out["binarized_distance"] = json!(frobenius_distance(&kernel, &k)?);
            }
            out
        }
        Command::Train(a) => {
            let mut config: TrainConfig = read_json(&a.config)?;
            if let Some(seed) = a.seed {
                config.hyper.seed = seed;
            }
            if let Some(e) = a.epochs {
                config.plan.unconstrained_epochs = e;
            }
            if let Some(s) = &a.stage {
                config.plan.stop_after = Some(s.parse::<Stage>()?);
            }
            config.validate()?;
            eprintln!("{}", json!({"resolved_config": &config}));
            let run = config.run()?;
            let mut lines = String::new();
            for m in &run.metrics {
                lines.push_str(&serde_json::to_string(m)?);
                lines.push('\n');
            }
            if let Some(p) = &a.checkpoint {
                fs::write(p, run.network.to_json()?)?;
            }
            let Some(p) = &a.metrics else {
                std::io::stdout().write_all(lines.as_bytes())?;
                return Ok(Value::Null);
            };
            fs::write(p, &lines)?;
            let last = run.metrics.last();
            json!({
                "epochs": run.metrics.len(),
                "accuracy": last.map(|m| m.accuracy),
                "sparsity": last.map(|m| m.sparsity),
            })
        }
        Command::Eval(a) => {
            let net = load_network(&a.checkpoint)?;
            let config: TrainConfig = read_json(&a.config)?;
            serde_json::to_value(trainer::evaluate(&net, &config.data.load()?)?)?
        }
        Command::Sparsity { data, traces } => {
            let net = load_network(&data.checkpoint)?;
            let config: TrainConfig = read_json(&data.config)?;
            let dataset = config.data.load()?;
            let sparsity = trainer::measure_sparsity(&net, &dataset)?;
            if let Some(p) = traces {
                fs::write(p, serde_json::to_string(&trainer::record_traces(&net, &dataset)?)?)?;
            }
            json!({"sparsity": sparsity})
        }
        Command::EstimateCores { network } => {
            let text = read(network)?;
            let spec = match Network::from_json(&text) {
                Ok(net) => net.spec,
                Err(_) => serde_json::from_str::<NetworkSpec>(&text)
                    .map_err(|e| Error::Parse(format!("{}: {e}", network.display())))?,
            };
            serde_json::to_value(trainer::estimate_cores(&spec)?)?
        }
    })
}

fn error_object(e: &Error) -> Value {
    let mut obj = json!({"error": e.kind(), "code": e.exit_code(), "message": e.to_string()});
    match e {
        Error::NotRepresentable { conflict, .. } => obj["conflict"] = json!(conflict),
        Error::Constraints(diagnostics) => obj["diagnostics"] = json!(diagnostics),
        _ => {}
    }
    obj
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !matches!(cli.command, Command::Train(_)) {
        eprintln!("{}", json!({"resolved_config": &cli}));
    }
    let render = |v: &Value| {
        if cli.pretty {
            serde_json::to_string_pretty(v).expect("json values serialize")
        } else {
            v.to_string()
        }
    };
    match run(&cli) {
        Ok(v) => {
            if !v.is_null() {
                println!("{}", render(&v));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", render(&error_object(&e)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
