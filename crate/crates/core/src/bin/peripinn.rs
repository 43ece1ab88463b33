use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peripinn::config::RunConfig;
use peripinn::dataset::{generate, FieldDataset};
use peripinn::error::{Error, Result};
use peripinn::eval::{evaluate, field_plot, kernel_plot};
use peripinn::nn::{Checkpoint, IPinnModel, KernelHeadKind};
use peripinn::training::{train, KernelMode, TrainOutcome};

/// Kernel identification for the 1D peridynamic wave equation.
#[derive(Parser, Debug)]
#[command(name = "peripinn", version)]
struct Cli {
    /// Configuration file with `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set training.epochs=10`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for data generation, initialization and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve the forward problem and write a dataset file.
    GenData,
    /// Train the network-kernel model.
    Train,
    /// Train the two-parameter Gaussian kernel model.
    TrainParametric,
    /// Metrics and plot tables of a checkpoint against a dataset.
    Eval,
    /// Plot tables only.
    ExportPlot,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::TrainParametric => "train-parametric",
            Command::Eval => "eval",
            Command::ExportPlot => "export-plot",
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
}

impl Run {
    fn dataset_path(&self) -> PathBuf {
        self.cfg.io_dataset.clone().unwrap_or_else(|| self.out.join("dataset.txt"))
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.cfg.io_checkpoint.clone().unwrap_or_else(|| self.out.join("checkpoint.json"))
    }

    fn echo(&self, command: Command) -> Result<()> {
        write(&self.out.join(format!("{}.config.txt", command.name())), &self.cfg.to_text())
    }

    fn gen_data(&self) -> Result<()> {
        let ds = generate(&self.cfg.dataset_spec()?)?;
        let path = self.dataset_path();
        ds.save(&path)?;
        self.echo(Command::GenData)?;
        println!("wrote {} ({} x {} samples)", path.display(), ds.grid().n_x, ds.grid().n_t);
        Ok(())
    }

    fn load_dataset(&self) -> Result<FieldDataset> {
        let ds = FieldDataset::load(&self.dataset_path())?;
        let expected = self.cfg.grid()?;
        if ds.meta.grid != expected {
            return Err(Error::config(format!(
                "dataset grid {:?} does not match the configured grid {expected:?}",
                ds.meta.grid
            )));
        }
        Ok(ds)
    }

    fn train(&mut self, command: Command) -> Result<()> {
        let ds = self.load_dataset()?;
        let head = match command {
            Command::TrainParametric => KernelHeadKind::Parametric,
            _ => KernelHeadKind::Network,
        };
        self.cfg.resolve(head, ds.meta.delta);
        self.cfg.validate()?;
        self.echo(command)?;
        let model = IPinnModel::new(self.cfg.model_config(), self.cfg.model_seed)?;
        let tc = self.cfg.train_config();
        let every = (tc.epochs / 20).max(1);
        let TrainOutcome { model, report, diverged } = train(model, &ds, KernelMode::Model, &tc, |r| {
            if r.epoch % every == 0 || r.epoch + 1 == tc.epochs {
                eprintln!(
                    "epoch {:>5}  lr {:.3e}  total {:.6e}  pde {:.4e}  data {:.4e}  sym {:.3e}  penalty {:.4e}",
                    r.epoch, r.lr, r.loss.total, r.loss.pde, r.loss.data, r.loss.sym, r.loss.penalty
                );
            }
        })?;
        Checkpoint::from_model(&model).save(&self.checkpoint_path())?;
        report.save(&self.out.join("report.txt"))?;
        eprintln!("trained {} epochs in {:.1} s", report.records.len(), report.wall_time_s);
        if let Some((g, s)) = model.parametric_kernel() {
            println!("gamma_star = {g}");
            println!("sigma_star = {s}");
        }
        match diverged {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn load_model(&self) -> Result<IPinnModel> {
        Checkpoint::load(&self.checkpoint_path())?.to_model()
    }

    fn eval(&self, command: Command) -> Result<()> {
        let ds = FieldDataset::load(&self.dataset_path())?;
        let model = self.load_model()?;
        self.echo(command)?;
        let truth = ds.meta.kernel.clone();
        write(&self.out.join("kernel_plot.txt"), &kernel_plot(&model, truth.as_ref(), &ds)?)?;
        write(&self.out.join("field_plot.txt"), &field_plot(&model, &ds)?)?;
        if command == Command::Eval {
            let text = evaluate(&model, truth.as_ref(), &ds)?.to_text();
            write(&self.out.join("metrics.txt"), &text)?;
            print!("{text}");
        }
        Ok(())
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PERIPINN_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::config(format!("PERIPINN_THREADS must be an integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for a in &cli.overrides {
        cfg.set_assignment(a)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::io(&cli.out_dir, e))?;
    let mut run = Run { cfg, out: cli.out_dir };
    match cli.command {
        Command::GenData => run.gen_data(),
        c @ (Command::Train | Command::TrainParametric) => run.train(c),
        c @ (Command::Eval | Command::ExportPlot) => run.eval(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
