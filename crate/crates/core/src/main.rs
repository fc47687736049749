use std::path::PathBuf;
use std::process::ExitCode;

use affordance_core::cli::{self, TrainOutput};
use affordance_core::config::RunSpec;
use affordance_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Tool-affordance benchmark: synthetic data, training and reporting.
#[derive(Debug, Parser)]
#[command(name = "affordance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic dataset into the data root.
    Generate(Common),
    /// Check a manifest and the files it references.
    Validate(Common),
    /// Train one model and evaluate it on the test part.
    Train(Common),
    /// Search learning rate, batch size and first-block shape.
    Gridsearch(Common),
    /// Multi-seed runs over tasks, variants and depths.
    Benchmark(Common),
    /// Render tables and confusion heatmaps from result files.
    Report(Common),
}

/// Shared options. Each shortcut flag is equivalent to a `--set` override.
#[derive(Debug, Args)]
struct Common {
    /// TOML config file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dotted-path override such as `train.epochs=20`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// data.root
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// out_dir
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// generate.objects
    #[arg(long)]
    objects: Option<u32>,
    /// seeds, comma separated
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// jobs
    #[arg(long)]
    jobs: Option<usize>,
    /// grid.subset, e.g. `lr=1e-3,batch=32|64`
    #[arg(long)]
    subset: Option<String>,
    /// train.resume
    #[arg(long)]
    resume: Option<PathBuf>,
    /// train.dry_run
    #[arg(long)]
    dry_run: bool,
    /// report.inputs
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn toml_path(p: &std::path::Path) -> String {
    toml_str(&p.to_string_lossy())
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(p) = &self.data_root {
            o.push(format!("data.root={}", toml_path(p)));
        }
        if let Some(p) = &self.out_dir {
            o.push(format!("out_dir={}", toml_path(p)));
        }
        if let Some(n) = self.objects {
            o.push(format!("generate.objects={n}"));
        }
        if !self.seeds.is_empty() {
            let list: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            o.push(format!("seeds=[{}]", list.join(",")));
        }
        if let Some(j) = self.jobs {
            o.push(format!("jobs={j}"));
        }
        if let Some(s) = &self.subset {
            o.push(format!("grid.subset={}", toml_str(s)));
        }
        if let Some(p) = &self.resume {
            o.push(format!("train.resume={}", toml_path(p)));
        }
        if self.dry_run {
            o.push("train.dry_run=true".into());
        }
        if !self.inputs.is_empty() {
            let list: Vec<String> = self.inputs.iter().map(|p| toml_path(p)).collect();
            o.push(format!("report.inputs=[{}]", list.join(",")));
        }
        o
    }

    fn spec(&self) -> Result<RunSpec> {
        RunSpec::load(self.config.as_deref(), &self.overrides())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let out = cli::cmd_generate(&c.spec()?)?;
            let m = &out.manifest;
            let objects: std::collections::BTreeSet<u32> = m.samples.iter().map(|s| s.object_id).collect();
            println!("manifest: {}", out.manifest_path.display());
            println!("samples: {} objects: {}", m.len(), objects.len());
        }
        Command::Validate(c) => {
            let report = cli::cmd_validate(&c.spec()?)?;
            for issue in &report.issues {
                println!("issue: {issue}");
            }
            println!(
                "checked: {} issues: {}",
                report.samples_checked,
                report.issues.len()
            );
            if !report.is_clean() {
                return Err(Error::Config(format!("{} manifest issue(s)", report.issues.len())));
            }
        }
        Command::Train(c) => {
            let spec = c.spec()?;
            if spec.train.dry_run {
                print!("{}", spec.to_toml());
            }
            match cli::cmd_train(&spec)? {
                TrainOutput::DryRun { loss, parameters } => {
                    println!("dry run: parameters {parameters} loss {loss:.6}");
                }
                TrainOutput::Trained {
                    run_dir,
                    report,
                    best_epoch,
                } => {
                    println!("run: {}", run_dir.display());
                    println!(
                        "best epoch: {best_epoch} test accuracy: {:.4}",
                        report.headline()
                    );
                }
            }
        }
        Command::Gridsearch(c) => {
            let out = cli::cmd_gridsearch(&c.spec()?)?;
            println!("run: {}", out.run_dir.display());
            println!(
                "trials: {} best: lr {} batch {} kernel {} stride {}",
                out.trials,
                out.best.learning_rate,
                out.best.batch_size,
                out.best.model.first_kernel,
                out.best.model.first_stride
            );
        }
        Command::Benchmark(c) => {
            let out = cli::cmd_benchmark(&c.spec()?)?;
            println!("run: {}", out.run_dir.display());
            for r in &out.results {
                println!(
                    "{}",
                    affordance_core::eval::ReportRow::from_result(r).summary()
                );
            }
        }
        Command::Report(c) => {
            let out = cli::cmd_report(&c.spec()?)?;
            println!("run: {}", out.run_dir.display());
            println!("files: {}", out.files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
