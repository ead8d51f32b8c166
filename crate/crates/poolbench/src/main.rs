use std::path::PathBuf;
use std::process;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use poolbench::config::ExperimentConfig;
use poolbench::error::{CliError, ExitCode, Result};
use poolbench::{gradcheck, lr_sweep, params_report, report, sweep};
use poolbench_core::Method;

/// Pooling-method benchmark on a synthetic image task.
#[derive(Parser)]
#[command(name = "poolbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (method, seed) pair and write per-run reports plus summary.csv.
    Sweep(Common),
    /// Compare analytic pooling gradients against central finite differences.
    Gradcheck(Common),
    /// Percentile tables of trained pooling parameters found in --out.
    ParamsReport(Common),
    /// Short runs over a list of learning rates for one method.
    LrSweep(Common),
}

#[derive(Args)]
struct Common {
    /// Comma-separated method names, e.g. MP,AP,SMP.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Learning rate; a comma-separated list for lr-sweep.
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random points per method for gradcheck.
    #[arg(long)]
    trials: Option<String>,
    /// Largest relative error gradcheck accepts.
    #[arg(long)]
    tolerance: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("methods", &self.methods),
            ("seeds", &self.seeds),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("batch_size", &self.batch_size),
            ("trials", &self.trials),
            ("tolerance", &self.tolerance),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let reports = sweep::run_sweep(cfg)?;
    sweep::write_sweep(&cfg.out, &reports)?;
    println!("{:<6} {:>15} {:>15}", "method", "train_acc", "test_acc");
    for r in report::summarize(&reports) {
        println!(
            "{:<6} {:>7.4} ± {:<5.4} {:>7.4} ± {:<5.4}",
            r.method, r.mean_train_acc, r.sd_train_acc, r.mean_test_acc, r.sd_test_acc
        );
    }
    let diverged: Vec<_> = reports.iter().filter(|r| r.diverged()).collect();
    for r in &diverged {
        let why = r.aborted.as_ref().map(|a| a.reason.as_str()).unwrap_or("");
        eprintln!("diverged: {} seed {}: {why}", r.method, r.seed);
    }
    println!("{} runs written to {}", reports.len(), cfg.out.display());
    Ok(if diverged.is_empty() { ExitCode::Success } else { ExitCode::Diverged })
}

fn cmd_gradcheck(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let methods = cfg.methods_or(&Method::ALL);
    let rows = gradcheck::run_gradcheck(&methods, cfg.trials, cfg.tolerance, cfg.seeds[0])?;
    print!("{}", gradcheck::format_table(&rows, cfg.tolerance));
    Ok(if rows.iter().all(|r| r.passed) { ExitCode::Success } else { ExitCode::GradcheckFailed })
}

fn cmd_params_report(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let files = params_report::load_dir(&cfg.out, cfg.methods.as_deref())?;
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no params_*.json reports in {}; run `poolbench sweep` first",
            cfg.out.display()
        )));
    }
    let rep = params_report::build(&files)?;
    params_report::write(&cfg.out, &rep)?;
    print!("{}", params_report::format_table(&rep));
    Ok(if files.iter().any(|f| f.aborted.is_some()) { ExitCode::Diverged } else { ExitCode::Success })
}

fn cmd_lr_sweep(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let s = lr_sweep::run_lr_sweep(cfg)?;
    print!("{}", lr_sweep::format_table(&s));
    Ok(if s.rows.iter().all(|r| r.final_train_loss.is_some()) { ExitCode::Success } else { ExitCode::Diverged })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep(c) => cmd_sweep(&c.resolve()?),
        Command::Gradcheck(c) => cmd_gradcheck(&c.resolve()?),
        Command::ParamsReport(c) => cmd_params_report(&c.resolve()?),
        Command::LrSweep(c) => cmd_lr_sweep(&c.resolve()?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::Success,
                _ => ExitCode::Usage,
            };
            process::exit(code as i32);
        }
    };
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("poolbench: {e}");
        e.exit_code()
    });
    process::exit(code as i32);
}
