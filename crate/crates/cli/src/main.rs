//! `oscnet`: simulate oscillator chains, fit difference-step networks to
//! them and reproduce the published result tables.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use oscnet::io::write_trajectories;
use oscnet::Padding;

use config::{ExperimentConfig, Observed, Overrides};
use run::Outputs;

#[derive(Parser, Debug)]
#[command(
    name = "oscnet",
    version,
    about = "Physical-parameter learning for damped oscillator chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the simulated trajectories of an experiment as CSV.
    Simulate(Common),
    /// Fit the step coefficients and write a JSON report per run.
    Train(Common),
    /// Fit, then free-forecast the continuation of the training window.
    Forecast(Common),
    /// Fit a partially observed chain and write the reconstructed hidden trajectory.
    Map(Common),
    /// Run one table (or all of them) with acceptance checks.
    Reproduce(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "table")]
    config: Option<PathBuf>,
    /// Built-in experiment for a result table.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=8))]
    table: Option<u8>,
    /// Every built-in table (reproduce only).
    #[arg(long, conflicts_with_all = ["config", "table"])]
    all: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-map the hidden oscillator at every forecast step.
    #[arg(long)]
    ifl: bool,
    #[arg(long, value_parser = parse_padding)]
    padding: Option<Padding>,
    /// Mapping kernel length: 1 (shared stencils) or an odd width such as 25.
    #[arg(long)]
    kernel: Option<usize>,
    /// Accuracy order of the finite-difference stencils.
    #[arg(long)]
    stencil_order: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_padding(s: &str) -> Result<Padding, String> {
    s.parse().map_err(|e: oscnet::Error| e.to_string())
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            ifl: self.ifl,
            padding: self.padding,
            kernel: self.kernel,
            stencil_order: self.stencil_order,
            seed: self.seed,
        }
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, self.table) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(t)) => {
                ExperimentConfig::from_toml(config::builtin(t)?).with_context(|| format!("built-in table {t}"))?
            }
            (None, None) => bail!("pass --config <path> or --table <1..8>"),
        };
        config.apply(&self.overrides())?;
        Ok(config)
    }
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Fits every run and writes the selected artifacts.
fn fit_command(args: &Common, outputs: Outputs) -> Result<ExitCode> {
    let config = args.load()?;
    let dir = config.output_dir(args.out.as_deref());
    prepare(&dir)?;
    let data = run::simulate(&config)?;
    if outputs.forecast && !outputs.mapping {
        ensure!(
            config.n_forecast > 0,
            "{} has n_forecast = 0; nothing to forecast",
            config.name
        );
    }
    if outputs.mapping {
        ensure!(
            config.observed == Observed::First,
            "map needs a partially observed experiment (observed = \"first\")"
        );
    }
    for r in config.runs() {
        let out = run::fit_run(&config, &data, &r)?;
        let heading = if r.label.is_empty() {
            config.name.clone()
        } else {
            format!("{} {}", config.name, r.label)
        };
        print!("{}", run::summary_table(&out, &heading));
        if outputs.forecast && config.n_forecast > 0 && out.forecast.is_none() {
            let why = out
                .mapping
                .as_ref()
                .and_then(|m| m.note.clone())
                .unwrap_or_else(|| "no forecast".into());
            bail!("forecast failed for {heading}: {why}");
        }
        for p in run::write_run(&dir, &data, &out, outputs)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate_command(args: &Common) -> Result<ExitCode> {
    let config = args.load()?;
    let dir = config.output_dir(args.out.as_deref());
    prepare(&dir)?;
    let data = run::simulate(&config)?;
    let path = dir.join("trajectory.csv");
    write_trajectories(&path, &data.channels)?;
    println!(
        "wrote {} ({} samples, {} channel(s))",
        path.display(),
        data.channels[0].len(),
        data.channels.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn reproduce_command(args: &Common) -> Result<ExitCode> {
    let configs: Vec<ExperimentConfig> = if args.all {
        (1..=8)
            .map(|t| {
                let mut c = ExperimentConfig::from_toml(config::builtin(t)?)?;
                c.apply(&args.overrides())?;
                Ok(c)
            })
            .collect::<Result<_>>()?
    } else {
        vec![args.load()?]
    };
    let dirs: Vec<PathBuf> = configs
        .iter()
        .map(|c| match (&args.out, args.all) {
            (Some(out), true) => out.join(&c.name),
            (out, _) => c.output_dir(out.as_deref()),
        })
        .collect();
    let results: Vec<Result<run::Reproduction>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .zip(&dirs)
            .map(|(c, d)| s.spawn(move || run::reproduce(c, d)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| bail!("reproduction thread panicked")))
            .collect()
    });
    let mut all_passed = true;
    let mut first_error = None;
    for (c, r) in configs.iter().zip(results) {
        match r {
            Ok(r) => {
                println!("{}", r.text);
                all_passed &= r.passed();
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", c.name);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are runtime errors here; 2 is reserved for failed checks.
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Reproduce(args) => reproduce_command(args),
        Command::Simulate(args) | Command::Train(args) | Command::Forecast(args) | Command::Map(args) if args.all => {
            Err(anyhow::anyhow!("--all is only available for reproduce"))
        }
        Command::Simulate(args) => simulate_command(args),
        Command::Train(args) => fit_command(
            args,
            Outputs {
                report: true,
                forecast: false,
                mapping: false,
            },
        ),
        Command::Forecast(args) => fit_command(
            args,
            Outputs {
                report: false,
                forecast: true,
                mapping: false,
            },
        ),
        Command::Map(args) => fit_command(
            args,
            Outputs {
                report: false,
                forecast: true,
                mapping: true,
            },
        ),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
