use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nmqj::ensemble::{run_ensemble, EnsembleParams};
use nmqj::io::{
    compare_tables, density_table, emit_csv, load_config, parse_config_unvalidated, read_csv,
    write_csv_file, ConfigError, SeriesTable,
};
use nmqj::observables::Observable;
use nmqj::{rk4_integrate, DensityComponents, Unraveling};

#[derive(Parser)]
#[command(name = "nmqj", version, about = "Quantum-jump simulation of generalized Lindblad equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOverrides {
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    tmax: Option<f64>,
    /// Output CSV; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config's model and print the findings.
    Validate { config: PathBuf },
    /// Run a trajectory ensemble and write mean/stderr series.
    Jump {
        config: PathBuf,
        #[arg(long)]
        traj: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        run: RunOverrides,
    },
    /// Integrate the component equations with RK4.
    Integrate {
        config: PathBuf,
        #[command(flatten)]
        run: RunOverrides,
    },
    /// Compare two CSV outputs point by point.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        abs_tol: f64,
        #[arg(long, default_value_t = 3.0)]
        z_max: f64,
    },
}

enum Failure {
    /// Validation or comparison failed.
    Check,
    Numerical(String),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Model(inner) => inner.into(),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<nmqj::Error> for Failure {
    fn from(e: nmqj::Error) -> Self {
        if e.is_step_too_large() {
            Failure::Numerical(format!("{e}\nhint: retry with a smaller --dt (e.g. a tenth of the current value)"))
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn write_table(table: &SeriesTable, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => write_csv_file(table, path)?,
        None => emit_csv(table, std::io::stdout().lock()).map_err(|e| Failure::Other(e.to_string()))?,
    }
    Ok(())
}

fn resolve_observables(
    specs: &[nmqj::ObservableSpec],
    model: &nmqj::GeneralizedLindbladModel,
) -> Result<Vec<Observable>, Failure> {
    Ok(specs
        .iter()
        .map(|s| s.resolve(model.num_components(), model.hilbert_dim()))
        .collect::<nmqj::Result<_>>()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Other(format!("{}: {e}", config.display())))?;
            let (_, model) = parse_config_unvalidated(&text, config.parent())?;
            let report = model.validate();
            print!("{report}");
            if !report.ok {
                return Err(Failure::Check);
            }
        }
        Command::Jump { config, traj, seed, workers, run } => {
            let (mut cfg, model) = load_config(&config)?;
            cfg.dt = run.dt.unwrap_or(cfg.dt);
            cfg.t_max = run.tmax.unwrap_or(cfg.t_max);
            cfg.n_traj = traj.unwrap_or(cfg.n_traj);
            cfg.master_seed = seed.unwrap_or(cfg.master_seed);
            cfg.workers = workers.unwrap_or(cfg.workers);
            let observables = resolve_observables(&cfg.observables, &model)?;
            let unraveling = Unraveling::new(&model, cfg.dt, cfg.options)?;
            let params = EnsembleParams {
                t_max: cfg.t_max,
                n_traj: cfg.n_traj,
                master_seed: cfg.master_seed,
                sample_stride: cfg.sample_stride,
                workers: cfg.workers,
            };
            let result = run_ensemble(&unraveling, &cfg.initial, &observables, params)?;
            write_table(&SeriesTable::from(&result), run.out.as_deref().or(cfg.output.as_deref()))?;
        }
        Command::Integrate { config, run } => {
            let (mut cfg, model) = load_config(&config)?;
            cfg.dt = run.dt.unwrap_or(cfg.dt);
            cfg.t_max = run.tmax.unwrap_or(cfg.t_max);
            let observables = resolve_observables(&cfg.observables, &model)?;
            let initial = DensityComponents::from_state(&cfg.initial);
            let series = rk4_integrate(&model, &initial, cfg.dt, cfg.t_max, cfg.sample_stride)?;
            let table = density_table(&series, &observables)?;
            write_table(&table, run.out.as_deref().or(cfg.output.as_deref()))?;
        }
        Command::Compare { a, b, abs_tol, z_max } => {
            let read = |p: &Path| -> Result<SeriesTable, Failure> {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?;
                Ok(read_csv(&text)?)
            };
            let reports = compare_tables(&read(&a)?, &read(&b)?, abs_tol, z_max)?;
            let mut all_pass = true;
            for (name, r) in &reports {
                println!(
                    "{name}: {} (max |diff| = {:.3e}, max z = {:.3e}, {} of {} points outside tolerance)",
                    if r.passed { "pass" } else { "FAIL" },
                    r.max_abs_diff,
                    r.max_z,
                    r.failing.len(),
                    r.abs_diff.len()
                );
                all_pass &= r.passed;
            }
            if !all_pass {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
