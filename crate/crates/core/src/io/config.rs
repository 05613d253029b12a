//! Simulation configuration files.
//!
//! ```toml
//! [model]
//! kind = "two_band"          # or "spin_bath", "explicit", "file"
//! gamma1 = 1.0
//! gamma2 = 1.0
//!
//! [initial]                  # one list of [re, im] amplitudes per component
//! components = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
//!
//! [simulation]
//! dt = 1e-3
//! t_max = 5.0
//! sample_stride = 50
//! n_traj = 400
//! master_seed = 2024
//!
//! observables = ["excited_population"]   # top level, before any table
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use super::model_file::{Entry, ModelFile};
use super::ConfigError;
use crate::linalg::ComplexMatrix;
use crate::model::{build_spin_bath, build_spin_bath_two_spins, build_two_band, GeneralizedLindbladModel};
use crate::observables::ObservableSpec;
use crate::unravel::{
    ComponentWaveFunction, EpsilonMode, NonJumpPropagator, TrajectoryState, UnravelingOptions,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    observables: Vec<RawObservable>,
    model: ModelSource,
    initial: RawInitial,
    simulation: RawSimulation,
    #[serde(default)]
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ModelSource {
    TwoBand {
        gamma1: f64,
        gamma2: f64,
    },
    /// Explicit `f`, `g`, `m_values`, or none of them for two bath spins
    /// with every interior rate equal to `rate` (default 1).
    SpinBath {
        rate: Option<f64>,
        f: Option<Vec<f64>>,
        g: Option<Vec<f64>>,
        m_values: Option<Vec<i64>>,
    },
    Explicit(ModelFile),
    /// Path relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    components: Vec<Vec<[f64; 2]>>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: f64,
    t_max: f64,
    n_traj: usize,
    #[serde(default = "default_stride")]
    sample_stride: usize,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    workers: usize,
    #[serde(default)]
    exact_exponential: bool,
    #[serde(default)]
    independent_epsilon: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawObservable {
    Named(String),
    Matrix(RawMatrixObservable),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrixObservable {
    name: String,
    entries: Vec<Entry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub initial: TrajectoryState,
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub options: UnravelingOptions,
    pub observables: Vec<ObservableSpec>,
    pub output: Option<PathBuf>,
}

/// Parses a config and validates its model; any model issue is an error.
pub fn parse_config(
    text: &str,
    base_dir: Option<&Path>,
) -> Result<(SimulationConfig, GeneralizedLindbladModel), ConfigError> {
    let (config, model) = parse_config_unvalidated(text, base_dir)?;
    let report = model.validate();
    if !report.ok {
        return Err(ConfigError::semantic("model", report.issues.join("; ")));
    }
    Ok((config, model))
}

/// Parses a config, checking everything except the model's physics.
pub fn parse_config_unvalidated(
    text: &str,
    base_dir: Option<&Path>,
) -> Result<(SimulationConfig, GeneralizedLindbladModel), ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, &e))?;
    let model = build_model(raw.model, base_dir)?;
    let (m_count, d) = (model.num_components(), model.hilbert_dim());

    let sim = &raw.simulation;
    if !(sim.dt > 0.0) || !sim.dt.is_finite() {
        return Err(ConfigError::semantic("simulation.dt", format!("must be positive, got {}", sim.dt)));
    }
    if !(sim.t_max > 0.0) || !sim.t_max.is_finite() {
        return Err(ConfigError::semantic(
            "simulation.t_max",
            format!("must be positive, got {}", sim.t_max),
        ));
    }
    if sim.n_traj == 0 {
        return Err(ConfigError::semantic("simulation.n_traj", "must be at least 1"));
    }
    if sim.sample_stride == 0 {
        return Err(ConfigError::semantic("simulation.sample_stride", "must be at least 1"));
    }

    if raw.initial.components.len() != m_count {
        return Err(ConfigError::semantic(
            "initial.components",
            format!("expected {m_count} components, found {}", raw.initial.components.len()),
        ));
    }
    let mut components = Vec::with_capacity(m_count);
    for (m, amps) in raw.initial.components.iter().enumerate() {
        if amps.len() != d {
            return Err(ConfigError::semantic(
                format!("initial.components[{m}]"),
                format!("expected {d} amplitudes, found {}", amps.len()),
            ));
        }
        components.push(ComponentWaveFunction(
            amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        ));
    }
    let initial = TrajectoryState::new(components);
    let norm = initial.total_norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(ConfigError::semantic(
            "initial.components",
            format!("total squared norm must be 1, got {norm}"),
        ));
    }

    let mut observables = Vec::with_capacity(raw.observables.len());
    for (i, o) in raw.observables.into_iter().enumerate() {
        let path = format!("observables[{i}]");
        let spec = match o {
            RawObservable::Named(s) => {
                ObservableSpec::parse(&s).map_err(|e| ConfigError::semantic(&path, e.to_string()))?
            }
            RawObservable::Matrix(RawMatrixObservable { name, entries }) => {
                let triplets: Vec<_> = entries
                    .iter()
                    .map(|&(r, c, re, im)| (r, c, Complex64::new(re, im)))
                    .collect();
                let operator = ComplexMatrix::from_triplets(d, &triplets)
                    .ok_or_else(|| ConfigError::semantic(&path, "entry index out of range"))?;
                ObservableSpec::Matrix { name, operator }
            }
        };
        spec.resolve(m_count, d)
            .map_err(|e| ConfigError::semantic(&path, e.to_string()))?;
        observables.push(spec);
    }

    let options = UnravelingOptions {
        propagator: if sim.exact_exponential {
            NonJumpPropagator::Exponential
        } else {
            NonJumpPropagator::FirstOrder
        },
        epsilon_mode: if sim.independent_epsilon {
            EpsilonMode::Independent
        } else {
            EpsilonMode::Shared
        },
    };

    let config = SimulationConfig {
        initial,
        dt: sim.dt,
        t_max: sim.t_max,
        sample_stride: sim.sample_stride,
        n_traj: sim.n_traj,
        master_seed: sim.master_seed,
        workers: sim.workers,
        options,
        observables,
        output: raw.output.map(|o| match base_dir {
            Some(dir) if o.path.is_relative() => dir.join(o.path),
            _ => o.path,
        }),
    };
    Ok((config, model))
}

fn build_model(source: ModelSource, base_dir: Option<&Path>) -> Result<GeneralizedLindbladModel, ConfigError> {
    let model = match source {
        ModelSource::TwoBand { gamma1, gamma2 } => build_two_band(gamma1, gamma2)
            .map_err(|e| ConfigError::semantic("model", e.to_string()))?,
        ModelSource::SpinBath { rate, f, g, m_values } => match (f, g, m_values) {
            (None, None, None) => build_spin_bath_two_spins(rate.unwrap_or(1.0))
                .map_err(|e| ConfigError::semantic("model.rate", e.to_string()))?,
            (Some(f), Some(g), Some(m)) => {
                if rate.is_some() {
                    return Err(ConfigError::semantic("model.rate", "cannot be combined with f, g, m_values"));
                }
                build_spin_bath(&f, &g, &m).map_err(|e| ConfigError::semantic("model", e.to_string()))?
            }
            _ => {
                return Err(ConfigError::semantic(
                    "model",
                    "spin_bath needs all of f, g, m_values or none of them",
                ))
            }
        },
        ModelSource::Explicit(file) => file.to_model()?,
        ModelSource::File { path } => {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(&path),
                _ => path,
            };
            let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io {
                path: full.clone(),
                source,
            })?;
            ModelFile::parse(&text)?.to_model()?
        }
    };
    Ok(model)
}

/// Reads and parses a config file; relative paths inside it resolve against
/// the file's directory.
pub fn load_config(path: &Path) -> Result<(SimulationConfig, GeneralizedLindbladModel), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path.parent())
}
