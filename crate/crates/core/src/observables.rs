//! Observables evaluated on either representation of the state.
//!
//! On a trajectory the expectation is Σ_m ⟨ψ_m|A|ψ_m⟩ over the
//! non-normalized component wave functions; on density components it is
//! Tr(A Σ_m ρ_m). The two agree whenever ρ_m = |ψ_m⟩⟨ψ_m|.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::DensityComponents;
use crate::linalg::{norm_sqr, ComplexMatrix, ONE};
use crate::model::HERMITICITY_TOL;
use crate::unravel::TrajectoryState;

/// Largest imaginary part tolerated before an expectation is rejected.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    ExcitedPopulation,
    GroundPopulation,
    CoherenceRe,
    CoherenceIm,
    SigmaZ,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::ExcitedPopulation => "excited_population",
            Preset::GroundPopulation => "ground_population",
            Preset::CoherenceRe => "coherence_re",
            Preset::CoherenceIm => "coherence_im",
            Preset::SigmaZ => "sigma_z",
        }
    }

    /// The operator whose expectation yields the preset, with |e⟩ = 0, |g⟩ = 1.
    pub fn operator(self, dim: usize) -> Result<ComplexMatrix> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "observable {} needs at least two levels",
                self.name()
            )));
        }
        let mut a = ComplexMatrix::zeros(dim);
        match self {
            Preset::ExcitedPopulation => a[(0, 0)] = ONE,
            Preset::GroundPopulation => a[(1, 1)] = ONE,
            // Tr(ρ A) = Re ρ_eg
            Preset::CoherenceRe => {
                a[(0, 1)] = Complex64::new(0.5, 0.0);
                a[(1, 0)] = Complex64::new(0.5, 0.0);
            }
            // Tr(ρ A) = Im ρ_eg
            Preset::CoherenceIm => {
                a[(0, 1)] = Complex64::new(0.0, 0.5);
                a[(1, 0)] = Complex64::new(0.0, -0.5);
            }
            Preset::SigmaZ => {
                a[(0, 0)] = ONE;
                a[(1, 1)] = -ONE;
            }
        }
        Ok(a)
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Preset::ExcitedPopulation,
            Preset::GroundPopulation,
            Preset::CoherenceRe,
            Preset::CoherenceIm,
            Preset::SigmaZ,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    Preset(Preset),
    /// Squared norm of one component, i.e. Tr ρ_m.
    ComponentWeight(usize),
    Matrix { name: String, operator: ComplexMatrix },
}

impl ObservableSpec {
    /// Parses a preset name or `component_weight(m)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = Preset::parse(s) {
            return Ok(Self::Preset(p));
        }
        if let Some(arg) = s
            .strip_prefix("component_weight(")
            .and_then(|rest| rest.strip_suffix(')'))
        {
            let m = arg.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("bad component index in observable {s:?}"))
            })?;
            return Ok(Self::ComponentWeight(m));
        }
        Err(Error::InvalidArgument(format!("unknown observable {s:?}")))
    }

    pub fn name(&self) -> String {
        match self {
            Self::Preset(p) => p.name().to_string(),
            Self::ComponentWeight(m) => format!("component_weight_{m}"),
            Self::Matrix { name, .. } => name.clone(),
        }
    }

    /// Checks the observable against a model's shape and fixes its operator.
    pub fn resolve(&self, num_components: usize, dim: usize) -> Result<Observable> {
        let kind = match self {
            Self::Preset(p) => ObservableKind::Operator(p.operator(dim)?),
            Self::ComponentWeight(m) => {
                if *m >= num_components {
                    return Err(Error::IndexOutOfRange {
                        index: *m,
                        count: num_components,
                    });
                }
                ObservableKind::ComponentWeight(*m)
            }
            Self::Matrix { name, operator } => {
                if operator.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: operator.dim(),
                    });
                }
                if !operator.is_hermitian(HERMITICITY_TOL) {
                    return Err(Error::InvalidArgument(format!(
                        "observable {name:?} is not Hermitian"
                    )));
                }
                ObservableKind::Operator(operator.clone())
            }
        };
        Ok(Observable {
            name: self.name(),
            kind,
        })
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug)]
pub enum ObservableKind {
    Operator(ComplexMatrix),
    ComponentWeight(usize),
}

/// An observable bound to a model shape.
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
}

impl Observable {
    pub fn eval_wavefunction(&self, state: &TrajectoryState) -> Result<f64> {
        match &self.kind {
            ObservableKind::Operator(a) => expectation_wavefunction(state, a),
            ObservableKind::ComponentWeight(m) => Ok(state.components[*m].norm_sqr()),
        }
    }

    pub fn eval_density(&self, components: &DensityComponents) -> Result<f64> {
        match &self.kind {
            ObservableKind::Operator(a) => expectation_density(components, a),
            ObservableKind::ComponentWeight(m) => Ok(components.0[*m].trace().re),
        }
    }
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAGINARY_RESIDUE_TOL {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// Σ_m ⟨ψ_m|A|ψ_m⟩.
pub fn expectation_wavefunction(state: &TrajectoryState, a: &ComplexMatrix) -> Result<f64> {
    let mut total = Complex64::new(0.0, 0.0);
    for psi in &state.components {
        if psi.0.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: psi.0.len(),
            });
        }
        total += a.expectation(&psi.0);
    }
    real_part(total)
}

/// Tr(A Σ_m ρ_m).
pub fn expectation_density(components: &DensityComponents, a: &ComplexMatrix) -> Result<f64> {
    let mut total = Complex64::new(0.0, 0.0);
    for rho in &components.0 {
        if rho.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: rho.dim(),
            });
        }
        total += (a * rho).trace();
    }
    real_part(total)
}

/// Observable values on a time grid. `values[k][i]` is observable `k` at `times[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(names: Vec<String>) -> Self {
        let values = vec![Vec::new(); names.len()];
        Self {
            times: Vec::new(),
            names,
            values,
        }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.names.len());
        self.times.push(t);
        for (col, &v) in self.values.iter_mut().zip(row) {
            col.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(&self.values[k])
    }

    /// Grid strictly increasing and every column as long as the grid.
    pub fn is_well_formed(&self) -> bool {
        self.times.windows(2).all(|w| w[0] < w[1])
            && self.values.len() == self.names.len()
            && self.values.iter().all(|v| v.len() == self.times.len())
    }
}

/// Total squared norm of the trajectory, Σ_m ‖ψ_m‖².
pub fn total_weight(state: &TrajectoryState) -> f64 {
    state.components.iter().map(|c| norm_sqr(&c.0)).sum()
}
