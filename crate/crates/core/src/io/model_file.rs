use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::linalg::ComplexMatrix;
use crate::model::{GeneralizedLindbladModel, JumpTerm};

/// Sparse matrix entry `[row, col, re, im]`.
pub type Entry = (usize, usize, f64, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDimensions {
    pub components: usize,
    pub hilbert_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianEntry {
    pub component: usize,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpTermEntry {
    pub target: usize,
    pub source: usize,
    #[serde(default)]
    pub label: u32,
    pub entries: Vec<Entry>,
}

/// On-disk form of a [`GeneralizedLindbladModel`]. Hamiltonians that are
/// not listed are zero.
///
/// ```toml
/// [metadata]
/// name = "two_band"
///
/// [dimensions]
/// components = 2
/// hilbert_dim = 2
///
/// [[jump_terms]]
/// target = 0
/// source = 1
/// label = 0
/// entries = [[0, 1, 1.0, 0.0]]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    pub dimensions: ModelDimensions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hamiltonians: Vec<HamiltonianEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jump_terms: Vec<JumpTermEntry>,
}

fn to_entries(m: &ComplexMatrix) -> Vec<Entry> {
    m.triplets().into_iter().map(|(r, c, z)| (r, c, z.re, z.im)).collect()
}

fn to_matrix(dim: usize, entries: &[Entry], path: &str) -> Result<ComplexMatrix, ConfigError> {
    let triplets: Vec<_> = entries
        .iter()
        .map(|&(r, c, re, im)| (r, c, Complex64::new(re, im)))
        .collect();
    ComplexMatrix::from_triplets(dim, &triplets)
        .ok_or_else(|| ConfigError::semantic(path, format!("entry index outside a {dim}x{dim} matrix")))
}

impl ModelFile {
    pub fn from_model(model: &GeneralizedLindbladModel, metadata: BTreeMap<String, String>) -> Self {
        let hamiltonians = model
            .hamiltonians()
            .iter()
            .enumerate()
            .filter(|(_, h)| h.max_abs() > 0.0)
            .map(|(component, h)| HamiltonianEntry {
                component,
                entries: to_entries(h),
            })
            .collect();
        let jump_terms = model
            .jump_terms()
            .iter()
            .map(|t| JumpTermEntry {
                target: t.target,
                source: t.source,
                label: t.label,
                entries: to_entries(&t.operator),
            })
            .collect();
        Self {
            metadata,
            dimensions: ModelDimensions {
                components: model.num_components(),
                hilbert_dim: model.hilbert_dim(),
            },
            hamiltonians,
            jump_terms,
        }
    }

    /// Builds the model. Structural problems in the entries are errors here;
    /// physics checks are left to [`GeneralizedLindbladModel::validate`].
    pub fn to_model(&self) -> Result<GeneralizedLindbladModel, ConfigError> {
        let ModelDimensions { components, hilbert_dim: d } = self.dimensions;
        if components == 0 || d == 0 {
            return Err(ConfigError::semantic("dimensions", "components and hilbert_dim must be at least 1"));
        }
        let mut hamiltonians = vec![ComplexMatrix::zeros(d); components];
        for (i, h) in self.hamiltonians.iter().enumerate() {
            let path = format!("hamiltonians[{i}]");
            let slot = hamiltonians
                .get_mut(h.component)
                .ok_or_else(|| ConfigError::semantic(&path, format!("component {} out of range", h.component)))?;
            *slot = to_matrix(d, &h.entries, &path)?;
        }
        let jump_terms = self
            .jump_terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(JumpTerm {
                    target: t.target,
                    source: t.source,
                    label: t.label,
                    operator: to_matrix(d, &t.entries, &format!("jump_terms[{i}]"))?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(GeneralizedLindbladModel::new(components, d, hamiltonians, jump_terms))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::from_toml(text, &e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_spin_bath_two_spins, build_two_band};

    #[test]
    fn builtin_models_round_trip() {
        for model in [build_two_band(0.3, 2.0).unwrap(), build_spin_bath_two_spins(1.0).unwrap()] {
            let mut meta = BTreeMap::new();
            meta.insert("name".to_string(), "x".to_string());
            let text = ModelFile::from_model(&model, meta).to_toml();
            let back = ModelFile::parse(&text).unwrap().to_model().unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn integer_entries_accepted() {
        let text = "[dimensions]\ncomponents = 1\nhilbert_dim = 2\n\n[[hamiltonians]]\ncomponent = 0\nentries = [[0, 0, 1, 0], [1, 1, -1, 0]]\n";
        let model = ModelFile::parse(text).unwrap().to_model().unwrap();
        assert_eq!(model.hamiltonians()[0][(1, 1)], Complex64::new(-1.0, 0.0));
        assert!(model.validate().ok);
    }

    #[test]
    fn bad_files() {
        let unknown = "[dimensions]\ncomponents = 1\nhilbert_dim = 2\nextra = 3\n";
        assert!(matches!(ModelFile::parse(unknown), Err(ConfigError::Parse { line: 4, .. })));
        let outside = "[dimensions]\ncomponents = 1\nhilbert_dim = 2\n[[jump_terms]]\ntarget = 0\nsource = 0\nentries = [[2, 0, 1.0, 0.0]]\n";
        let err = ModelFile::parse(outside).unwrap().to_model().unwrap_err();
        assert!(err.to_string().contains("jump_terms[0]"));
    }
}
