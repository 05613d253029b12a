//! Generalized Lindblad models: M coupled components ρ_m of a d-level system,
//!
//! ```text
//! dρ_m/dt = −i[H_m, ρ_m] + Σ_{nλ} ( R_mn^λ ρ_n R_mn^λ† − ½{R_nm^λ† R_nm^λ, ρ_m} )
//! ```
//!
//! A [`JumpTerm`] stores one `R_mn^λ` with `target = m` and `source = n`: it
//! moves weight out of component `n` and into component `m`.
//!
//! Two-level models use |e⟩ = index 0 and |g⟩ = index 1, so σ⁺ = |e⟩⟨g| and
//! σ⁻ = |g⟩⟨e| (see [`crate::linalg::qubit`]).

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{qubit, ComplexMatrix, I};

/// Max-abs tolerance on `H − H†`.
pub const HERMITICITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct JumpTerm {
    pub target: usize,
    pub source: usize,
    /// Distinguishes several operators sharing the same `(target, source)`.
    pub label: u32,
    pub operator: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedLindbladModel {
    num_components: usize,
    hilbert_dim: usize,
    hamiltonians: Vec<ComplexMatrix>,
    jump_terms: Vec<JumpTerm>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<String>,
}

impl ValidationReport {
    fn from_issues(issues: Vec<String>) -> Self {
        Self {
            ok: issues.is_empty(),
            issues,
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(self.issues))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return writeln!(f, "ok");
        }
        writeln!(f, "{} issue(s):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

impl GeneralizedLindbladModel {
    /// Assembles a model without checking it; call [`validate`](Self::validate)
    /// before simulating. Jump terms are kept in `(target, source, label)` order.
    pub fn new(
        num_components: usize,
        hilbert_dim: usize,
        hamiltonians: Vec<ComplexMatrix>,
        mut jump_terms: Vec<JumpTerm>,
    ) -> Self {
        jump_terms.sort_by_key(|t| (t.target, t.source, t.label));
        Self {
            num_components,
            hilbert_dim,
            hamiltonians,
            jump_terms,
        }
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn hamiltonians(&self) -> &[ComplexMatrix] {
        &self.hamiltonians
    }

    pub fn jump_terms(&self) -> &[JumpTerm] {
        &self.jump_terms
    }

    /// Terms feeding component `m`, ordered by source then label.
    pub fn incoming(&self, m: usize) -> impl Iterator<Item = &JumpTerm> {
        self.jump_terms.iter().filter(move |t| t.target == m)
    }

    /// Terms draining component `n`.
    pub fn outgoing(&self, n: usize) -> impl Iterator<Item = &JumpTerm> {
        self.jump_terms.iter().filter(move |t| t.source == n)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let (m_count, d) = (self.num_components, self.hilbert_dim);
        if m_count == 0 {
            issues.push("model must have at least one component".to_string());
        }
        if d == 0 {
            issues.push("hilbert dimension must be at least 1".to_string());
        }
        if self.hamiltonians.len() != m_count {
            issues.push(format!(
                "expected {m_count} hamiltonians, found {}",
                self.hamiltonians.len()
            ));
        }
        for (m, h) in self.hamiltonians.iter().enumerate() {
            if h.dim() != d {
                issues.push(format!("hamiltonian {m}: dimension mismatch ({} != {d})", h.dim()));
            } else if !h.is_finite() {
                issues.push(format!("hamiltonian {m}: non-finite entry"));
            } else if !h.is_hermitian(HERMITICITY_TOL) {
                issues.push(format!(
                    "hamiltonian {m} not Hermitian (max |H - H^dag| = {:e})",
                    h.hermiticity_defect()
                ));
            }
        }
        let mut seen = HashSet::new();
        for t in &self.jump_terms {
            let tag = format!("jump term (target={}, source={}, label={})", t.target, t.source, t.label);
            if t.target >= m_count || t.source >= m_count {
                issues.push(format!("{tag}: component index out of range (M = {m_count})"));
            }
            if !seen.insert((t.target, t.source, t.label)) {
                issues.push(format!("{tag}: duplicate"));
            }
            if t.operator.dim() != d {
                issues.push(format!(
                    "{tag}: dimension mismatch ({} != {d})",
                    t.operator.dim()
                ));
            } else if !t.operator.is_finite() {
                issues.push(format!("{tag}: non-finite entry"));
            }
        }
        if issues.is_empty() {
            self.check_trace_preservation(&mut issues);
        }
        ValidationReport::from_issues(issues)
    }

    /// The loss operator recovered from the anti-Hermitian part of 𝓗_n must
    /// equal the total gain that component `n` hands to its targets.
    fn check_trace_preservation(&self, issues: &mut Vec<String>) {
        let d = self.hilbert_dim;
        for n in 0..self.num_components {
            let mut gain = ComplexMatrix::zeros(d);
            for m in 0..self.num_components {
                for t in self.incoming(m).filter(|t| t.source == n) {
                    gain += &(&t.operator.adjoint() * &t.operator);
                }
            }
            let heff = self.effective_hamiltonian_unchecked(n);
            let h = &self.hamiltonians[n];
            let anti = &(&heff - &heff.adjoint()) - &(h - &h.adjoint());
            let loss = anti.scale(I);
            let scale = gain.max_abs().max(1.0);
            let defect = loss.max_abs_diff(&gain);
            if defect > 1e-12 * scale {
                issues.push(format!(
                    "generator not trace-preserving for component {n} (defect {defect:e})"
                ));
            }
        }
    }

    /// Σ_{mλ} R_mn^λ† R_mn^λ over the terms whose source is `n`.
    pub fn loss_operator(&self, n: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.hilbert_dim);
        for t in self.outgoing(n) {
            acc += &(&t.operator.adjoint() * &t.operator);
        }
        acc
    }

    /// 𝓗_m = H_m − (i/2) Σ_{nλ} R_nm^λ† R_nm^λ.
    pub fn effective_hamiltonian(&self, m: usize) -> Result<ComplexMatrix> {
        if m >= self.num_components {
            return Err(Error::IndexOutOfRange {
                index: m,
                count: self.num_components,
            });
        }
        Ok(self.effective_hamiltonian_unchecked(m))
    }

    fn effective_hamiltonian_unchecked(&self, m: usize) -> ComplexMatrix {
        let half_i = Complex64::new(0.0, 0.5);
        &self.hamiltonians[m] - &self.loss_operator(m).scale(half_i)
    }

    /// Jump operators per component including the non-jump one, taken as the
    /// largest count over all components.
    pub fn operators_per_component(&self) -> usize {
        let incoming = (0..self.num_components)
            .map(|m| self.incoming(m).count())
            .max()
            .unwrap_or(0);
        incoming + 1
    }

    /// Number of generalized jump modes for this model.
    pub fn jump_mode_count(&self) -> usize {
        jump_mode_count(self.num_components, self.operators_per_component())
    }

    /// Largest entrywise difference to another model; `INFINITY` when the
    /// shapes or the set of `(target, source, label)` keys differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.num_components != other.num_components
            || self.hilbert_dim != other.hilbert_dim
            || self.hamiltonians.len() != other.hamiltonians.len()
            || self.jump_terms.len() != other.jump_terms.len()
        {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.hamiltonians.iter().zip(&other.hamiltonians) {
            worst = worst.max(a.max_abs_diff(b));
        }
        for (a, b) in self.jump_terms.iter().zip(&other.jump_terms) {
            if (a.target, a.source, a.label) != (b.target, b.source, b.label) {
                return f64::INFINITY;
            }
            worst = worst.max(a.operator.max_abs_diff(&b.operator));
        }
        worst
    }
}

fn check_rate(what: &str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::NegativeRate {
            what: what.to_string(),
            value,
        });
    }
    Ok(())
}

/// Qubit coupled to a two-band environment.
///
/// Component 0 is the lower band and component 1 the upper band. The upper
/// band feeds the lower one through `√γ₁ σ⁺`; the lower feeds the upper
/// through `√γ₂ σ⁻`. Both Hamiltonians vanish.
pub fn build_two_band(gamma1: f64, gamma2: f64) -> Result<GeneralizedLindbladModel> {
    check_rate("gamma1", gamma1)?;
    check_rate("gamma2", gamma2)?;
    let terms = vec![
        JumpTerm {
            target: 0,
            source: 1,
            label: 0,
            operator: qubit::sigma_plus().scale(gamma1.sqrt().into()),
        },
        JumpTerm {
            target: 1,
            source: 0,
            label: 0,
            operator: qubit::sigma_minus().scale(gamma2.sqrt().into()),
        },
    ];
    Ok(GeneralizedLindbladModel::new(
        2,
        2,
        vec![ComplexMatrix::zeros(2), ComplexMatrix::zeros(2)],
        terms,
    ))
}

/// Central spin coupled to a spin bath, one component per bath angular
/// momentum projection `m_values[i]`.
///
/// Component `m` passes weight to `m+1` through `√f_m σ⁻` and to `m−1`
/// through `√g_m σ⁺`. `f` at the largest label and `g` at the smallest label
/// have no target component and must be zero. The labels must be consecutive
/// integers, listed in either ascending or descending order.
pub fn build_spin_bath(f: &[f64], g: &[f64], m_values: &[i64]) -> Result<GeneralizedLindbladModel> {
    let count = m_values.len();
    if count == 0 {
        return Err(Error::InvalidArgument("spin bath needs at least one component".into()));
    }
    if f.len() != count || g.len() != count {
        return Err(Error::InvalidArgument(format!(
            "rate lists must match the {count} component labels (f: {}, g: {})",
            f.len(),
            g.len()
        )));
    }
    if count > 1 {
        let step = m_values[1] - m_values[0];
        if step.abs() != 1 || m_values.windows(2).any(|w| w[1] - w[0] != step) {
            return Err(Error::InvalidArgument(
                "component labels must be consecutive integers".into(),
            ));
        }
    }
    for (i, (&fi, &gi)) in f.iter().zip(g).enumerate() {
        check_rate(&format!("f[{i}]"), fi)?;
        check_rate(&format!("g[{i}]"), gi)?;
    }
    let position = |label: i64| m_values.iter().position(|&v| v == label);
    let top = position(*m_values.iter().max().unwrap()).unwrap();
    let bottom = position(*m_values.iter().min().unwrap()).unwrap();
    if f[top] != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "f at the top label m = {} must be zero, got {}",
            m_values[top], f[top]
        )));
    }
    if g[bottom] != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "g at the bottom label m = {} must be zero, got {}",
            m_values[bottom], g[bottom]
        )));
    }

    let mut terms = Vec::new();
    for (source, &m) in m_values.iter().enumerate() {
        if let Some(up) = position(m + 1) {
            terms.push(JumpTerm {
                target: up,
                source,
                label: 0,
                operator: qubit::sigma_minus().scale(f[source].sqrt().into()),
            });
        }
        if let Some(down) = position(m - 1) {
            terms.push(JumpTerm {
                target: down,
                source,
                label: 0,
                operator: qubit::sigma_plus().scale(g[source].sqrt().into()),
            });
        }
    }
    Ok(GeneralizedLindbladModel::new(
        count,
        2,
        vec![ComplexMatrix::zeros(2); count],
        terms,
    ))
}

/// Two bath spins: labels (1, 0, −1) with every interior rate equal to `rate`.
pub fn build_spin_bath_two_spins(rate: f64) -> Result<GeneralizedLindbladModel> {
    build_spin_bath(&[0.0, rate, rate], &[rate, rate, 0.0], &[1, 0, -1])
}

/// γ = 2πλ²N / δε.
pub fn gamma_from_microscopic(lambda: f64, n_levels: u64, delta_eps: f64) -> Result<f64> {
    if !(delta_eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "band width must be positive, got {delta_eps}"
        )));
    }
    if n_levels == 0 {
        return Err(Error::InvalidArgument("level count must be at least 1".into()));
    }
    Ok(2.0 * std::f64::consts::PI * lambda * lambda * n_levels as f64 / delta_eps)
}

/// M(J − 1) + 1 generalized jump modes for `m` components with `j` operators
/// each (the non-jump operator included).
pub fn jump_mode_count(m: usize, j: usize) -> usize {
    debug_assert!(m >= 1 && j >= 1);
    m * j.saturating_sub(1) + 1
}
