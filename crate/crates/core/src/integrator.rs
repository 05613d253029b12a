//! Deterministic reference: fixed-step RK4 on the coupled component
//! equations, and the closed-form two-band solution for a lower-band start.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, I};
use crate::model::GeneralizedLindbladModel;
use crate::unravel::TrajectoryState;

/// Tolerance on Hermiticity and on the most negative eigenvalue of each ρ_m.
pub const DENSITY_TOL: f64 = 1e-10;
/// Allowed deviation of Σ_m Tr ρ_m from 1 along an RK4 run.
pub const TRACE_TOL: f64 = 1e-6;

/// The M non-normalized component density matrices ρ_m.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityComponents(pub Vec<ComplexMatrix>);

impl DensityComponents {
    pub fn zeros(num_components: usize, dim: usize) -> Self {
        Self(vec![ComplexMatrix::zeros(dim); num_components])
    }

    /// ρ_m = |ψ_m⟩⟨ψ_m|.
    pub fn from_state(state: &TrajectoryState) -> Self {
        Self(
            state
                .components
                .iter()
                .map(|psi| ComplexMatrix::outer(&psi.0, &psi.0))
                .collect(),
        )
    }

    pub fn num_components(&self) -> usize {
        self.0.len()
    }

    pub fn total_trace(&self) -> f64 {
        self.0.iter().map(|r| r.trace().re).sum()
    }

    /// `self + h·other`, componentwise.
    pub fn axpy(&self, h: f64, other: &Self) -> Self {
        let h = Complex64::new(h, 0.0);
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + &b.scale(h))
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Hermiticity, positivity and unit total trace.
    pub fn check_invariants(&self, time: f64) -> Result<()> {
        for (m, rho) in self.0.iter().enumerate() {
            let defect = rho.hermiticity_defect();
            if defect > DENSITY_TOL {
                return Err(Error::InvariantBreach {
                    time,
                    what: format!("component {m} not Hermitian (defect {defect:e})"),
                });
            }
            let min_ev = rho.hermitian_eigenvalues().first().copied().unwrap_or(0.0);
            if min_ev < -DENSITY_TOL {
                return Err(Error::InvariantBreach {
                    time,
                    what: format!("component {m} has negative eigenvalue {min_ev:e}"),
                });
            }
        }
        let tr = self.total_trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvariantBreach {
                time,
                what: format!("total trace {tr} differs from 1"),
            });
        }
        Ok(())
    }
}

/// ρ = Σ_m ρ_m.
pub fn reduce_density(components: &DensityComponents) -> ComplexMatrix {
    let dim = components.0.first().map_or(0, ComplexMatrix::dim);
    let mut out = ComplexMatrix::zeros(dim);
    for rho in &components.0 {
        out += rho;
    }
    out
}

fn check_shape(model: &GeneralizedLindbladModel, components: &DensityComponents) -> Result<()> {
    if components.0.len() != model.num_components() {
        return Err(Error::DimensionMismatch {
            expected: model.num_components(),
            found: components.0.len(),
        });
    }
    for rho in &components.0 {
        if rho.dim() != model.hilbert_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.hilbert_dim(),
                found: rho.dim(),
            });
        }
    }
    Ok(())
}

/// Right-hand side of the component equations, term by term:
/// −i[H_m, ρ_m] + Σ R_mn ρ_n R_mn† − ½{Σ R_nm† R_nm, ρ_m}.
pub fn master_rhs(
    model: &GeneralizedLindbladModel,
    components: &DensityComponents,
) -> Result<DensityComponents> {
    check_shape(model, components)?;
    let d = model.hilbert_dim();
    let half = Complex64::new(0.5, 0.0);
    let mut out = Vec::with_capacity(model.num_components());
    for (m, rho) in components.0.iter().enumerate() {
        let h = &model.hamiltonians()[m];
        let mut drho = (&(h * rho) - &(rho * h)).scale(-I);
        for t in model.incoming(m) {
            drho += &(&(&t.operator * &components.0[t.source]) * &t.operator.adjoint());
        }
        let mut loss = ComplexMatrix::zeros(d);
        for t in model.outgoing(m) {
            loss += &(&t.operator.adjoint() * &t.operator);
        }
        let anti = &(&loss * rho) + &(rho * &loss);
        drho = &drho - &anti.scale(half);
        out.push(drho);
    }
    Ok(DensityComponents(out))
}

/// Sampled RK4 output: `states[i]` at `times[i]`.
#[derive(Clone, Debug)]
pub struct DensitySeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityComponents>,
}

/// Number of whole steps covering `t_max`.
pub fn step_count(dt: f64, t_max: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    let n = (t_max / dt).round();
    if n < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "t_max = {t_max} is shorter than one step dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Classic fixed-step RK4, sampled at step 0 and every `sample_stride` steps.
/// Each sample is checked against the density invariants.
pub fn rk4_integrate(
    model: &GeneralizedLindbladModel,
    initial: &DensityComponents,
    dt: f64,
    t_max: f64,
    sample_stride: usize,
) -> Result<DensitySeries> {
    let steps = step_count(dt, t_max)?;
    let stride = sample_stride.max(1);
    check_shape(model, initial)?;
    let mut rho = initial.clone();
    let mut series = DensitySeries {
        times: Vec::with_capacity(steps / stride + 1),
        states: Vec::with_capacity(steps / stride + 1),
    };
    rho.check_invariants(0.0)?;
    series.times.push(0.0);
    series.states.push(rho.clone());
    for k in 1..=steps {
        let k1 = master_rhs(model, &rho)?;
        let k2 = master_rhs(model, &rho.axpy(0.5 * dt, &k1))?;
        let k3 = master_rhs(model, &rho.axpy(0.5 * dt, &k2))?;
        let k4 = master_rhs(model, &rho.axpy(dt, &k3))?;
        let sixth = dt / 6.0;
        rho = rho
            .axpy(sixth, &k1)
            .axpy(2.0 * sixth, &k2)
            .axpy(2.0 * sixth, &k3)
            .axpy(sixth, &k4);
        if k % stride == 0 {
            let t = k as f64 * dt;
            rho.check_invariants(t)?;
            series.times.push(t);
            series.states.push(rho.clone());
        }
    }
    Ok(series)
}

/// Two-band model started in the lower band only: component 0 holds the pure
/// state a|e⟩ + b|g⟩ and component 1 is empty.
///
/// The excited population of component 0 relaxes towards γ₁|a|²/(γ₁+γ₂) at
/// rate γ₁+γ₂, the lost weight appearing as |g⟩ in component 1, while the
/// coherence of component 0 decays as a b* e^{−γ₂t/2}.
pub fn closed_form_two_band(
    gamma1: f64,
    gamma2: f64,
    a: Complex64,
    b: Complex64,
    t: f64,
) -> DensityComponents {
    let s = a.norm_sqr();
    let total = gamma1 + gamma2;
    let excited = if total > 0.0 {
        s * (gamma1 + gamma2 * (-total * t).exp()) / total
    } else {
        s
    };
    let coherence = a * b.conj() * (-0.5 * gamma2 * t).exp();

    let mut lower = ComplexMatrix::zeros(2);
    lower[(0, 0)] = Complex64::new(excited, 0.0);
    lower[(0, 1)] = coherence;
    lower[(1, 0)] = coherence.conj();
    lower[(1, 1)] = Complex64::new(b.norm_sqr(), 0.0);

    let mut upper = ComplexMatrix::zeros(2);
    upper[(1, 1)] = Complex64::new(s - excited, 0.0);
    DensityComponents(vec![lower, upper])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{qubit, ONE, ZERO};
    use crate::model::{build_spin_bath_two_spins, build_two_band};

    fn projector(v: &[Complex64], w: f64) -> ComplexMatrix {
        ComplexMatrix::outer(v, v).scale(Complex64::new(w, 0.0))
    }

    #[test]
    fn zero_model_has_zero_rhs() {
        let model = build_two_band(0.0, 0.0).unwrap();
        let rho = DensityComponents(vec![projector(&qubit::excited(), 0.5), projector(&qubit::ground(), 0.5)]);
        let d = master_rhs(&model, &rho).unwrap();
        assert_eq!(d.0.iter().map(ComplexMatrix::max_abs).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn two_band_rhs_from_excited() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let rho = DensityComponents(vec![projector(&qubit::excited(), 1.0), ComplexMatrix::zeros(2)]);
        let d = master_rhs(&model, &rho).unwrap();
        assert!(d.0[0].max_abs_diff(&projector(&qubit::excited(), -1.0)) < 1e-15);
        assert!(d.0[1].max_abs_diff(&projector(&qubit::ground(), 1.0)) < 1e-15);
    }

    #[test]
    fn rhs_shape_errors() {
        let model = build_two_band(1.0, 1.0).unwrap();
        assert!(master_rhs(&model, &DensityComponents::zeros(3, 2)).is_err());
        assert!(master_rhs(&model, &DensityComponents::zeros(2, 3)).is_err());
    }

    #[test]
    fn closed_form_values() {
        let f = closed_form_two_band(1.0, 1.0, ONE, ZERO, 1.0);
        let ee = reduce_density(&f)[(0, 0)].re;
        assert!((ee - 0.5 * (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((ee - 0.56767).abs() < 5e-6);
        let f0 = closed_form_two_band(1.0, 1.0, ONE, ZERO, 0.0);
        assert_eq!(reduce_density(&f0)[(0, 0)].re, 1.0);
        let late = closed_form_two_band(1.0, 1.0, ONE, ZERO, 40.0);
        assert!((reduce_density(&late)[(0, 0)].re - 0.5).abs() < 1e-15);

        let h = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        for t in [0.0, 0.5, 2.0] {
            let f = closed_form_two_band(1.0, 1.0, h, h, t);
            let eg = reduce_density(&f)[(0, 1)];
            assert!((eg.norm() - 0.5 * (-t / 2.0).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn rk4_matches_closed_form() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let h = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        for (a, b) in [(ONE, ZERO), (h, h), (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))] {
            let init = closed_form_two_band(1.0, 1.0, a, b, 0.0);
            let series = rk4_integrate(&model, &init, 1e-3, 5.0, 100).unwrap();
            for (t, rho) in series.times.iter().zip(&series.states) {
                let exact = closed_form_two_band(1.0, 1.0, a, b, *t);
                assert!(rho.max_abs_diff(&exact) < 1e-8, "t={t}");
            }
        }
    }

    #[test]
    fn rk4_fourth_order() {
        let model = build_two_band(1.0, 2.0).unwrap();
        let init = closed_form_two_band(1.0, 2.0, ONE, ZERO, 0.0);
        let exact = closed_form_two_band(1.0, 2.0, ONE, ZERO, 2.0);
        let err = |dt: f64| {
            let s = rk4_integrate(&model, &init, dt, 2.0, usize::MAX).unwrap();
            assert_eq!(s.times.len(), 1);
            let last = rk4_integrate(&model, &init, dt, 2.0, (2.0 / dt).round() as usize).unwrap();
            last.states.last().unwrap().max_abs_diff(&exact)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_model_is_static() {
        let model = build_two_band(0.0, 0.0).unwrap();
        let init = DensityComponents(vec![projector(&qubit::excited(), 0.25), projector(&qubit::ground(), 0.75)]);
        let s = rk4_integrate(&model, &init, 0.01, 1.0, 10).unwrap();
        assert_eq!(s.times.len(), 11);
        assert!(s.states.iter().all(|r| *r == init));
    }

    #[test]
    fn spin_bath_trace_conserved() {
        let model = build_spin_bath_two_spins(1.0).unwrap();
        let third = projector(&qubit::excited(), 1.0 / 3.0);
        let init = DensityComponents(vec![third.clone(), third.clone(), third]);
        let s = rk4_integrate(&model, &init, 1e-3, 5.0, 50).unwrap();
        for rho in &s.states {
            assert!((rho.total_trace() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn invariant_breach_reported() {
        let bad = DensityComponents(vec![projector(&qubit::excited(), 2.0)]);
        assert!(matches!(bad.check_invariants(0.0), Err(Error::InvariantBreach { .. })));
        let neg = DensityComponents(vec![
            projector(&qubit::excited(), 1.5),
            projector(&qubit::ground(), -0.5),
        ]);
        assert!(neg.check_invariants(1.0).is_err());
    }

    #[test]
    fn reduce_examples() {
        let a = DensityComponents(vec![projector(&qubit::excited(), 0.5), projector(&qubit::ground(), 0.5)]);
        assert!(reduce_density(&a).max_abs_diff(&ComplexMatrix::identity(2).scale(0.5.into())) < 1e-15);
        let single = DensityComponents(vec![projector(&qubit::excited(), 1.0)]);
        assert_eq!(reduce_density(&single), single.0[0]);
        let third = projector(&qubit::excited(), 1.0 / 3.0);
        let sb = DensityComponents(vec![third.clone(), third.clone(), third]);
        assert!(reduce_density(&sb).max_abs_diff(&projector(&qubit::excited(), 1.0)) < 1e-15);
    }

    #[test]
    fn step_count_rules() {
        assert_eq!(step_count(1e-3, 5.0).unwrap(), 5000);
        assert!(matches!(step_count(0.0, 1.0), Err(Error::NonPositiveStep(_))));
        assert!(step_count(1.0, 0.1).is_err());
        assert!(step_count(1.0, -1.0).is_err());
    }
}
