//! Stochastic unraveling of the generalized Lindblad equation.
//!
//! A trajectory carries one non-normalized wave function per component. In
//! each step every component `m` collects the candidate outcomes
//!
//! ```text
//! jump from n via λ:  R_mn^λ |ψ_n⟩    weight  w = ‖R_mn^λ ψ_n‖² dt
//! non-jump:           W⁰_m |ψ_m⟩      weight  w = ‖W⁰_m ψ_m‖²,  W⁰_m = I − i𝓗_m dt
//! ```
//!
//! The component weight is `p_m = Σ w`, the outcome probabilities are `w/p_m`,
//! and the chosen outcome is rescaled to squared norm `p_m`. All outcomes use
//! the pre-step states, and a single uniform number picks the outcome of every
//! component (unless [`EpsilonMode::Independent`] is set).
//!
//! Outcomes are partitioned in the order (source ascending, label ascending),
//! non-jump last. Outcomes of zero weight are skipped so a selected branch
//! never has a vanishing norm.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrator::{step_count, DensityComponents};
use crate::linalg::{norm_sqr, ComplexMatrix, I, ZERO};
use crate::model::GeneralizedLindbladModel;
use crate::observables::{Observable, TimeSeries};

/// Largest fraction of a source component's weight one jump channel may
/// take in a single step.
pub const MAX_JUMP_FRACTION: f64 = 0.5;

/// Non-normalized amplitudes of one component; ‖ψ‖² = Tr ρ_m.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentWaveFunction(pub Vec<Complex64>);

impl ComponentWaveFunction {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![ZERO; dim])
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub time: f64,
    pub components: Vec<ComponentWaveFunction>,
}

impl TrajectoryState {
    pub fn new(components: Vec<ComponentWaveFunction>) -> Self {
        Self {
            time: 0.0,
            components,
        }
    }

    pub fn total_norm_sqr(&self) -> f64 {
        self.components.iter().map(ComponentWaveFunction::norm_sqr).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NonJumpPropagator {
    /// W⁰ = I − i𝓗 dt.
    #[default]
    FirstOrder,
    /// W⁰ = exp(−i𝓗 dt).
    Exponential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EpsilonMode {
    /// One uniform number per step drives every component.
    #[default]
    Shared,
    /// One uniform number per component per step. Single-component
    /// statistics are unchanged; cross-component correlations are not.
    Independent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnravelingOptions {
    pub propagator: NonJumpPropagator,
    pub epsilon_mode: EpsilonMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpProbability {
    pub source: usize,
    pub label: u32,
    pub probability: f64,
}

/// Outcome probabilities for one target component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentProbabilities {
    /// p_m, the squared norm this component will carry after the step.
    pub weight: f64,
    pub jumps: Vec<JumpProbability>,
    pub non_jump: f64,
}

impl ComponentProbabilities {
    pub fn total(&self) -> f64 {
        self.jumps.iter().map(|j| j.probability).sum::<f64>() + self.non_jump
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepProbabilities {
    pub components: Vec<ComponentProbabilities>,
}

/// Which outcome a component took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Index into the model's jump terms.
    Jump(usize),
    NonJump,
    /// Zero weight: the component stays empty.
    Empty,
}

/// Reusable buffers for [`Unraveling::advance_into`].
#[derive(Clone, Debug)]
pub struct StepScratch {
    /// Candidate vectors per outcome for the current target; non-jump last.
    vectors: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
    drain: Vec<f64>,
    outcomes: Vec<Outcome>,
}

/// A model prepared for stepping at a fixed `dt`.
#[derive(Clone, Debug)]
pub struct Unraveling<'a> {
    model: &'a GeneralizedLindbladModel,
    dt: f64,
    options: UnravelingOptions,
    non_jump: Vec<ComplexMatrix>,
    /// Indices into `model.jump_terms()` feeding each target, in partition order.
    incoming: Vec<Vec<usize>>,
}

impl<'a> Unraveling<'a> {
    pub fn new(model: &'a GeneralizedLindbladModel, dt: f64, options: UnravelingOptions) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositiveStep(dt));
        }
        model.validate().into_result()?;
        let d = model.hilbert_dim();
        let mut non_jump = Vec::with_capacity(model.num_components());
        for m in 0..model.num_components() {
            let step = model.effective_hamiltonian(m)?.scale(-I * dt);
            non_jump.push(match options.propagator {
                NonJumpPropagator::FirstOrder => &ComplexMatrix::identity(d) + &step,
                NonJumpPropagator::Exponential => step.expm(),
            });
        }
        // jump_terms() is sorted by (target, source, label).
        let mut incoming = vec![Vec::new(); model.num_components()];
        for (i, t) in model.jump_terms().iter().enumerate() {
            incoming[t.target].push(i);
        }
        Ok(Self {
            model,
            dt,
            options,
            non_jump,
            incoming,
        })
    }

    pub fn model(&self) -> &GeneralizedLindbladModel {
        self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn options(&self) -> UnravelingOptions {
        self.options
    }

    pub fn non_jump_operator(&self, m: usize) -> &ComplexMatrix {
        &self.non_jump[m]
    }

    pub fn scratch(&self) -> StepScratch {
        let d = self.model.hilbert_dim();
        let widest = self.incoming.iter().map(Vec::len).max().unwrap_or(0) + 1;
        StepScratch {
            vectors: vec![vec![ZERO; d]; widest],
            weights: vec![0.0; widest],
            drain: vec![0.0; self.model.num_components()],
            outcomes: vec![Outcome::Empty; self.model.num_components()],
        }
    }

    fn check_state(&self, state: &TrajectoryState) -> Result<()> {
        if state.components.len() != self.model.num_components() {
            return Err(Error::DimensionMismatch {
                expected: self.model.num_components(),
                found: state.components.len(),
            });
        }
        for psi in &state.components {
            if psi.dim() != self.model.hilbert_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.model.hilbert_dim(),
                    found: psi.dim(),
                });
            }
        }
        Ok(())
    }

    /// Fills `scratch.vectors`/`scratch.weights` with the candidate outcomes
    /// of target `m` and returns `p_m`. Accumulates per-source drain and
    /// enforces the per-channel step guard.
    fn candidates(&self, state: &TrajectoryState, m: usize, scratch: &mut StepScratch) -> Result<f64> {
        let terms = self.model.jump_terms();
        let mut weight = 0.0;
        for (k, &ti) in self.incoming[m].iter().enumerate() {
            let term = &terms[ti];
            let source = &state.components[term.source].0;
            term.operator.apply_into(source, &mut scratch.vectors[k]);
            let w = norm_sqr(&scratch.vectors[k]) * self.dt;
            let source_weight = norm_sqr(source);
            if source_weight > 0.0 && w > MAX_JUMP_FRACTION * source_weight {
                return Err(Error::StepTooLarge {
                    time: state.time,
                    detail: format!(
                        "jump {} -> {} (label {}) would take {:.3} of the source weight in one step",
                        term.source,
                        term.target,
                        term.label,
                        w / source_weight
                    ),
                });
            }
            scratch.drain[term.source] += w;
            scratch.weights[k] = w;
            weight += w;
        }
        let k = self.incoming[m].len();
        self.non_jump[m].apply_into(&state.components[m].0, &mut scratch.vectors[k]);
        let w0 = norm_sqr(&scratch.vectors[k]);
        scratch.weights[k] = w0;
        Ok(weight + w0)
    }

    /// The first-order non-jump probability 1 − Σ drain/‖ψ_n‖² must stay
    /// nonnegative for every source.
    fn check_drain(&self, state: &TrajectoryState, scratch: &StepScratch) -> Result<()> {
        for (n, &drained) in scratch.drain.iter().enumerate() {
            let w = state.components[n].norm_sqr();
            if w > 0.0 && drained > w {
                return Err(Error::StepTooLarge {
                    time: state.time,
                    detail: format!(
                        "component {n} would lose {:.3} of its weight in one step",
                        drained / w
                    ),
                });
            }
        }
        Ok(())
    }

    /// Outcome probabilities for every target component.
    pub fn step_probabilities(&self, state: &TrajectoryState) -> Result<StepProbabilities> {
        self.check_state(state)?;
        let mut scratch = self.scratch();
        let terms = self.model.jump_terms();
        let mut components = Vec::with_capacity(self.model.num_components());
        for m in 0..self.model.num_components() {
            let p = self.candidates(state, m, &mut scratch)?;
            let norm = |w: f64| if p > 0.0 { w / p } else { 0.0 };
            let jumps = self.incoming[m]
                .iter()
                .enumerate()
                .map(|(k, &ti)| JumpProbability {
                    source: terms[ti].source,
                    label: terms[ti].label,
                    probability: norm(scratch.weights[k]),
                })
                .collect();
            components.push(ComponentProbabilities {
                weight: p,
                jumps,
                non_jump: norm(scratch.weights[self.incoming[m].len()]),
            });
        }
        self.check_drain(state, &scratch)?;
        Ok(StepProbabilities { components })
    }

    fn component_weight(&self, state: &TrajectoryState, m: usize) -> Result<(f64, StepScratch)> {
        self.check_state(state)?;
        if m >= self.model.num_components() {
            return Err(Error::IndexOutOfRange {
                index: m,
                count: self.model.num_components(),
            });
        }
        let mut scratch = self.scratch();
        let p = self.candidates(state, m, &mut scratch)?;
        Ok((p, scratch))
    }

    /// The jump outcome `R_mn^λ ψ_n` rescaled to squared norm `p_m`.
    pub fn apply_jump(
        &self,
        state: &TrajectoryState,
        target: usize,
        source: usize,
        label: u32,
    ) -> Result<ComponentWaveFunction> {
        let (p, scratch) = self.component_weight(state, target)?;
        let terms = self.model.jump_terms();
        let k = self.incoming[target]
            .iter()
            .position(|&ti| terms[ti].source == source && terms[ti].label == label)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no jump term with target {target}, source {source}, label {label}"
                ))
            })?;
        if scratch.weights[k] == 0.0 {
            return Err(Error::ZeroNormJump {
                target,
                source_component: source,
                label,
            });
        }
        Ok(ComponentWaveFunction(rescaled(&scratch.vectors[k], p)))
    }

    /// The non-jump outcome `W⁰_m ψ_m` rescaled to squared norm `p_m`;
    /// the zero vector when `W⁰_m ψ_m` vanishes.
    pub fn apply_non_jump(&self, state: &TrajectoryState, m: usize) -> Result<ComponentWaveFunction> {
        let (p, scratch) = self.component_weight(state, m)?;
        let k = self.incoming[m].len();
        if scratch.weights[k] == 0.0 {
            return Ok(ComponentWaveFunction::zeros(self.model.hilbert_dim()));
        }
        Ok(ComponentWaveFunction(rescaled(&scratch.vectors[k], p)))
    }

    /// One step with a shared uniform number `epsilon` in [0, 1).
    pub fn advance(&self, state: &TrajectoryState, epsilon: f64) -> Result<TrajectoryState> {
        let eps = vec![epsilon; self.model.num_components()];
        let mut out = state.clone();
        let mut scratch = self.scratch();
        self.advance_into(state, &eps, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// One step with a uniform number per component, written into `out`.
    /// Returns the outcome each component took (valid until the next call).
    pub fn advance_into<'s>(
        &self,
        state: &TrajectoryState,
        epsilons: &[f64],
        out: &mut TrajectoryState,
        scratch: &'s mut StepScratch,
    ) -> Result<&'s [Outcome]> {
        self.check_state(state)?;
        debug_assert_eq!(epsilons.len(), self.model.num_components());
        scratch.drain.iter_mut().for_each(|d| *d = 0.0);
        out.components.resize_with(state.components.len(), || {
            ComponentWaveFunction::zeros(self.model.hilbert_dim())
        });
        for m in 0..self.model.num_components() {
            let p = self.candidates(state, m, scratch)?;
            let slot = &mut out.components[m].0;
            let n_out = self.incoming[m].len() + 1;
            match select(&scratch.weights[..n_out], p, epsilons[m]) {
                None => {
                    slot.iter_mut().for_each(|z| *z = ZERO);
                    scratch.outcomes[m] = Outcome::Empty;
                }
                Some(k) => {
                    let v = &scratch.vectors[k];
                    let scale = (p / norm_sqr(v)).sqrt();
                    for (o, x) in slot.iter_mut().zip(v) {
                        *o = x * scale;
                    }
                    scratch.outcomes[m] = if k + 1 == n_out {
                        Outcome::NonJump
                    } else {
                        Outcome::Jump(self.incoming[m][k])
                    };
                }
            }
        }
        self.check_drain(state, scratch)?;
        out.time = state.time + self.dt;
        Ok(&scratch.outcomes)
    }

    /// Sums every outcome weighted by its probability, giving the component
    /// density matrices one step ahead.
    pub fn enumerate_single_step(&self, state: &TrajectoryState) -> Result<DensityComponents> {
        self.check_state(state)?;
        let mut scratch = self.scratch();
        let d = self.model.hilbert_dim();
        let mut out = Vec::with_capacity(self.model.num_components());
        for m in 0..self.model.num_components() {
            let p = self.candidates(state, m, &mut scratch)?;
            let mut rho = ComplexMatrix::zeros(d);
            if p > 0.0 {
                for k in 0..=self.incoming[m].len() {
                    let w = scratch.weights[k];
                    if w == 0.0 {
                        continue;
                    }
                    let psi = rescaled(&scratch.vectors[k], p);
                    rho += &ComplexMatrix::outer(&psi, &psi).scale(Complex64::new(w / p, 0.0));
                }
            }
            out.push(rho);
        }
        self.check_drain(state, &scratch)?;
        Ok(DensityComponents(out))
    }

    /// Runs one trajectory for `t_max`, recording the observables at step 0
    /// and every `sample_stride` steps.
    pub fn run_trajectory(
        &self,
        initial: &TrajectoryState,
        t_max: f64,
        seed: u64,
        observables: &[Observable],
        sample_stride: usize,
    ) -> Result<TimeSeries> {
        let total = initial.total_norm_sqr();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "initial components must have total squared norm 1, got {total}"
            )));
        }
        self.check_state(initial)?;
        let steps = step_count(self.dt, t_max)?;
        let stride = sample_stride.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m_count = self.model.num_components();
        let mut eps = vec![0.0; m_count];
        let mut scratch = self.scratch();
        let mut current = initial.clone();
        current.time = 0.0;
        let mut next = current.clone();
        let mut series = TimeSeries::new(observables.iter().map(|o| o.name.clone()).collect());
        let mut row = vec![0.0; observables.len()];

        let mut record = |state: &TrajectoryState, series: &mut TimeSeries| -> Result<()> {
            for (v, o) in row.iter_mut().zip(observables) {
                *v = o.eval_wavefunction(state)?;
            }
            series.push(state.time, &row);
            Ok(())
        };
        record(&current, &mut series)?;
        for k in 1..=steps {
            match self.options.epsilon_mode {
                EpsilonMode::Shared => {
                    let e: f64 = rng.random();
                    eps.iter_mut().for_each(|x| *x = e);
                }
                EpsilonMode::Independent => eps.iter_mut().for_each(|x| *x = rng.random()),
            }
            self.advance_into(&current, &eps, &mut next, &mut scratch)?;
            // Keep the clock on the k·dt grid shared with the integrator.
            next.time = k as f64 * self.dt;
            std::mem::swap(&mut current, &mut next);
            if k % stride == 0 {
                record(&current, &mut series)?;
            }
        }
        Ok(series)
    }
}

/// Index of the outcome selected by `eps` in the cumulative partition of
/// `weights / p`, skipping zero-weight outcomes. `None` when `p` is zero.
fn select(weights: &[f64], p: f64, eps: f64) -> Option<usize> {
    if !(p > 0.0) {
        return None;
    }
    let mut cumulative = 0.0;
    let mut last = None;
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        cumulative += w / p;
        last = Some(k);
        if eps < cumulative {
            return last;
        }
    }
    // Rounding can leave the partition a hair short of 1.
    last
}

fn rescaled(v: &[Complex64], target_norm_sqr: f64) -> Vec<Complex64> {
    let n = norm_sqr(v);
    let s = (target_norm_sqr / n).sqrt();
    v.iter().map(|x| x * s).collect()
}

/// Convenience wrappers mirroring the methods of [`Unraveling`] with the
/// default options.
pub fn step_probabilities(
    state: &TrajectoryState,
    model: &GeneralizedLindbladModel,
    dt: f64,
) -> Result<StepProbabilities> {
    Unraveling::new(model, dt, UnravelingOptions::default())?.step_probabilities(state)
}

pub fn advance(
    state: &TrajectoryState,
    model: &GeneralizedLindbladModel,
    dt: f64,
    epsilon: f64,
) -> Result<TrajectoryState> {
    Unraveling::new(model, dt, UnravelingOptions::default())?.advance(state, epsilon)
}

pub fn enumerate_single_step(
    state: &TrajectoryState,
    model: &GeneralizedLindbladModel,
    dt: f64,
) -> Result<DensityComponents> {
    Unraveling::new(model, dt, UnravelingOptions::default())?.enumerate_single_step(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::master_rhs;
    use crate::linalg::{qubit, ONE};
    use crate::model::{build_spin_bath_two_spins, build_two_band, JumpTerm};

    fn state(components: Vec<Vec<Complex64>>) -> TrajectoryState {
        TrajectoryState::new(components.into_iter().map(ComponentWaveFunction).collect())
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn zero2() -> Vec<Complex64> {
        vec![ZERO, ZERO]
    }

    #[test]
    fn excited_lower_band_step() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let s = state(vec![qubit::excited(), zero2()]);
        let probs = step_probabilities(&s, &model, 0.01).unwrap();
        let upper = &probs.components[1];
        assert!((upper.weight - 0.01).abs() < 1e-15);
        assert_eq!(upper.jumps.len(), 1);
        assert_eq!(upper.jumps[0].source, 0);
        assert!((upper.jumps[0].probability - 1.0).abs() < 1e-15);
        assert_eq!(upper.non_jump, 0.0);
        // Component 0 only keeps its own non-jump branch: p_0 = (1 − dt/2)².
        let lower = &probs.components[0];
        assert!((lower.weight - 0.995f64.powi(2)).abs() < 1e-15);
        assert_eq!(lower.non_jump, 1.0);
    }

    #[test]
    fn superposition_lower_band_weight() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let h = c(1.0 / 2f64.sqrt());
        let s = state(vec![vec![h, h], zero2()]);
        let dt = 0.01;
        let probs = step_probabilities(&s, &model, dt).unwrap();
        // ‖(I − (dt/2)|e⟩⟨e|) ψ‖² = ((1 − dt/2)² + 1)/2 = 1 − dt/2 + dt²/8.
        let expected = 1.0 - dt / 2.0 + dt * dt / 8.0;
        assert!((probs.components[0].weight - expected).abs() < 1e-15);
        assert_eq!(probs.components[0].jumps[0].probability, 0.0);
        assert!((probs.components[0].total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_model_only_non_jump() {
        let model = build_two_band(0.0, 0.0).unwrap();
        let s = state(vec![vec![c(0.6), ZERO], vec![ZERO, c(0.8)]]);
        let probs = step_probabilities(&s, &model, 0.1).unwrap();
        for cp in &probs.components {
            assert_eq!(cp.non_jump, 1.0);
            assert!(cp.jumps.iter().all(|j| j.probability == 0.0));
        }
        let next = advance(&s, &model, 0.1, 0.3).unwrap();
        assert_eq!(next.components, s.components);
        assert!((next.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn jump_into_empty_component() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let s = state(vec![qubit::excited(), zero2()]);
        let un = Unraveling::new(&model, 0.01, UnravelingOptions::default()).unwrap();
        let psi = un.apply_jump(&s, 1, 0, 0).unwrap();
        assert!((psi.0[0]).norm() < 1e-16);
        assert!((psi.0[1] - c(0.1)).norm() < 1e-15);
        // The reverse channel has no amplitude.
        assert!(matches!(un.apply_jump(&s, 0, 1, 0), Err(Error::ZeroNormJump { .. })));
        assert!(un.apply_jump(&s, 0, 0, 0).is_err());
        for eps in [0.0, 0.5, 0.999_999] {
            let next = un.advance(&s, eps).unwrap();
            assert!((next.components[1].0[1] - c(0.1)).norm() < 1e-15);
            assert!((next.components[0].0[0] - c(0.995)).norm() < 1e-15);
        }
    }

    #[test]
    fn jump_normalisation_full_weight() {
        // M = 1 with R = σ⁻ acting on |e⟩ normalized: p = 1 + dt²/4, so the
        // selected state carries exactly that norm.
        let model = GeneralizedLindbladModel::new(
            1,
            2,
            vec![ComplexMatrix::zeros(2)],
            vec![JumpTerm { target: 0, source: 0, label: 0, operator: qubit::sigma_minus() }],
        );
        let dt = 0.01;
        let un = Unraveling::new(&model, dt, UnravelingOptions::default()).unwrap();
        let s = state(vec![qubit::excited()]);
        let psi = un.apply_jump(&s, 0, 0, 0).unwrap();
        let p = 1.0 + dt * dt / 4.0;
        assert!((psi.norm_sqr() - p).abs() < 1e-15);
        assert!(psi.0[0].norm() == 0.0);
    }

    #[test]
    fn spin_bath_jump_direction() {
        let model = build_spin_bath_two_spins(1.0).unwrap();
        let a = c(1.0 / 3f64.sqrt());
        let s = state(vec![vec![a, ZERO], vec![a, ZERO], vec![a, ZERO]]);
        let un = Unraveling::new(&model, 1e-3, UnravelingOptions::default()).unwrap();
        // Label 1 (index 0) → label 0 (index 1) through σ⁺ acting on |e⟩ vanishes;
        // label 0 (index 1) → label 1 (index 0) through σ⁻ gives |g⟩.
        let psi = un.apply_jump(&s, 0, 1, 0).unwrap();
        assert_eq!(psi.0[0], ZERO);
        assert!(psi.0[1].re > 0.0);
        let probs = un.step_probabilities(&s).unwrap();
        for cp in &probs.components {
            assert!((cp.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_upper_band_decays() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let dt = 0.01;
        let un = Unraveling::new(&model, dt, UnravelingOptions::default()).unwrap();
        let s = state(vec![zero2(), qubit::ground()]);
        let psi = un.apply_non_jump(&s, 1).unwrap();
        assert!((psi.0[1] - c(1.0 - dt / 2.0)).norm() < 1e-15);
        let probs = un.step_probabilities(&s).unwrap();
        assert!((probs.components[1].weight - (1.0 - dt / 2.0).powi(2)).abs() < 1e-15);
        // Component 0 is refilled from the upper band with weight γ₁ dt.
        assert!((probs.components[0].weight - dt).abs() < 1e-15);
        // An empty component with no inflow stays empty.
        let empty = state(vec![zero2(), qubit::ground()]);
        let model0 = build_two_band(0.0, 1.0).unwrap();
        let un0 = Unraveling::new(&model0, dt, UnravelingOptions::default()).unwrap();
        assert_eq!(un0.apply_non_jump(&empty, 0).unwrap(), ComponentWaveFunction::zeros(2));
        let next = un0.advance(&empty, 0.5).unwrap();
        assert_eq!(next.components[0], ComponentWaveFunction::zeros(2));
    }

    #[test]
    fn large_epsilon_takes_non_jump_everywhere() {
        let model = build_spin_bath_two_spins(1.0).unwrap();
        let a = c(1.0 / 3f64.sqrt());
        let g = c(0.0);
        let s = state(vec![vec![a, g], vec![g, a], vec![a, g]]);
        let un = Unraveling::new(&model, 1e-3, UnravelingOptions::default()).unwrap();
        let probs = un.step_probabilities(&s).unwrap();
        for cp in &probs.components {
            let jumps: f64 = cp.jumps.iter().map(|j| j.probability).sum();
            assert!(jumps < 0.9);
        }
        let mut out = s.clone();
        let mut scratch = un.scratch();
        let outcomes = un.advance_into(&s, &[0.999; 3], &mut out, &mut scratch).unwrap();
        assert!(outcomes.iter().all(|o| *o == Outcome::NonJump));
    }

    #[test]
    fn step_guard() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let s = state(vec![qubit::excited(), zero2()]);
        assert!(matches!(step_probabilities(&s, &model, 0.6), Err(Error::StepTooLarge { .. })));
        assert!(matches!(step_probabilities(&s, &model, 0.0), Err(Error::NonPositiveStep(_))));
        assert!(step_probabilities(&s, &model, 0.4).is_ok());
    }

    #[test]
    fn enumeration_trace_matches_weight() {
        let model = build_spin_bath_two_spins(1.0).unwrap();
        let s = state(vec![
            vec![c(0.3), Complex64::new(0.1, 0.2)],
            vec![Complex64::new(0.0, 0.5), c(0.4)],
            vec![c(0.2), Complex64::new(-0.3, 0.1)],
        ]);
        let un = Unraveling::new(&model, 1e-3, UnravelingOptions::default()).unwrap();
        let rho = un.enumerate_single_step(&s).unwrap();
        let probs = un.step_probabilities(&s).unwrap();
        for (r, cp) in rho.0.iter().zip(&probs.components) {
            assert!((r.trace().re - cp.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_matches_euler_step() {
        let model = build_two_band(1.0, 0.5).unwrap();
        let s = state(vec![vec![c(0.6), Complex64::new(0.0, 0.48)], vec![c(0.3), c(0.56)]]);
        let rho = DensityComponents::from_state(&s);
        let err = |dt: f64| {
            let e = enumerate_single_step(&s, &model, dt).unwrap();
            let euler = rho.axpy(dt, &master_rhs(&model, &rho).unwrap());
            e.max_abs_diff(&euler)
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        assert!(enumerate_single_step(&s, &build_two_band(0.0, 0.0).unwrap(), 0.1)
            .unwrap()
            .max_abs_diff(&rho)
            < 1e-15);
    }

    #[test]
    fn exponential_propagator_option() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let opts = UnravelingOptions { propagator: NonJumpPropagator::Exponential, ..Default::default() };
        let un = Unraveling::new(&model, 0.1, opts).unwrap();
        let w = un.non_jump_operator(0);
        assert!((w[(0, 0)] - c((-0.05f64).exp())).norm() < 1e-14);
        assert!((w[(1, 1)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn selection_partition() {
        assert_eq!(select(&[0.2, 0.0, 0.8], 1.0, 0.1), Some(0));
        assert_eq!(select(&[0.2, 0.0, 0.8], 1.0, 0.2), Some(2));
        assert_eq!(select(&[0.2, 0.0, 0.8], 1.0, 0.999_999_999_999), Some(2));
        assert_eq!(select(&[0.5, 0.0], 1.0, 0.7), Some(0));
        assert_eq!(select(&[0.0, 0.0], 0.0, 0.1), None);
    }

    #[test]
    fn run_trajectory_zero_model_constant() {
        let model = build_two_band(0.0, 0.0).unwrap();
        let un = Unraveling::new(&model, 0.01, UnravelingOptions::default()).unwrap();
        let obs = [crate::observables::ObservableSpec::parse("excited_population")
            .unwrap()
            .resolve(2, 2)
            .unwrap()];
        let s = state(vec![vec![c(0.6), ZERO], vec![ZERO, c(0.8)]]);
        let series = un.run_trajectory(&s, 1.0, 7, &obs, 10).unwrap();
        assert_eq!(series.len(), 11);
        assert!(series.is_well_formed());
        assert!(series.values[0].iter().all(|&v| (v - 0.36).abs() < 1e-15));
        assert!((series.times[10] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn run_trajectory_rejects_unnormalised_start() {
        let model = build_two_band(1.0, 1.0).unwrap();
        let un = Unraveling::new(&model, 0.01, UnravelingOptions::default()).unwrap();
        let s = state(vec![vec![c(0.5), ZERO], zero2()]);
        assert!(un.run_trajectory(&s, 1.0, 0, &[], 1).is_err());
    }

    #[test]
    fn invalid_model_rejected() {
        let model = GeneralizedLindbladModel::new(1, 2, vec![qubit::sigma_plus()], vec![]);
        assert!(matches!(
            Unraveling::new(&model, 0.1, UnravelingOptions::default()),
            Err(Error::InvalidModel(_))
        ));
    }
}
