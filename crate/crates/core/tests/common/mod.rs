#![allow(dead_code)]

use nmqj::linalg::ComplexMatrix;
use nmqj::{ComponentWaveFunction, GeneralizedLindbladModel, JumpTerm, TrajectoryState};
use num_complex::Complex64;
use proptest::prelude::*;

pub fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

pub fn matrix(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(complex(), d * d).prop_map(move |v| {
        let entries: Vec<_> = v
            .into_iter()
            .enumerate()
            .map(|(k, z)| (k / d, k % d, z))
            .collect();
        ComplexMatrix::from_triplets(d, &entries).unwrap()
    })
}

pub fn hermitian(d: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(d).prop_map(|a| (&a + &a.adjoint()).scale(Complex64::new(0.5, 0.0)))
}

/// Random valid model with M ≤ 3, d ≤ 3 and at most two labels per pair.
pub fn model() -> impl Strategy<Value = GeneralizedLindbladModel> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(m, d)| {
        let hams = prop::collection::vec(hermitian(d), m);
        let terms = prop::collection::vec(
            (0..m, 0..m, 0u32..2, matrix(d)),
            0..=(2 * m * m),
        );
        (Just(m), Just(d), hams, terms).prop_map(|(m, d, hams, terms)| {
            let mut seen = std::collections::HashSet::new();
            let terms: Vec<_> = terms
                .into_iter()
                .filter(|(t, s, l, _)| seen.insert((*t, *s, *l)))
                .map(|(target, source, label, operator)| JumpTerm { target, source, label, operator })
                .collect();
            GeneralizedLindbladModel::new(m, d, hams, terms)
        })
    })
}

/// Random pure components with total squared norm 1; some may be empty.
pub fn state(m: usize, d: usize) -> impl Strategy<Value = TrajectoryState> {
    prop::collection::vec((prop::collection::vec(complex(), d), prop::bool::weighted(0.8)), m).prop_map(
        |comps| {
            let mut comps: Vec<Vec<Complex64>> = comps
                .into_iter()
                .map(|(v, keep)| if keep { v } else { vec![Complex64::new(0.0, 0.0); v.len()] })
                .collect();
            let total: f64 = comps.iter().flatten().map(|z| z.norm_sqr()).sum();
            if total < 1e-6 {
                comps[0][0] = Complex64::new(1.0, 0.0);
            } else {
                let s = total.sqrt();
                comps.iter_mut().flatten().for_each(|z| *z /= s);
            }
            TrajectoryState::new(comps.into_iter().map(ComponentWaveFunction).collect())
        },
    )
}

pub fn model_and_state() -> impl Strategy<Value = (GeneralizedLindbladModel, TrajectoryState)> {
    model().prop_flat_map(|model| {
        let (m, d) = (model.num_components(), model.hilbert_dim());
        (Just(model), state(m, d))
    })
}
