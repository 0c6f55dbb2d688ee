//! Finitely supported signed measures with the total variation norm.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{same_space, StateSpace};

/// A signed measure supported on enumerated states.
#[derive(Debug, Clone)]
pub struct SignedMeasure {
    space: Arc<StateSpace>,
    /// Sparse weights; exact zeros are pruned on construction.
    weights: BTreeMap<usize, f64>,
}

impl SignedMeasure {
    pub fn new(space: Arc<StateSpace>, weights: BTreeMap<usize, f64>) -> Result<Self> {
        for (&idx, w) in &weights {
            if idx >= space.len() {
                return Err(Error::InvalidMeasure(format!("state index {idx} out of range")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidMeasure("non-finite weight".into()));
            }
        }
        let weights = weights.into_iter().filter(|(_, w)| *w != 0.0).collect();
        Ok(SignedMeasure { space, weights })
    }

    pub fn zero(space: Arc<StateSpace>) -> Self {
        SignedMeasure { space, weights: BTreeMap::new() }
    }

    /// Unit point mass at a state.
    pub fn dirac(space: Arc<StateSpace>, idx: usize) -> Result<Self> {
        let mut weights = BTreeMap::new();
        weights.insert(idx, 1.0);
        SignedMeasure::new(space, weights)
    }

    /// Uniform probability measure on a set of states.
    pub fn uniform(space: Arc<StateSpace>, states: &[usize]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidMeasure("uniform measure over empty set".into()));
        }
        let w = 1.0 / states.len() as f64;
        let mut weights = BTreeMap::new();
        for &s in states {
            *weights.entry(s).or_insert(0.0) += w;
        }
        SignedMeasure::new(space, weights)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights.get(&idx).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.keys().copied()
    }

    /// Total variation norm (sum of absolute weights).
    pub fn tv_norm(&self) -> f64 {
        self.weights.values().map(|w| w.abs()).sum()
    }

    /// Total signed mass.
    pub fn mass(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Jordan decomposition; `positive - negative` reconstructs the weights
    /// exactly because each weight lands in exactly one part.
    pub fn jordan(&self) -> (SignedMeasure, SignedMeasure) {
        let pos: BTreeMap<usize, f64> =
            self.weights.iter().filter(|(_, &w)| w > 0.0).map(|(&i, &w)| (i, w)).collect();
        let neg: BTreeMap<usize, f64> =
            self.weights.iter().filter(|(_, &w)| w < 0.0).map(|(&i, &w)| (i, -w)).collect();
        (
            SignedMeasure { space: self.space.clone(), weights: pos },
            SignedMeasure { space: self.space.clone(), weights: neg },
        )
    }

    /// `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &SignedMeasure, b: f64) -> Result<SignedMeasure> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        let mut weights = BTreeMap::new();
        for (&i, &w) in &self.weights {
            weights.insert(i, a * w);
        }
        for (&i, &w) in &other.weights {
            *weights.entry(i).or_insert(0.0) += b * w;
        }
        SignedMeasure::new(self.space.clone(), weights)
    }

    pub fn scale(&self, a: f64) -> SignedMeasure {
        let weights = self.weights.iter().map(|(&i, &w)| (i, a * w)).collect();
        SignedMeasure { space: self.space.clone(), weights }
    }

    /// Mass (in absolute value) outside exhaustion set `level`.
    pub fn mass_outside(&self, level: usize) -> f64 {
        self.weights
            .iter()
            .filter(|(&i, _)| !self.space.in_exhaustion(i, level))
            .map(|(_, w)| w.abs())
            .sum()
    }

    /// True if all weights are nonnegative and the mass is 1 within `tol`.
    pub fn is_probability(&self, tol: f64) -> bool {
        self.weights.values().all(|&w| w >= -tol) && (self.mass() - 1.0).abs() <= tol
    }
}

/// Serialized form of a signed measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureData {
    pub weights: BTreeMap<String, f64>,
}

impl MeasureData {
    pub fn from_measure(mu: &SignedMeasure) -> Self {
        MeasureData {
            weights: mu
                .weights
                .iter()
                .map(|(&i, &w)| (mu.space.name(i).to_string(), w))
                .collect(),
        }
    }

    pub fn into_measure(self, space: Arc<StateSpace>) -> Result<SignedMeasure> {
        let mut weights = BTreeMap::new();
        for (name, w) in &self.weights {
            weights.insert(space.index_of(name)?, *w);
        }
        SignedMeasure::new(space, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Metric;

    fn space3() -> Arc<StateSpace> {
        StateSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            Metric::Discrete,
            vec![vec![0, 1, 2]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn dirac_difference_has_tv_two() {
        let sp = space3();
        let mu = SignedMeasure::dirac(sp.clone(), 0).unwrap();
        let nu = SignedMeasure::dirac(sp, 1).unwrap();
        assert_eq!(mu.combine(1.0, &nu, -1.0).unwrap().tv_norm(), 2.0);
    }

    #[test]
    fn tv_is_absolute_sum() {
        let sp = space3();
        let mut w = BTreeMap::new();
        w.insert(0, 0.3);
        w.insert(1, -0.7);
        let mu = SignedMeasure::new(sp, w).unwrap();
        assert!((mu.tv_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_reconstructs_exactly() {
        let sp = space3();
        let mut w = BTreeMap::new();
        w.insert(0, 0.25);
        w.insert(1, -0.5);
        w.insert(2, 1.5);
        let mu = SignedMeasure::new(sp, w).unwrap();
        let (pos, neg) = mu.jordan();
        let back = pos.combine(1.0, &neg, -1.0).unwrap();
        assert_eq!(back.weights(), mu.weights());
        assert!((pos.tv_norm() + neg.tv_norm() - mu.tv_norm()).abs() == 0.0);
    }

    #[test]
    fn rejects_out_of_range_support() {
        let sp = space3();
        let mut w = BTreeMap::new();
        w.insert(7, 1.0);
        assert!(SignedMeasure::new(sp, w).is_err());
    }

    #[test]
    fn measure_data_round_trip() {
        let sp = space3();
        let mu = SignedMeasure::uniform(sp.clone(), &[0, 2]).unwrap();
        let back = MeasureData::from_measure(&mu).into_measure(sp).unwrap();
        assert_eq!(back.weights(), mu.weights());
    }
}
