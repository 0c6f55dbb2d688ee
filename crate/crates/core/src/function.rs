//! Bounded functions on a truncated state space.
//!
//! A [`BoundedFunction`] stores values on the enumerated truncation together
//! with a declared *tail rule* describing its extension beyond the
//! truncation. Kernel rows that assign mass outside the truncation resolve
//! that mass against the tail rule; a function without one raises an error
//! at that point rather than silently inventing values.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{same_space, StateSpace};

/// Extension rule beyond the enumerated truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// Zero beyond the truncation.
    Zero,
    /// A fixed constant beyond the truncation.
    Constant(f64),
    /// The value at the space's first compactification point.
    AtInfinity,
}

/// A bounded real function on the truncation with declared tail behavior.
#[derive(Debug, Clone)]
pub struct BoundedFunction {
    space: Arc<StateSpace>,
    values: Vec<f64>,
    tail: Option<TailRule>,
    lip_hint: Option<f64>,
}

impl BoundedFunction {
    pub fn new(
        space: Arc<StateSpace>,
        values: Vec<f64>,
        tail: Option<TailRule>,
        lip_hint: Option<f64>,
    ) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidFunction(format!(
                "value vector has length {}, space has {} states",
                values.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("non-finite value".into()));
        }
        if let Some(l) = lip_hint {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidFunction("Lipschitz hint must be finite and >= 0".into()));
            }
            for i in 0..space.len() {
                for j in (i + 1)..space.len() {
                    let gap = (values[i] - values[j]).abs();
                    let d = space.distance(i, j);
                    if gap > l * d * (1.0 + 1e-12) + 1e-14 {
                        return Err(Error::InvalidFunction(format!(
                            "Lipschitz hint {l} violated on pair ({}, {}): |Δf| = {gap}, d = {d}",
                            space.name(i),
                            space.name(j)
                        )));
                    }
                }
            }
        }
        Ok(BoundedFunction { space, values, tail, lip_hint })
    }

    /// The constant-one function (tail rule `Constant(1)`).
    pub fn one(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        BoundedFunction {
            space,
            values: vec![1.0; n],
            tail: Some(TailRule::Constant(1.0)),
            lip_hint: Some(0.0),
        }
    }

    /// All-zero function with zero tail.
    pub fn zero(space: Arc<StateSpace>) -> Self {
        let n = space.len();
        BoundedFunction { space, values: vec![0.0; n], tail: Some(TailRule::Zero), lip_hint: Some(0.0) }
    }

    /// Indicator of a set of state indices, extended by zero.
    pub fn indicator(space: Arc<StateSpace>, states: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; space.len()];
        for &s in states {
            if s >= space.len() {
                return Err(Error::InvalidFunction(format!("state index {s} out of range")));
            }
            values[s] = 1.0;
        }
        BoundedFunction::new(space, values, Some(TailRule::Zero), None)
    }

    /// Lipschitz bump `max(0, 1 - d(center, .)/width)`, extended by zero.
    pub fn bump(space: Arc<StateSpace>, center: usize, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidFunction("bump width must be positive".into()));
        }
        let values = (0..space.len())
            .map(|i| (1.0 - space.distance(center, i) / width).max(0.0))
            .collect();
        BoundedFunction::new(space, values, Some(TailRule::Zero), Some(1.0 / width))
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn tail(&self) -> Option<TailRule> {
        self.tail
    }

    pub fn lip_hint(&self) -> Option<f64> {
        self.lip_hint
    }

    /// Resolves the function's value beyond the truncation.
    ///
    /// `context` names the row or state on whose behalf resolution was
    /// requested; it appears in the error message.
    pub fn tail_value(&self, context: &str) -> Result<f64> {
        match self.tail {
            Some(TailRule::Zero) => Ok(0.0),
            Some(TailRule::Constant(c)) => Ok(c),
            Some(TailRule::AtInfinity) => match self.space.infinity() {
                Some(inf) => Ok(self.values[inf]),
                None => Err(Error::UnresolvableState {
                    state: context.to_string(),
                    reason: "tail rule refers to a compactification point but the space has none"
                        .into(),
                }),
            },
            None => Err(Error::UnresolvableState {
                state: context.to_string(),
                reason: "outside the truncation and no tail rule declared".into(),
            }),
        }
    }

    /// Supremum norm over the truncation and the declared tail.
    pub fn sup_norm(&self) -> f64 {
        let mut sup = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(TailRule::Constant(c)) = self.tail {
            sup = sup.max(c.abs());
        }
        sup
    }

    /// Pointwise linear combination `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &BoundedFunction, b: f64) -> Result<BoundedFunction> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let tail = match (self.tail, other.tail) {
            (Some(TailRule::Zero), Some(TailRule::Zero)) => Some(TailRule::Zero),
            (Some(TailRule::Constant(c)), Some(TailRule::Constant(d))) => {
                Some(TailRule::Constant(a * c + b * d))
            }
            (Some(TailRule::Constant(c)), Some(TailRule::Zero)) => Some(TailRule::Constant(a * c)),
            (Some(TailRule::Zero), Some(TailRule::Constant(d))) => Some(TailRule::Constant(b * d)),
            (Some(TailRule::AtInfinity), Some(TailRule::AtInfinity)) => Some(TailRule::AtInfinity),
            (Some(TailRule::AtInfinity), Some(TailRule::Zero))
            | (Some(TailRule::Zero), Some(TailRule::AtInfinity)) => Some(TailRule::AtInfinity),
            _ => None,
        };
        BoundedFunction::new(self.space.clone(), values, tail, None)
    }

    /// Replaces the tail rule (values untouched).
    pub fn with_tail(mut self, tail: Option<TailRule>) -> Self {
        self.tail = tail;
        self
    }

    /// Replaces the values, keeping space and tail; used by operators.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> BoundedFunction {
        BoundedFunction {
            space: self.space.clone(),
            values,
            tail: self.tail,
            lip_hint: None,
        }
    }
}

/// A nonnegative weight vanishing at infinity, with a decay certificate.
///
/// The certificate lists, for each requested level `eps`, the first
/// exhaustion index outside of which every stored value is below `eps`.
#[derive(Debug, Clone)]
pub struct VanishingWeight {
    space: Arc<StateSpace>,
    values: Vec<f64>,
    certificate: Vec<(f64, usize)>,
}

impl VanishingWeight {
    /// Certifies `values` against the space's exhaustion for each `eps` in
    /// `eps_grid`. Fails if some level admits no exhaustion index.
    pub fn certify(space: Arc<StateSpace>, values: Vec<f64>, eps_grid: &[f64]) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidFunction("weight length mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidFunction("weights must be finite and nonnegative".into()));
        }
        let mut certificate = Vec::with_capacity(eps_grid.len());
        for &eps in eps_grid {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::Parameter("certificate level must be positive".into()));
            }
            let mut found = None;
            for level in 0..space.exhaustion_levels() {
                let outside_max = (0..space.len())
                    .filter(|&i| !space.in_exhaustion(i, level))
                    .map(|i| values[i])
                    .fold(0.0f64, f64::max);
                if outside_max < eps {
                    found = Some(level);
                    break;
                }
            }
            match found {
                Some(level) => certificate.push((eps, level)),
                None => {
                    return Err(Error::InvalidFunction(format!(
                        "weight does not drop below {eps} within the exhaustion"
                    )))
                }
            }
        }
        Ok(VanishingWeight { space, values, certificate })
    }

    /// Indicator weight of exhaustion set `level`; certified at every level.
    pub fn exhaustion_indicator(space: Arc<StateSpace>, level: usize) -> Result<Self> {
        if level >= space.exhaustion_levels() {
            return Err(Error::Parameter(format!("exhaustion level {level} out of range")));
        }
        let values: Vec<f64> = (0..space.len())
            .map(|i| if space.in_exhaustion(i, level) { 1.0 } else { 0.0 })
            .collect();
        VanishingWeight::certify(space, values, &[1e-12])
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn certificate(&self) -> &[(f64, usize)] {
        &self.certificate
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// Serialized form of a bounded function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionData {
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub tail: Option<TailRule>,
    #[serde(default)]
    pub lip_hint: Option<f64>,
}

impl FunctionData {
    pub fn from_function(f: &BoundedFunction) -> Self {
        FunctionData {
            values: f
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| (f.space.name(i).to_string(), v))
                .collect(),
            tail: f.tail,
            lip_hint: f.lip_hint,
        }
    }

    /// Rebuilds on `space`; absent states default to 0.
    pub fn into_function(self, space: Arc<StateSpace>) -> Result<BoundedFunction> {
        let mut values = vec![0.0; space.len()];
        for (name, v) in &self.values {
            values[space.index_of(name)?] = *v;
        }
        BoundedFunction::new(space, values, self.tail, self.lip_hint)
    }
}
