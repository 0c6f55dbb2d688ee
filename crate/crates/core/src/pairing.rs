//! The duality pairing `<f, mu> = sum_x f(x) mu({x})` and the seminorms and
//! profiles built on top of it: the norming identity, strict-topology
//! seminorms, tightness profiles of measure families, and Lipschitz
//! constants.

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::function::VanishingWeight;
use crate::measure::SignedMeasure;
use crate::space::{same_space, StateSpace};

/// Bilinear pairing of a function and a finitely supported measure.
pub fn pairing(f: &BoundedFunction, mu: &SignedMeasure) -> Result<f64> {
    if !same_space(f.space(), mu.space()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(mu.weights().iter().map(|(&i, &w)| f.value(i) * w).sum())
}

/// Supremum norm of a function (truncation plus declared tail).
pub fn sup_norm(f: &BoundedFunction) -> f64 {
    f.sup_norm()
}

/// Total variation norm of a measure.
pub fn tv_norm(mu: &SignedMeasure) -> f64 {
    mu.tv_norm()
}

/// Finite realization of the norming identity.
///
/// On a finite truncation the supremum of `|<f, mu>|` over unit-variation
/// measures equals the sup norm of `f` restricted to the truncation (the
/// supremum is attained at a signed point mass), and dually the supremum
/// over unit-sup functions reproduces the variation norm (attained at the
/// sign pattern of the weights).
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormingReport {
    pub function_norm: f64,
    pub realized_by_measures: f64,
    pub measure_norm: f64,
    pub realized_by_functions: f64,
    pub residual: f64,
}

pub fn norming_report(f: &BoundedFunction, mu: &SignedMeasure) -> Result<NormingReport> {
    if !same_space(f.space(), mu.space()) {
        return Err(Error::SpaceMismatch);
    }
    let space = f.space().clone();
    // Supremum over +/- point masses.
    let mut realized_by_measures = 0.0f64;
    for i in 0..space.len() {
        let delta = SignedMeasure::dirac(space.clone(), i)?;
        realized_by_measures = realized_by_measures.max(pairing(f, &delta)?.abs());
    }
    let truncation_sup = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Sign-pattern function realizes the variation norm.
    let sign_values: Vec<f64> = (0..space.len())
        .map(|i| {
            let w = mu.weight(i);
            if w > 0.0 {
                1.0
            } else if w < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let sign_fn = BoundedFunction::new(space, sign_values, Some(crate::function::TailRule::Zero), None)?;
    let realized_by_functions = pairing(&sign_fn, mu)?.abs();
    let residual = (realized_by_measures - truncation_sup)
        .abs()
        .max((realized_by_functions - mu.tv_norm()).abs());
    Ok(NormingReport {
        function_norm: truncation_sup,
        realized_by_measures,
        measure_norm: mu.tv_norm(),
        realized_by_functions,
        residual,
    })
}

/// Strict-topology seminorm `sup_x phi(x) |f(x)|`.
pub fn strict_seminorm(f: &BoundedFunction, phi: &VanishingWeight) -> Result<f64> {
    if !same_space(f.space(), phi.space()) {
        return Err(Error::SpaceMismatch);
    }
    Ok(f.values()
        .iter()
        .zip(phi.values())
        .fold(0.0f64, |m, (v, w)| m.max(w * v.abs())))
}

/// Per-level suprema of mass outside the exhaustion, over a family.
///
/// Entry `m` is `sup over the family of |mu|(E \ K_m)`; the profile is
/// nonincreasing in `m` because the complements shrink.
pub fn tightness_profile(family: &[SignedMeasure], space: &StateSpace) -> Result<Vec<f64>> {
    if family.is_empty() {
        return Err(Error::Parameter("tightness profile of an empty family".into()));
    }
    let mut profile = Vec::with_capacity(space.exhaustion_levels());
    for level in 0..space.exhaustion_levels() {
        let sup = family.iter().map(|mu| mu.mass_outside(level)).fold(0.0f64, f64::max);
        profile.push(sup);
    }
    Ok(profile)
}

/// First exhaustion level at which the profile drops below `eps`, if any.
///
/// On multi-level exhaustions the final level covers the whole truncation,
/// so its vacuous zero is not evidence of tightness and is excluded; a
/// single-level exhaustion declares the space itself compact and does count.
pub fn tight_at(profile: &[f64], eps: f64) -> Option<usize> {
    let proper = if profile.len() > 1 { profile.len() - 1 } else { profile.len() };
    profile[..proper].iter().position(|&v| v < eps)
}

/// Largest difference quotient `|f(x)-f(y)| / d(x,y)` over enumerated pairs.
pub fn lipschitz_constant(f: &BoundedFunction, space: &StateSpace) -> Result<f64> {
    if f.values().len() != space.len() {
        return Err(Error::SpaceMismatch);
    }
    let mut best = 0.0f64;
    for i in 0..space.len() {
        for j in (i + 1)..space.len() {
            let d = space.distance(i, j);
            if d > 0.0 {
                best = best.max((f.value(i) - f.value(j)).abs() / d);
            }
        }
    }
    Ok(best)
}
