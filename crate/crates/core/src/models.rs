//! Ready-built state spaces and kernels with known ergodic behavior.
//!
//! Three constructions exercise the boundary of the theory:
//!
//! * [`build_summing_l1`] — the summing operator on a sequence-space pair.
//!   The adjoint averages of atoms converge, while the forward averages of
//!   coordinate functions drift pointwise to the constant one, whose tail
//!   never vanishes: the projection fails to respect the duality.
//! * [`build_z_infinity`] — shifts on the integers with a one-point
//!   compactification on the right. The rightward scheme has the e-property
//!   and is weakly ergodic; the leftward scheme pushes the indicator of the
//!   nonnegatives to a discontinuous pointwise limit and has a modulus floor
//!   of 1/2 at the compactification point.
//! * [`build_cycles_line`] — disjoint cycles accumulating on a half-line.
//!   The fixed spaces separate each other, yet the atom at the line origin
//!   admits no decomposition into fixed measures plus closed range: mass
//!   conservation pins its total pairing at one while every candidate's is
//!   zero.
//!
//! The standard models ([`build_standard`]) are positive controls: a
//! two-state swap, an irreducible three-state chain, the plain shift on a
//! line truncation, and a two-state continuous-time flip.
//!
//! The indicator used by the two-sided shift model supports `{k >= 0}` plus
//! the compactification point; whether the nonnegatives start at zero or one
//! does not change any qualitative verdict.

use std::sync::Arc;

use serde::Deserialize;

use crate::ctmc::RateMatrix;
use crate::error::{Error, Result};
use crate::function::{BoundedFunction, TailRule};
use crate::kernel::{Kernel, KernelOperator};
use crate::measure::SignedMeasure;
use crate::space::{Metric, StateSpace};

/// A packaged model: space, generator(s) and declared properties.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub space: Arc<StateSpace>,
    /// Forward generator of the semigroup `{S^k}`.
    pub operator: KernelOperator,
    /// Second generator for two-sided dynamics (the leftward shift).
    pub backward: Option<KernelOperator>,
    /// Rate matrix for continuous-time models.
    pub rate: Option<RateMatrix>,
    /// Markovianity declared on retained mass (leaking truncations are
    /// declared non-Markovian even when the untruncated dynamics is).
    pub markovian: bool,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Summing operator on the (l^1, c_0)-style pair
// ---------------------------------------------------------------------------

/// Summing model on states `1..=n`: the map sends 1 -> 1, 2 -> 1 and
/// k -> k-1 for k >= 3. Its adjoint action on atoms realizes the sequence
/// operator `(x_1, x_2, x_3, ...) -> (x_1 + x_2, x_3, ...)`; its forward
/// action on coordinate functions realizes `(y_1, y_2, ...) ->
/// (y_1, y_1, y_2, ...)`.
pub fn build_summing_l1(n: usize) -> Result<Model> {
    if n < 3 {
        return Err(Error::Parameter("summing model needs at least 3 states".into()));
    }
    let names: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
    let coords: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let exhaustion: Vec<Vec<usize>> = (1..=n).map(|m| (0..m).collect()).collect();
    let space = StateSpace::new(names, Metric::Line { coords }, exhaustion, vec![])?;
    let kernel = Kernel::deterministic(space.clone(), |x| Some(if x <= 1 { 0 } else { x - 1 }))?;
    Ok(Model {
        name: "summing-l1".into(),
        space,
        operator: KernelOperator::new(kernel),
        backward: None,
        rate: None,
        markovian: true,
        notes: vec!["adjoint action is the summing operator on summable sequences".into()],
    })
}

// ---------------------------------------------------------------------------
// Two-sided shift with a right compactification point
// ---------------------------------------------------------------------------

/// Embedding of `{-n..n} + {inf}` into the line: negatives keep their value,
/// nonnegatives map to `k/(k+1)` and the compactification point to 1.
fn z_infinity_coord(k: i64) -> f64 {
    if k <= 0 {
        k as f64
    } else {
        k as f64 / (k as f64 + 1.0)
    }
}

/// Shift model on `{-n..n} + {inf}`. The forward generator shifts right and
/// wraps the truncation edge into the compactification point; the backward
/// generator shifts left and leaks at the left edge (there is nothing to
/// accumulate on in that direction).
pub fn build_z_infinity(n: i64) -> Result<Model> {
    if n < 2 {
        return Err(Error::Parameter("shift model needs n >= 2".into()));
    }
    let mut names: Vec<String> = (-n..=n).map(|k| k.to_string()).collect();
    names.push("inf".into());
    let mut coords: Vec<f64> = (-n..=n).map(z_infinity_coord).collect();
    coords.push(1.0);
    let int_count = (2 * n + 1) as usize;
    let inf = int_count; // index of the compactification point
    let center = n as usize; // index of state 0
    // compact sets here are tails: {k >= -m} plus the compactification
    // point (only the left end of the space is non-compact)
    let exhaustion: Vec<Vec<usize>> = (1..=n as usize)
        .map(|m| {
            let mut set: Vec<usize> = ((center - m)..int_count).collect();
            set.push(inf);
            set
        })
        .collect();
    let space = StateSpace::new(names, Metric::Line { coords }, exhaustion, vec![inf])?;

    let forward = Kernel::deterministic(space.clone(), move |x| {
        if x == inf {
            Some(inf)
        } else if x + 1 < int_count {
            Some(x + 1)
        } else {
            Some(inf) // truncation edge wraps into the compactification point
        }
    })?;
    let backward = Kernel::deterministic(space.clone(), move |x| {
        if x == inf {
            Some(inf)
        } else if x > 0 {
            Some(x - 1)
        } else {
            None // left edge leaks: mass genuinely escapes leftwards
        }
    })?;
    Ok(Model {
        name: "z-infinity".into(),
        space,
        operator: KernelOperator::new(forward),
        backward: Some(KernelOperator::new(backward)),
        rate: None,
        markovian: true,
        notes: vec![
            "backward generator leaks at the left truncation edge and is declared \
             non-Markovian on the truncation"
                .into(),
        ],
    })
}

impl Model {
    /// Index of a named state.
    pub fn state(&self, name: &str) -> Result<usize> {
        self.space.index_of(name)
    }

    /// The indicator of `{k >= 0} + {inf}` on the two-sided shift model.
    pub fn nonnegative_indicator(&self) -> Result<BoundedFunction> {
        let inf = self
            .space
            .infinity()
            .ok_or_else(|| Error::Parameter("model has no compactification point".into()))?;
        let values: Vec<f64> = (0..self.space.len())
            .map(|i| {
                if i == inf {
                    return 1.0;
                }
                let k: i64 = self.space.name(i).parse().unwrap_or(-1);
                if k >= 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        BoundedFunction::new(self.space.clone(), values, Some(TailRule::Zero), None)
    }
}

// ---------------------------------------------------------------------------
// Cycles accumulating on a half-line
// ---------------------------------------------------------------------------

/// Names and builders for the cycles-plus-line model. Cycle `n` has states
/// `c{n}:{0..n}` at height `1/n`; the line window has states `l:{0..w}` at
/// height zero. The map shifts right along each cycle (wrapping at its end)
/// and right along the line (leaking past the window edge).
pub fn build_cycles_line(cycles: usize, window: usize) -> Result<Model> {
    if cycles < 2 || window < cycles {
        return Err(Error::Parameter(
            "cycles-line model needs at least 2 cycles and a window at least as long".into(),
        ));
    }
    let mut names = Vec::new();
    let mut coords = Vec::new();
    for n in 1..=cycles {
        for k in 0..=n {
            names.push(format!("c{n}:{k}"));
            coords.push((k as f64, 1.0 / n as f64));
        }
    }
    let line_start = names.len();
    for k in 0..=window {
        names.push(format!("l:{k}"));
        coords.push((k as f64, 0.0));
    }
    let levels = cycles.max(window + 1);
    let exhaustion: Vec<Vec<usize>> = (1..=levels)
        .map(|j| {
            let mut set = Vec::new();
            let mut idx = 0usize;
            for n in 1..=cycles {
                for _k in 0..=n {
                    if n <= j {
                        set.push(idx);
                    }
                    idx += 1;
                }
            }
            for k in 0..=window {
                if k < j {
                    set.push(line_start + k);
                }
            }
            set
        })
        .collect();
    let space = StateSpace::new(names, Metric::Plane { coords }, exhaustion, vec![])?;

    // index layout: cycle n starts at sum_{m<n} (m+1) = n(n+1)/2 - 1
    let cycle_start = |n: usize| n * (n + 1) / 2 - 1;
    let kernel = Kernel::deterministic(space.clone(), move |x| {
        if x < line_start {
            // locate the cycle containing x
            let mut n = 1usize;
            while cycle_start(n + 1) <= x {
                n += 1;
            }
            let k = x - cycle_start(n);
            if k < n {
                Some(x + 1)
            } else {
                Some(cycle_start(n)) // wrap at the cycle end
            }
        } else {
            let k = x - line_start;
            if k < window {
                Some(x + 1)
            } else {
                None // past the window edge
            }
        }
    })?;
    Ok(Model {
        name: "cycles-line".into(),
        space,
        operator: KernelOperator::new(kernel),
        backward: None,
        rate: None,
        markovian: false,
        notes: vec![
            "line-window edge leaks; probe sets exclude it by the non-leaking rule".into(),
        ],
    })
}

/// Indices of the states of cycle `n` (1-based) in the cycles-line model.
pub fn cycle_states(cycles: usize, n: usize) -> Vec<usize> {
    assert!(n >= 1 && n <= cycles);
    let start = n * (n + 1) / 2 - 1;
    (start..=start + n).collect()
}

/// Indices of the line-window states in the cycles-line model.
pub fn line_states(cycles: usize, window: usize) -> Vec<usize> {
    let start = (cycles + 1) * (cycles + 2) / 2 - 1;
    (start..=start + window).collect()
}

/// The normalized counting measure on cycle `n`.
pub fn cycle_measure(model: &Model, cycles: usize, n: usize) -> Result<SignedMeasure> {
    SignedMeasure::uniform(model.space.clone(), &cycle_states(cycles, n))
}

/// The indicator of cycle `n`.
pub fn cycle_indicator(model: &Model, cycles: usize, n: usize) -> Result<BoundedFunction> {
    BoundedFunction::indicator(model.space.clone(), &cycle_states(cycles, n))
}

// ---------------------------------------------------------------------------
// Standard positive controls
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum StandardModel {
    /// Two-state swap: period two, averages converge after one period.
    Swap2,
    /// Irreducible aperiodic three-state chain (fixed transition matrix).
    Irreducible3,
    /// Plain rightward shift on `{-n..n}`, leaking at the right edge.
    ShiftZ { n: i64 },
    /// Symmetric two-state continuous-time flip.
    Ctmc2,
}

/// The fixed transition matrix of the three-state control chain.
pub const IRREDUCIBLE3: [[f64; 3]; 3] = [
    [0.5, 0.25, 0.25],
    [0.2, 0.6, 0.2],
    [0.3, 0.3, 0.4],
];

pub fn build_standard(which: StandardModel) -> Result<Model> {
    match which {
        StandardModel::Swap2 => {
            let space = StateSpace::new(
                vec!["a".into(), "b".into()],
                Metric::Discrete,
                vec![vec![0, 1]],
                vec![],
            )?;
            let kernel = Kernel::deterministic(space.clone(), |x| Some(1 - x))?;
            Ok(Model {
                name: "swap2".into(),
                space,
                operator: KernelOperator::new(kernel),
                backward: None,
                rate: None,
                markovian: true,
                notes: vec![],
            })
        }
        StandardModel::Irreducible3 => {
            let space = StateSpace::new(
                vec!["a".into(), "b".into(), "c".into()],
                Metric::Discrete,
                vec![vec![0, 1, 2]],
                vec![],
            )?;
            let rows: Vec<Vec<f64>> = IRREDUCIBLE3.iter().map(|r| r.to_vec()).collect();
            let kernel = Kernel::from_matrix(space.clone(), &rows)?;
            Ok(Model {
                name: "irreducible3".into(),
                space,
                operator: KernelOperator::new(kernel),
                backward: None,
                rate: None,
                markovian: true,
                notes: vec![],
            })
        }
        StandardModel::ShiftZ { n } => {
            if n < 2 {
                return Err(Error::Parameter("shift model needs n >= 2".into()));
            }
            let names: Vec<String> = (-n..=n).map(|k| k.to_string()).collect();
            let coords: Vec<f64> = (-n..=n).map(|k| k as f64).collect();
            let center = n as usize;
            let count = names.len();
            let exhaustion: Vec<Vec<usize>> = (1..=n as usize)
                .map(|m| ((center - m)..=(center + m)).collect())
                .collect();
            let space = StateSpace::new(names, Metric::Line { coords }, exhaustion, vec![])?;
            let kernel = Kernel::deterministic(space.clone(), move |x| {
                if x + 1 < count {
                    Some(x + 1)
                } else {
                    None
                }
            })?;
            Ok(Model {
                name: "shift-z".into(),
                space,
                operator: KernelOperator::new(kernel),
                backward: None,
                rate: None,
                markovian: false,
                notes: vec!["right edge leaks; no compactification point".into()],
            })
        }
        StandardModel::Ctmc2 => {
            let space = StateSpace::new(
                vec!["u".into(), "v".into()],
                Metric::Discrete,
                vec![vec![0, 1]],
                vec![],
            )?;
            let rate = RateMatrix::new(space.clone(), &[vec![-1.0, 1.0], vec![1.0, -1.0]])?;
            let kernel = Kernel::identity(space.clone());
            Ok(Model {
                name: "ctmc2".into(),
                space,
                operator: KernelOperator::new(kernel),
                backward: None,
                rate: Some(rate),
                markovian: true,
                notes: vec!["discrete generator is the identity; use the rate matrix".into()],
            })
        }
    }
}

/// Parses a model request by name, with default parameters.
pub fn build_by_name(name: &str, truncation: Option<usize>) -> Result<Model> {
    match name {
        "summing-l1" | "ex61" => build_summing_l1(truncation.unwrap_or(64)),
        "z-infinity" | "ex62" => build_z_infinity(truncation.unwrap_or(64) as i64),
        "cycles-line" | "ex63" => {
            let m = truncation.unwrap_or(8);
            build_cycles_line(m, 2 * m)
        }
        "swap2" => build_standard(StandardModel::Swap2),
        "irreducible3" => build_standard(StandardModel::Irreducible3),
        "shift-z" => build_standard(StandardModel::ShiftZ { n: truncation.unwrap_or(16) as i64 }),
        "ctmc2" => build_standard(StandardModel::Ctmc2),
        other => Err(Error::Parameter(format!("unknown model `{other}`"))),
    }
}

/// Names accepted by [`build_by_name`], with aliases.
pub fn model_names() -> Vec<(&'static str, &'static str)> {
    vec![
        ("summing-l1", "summing operator on a sequence pair (alias: ex61)"),
        ("z-infinity", "two-sided shift with right compactification (alias: ex62)"),
        ("cycles-line", "cycles accumulating on a half-line (alias: ex63)"),
        ("swap2", "two-state swap"),
        ("irreducible3", "irreducible three-state chain"),
        ("shift-z", "plain shift on a line truncation"),
        ("ctmc2", "symmetric two-state continuous-time flip"),
    ]
}

// ---------------------------------------------------------------------------
// Expected-verdict fixtures
// ---------------------------------------------------------------------------

/// Shipped expected-verdict fixture for the summing model.
#[derive(Debug, Clone, Deserialize)]
pub struct SummingFixture {
    pub truncation: usize,
    /// Adjoint average of the atom at state "2" at this index has weights
    /// `(1 - 1/n)` at "1" and `1/n` at "2".
    pub adjoint_atom_index: u64,
    /// Indices at which the forward coordinate rule `(n - m + 1)/n` is
    /// checked exactly.
    pub forward_rule_indices: Vec<u64>,
    /// Tail escape: coordinate `m` of the averaged first coordinate function
    /// must reach `floor` for every `n >= factor * m`.
    pub tail_escape_factor: u64,
    pub tail_escape_floor: f64,
    pub fixed_function_dim: usize,
    pub fixed_measure_dim: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ZInfinityFixture {
    pub truncation: i64,
    pub forward_pointwise_tol: f64,
    /// Largest dyadic exponent used for the forward pointwise run.
    pub forward_max_pow: u32,
    /// The e-property modulus at the compactification point must fall below
    /// this at the smallest probe radius.
    pub forward_modulus_target: f64,
    pub backward_modulus_floor: f64,
    pub fixed_function_dim: usize,
    pub fixed_measure_dim: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CyclesLineFixture {
    pub cycles: usize,
    pub window: usize,
    pub fixed_residual_tol: f64,
    pub gram_identity_tol: f64,
    pub obstruction_candidates: usize,
    pub obstruction_match_tol: f64,
    pub obstruction_total_bound: f64,
}

pub fn summing_fixture() -> SummingFixture {
    serde_json::from_str(include_str!("../fixtures/summing_l1.json"))
        .expect("shipped summing fixture parses")
}

pub fn z_infinity_fixture() -> ZInfinityFixture {
    serde_json::from_str(include_str!("../fixtures/z_infinity.json"))
        .expect("shipped shift fixture parses")
}

pub fn cycles_line_fixture() -> CyclesLineFixture {
    serde_json::from_str(include_str!("../fixtures/cycles_line.json"))
        .expect("shipped cycles fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::cesaro_avg_adjoint;

    #[test]
    fn summing_kernel_action() {
        let model = build_summing_l1(8).unwrap();
        let s = &model.operator;
        // adjoint of the atom at "2" lands on "1" (the summing action)
        let d2 = SignedMeasure::dirac(model.space.clone(), model.state("2").unwrap()).unwrap();
        let pushed = s.adjoint_apply(&d2).unwrap();
        assert_eq!(pushed.weight(model.state("1").unwrap()), 1.0);
        // forward action of the first coordinate function is (1, 1, 0, ...)
        let e1 = BoundedFunction::indicator(model.space.clone(), &[model.state("1").unwrap()])
            .unwrap();
        let se1 = s.forward_apply(&e1).unwrap();
        assert_eq!(se1.value(model.state("1").unwrap()), 1.0);
        assert_eq!(se1.value(model.state("2").unwrap()), 1.0);
        assert_eq!(se1.value(model.state("3").unwrap()), 0.0);
        assert!(s.is_markovian());
    }

    #[test]
    fn summing_adjoint_average_of_e2() {
        // A'_4 delta_2 = (3/4) delta_1 + (1/4) delta_2
        let model = build_summing_l1(8).unwrap();
        let d2 = SignedMeasure::dirac(model.space.clone(), model.state("2").unwrap()).unwrap();
        let avg = cesaro_avg_adjoint(&model.operator, 4, &d2).unwrap();
        assert_eq!(avg.weight(model.state("1").unwrap()), 0.75);
        assert_eq!(avg.weight(model.state("2").unwrap()), 0.25);
    }

    #[test]
    fn z_infinity_wrap_and_backward_leak() {
        let model = build_z_infinity(4).unwrap();
        let s = &model.operator;
        let edge = model.state("4").unwrap();
        let inf = model.space.infinity().unwrap();
        let pushed = s.adjoint_apply(&SignedMeasure::dirac(model.space.clone(), edge).unwrap())
            .unwrap();
        assert_eq!(pushed.weight(inf), 1.0);
        assert!(s.is_markovian());

        let back = model.backward.as_ref().unwrap();
        assert_eq!(back.kernel().leaking_rows(0.0), vec![model.state("-4").unwrap()]);
        assert!(!back.is_markovian());
        assert!(back.is_interior_markovian(1e-12));
    }

    #[test]
    fn z_infinity_metric_shape() {
        let model = build_z_infinity(4).unwrap();
        let sp = &model.space;
        let inf = sp.infinity().unwrap();
        let k3 = model.state("3").unwrap();
        // d(k, inf) = 1/(k+1) for k >= 0
        assert!((sp.distance(k3, inf) - 0.25).abs() < 1e-15);
        let m1 = model.state("-1").unwrap();
        let z = model.state("0").unwrap();
        assert_eq!(sp.distance(m1, z), 1.0);
        // indicator of the nonnegatives has Lipschitz constant 1 here
        let f = model.nonnegative_indicator().unwrap();
        let lip = crate::pairing::lipschitz_constant(&f, sp).unwrap();
        assert!((lip - 1.0).abs() < 1e-12, "lip {lip}");
    }

    #[test]
    fn backward_average_of_indicator_closed_form() {
        // (backward A_n f)(k) = min(n, k+1)/n for k >= 0, 1 at inf, 0 for k < 0
        let model = build_z_infinity(8).unwrap();
        let back = model.backward.as_ref().unwrap();
        let f = model.nonnegative_indicator().unwrap();
        for n in [1u64, 2, 3, 5, 8, 13, 21] {
            let avg = crate::scheme::cesaro_avg(back, n, &f).unwrap();
            for i in 0..model.space.len() {
                let name = model.space.name(i);
                let expect = if name == "inf" {
                    1.0
                } else {
                    let k: i64 = name.parse().unwrap();
                    if k >= 0 {
                        (n.min((k + 1) as u64)) as f64 / n as f64
                    } else {
                        0.0 // the leftward orbit of a negative state never re-enters
                    }
                };
                assert_eq!(avg.value(i), expect, "n={n} state {name}");
            }
        }
    }

    #[test]
    fn cycles_line_structure() {
        let (m, w) = (4usize, 8usize);
        let model = build_cycles_line(m, w).unwrap();
        // cycle closure: the last state of cycle 2 maps to its first
        let c2 = cycle_states(m, 2);
        let last = *c2.last().unwrap();
        let first = c2[0];
        let pushed = model
            .operator
            .adjoint_apply(&SignedMeasure::dirac(model.space.clone(), last).unwrap())
            .unwrap();
        assert_eq!(pushed.weight(first), 1.0);
        // counting measures are fixed: S' zeta_n = zeta_n
        for n in 1..=m {
            let zeta = cycle_measure(&model, m, n).unwrap();
            let pushed = model.operator.adjoint_apply(&zeta).unwrap();
            let diff = pushed.combine(1.0, &zeta, -1.0).unwrap();
            assert_eq!(diff.tv_norm(), 0.0);
        }
        // <1_{K_m}, zeta_n> = delta_{mn}
        for a in 1..=m {
            let ind = cycle_indicator(&model, m, a).unwrap();
            for b in 1..=m {
                let zeta = cycle_measure(&model, m, b).unwrap();
                let g = crate::pairing::pairing(&ind, &zeta).unwrap();
                assert_eq!(g, if a == b { 1.0 } else { 0.0 });
            }
        }
        // the window edge leaks
        let edge = *line_states(m, w).last().unwrap();
        assert_eq!(model.operator.kernel().leaking_rows(0.0), vec![edge]);
    }

    #[test]
    fn standard_models_build() {
        for name in ["swap2", "irreducible3", "shift-z", "ctmc2"] {
            let model = build_by_name(name, None).unwrap();
            assert_eq!(model.markovian, model.operator.is_markovian() || model.rate.is_some());
        }
        assert!(build_by_name("nope", None).is_err());
    }

    #[test]
    fn fixtures_parse() {
        assert_eq!(summing_fixture().truncation, 64);
        assert_eq!(z_infinity_fixture().truncation, 64);
        assert_eq!(cycles_line_fixture().cycles, 8);
    }
}
